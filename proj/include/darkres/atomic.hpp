#pragma once

#include <array>
#include <complex>
#include <stdexcept>
#include <string>

#include <Eigen/Dense>

#include "darkres/constants.hpp"

// Eight-level 40Ca+ model: two S1/2 ground states, two P1/2 excited states
// and four metastable D3/2 states, driven by a UV (397 nm, S-P) and an IR
// (866 nm, D-P) laser.
//
// Level index convention (fixed, used everywhere):
//   0: S1/2 m=-1/2   1: S1/2 m=+1/2
//   2: P1/2 m=-1/2   3: P1/2 m=+1/2
//   4: D3/2 m=-3/2   5: D3/2 m=-1/2   6: D3/2 m=+1/2   7: D3/2 m=+3/2

namespace darkres {

using Complex = std::complex<double>;
using Matrix8 = Eigen::Matrix<Complex, 8, 8>;
using MatrixXc = Eigen::MatrixXcd;
using VectorXc = Eigen::VectorXcd;

inline constexpr int n_levels = 8;
inline constexpr int idx_s_lo = 0, idx_s_hi = 1;
inline constexpr int idx_p_lo = 2, idx_p_hi = 3;
inline constexpr int idx_d_lo = 4, idx_d_hi = 7;

enum class Manifold { S, P, D };

inline Manifold manifold_of(int level) {
  if (level <= idx_s_hi) return Manifold::S;
  if (level <= idx_p_hi) return Manifold::P;
  return Manifold::D;
}

// Magnetic quantum number m in units of 1/2 (so S m=-1/2 -> -1).
inline int two_m_of(int level) {
  switch (level) {
    case 0: return -1;
    case 1: return +1;
    case 2: return -1;
    case 3: return +1;
    case 4: return -3;
    case 5: return -1;
    case 6: return +1;
    case 7: return +3;
  }
  throw std::out_of_range("level index");
}

struct AtomicSystem {
  double mass_amu = 40.0;
  double gamma_total = mhz_to_rad_us(22.4); // total P1/2 decay rate, rad/us
  double branching_s = 0.94;
  double branching_d = 0.06;
  double g_s = 2.0;
  double g_p = 2.0 / 3.0;
  double g_d = 4.0 / 5.0;
  double lambda_uv_nm = 397.0;
  double lambda_ir_nm = 866.0;

  void validate() const {
    if (std::abs(branching_s + branching_d - 1.0) > 1e-12)
      throw std::invalid_argument("branching ratios must sum to 1");
    if (!(gamma_total > 0.0))
      throw std::invalid_argument("gamma_total must be positive");
    if (!std::isfinite(g_s) || !std::isfinite(g_p) || !std::isfinite(g_d))
      throw std::invalid_argument("g-factors must be finite");
  }

  double mass_kg() const { return mass_amu * atomic_mass_si; }
  double k_uv_si() const { return two_pi / (lambda_uv_nm * 1e-9); } // 1/m
  double k_ir_si() const { return two_pi / (lambda_ir_nm * 1e-9); }
};

enum class LaserLabel { UV, IR };

struct LaserField {
  double rabi = 0.0;      // rad/us
  double detuning = 0.0;  // rad/us
  double linewidth = 0.0; // rad/us, dephasing rate on the optical coherence
  double wavelength_nm = 397.0;
  Complex pol_sigma_minus{std::sqrt(0.5), 0.0};
  Complex pol_sigma_plus{std::sqrt(0.5), 0.0};
  LaserLabel label = LaserLabel::UV;

  void validate() const {
    const double norm = std::norm(pol_sigma_minus) + std::norm(pol_sigma_plus);
    if (std::abs(norm - 1.0) > 1e-12)
      throw std::invalid_argument("laser polarization not normalized");
    if (rabi < 0.0 || linewidth < 0.0)
      throw std::invalid_argument("rabi and linewidth must be non-negative");
  }
};

struct MagneticField {
  double gauss = 4.0;
  void validate() const {
    if (gauss < 0.0) throw std::invalid_argument("field magnitude must be >= 0");
  }
};

// Zeeman shift g * mu_B * B * m per level, rad/us, in the fixed index order.
inline Eigen::Matrix<double, 8, 1> zeeman_shifts(const AtomicSystem& sys,
                                                 const MagneticField& b) {
  sys.validate();
  b.validate();
  Eigen::Matrix<double, 8, 1> shifts;
  for (int i = 0; i < n_levels; ++i) {
    double g = 0.0;
    switch (manifold_of(i)) {
      case Manifold::S: g = sys.g_s; break;
      case Manifold::P: g = sys.g_p; break;
      case Manifold::D: g = sys.g_d; break;
    }
    shifts(i) = g * bohr_magneton_rad_us_per_gauss * b.gauss * 0.5 * two_m_of(i);
  }
  return shifts;
}

namespace detail {

// Clebsch-Gordan coefficients <J_e m_e | J_g m_g ; 1 q> for the two dipole
// families, with completeness sum_{m_g,q} |c|^2 = 1 for every P sublevel.
// q = m_e - m_g is the spherical polarization index (-1, 0, +1).
inline double cg_raw(Manifold lower, int two_mg, int q) {
  const double s13 = std::sqrt(1.0 / 3.0);
  const double s23 = std::sqrt(2.0 / 3.0);
  const double s12 = std::sqrt(1.0 / 2.0);
  const double s16 = std::sqrt(1.0 / 6.0);
  if (lower == Manifold::S) { // J=1/2 -> J'=1/2
    if (two_mg == -1 && q == 0) return -s13;
    if (two_mg == -1 && q == +1) return -s23;
    if (two_mg == +1 && q == -1) return s23;
    if (two_mg == +1 && q == 0) return s13;
    return 0.0;
  }
  if (lower == Manifold::D) { // J=3/2 -> J'=1/2
    if (two_mg == -3 && q == +1) return s12;
    if (two_mg == -1 && q == 0) return -s13;
    if (two_mg == -1 && q == +1) return s16;
    if (two_mg == +1 && q == -1) return s16;
    if (two_mg == +1 && q == 0) return -s13;
    if (two_mg == +3 && q == -1) return s12;
    return 0.0;
  }
  return 0.0;
}

// Largest coefficient magnitude within each family; used to normalize the
// Rabi couplings so the strongest transition of a family has coefficient 1.
inline double cg_family_max(Manifold lower) {
  return lower == Manifold::S ? std::sqrt(2.0 / 3.0) : std::sqrt(1.0 / 2.0);
}

inline double cg_normalized(Manifold lower, int two_mg, int q) {
  return cg_raw(lower, two_mg, q) / cg_family_max(lower);
}

inline bool in_manifold(int level, Manifold m) { return manifold_of(level) == m; }

} // namespace detail

struct CouplingOperators {
  // |P><lower| raising operators per sigma component, normalized so the
  // largest coefficient in each family is 1.
  Matrix8 sp_sigma_minus = Matrix8::Zero();
  Matrix8 sp_sigma_plus = Matrix8::Zero();
  Matrix8 dp_sigma_minus = Matrix8::Zero();
  Matrix8 dp_sigma_plus = Matrix8::Zero();
};

inline CouplingOperators coupling_operators(const AtomicSystem& sys) {
  sys.validate();
  CouplingOperators ops;
  for (int e = idx_p_lo; e <= idx_p_hi; ++e) {
    for (int g = 0; g < n_levels; ++g) {
      const Manifold mg = manifold_of(g);
      if (mg == Manifold::P) continue;
      const int q2 = two_m_of(e) - two_m_of(g);
      if (std::abs(q2) != 2) continue; // sigma components only
      const int q = q2 / 2;
      const double c = detail::cg_normalized(mg, two_m_of(g), q);
      if (c == 0.0) continue;
      Matrix8& target = (mg == Manifold::S)
                            ? (q == -1 ? ops.sp_sigma_minus : ops.sp_sigma_plus)
                            : (q == -1 ? ops.dp_sigma_minus : ops.dp_sigma_plus);
      target(e, g) = c;
    }
  }
  return ops;
}

// Rotating-frame Hamiltonian, rad/us. The P manifold is the energy
// reference: -Delta_UV sits on the S diagonal and -Delta_IR on the D
// diagonal, so a red-detuned laser (Delta < 0) raises the lower manifold.
// Off-diagonal couplings are (rabi/2) * pol_q * cg for the sigma components.
inline Matrix8 build_hamiltonian(const AtomicSystem& sys, const LaserField& uv,
                                 const LaserField& ir, const MagneticField& b) {
  uv.validate();
  ir.validate();
  Matrix8 h = Matrix8::Zero();
  const auto shifts = zeeman_shifts(sys, b);
  for (int i = 0; i < n_levels; ++i) {
    double diag = shifts(i);
    if (detail::in_manifold(i, Manifold::S)) diag -= uv.detuning;
    if (detail::in_manifold(i, Manifold::D)) diag -= ir.detuning;
    h(i, i) = diag;
  }
  const auto ops = coupling_operators(sys);
  const Matrix8 drive_uv =
      0.5 * uv.rabi * (uv.pol_sigma_minus * ops.sp_sigma_minus +
                       uv.pol_sigma_plus * ops.sp_sigma_plus);
  const Matrix8 drive_ir =
      0.5 * ir.rabi * (ir.pol_sigma_minus * ops.dp_sigma_minus +
                       ir.pol_sigma_plus * ops.dp_sigma_plus);
  h += drive_uv + drive_uv.adjoint();
  h += drive_ir + drive_ir.adjoint();
  return h;
}

} // namespace darkres
