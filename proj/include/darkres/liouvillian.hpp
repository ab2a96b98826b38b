#pragma once

#include <stdexcept>
#include <vector>

#include <Eigen/Dense>

#include "darkres/atomic.hpp"

// Vectorized master equation. The 8x8 density matrix is column-stacked into
// a 64-vector (vec(rho)[col*8 + row] = rho(row, col)), so
//   vec(A rho B) = (B^T kron A) vec(rho).
// The generator splits as L(t) = L0 + beta * Omega_RF * dL * cos(Omega_RF t),
// where L0 holds the static Hamiltonian and all dissipators and dL is the
// detuning-derivative direction generated by the micromotion Doppler shift.

namespace darkres {

class SolverError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

inline VectorXc vectorize(const MatrixXc& rho) {
  return Eigen::Map<const VectorXc>(rho.data(), rho.size());
}

inline MatrixXc unvectorize(const VectorXc& v) {
  const auto n = static_cast<Eigen::Index>(std::lround(std::sqrt(double(v.size()))));
  if (n * n != v.size()) throw std::invalid_argument("not a square vectorized matrix");
  return Eigen::Map<const MatrixXc>(v.data(), n, n);
}

// vec(identity); its adjoint is the trace functional on vectorized matrices.
inline VectorXc vec_identity(Eigen::Index n) {
  return vectorize(MatrixXc::Identity(n, n));
}

inline MatrixXc kron(const MatrixXc& a, const MatrixXc& b) {
  MatrixXc out(a.rows() * b.rows(), a.cols() * b.cols());
  for (Eigen::Index i = 0; i < a.rows(); ++i)
    for (Eigen::Index j = 0; j < a.cols(); ++j)
      out.block(i * b.rows(), j * b.cols(), b.rows(), b.cols()) = a(i, j) * b;
  return out;
}

// -i (I kron H - H^T kron I), the commutator part in column-stacking order.
inline MatrixXc hamiltonian_superop(const MatrixXc& h) {
  const Eigen::Index n = h.rows();
  const MatrixXc id = MatrixXc::Identity(n, n);
  return Complex(0, -1) * (kron(id, h) - kron(h.transpose(), id));
}

// D[A]: A rho A^dag - 1/2 {A^dag A, rho} as a superoperator.
inline MatrixXc dissipator_superop(const MatrixXc& a) {
  const Eigen::Index n = a.rows();
  const MatrixXc id = MatrixXc::Identity(n, n);
  const MatrixXc ada = a.adjoint() * a;
  return kron(a.conjugate(), a) - 0.5 * kron(id, ada) -
         0.5 * kron(ada.transpose(), id);
}

struct DensityVector {
  VectorXc data; // vectorized density matrix

  // Invariant checks used by the solvers; tolerances per the unit-trace /
  // Hermiticity / population-bound contract.
  void validate(double herm_tol = 1e-9, double pop_tol = 1e-9) const {
    const MatrixXc rho = unvectorize(data);
    if ((rho - rho.adjoint()).cwiseAbs().maxCoeff() > herm_tol)
      throw SolverError("density matrix not Hermitian");
    const Complex tr = rho.trace();
    if (std::abs(tr.imag()) > herm_tol || std::abs(tr.real() - 1.0) > 1e-9)
      throw SolverError("density matrix trace not 1");
    for (Eigen::Index i = 0; i < rho.rows(); ++i) {
      const double p = rho(i, i).real();
      if (p < -pop_tol || p > 1.0 + pop_tol)
        throw SolverError("population out of [0, 1]");
    }
  }

  double population(int level) const {
    const auto n = static_cast<Eigen::Index>(std::lround(std::sqrt(double(data.size()))));
    return data(level * n + level).real();
  }
};

struct LiouvillianPair {
  MatrixXc l0;
  MatrixXc dl;
};

struct TrapDrive {
  double omega_rf = mhz_to_rad_us(22.1); // rad/us
  double beta = 0.0;                     // beta == beta_UV

  void validate() const {
    if (!(omega_rf > 0.0)) throw std::invalid_argument("omega_rf must be positive");
    if (beta < 0.0) throw std::invalid_argument("beta must be >= 0");
  }
};

namespace detail {

// Spontaneous-emission jump operators: one per polarization q and target
// manifold, with raw CG coefficients so that each P sublevel decays at the
// full branching * gamma_total rate summed over its channels.
inline std::vector<Matrix8> decay_operators(const AtomicSystem& sys) {
  std::vector<Matrix8> ops;
  for (const Manifold target : {Manifold::S, Manifold::D}) {
    const double rate =
        (target == Manifold::S ? sys.branching_s : sys.branching_d) *
        sys.gamma_total;
    for (int q = -1; q <= 1; ++q) {
      Matrix8 a = Matrix8::Zero();
      for (int e = idx_p_lo; e <= idx_p_hi; ++e) {
        for (int g = 0; g < n_levels; ++g) {
          if (manifold_of(g) != target) continue;
          if (two_m_of(e) - two_m_of(g) != 2 * q) continue;
          a(g, e) = cg_raw(target, two_m_of(g), q);
        }
      }
      if (a.cwiseAbs().maxCoeff() > 0.0) ops.push_back(std::sqrt(rate) * a);
    }
  }
  return ops;
}

inline Matrix8 manifold_projector(Manifold m) {
  Matrix8 p = Matrix8::Zero();
  for (int i = 0; i < n_levels; ++i)
    if (manifold_of(i) == m) p(i, i) = 1.0;
  return p;
}

} // namespace detail

// Static Liouvillian: coherent part plus spontaneous emission plus laser
// linewidth / thermal dephasing. The dephasing is built from manifold
// projectors so that S-P coherences decay at (linewidth_uv + extra_uv),
// D-P at (linewidth_ir + extra_ir) and S-D (Raman) coherences at the sum
// of both, with populations untouched.
inline MatrixXc build_l0(const Matrix8& h, const AtomicSystem& sys,
                         const LaserField& uv, const LaserField& ir,
                         double extra_dephasing_uv = 0.0,
                         double extra_dephasing_ir = 0.0) {
  if ((h - h.adjoint()).cwiseAbs().maxCoeff() > 1e-10)
    throw std::invalid_argument("Hamiltonian must be Hermitian");
  MatrixXc l0 = hamiltonian_superop(h);
  for (const Matrix8& a : detail::decay_operators(sys))
    l0 += dissipator_superop(a);
  const double gamma_uv = uv.linewidth + extra_dephasing_uv;
  const double gamma_ir = ir.linewidth + extra_dephasing_ir;
  if (gamma_uv > 0.0)
    l0 += dissipator_superop(std::sqrt(2.0 * gamma_uv) *
                             detail::manifold_projector(Manifold::S));
  if (gamma_ir > 0.0)
    l0 += dissipator_superop(std::sqrt(2.0 * gamma_ir) *
                             detail::manifold_projector(Manifold::D));
  return l0;
}

// Modulation direction: dL = -i (I kron M - M kron I) with M diagonal,
// M = -diag(1 on S, lambda_uv/lambda_ir on D, 0 on P). The sign matches the
// -Delta placement in build_hamiltonian, so L0 + beta*Omega*dL*cos(Omega t)
// is L0 evaluated at detunings Delta_i + beta_i*Omega*cos(Omega t) with
// beta_ir = beta_uv * lambda_uv / lambda_ir (co-propagating beams).
inline MatrixXc build_dl(const AtomicSystem& sys) {
  sys.validate();
  Matrix8 m = Matrix8::Zero();
  const double ratio = sys.lambda_uv_nm / sys.lambda_ir_nm;
  for (int i = 0; i < n_levels; ++i) {
    if (manifold_of(i) == Manifold::S) m(i, i) = -1.0;
    if (manifold_of(i) == Manifold::D) m(i, i) = -ratio;
  }
  return hamiltonian_superop(m);
}

inline LiouvillianPair build_liouvillian(const AtomicSystem& sys,
                                         const LaserField& uv,
                                         const LaserField& ir,
                                         const MagneticField& b,
                                         double extra_dephasing_uv = 0.0,
                                         double extra_dephasing_ir = 0.0) {
  const Matrix8 h = build_hamiltonian(sys, uv, ir, b);
  return {build_l0(h, sys, uv, ir, extra_dephasing_uv, extra_dephasing_ir),
          build_dl(sys)};
}

} // namespace darkres
