#pragma once

#include <Eigen/Dense>

#include "darkres/liouvillian.hpp"

// Continued-fraction Floquet steady state of
//   d(vec rho)/dt = (L0 + beta*Omega*dL*cos(Omega t)) vec(rho).
// With the harmonic ansatz rho(t) = sum_n rho_n exp(i n Omega t) the
// components obey
//   (L0 + i n Omega) rho_n + (beta*Omega/2) dL (rho_{n+1} + rho_{n-1}) = 0,
// which closes under the truncation rho_{+-n_max} = 0 through the ladder
// operators S_n^+- built by downward recursion.

namespace darkres {

struct FloquetConfig {
  int n_max = 5;

  void validate() const {
    if (n_max < 1) throw std::invalid_argument("n_max must be >= 1");
  }
};

namespace detail {

// Solve L rho = 0 with unit trace, replacing the first scalar equation by
// the trace constraint. Rank deficiency beyond the expected one-dimensional
// null space is reported as a degenerate steady state.
inline DensityVector solve_null_with_trace(const MatrixXc& l) {
  const Eigen::Index dim = l.rows();
  MatrixXc a = l;
  a.row(0) = vec_identity(static_cast<Eigen::Index>(std::lround(std::sqrt(double(dim)))))
                 .adjoint();
  VectorXc rhs = VectorXc::Zero(dim);
  rhs(0) = 1.0;
  Eigen::FullPivLU<MatrixXc> lu(a);
  lu.setThreshold(1e-10);
  if (lu.rank() < dim)
    throw SolverError("degenerate steady state: null space dimension > 1");
  DensityVector rho{lu.solve(rhs)};
  const double residual = (l * rho.data).norm() / l.cwiseAbs().maxCoeff();
  if (residual > 1e-9)
    throw SolverError("steady-state solve residual too large");
  return rho;
}

} // namespace detail

inline DensityVector steady_state_unmodulated(const MatrixXc& l0) {
  DensityVector rho = detail::solve_null_with_trace(l0);
  rho.validate();
  return rho;
}

// Ladder operator S_0^{sign}. The shifted Liouvillian carries +i n Omega,
// consistent with the n-th harmonic equation above (the sign printed in the
// source recursion is reproduced here from that equation, not transcribed):
//   S^+_{n-1} = -(L0 + i n Omega + (bW/2) dL S^+_n)^{-1} (bW/2) dL, n >= 1,
// and the conjugate chain with -i n Omega for S^-.
inline MatrixXc s_chain(const MatrixXc& l0, const MatrixXc& dl,
                        const TrapDrive& drive, const FloquetConfig& cfg,
                        int sign) {
  drive.validate();
  cfg.validate();
  const Eigen::Index dim = l0.rows();
  MatrixXc s = MatrixXc::Zero(dim, dim);
  if (drive.beta == 0.0) return s;
  const double coupling = 0.5 * drive.beta * drive.omega_rf;
  const MatrixXc cdl = coupling * dl;
  const MatrixXc id = MatrixXc::Identity(dim, dim);
  for (int n = cfg.n_max; n >= 1; --n) {
    const Complex shift(0.0, sign * n * drive.omega_rf);
    const MatrixXc lhs = l0 + shift * id + cdl * s;
    Eigen::PartialPivLU<MatrixXc> lu(lhs);
    s = -lu.solve(cdl);
    if (!s.allFinite())
      throw SolverError("singular shifted Liouvillian in S-chain at n=" +
                        std::to_string(n));
  }
  return s;
}

// Time-averaged Fourier component rho_0 of the modulated steady state.
inline DensityVector floquet_steady_state(const MatrixXc& l0, const MatrixXc& dl,
                                          const TrapDrive& drive,
                                          const FloquetConfig& cfg = {}) {
  if (drive.beta == 0.0) return steady_state_unmodulated(l0);
  const MatrixXc s_plus = s_chain(l0, dl, drive, cfg, +1);
  const MatrixXc s_minus = s_chain(l0, dl, drive, cfg, -1);
  const double coupling = 0.5 * drive.beta * drive.omega_rf;
  const MatrixXc l_eff = l0 + coupling * dl * (s_plus + s_minus);
  DensityVector rho = detail::solve_null_with_trace(l_eff);
  rho.validate();
  return rho;
}

} // namespace darkres
