#pragma once

#include <vector>

#include <Eigen/Dense>

#include "darkres/liouvillian.hpp"

// Brute-force time-domain integration of the modulated master equation,
// used as an independent check of the Floquet solver and of the dL
// construction. Fixed-step classical RK4; being a Runge-Kutta scheme it
// preserves the linear trace invariant up to roundoff, which is monitored.

namespace darkres {

struct PropagationConfig {
  double dt = 0.0;             // us; 0 -> period / steps_per_period
  int steps_per_period = 80;
  double t_transient = 60.0;   // us
  int n_periods_average = 20;

  double step(const TrapDrive& drive) const {
    const double period = two_pi / drive.omega_rf;
    const double h = dt > 0.0 ? dt : period / steps_per_period;
    if (h >= period / 20.0)
      throw std::invalid_argument("dt must resolve the RF period (>= 20 steps)");
    return h;
  }
};

struct Trajectory {
  std::vector<double> times;        // us
  std::vector<VectorXc> states;     // vectorized density matrices
};

namespace detail {

inline VectorXc rhs_modulated(const MatrixXc& l0, const MatrixXc& dl,
                              const TrapDrive& drive, double t,
                              const VectorXc& rho) {
  const double c = drive.beta * drive.omega_rf * std::cos(drive.omega_rf * t);
  return l0 * rho + c * (dl * rho);
}

inline void rk4_step(const MatrixXc& l0, const MatrixXc& dl,
                     const TrapDrive& drive, double t, double h, VectorXc& rho) {
  const VectorXc k1 = rhs_modulated(l0, dl, drive, t, rho);
  const VectorXc k2 = rhs_modulated(l0, dl, drive, t + 0.5 * h, rho + 0.5 * h * k1);
  const VectorXc k3 = rhs_modulated(l0, dl, drive, t + 0.5 * h, rho + 0.5 * h * k2);
  const VectorXc k4 = rhs_modulated(l0, dl, drive, t + h, rho + h * k3);
  rho += (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
}

inline void rk4_step_diag(const MatrixXc& l0, const VectorXc& dl_diag,
                          const TrapDrive& drive, double t, double h,
                          VectorXc& rho) {
  auto rhs = [&](double tt, const VectorXc& v) -> VectorXc {
    const double c = drive.beta * drive.omega_rf * std::cos(drive.omega_rf * tt);
    return l0 * v + c * dl_diag.cwiseProduct(v);
  };
  const VectorXc k1 = rhs(t, rho);
  const VectorXc k2 = rhs(t + 0.5 * h, rho + 0.5 * h * k1);
  const VectorXc k3 = rhs(t + 0.5 * h, rho + 0.5 * h * k2);
  const VectorXc k4 = rhs(t + h, rho + h * k3);
  rho += (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
}

} // namespace detail

// Equal mixture of the two S ground states; the steady state is unique so
// the starting point only affects the transient.
inline VectorXc default_initial_state(Eigen::Index n = n_levels) {
  MatrixXc rho = MatrixXc::Zero(n, n);
  rho(0, 0) = 0.5;
  rho(1, 1) = 0.5;
  return vectorize(rho);
}

// Integrate through the transient, then record states over exactly
// n_periods_average periods (inclusive endpoints for trapezoid averaging).
inline Trajectory propagate(const MatrixXc& l0, const MatrixXc& dl,
                            const TrapDrive& drive, const VectorXc& rho_init,
                            const PropagationConfig& cfg) {
  drive.validate();
  const double h = cfg.step(drive);
  const double period = two_pi / drive.omega_rf;
  const auto steps_per_period =
      static_cast<long>(std::lround(period / h));
  const double h_exact = period / steps_per_period; // integer steps per period
  const auto n_transient =
      static_cast<long>(std::ceil(cfg.t_transient / h_exact));
  const long n_record = steps_per_period * cfg.n_periods_average;

  VectorXc rho = rho_init;
  const auto dim = static_cast<Eigen::Index>(std::lround(std::sqrt(double(rho.size()))));
  const VectorXc trace_vec = vec_identity(dim);
  const double trace0 = (trace_vec.adjoint() * rho).real()(0);

  // dl generated by a diagonal detuning shift is itself diagonal; use a
  // cheaper elementwise product in that case
  const bool dl_diagonal =
      (dl - MatrixXc(dl.diagonal().asDiagonal())).cwiseAbs().maxCoeff() == 0.0;
  const VectorXc dl_diag = dl.diagonal();
  auto step_once = [&](double t_now, VectorXc& state) {
    if (dl_diagonal)
      detail::rk4_step_diag(l0, dl_diag, drive, t_now, h_exact, state);
    else
      detail::rk4_step(l0, dl, drive, t_now, h_exact, state);
  };

  double t = 0.0;
  for (long i = 0; i < n_transient; ++i) {
    step_once(t, rho);
    t += h_exact;
  }

  Trajectory traj;
  traj.times.reserve(n_record + 1);
  traj.states.reserve(n_record + 1);
  traj.times.push_back(t);
  traj.states.push_back(rho);
  for (long i = 0; i < n_record; ++i) {
    step_once(t, rho);
    t += h_exact;
    traj.times.push_back(t);
    traj.states.push_back(rho);
  }

  const double drift =
      std::abs((trace_vec.adjoint() * rho).real()(0) - trace0);
  if (drift > 1e-6)
    throw SolverError("trace drift exceeds 1e-6; reduce the step size");
  return traj;
}

// Arithmetic (trapezoid) average over the recorded integer number of
// periods; rejects trajectories that do not cover whole periods.
inline DensityVector period_average(const Trajectory& traj,
                                    const TrapDrive& drive) {
  if (traj.states.size() < 2)
    throw std::invalid_argument("trajectory too short to average");
  const double period = two_pi / drive.omega_rf;
  const double span = traj.times.back() - traj.times.front();
  const double periods = span / period;
  if (std::abs(periods - std::lround(periods)) > 1e-6)
    throw std::invalid_argument("trajectory does not cover whole periods");
  VectorXc acc = VectorXc::Zero(traj.states.front().size());
  const std::size_t n = traj.states.size();
  for (std::size_t i = 0; i < n; ++i) {
    const double w = (i == 0 || i == n - 1) ? 0.5 : 1.0;
    acc += w * traj.states[i];
  }
  acc /= double(n - 1);
  return DensityVector{acc};
}

} // namespace darkres
