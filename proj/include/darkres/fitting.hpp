#pragma once

#include <algorithm>
#include <functional>
#include <limits>
#include <random>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "darkres/spectra.hpp"

// Damped (Levenberg-Marquardt style) weighted least squares with a central
// finite-difference Jacobian and box bounds enforced by projection. The
// optimizer is deterministic: identical problems produce identical results.

namespace darkres {

struct Parameter {
  std::string name;
  double value = 0.0;
  double lower = -std::numeric_limits<double>::infinity();
  double upper = std::numeric_limits<double>::infinity();
};

// Model: maps the parameter vector to predicted values on the data grid.
using ModelFunction =
    std::function<Eigen::VectorXd(const Eigen::VectorXd&)>;

struct FitProblem {
  Eigen::VectorXd y;
  Eigen::VectorXd sigma; // size 0 -> unit weights (flagged in the result)
  ModelFunction model;
  std::vector<Parameter> params;
  int max_iterations = 200;
  double ftol = 1e-12;
};

struct FitResult {
  std::vector<std::string> names;
  Eigen::VectorXd estimates;
  Eigen::VectorXd std_errors;
  Eigen::MatrixXd covariance;
  double chi2 = 0.0;
  double reduced_chi2 = 0.0;
  int n_evals = 0;
  int n_iterations = 0;
  bool converged = false;
  bool covariance_valid = false;
  bool unit_weights = false;
};

namespace detail {

inline Eigen::VectorXd clamp_to_bounds(const Eigen::VectorXd& p,
                                       const std::vector<Parameter>& params) {
  Eigen::VectorXd out = p;
  for (Eigen::Index i = 0; i < out.size(); ++i)
    out(i) = std::clamp(out(i), params[i].lower, params[i].upper);
  return out;
}

// Relative finite-difference step with an absolute floor; for bounded
// parameters the floor scales with the box so tiny-magnitude parameters
// (e.g. powers in J/s) still get a meaningful step.
inline double fd_step(double value, const Parameter& par) {
  double floor_abs = 1e-9;
  if (std::isfinite(par.lower) && std::isfinite(par.upper))
    floor_abs = std::min(floor_abs, 1e-6 * (par.upper - par.lower));
  return std::max(1e-6 * std::abs(value), floor_abs);
}

} // namespace detail

inline FitResult fit(const FitProblem& problem) {
  const auto n_par = static_cast<Eigen::Index>(problem.params.size());
  const Eigen::Index n_data = problem.y.size();
  if (n_par == 0 || n_data == 0)
    throw std::invalid_argument("empty fit problem");
  for (const auto& p : problem.params) {
    if (!(p.value >= p.lower && p.value <= p.upper))
      throw std::invalid_argument("initial guess out of bounds: " + p.name);
  }

  FitResult res;
  res.unit_weights = problem.sigma.size() == 0;
  Eigen::VectorXd w = res.unit_weights
                          ? Eigen::VectorXd(Eigen::VectorXd::Ones(n_data))
                          : Eigen::VectorXd(problem.sigma.cwiseInverse());

  Eigen::VectorXd p(n_par);
  for (Eigen::Index i = 0; i < n_par; ++i) p(i) = problem.params[i].value;

  auto residuals = [&](const Eigen::VectorXd& pars) -> Eigen::VectorXd {
    ++res.n_evals;
    return ((problem.y - problem.model(pars)).array() * w.array()).matrix();
  };

  Eigen::VectorXd r = residuals(p);
  double chi2 = r.squaredNorm();
  double lambda = 1e-3;
  bool converged = false;

  Eigen::MatrixXd jac(n_data, n_par);
  int iter = 0;
  for (; iter < problem.max_iterations; ++iter) {
    // central differences, relative step with an absolute floor
    for (Eigen::Index j = 0; j < n_par; ++j) {
      const double step = detail::fd_step(p(j), problem.params[j]);
      Eigen::VectorXd pp = p, pm = p;
      pp(j) = std::min(p(j) + step, problem.params[j].upper);
      pm(j) = std::max(p(j) - step, problem.params[j].lower);
      const double denom = pp(j) - pm(j);
      if (denom == 0.0) {
        jac.col(j).setZero();
        continue;
      }
      // residuals fall along +d(model)/dp, so this is -d r / d p
      jac.col(j) = (residuals(pm) - residuals(pp)) / denom;
    }
    const Eigen::MatrixXd jtj = jac.transpose() * jac;
    const Eigen::VectorXd jtr = jac.transpose() * r;

    bool accepted = false;
    for (int attempt = 0; attempt < 12; ++attempt) {
      Eigen::MatrixXd damped = jtj;
      damped.diagonal() += lambda * jtj.diagonal().cwiseMax(1e-12);
      const Eigen::VectorXd delta = damped.ldlt().solve(jtr);
      const Eigen::VectorXd trial =
          detail::clamp_to_bounds(p + delta, problem.params);
      const Eigen::VectorXd rt = residuals(trial);
      const double chi2_trial = rt.squaredNorm();
      if (chi2_trial <= chi2) {
        const double decrease = chi2 - chi2_trial;
        p = trial;
        r = rt;
        chi2 = chi2_trial;
        lambda = std::max(lambda / 3.0, 1e-12);
        accepted = true;
        if (decrease < problem.ftol * std::max(1.0, chi2)) converged = true;
        break;
      }
      lambda *= 5.0;
    }
    if (!accepted || converged) {
      converged = converged || !accepted;
      if (!accepted) converged = true; // no descent direction left
      break;
    }
  }

  res.names.reserve(n_par);
  for (const auto& par : problem.params) res.names.push_back(par.name);
  res.estimates = p;
  res.chi2 = chi2;
  const Eigen::Index dof = std::max<Eigen::Index>(1, n_data - n_par);
  res.reduced_chi2 = chi2 / double(dof);
  res.converged = converged;
  res.n_iterations = iter + 1;

  // covariance from the Gauss-Newton Hessian at the optimum
  for (Eigen::Index j = 0; j < n_par; ++j) {
    const double step = detail::fd_step(p(j), problem.params[j]);
    Eigen::VectorXd pp = p, pm = p;
    pp(j) = std::min(p(j) + step, problem.params[j].upper);
    pm(j) = std::max(p(j) - step, problem.params[j].lower);
    const double denom = pp(j) - pm(j);
    if (denom == 0.0) {
      jac.col(j).setZero();
      continue;
    }
    jac.col(j) = (residuals(pm) - residuals(pp)) / denom;
  }
  // column-normalize before inverting: parameter scales can differ by many
  // orders of magnitude (e.g. J/s vs rad/us) and would sink the LU rank test
  Eigen::VectorXd colnorm(n_par);
  for (Eigen::Index j = 0; j < n_par; ++j) {
    colnorm(j) = jac.col(j).norm();
    if (colnorm(j) == 0.0) colnorm(j) = 1.0;
  }
  const Eigen::MatrixXd jac_s = jac * colnorm.cwiseInverse().asDiagonal();
  const Eigen::MatrixXd jtj = jac_s.transpose() * jac_s;
  Eigen::FullPivLU<Eigen::MatrixXd> lu(jtj);
  res.std_errors = Eigen::VectorXd::Constant(n_par, 0.0);
  if (lu.isInvertible()) {
    Eigen::MatrixXd cov = colnorm.cwiseInverse().asDiagonal() * lu.inverse() *
                          colnorm.cwiseInverse().asDiagonal();
    if (res.unit_weights) cov *= res.reduced_chi2;
    res.covariance = 0.5 * (cov + cov.transpose());
    res.covariance_valid = res.covariance.diagonal().minCoeff() >= 0.0;
    if (res.covariance_valid)
      res.std_errors = res.covariance.diagonal().cwiseSqrt();
  } else {
    res.covariance = Eigen::MatrixXd::Zero(n_par, n_par);
    res.covariance_valid = false;
  }
  return res;
}

// Weighted residuals (y - model)/sigma at the given parameter values, in
// data-grid order.
inline Eigen::VectorXd residuals(const FitProblem& problem,
                                 const Eigen::VectorXd& estimates) {
  Eigen::VectorXd w =
      problem.sigma.size() == 0
          ? Eigen::VectorXd(Eigen::VectorXd::Ones(problem.y.size()))
          : Eigen::VectorXd(problem.sigma.cwiseInverse());
  return ((problem.y - problem.model(estimates)).array() * w.array()).matrix();
}

// --- spectrum models -------------------------------------------------------

// counts = scale * fluorescence(beta, T; Delta_IR - offset) + background
struct SingleIonModelConfig {
  ScanParams scan;
  std::vector<double> grid_mhz;
  bool free_rabi = false; // append rabi_uv_mhz, rabi_ir_mhz to the vector
};

// Parameter vector: [beta, temperature_k, scale, background, offset_mhz,
// (rabi_uv_mhz, rabi_ir_mhz)]
inline ModelFunction single_ion_model(const SingleIonModelConfig& cfg) {
  return [cfg](const Eigen::VectorXd& p) {
    ScanParams sp = cfg.scan;
    sp.drive.beta = p(0);
    sp.temperature_k = p(1);
    const double scale = p(2), background = p(3), offset = p(4);
    if (cfg.free_rabi) {
      sp.uv.rabi = mhz_to_rad_us(p(5));
      sp.ir.rabi = mhz_to_rad_us(p(6));
    }
    Eigen::VectorXd out(cfg.grid_mhz.size());
    for (std::size_t i = 0; i < cfg.grid_mhz.size(); ++i)
      out(i) = scale * fluorescence_at(sp, cfg.grid_mhz[i] - offset) + background;
    return out;
  };
}

// Parameter vector: [beta1, t1, weight1, beta2, t2, weight2, ..., scale,
// background]; weights are relative brightnesses.
inline ModelFunction multi_ion_model(const ScanParams& shared,
                                     const std::vector<double>& grid_mhz,
                                     int n_ions) {
  return [shared, grid_mhz, n_ions](const Eigen::VectorXd& p) {
    std::vector<IonModel> ions(n_ions);
    for (int k = 0; k < n_ions; ++k)
      ions[k] = {p(3 * k), p(3 * k + 1), p(3 * k + 2)};
    const double scale = p(3 * n_ions), background = p(3 * n_ions + 1);
    const Spectrum s = multi_ion_spectrum(ions, shared, grid_mhz);
    Eigen::VectorXd out(s.values.size());
    for (std::size_t i = 0; i < s.values.size(); ++i)
      out(i) = scale * s.values[i] + background;
    return out;
  };
}

// beta(V) = sqrt(a^2 (V - V0)^2 + b^2): the four-parameter hyperbola of the
// compensation scan reduced to three (a = alpha_beta*alpha_V,
// b = alpha_beta*y), with vertex beta(V0) = b.
inline double hyperbola_model(double voltage, double a, double v0, double b) {
  const double dx = a * (voltage - v0);
  return std::sqrt(dx * dx + b * b);
}

// Parameter vector: [a, v0, b]
inline ModelFunction hyperbola_model_on(const std::vector<double>& voltages) {
  return [voltages](const Eigen::VectorXd& p) {
    Eigen::VectorXd out(voltages.size());
    for (std::size_t i = 0; i < voltages.size(); ++i)
      out(i) = hyperbola_model(voltages[i], p(0), p(1), p(2));
    return out;
  };
}

// Stationary-temperature model T0(beta; C_RF, Delta). Points in the
// no-equilibrium region are pushed away with a large penalty value so the
// optimizer stays on the cooling branch.
inline ModelFunction temperature_model_on(const std::vector<double>& betas,
                                          const ThermoParams& base,
                                          bool include_rf) {
  return [betas, base, include_rf](const Eigen::VectorXd& p) {
    const double c_rf = include_rf ? p(0) : 0.0;
    const double delta = include_rf ? p(1) : p(0);
    Eigen::VectorXd out(betas.size());
    for (std::size_t i = 0; i < betas.size(); ++i) {
      const auto t = stationary_temperature(betas[i], delta, c_rf, base);
      out(i) = t.has_equilibrium ? t.temperature_k : 1e3;
    }
    return out;
  };
}

struct TemperaturePoint {
  double beta = 0.0;
  double temperature_k = 0.0;
  double sigma_k = 0.0;
};

inline FitResult fit_temperature_model(const std::vector<TemperaturePoint>& pts,
                                       bool include_rf,
                                       const ThermoParams& base,
                                       double c_rf_init = 1e-19,
                                       double delta_init_mhz = -10.0) {
  if (pts.size() < 3)
    throw std::invalid_argument("temperature fit needs at least 3 points");
  std::vector<double> betas;
  FitProblem prob;
  prob.y.resize(pts.size());
  prob.sigma.resize(pts.size());
  for (std::size_t i = 0; i < pts.size(); ++i) {
    betas.push_back(pts[i].beta);
    prob.y(i) = pts[i].temperature_k;
    prob.sigma(i) = pts[i].sigma_k;
  }
  prob.model = temperature_model_on(betas, base, include_rf);
  if (include_rf)
    prob.params.push_back({"c_rf_j_per_s", c_rf_init, 0.0, 1e-16});
  prob.params.push_back(
      {"delta_rad_us", mhz_to_rad_us(delta_init_mhz), mhz_to_rad_us(-60.0),
       mhz_to_rad_us(-0.5)});
  return fit(prob);
}

// Multi-start driver for ill-posed problems (two-ion fits): runs fit() from
// randomized initial points and returns every local minimum found, sorted by
// chi-squared. Seeded, hence reproducible.
inline std::vector<FitResult> multi_start_fit(const FitProblem& base,
                                              int n_starts, unsigned seed) {
  std::mt19937 rng(seed);
  std::vector<FitResult> results;
  for (int s = 0; s < n_starts; ++s) {
    FitProblem prob = base;
    if (s > 0) {
      for (auto& par : prob.params) {
        const double lo = std::isfinite(par.lower) ? par.lower : par.value - 1.0;
        const double hi = std::isfinite(par.upper) ? par.upper : par.value + 1.0;
        std::uniform_real_distribution<double> dist(lo, hi);
        par.value = dist(rng);
      }
    }
    results.push_back(fit(prob));
  }
  std::sort(results.begin(), results.end(),
            [](const FitResult& a, const FitResult& b) { return a.chi2 < b.chi2; });
  return results;
}

// Distinct local minima among multi-start results: representatives whose
// parameter vectors differ by more than rel_tol in some component.
inline std::vector<FitResult> distinct_minima(const std::vector<FitResult>& all,
                                              double rel_tol = 0.05) {
  std::vector<FitResult> out;
  for (const auto& r : all) {
    bool dup = false;
    for (const auto& kept : out) {
      const double diff =
          (r.estimates - kept.estimates).cwiseAbs().maxCoeff() /
          std::max(1.0, kept.estimates.cwiseAbs().maxCoeff());
      if (diff < rel_tol) {
        dup = true;
        break;
      }
    }
    if (!dup) out.push_back(r);
  }
  return out;
}

} // namespace darkres
