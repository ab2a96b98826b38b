#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <random>

#include "darkres/fitting.hpp"

using namespace darkres;

namespace {

ScanParams default_scan(double beta) {
  ScanParams p;
  p.uv.label = LaserLabel::UV;
  p.uv.rabi = mhz_to_rad_us(10.0);
  p.uv.detuning = mhz_to_rad_us(-25.0);
  p.uv.linewidth = mhz_to_rad_us(0.1);
  p.uv.wavelength_nm = 397.0;
  p.ir.label = LaserLabel::IR;
  p.ir.rabi = mhz_to_rad_us(8.0);
  p.ir.linewidth = mhz_to_rad_us(0.1);
  p.ir.wavelength_nm = 866.0;
  p.b = MagneticField{4.0};
  p.drive = TrapDrive{mhz_to_rad_us(22.1), beta};
  p.floquet = FloquetConfig{beta > 0.0 ? 6 : 5};
  return p;
}

} // namespace

TEST_CASE("input validation") {
  FitProblem prob;
  CHECK_THROWS_AS(fit(prob), std::invalid_argument);
  prob.y = Eigen::VectorXd::Ones(3);
  prob.model = [](const Eigen::VectorXd& p) {
    return Eigen::VectorXd::Constant(3, p(0));
  };
  prob.params = {{"a", 2.0, 0.0, 1.0}}; // guess above the upper bound
  CHECK_THROWS_AS(fit(prob), std::invalid_argument);
}

TEST_CASE("exact data is a fixed point") {
  FitProblem prob;
  Eigen::VectorXd x = Eigen::VectorXd::LinSpaced(20, 0.0, 5.0);
  prob.model = [x](const Eigen::VectorXd& p) {
    return (p(0) * x.array() + p(1)).matrix().eval();
  };
  prob.y = prob.model((Eigen::VectorXd(2) << 1.5, -0.3).finished());
  prob.params = {{"slope", 1.5}, {"intercept", -0.3}};
  const auto res = fit(prob);
  CHECK(res.converged);
  CHECK(res.chi2 < 1e-12);
  CHECK(res.n_iterations <= 2);
  CHECK(res.estimates(0) == doctest::Approx(1.5).epsilon(1e-10));
  CHECK(res.estimates(1) == doctest::Approx(-0.3).epsilon(1e-10));
}

TEST_CASE("nonlinear recovery from a displaced start") {
  Eigen::VectorXd x = Eigen::VectorXd::LinSpaced(40, 0.0, 4.0);
  FitProblem prob;
  prob.model = [x](const Eigen::VectorXd& p) {
    return (p(0) * (-p(1) * x.array()).exp() + p(2)).matrix().eval();
  };
  const Eigen::VectorXd truth = (Eigen::VectorXd(3) << 2.0, 0.7, 0.4).finished();
  prob.y = prob.model(truth);
  prob.params = {{"amp", 1.0, 0.0, 10.0},
                 {"rate", 0.3, 0.01, 5.0},
                 {"offset", 0.0, -1.0, 1.0}};
  const auto res = fit(prob);
  CHECK(res.converged);
  CHECK(res.chi2 < 1e-16);
  for (int i = 0; i < 3; ++i)
    CHECK(res.estimates(i) == doctest::Approx(truth(i)).epsilon(1e-6));
  CHECK(res.chi2 <= residuals(prob, truth).squaredNorm() + 1e-16);
}

TEST_CASE("noisy linear fit: estimates within 3 sigma, chi2 sane") {
  std::mt19937 rng(7);
  std::normal_distribution<double> noise(0.0, 0.05);
  Eigen::VectorXd x = Eigen::VectorXd::LinSpaced(200, -1.0, 1.0);
  FitProblem prob;
  prob.model = [x](const Eigen::VectorXd& p) {
    return (p(0) * x.array() + p(1)).matrix().eval();
  };
  prob.y = prob.model((Eigen::VectorXd(2) << 0.8, 0.2).finished());
  prob.sigma = Eigen::VectorXd::Constant(200, 0.05);
  for (Eigen::Index i = 0; i < prob.y.size(); ++i) prob.y(i) += noise(rng);
  prob.params = {{"slope", 0.0}, {"intercept", 0.0}};
  const auto res = fit(prob);
  CHECK(res.converged);
  CHECK(res.covariance_valid);
  CHECK_FALSE(res.unit_weights);
  CHECK(std::abs(res.estimates(0) - 0.8) < 3.0 * res.std_errors(0));
  CHECK(std::abs(res.estimates(1) - 0.2) < 3.0 * res.std_errors(1));
  CHECK(res.reduced_chi2 > 0.5);
  CHECK(res.reduced_chi2 < 1.5);
}

TEST_CASE("residual helper applies the weights") {
  FitProblem prob;
  prob.y = (Eigen::VectorXd(2) << 1.0, 2.0).finished();
  prob.sigma = (Eigen::VectorXd(2) << 0.5, 2.0).finished();
  prob.model = [](const Eigen::VectorXd&) {
    return (Eigen::VectorXd(2) << 0.0, 0.0).finished();
  };
  const auto r = residuals(prob, Eigen::VectorXd::Zero(1));
  CHECK(r(0) == doctest::Approx(2.0));
  CHECK(r(1) == doctest::Approx(1.0));
}

TEST_CASE("hyperbola model: vertex and symmetry") {
  CHECK(hyperbola_model(-0.55, 3.5, -0.55, 0.30) == doctest::Approx(0.30));
  CHECK(hyperbola_model(-0.55 + 0.2, 3.5, -0.55, 0.30) ==
        doctest::Approx(hyperbola_model(-0.55 - 0.2, 3.5, -0.55, 0.30)));
  // asymptotic slope
  CHECK(hyperbola_model(-0.55 + 100.0, 3.5, -0.55, 0.30) / 100.0 ==
        doctest::Approx(3.5).epsilon(1e-4));
}

TEST_CASE("hyperbola fit recovers the vertex from noisy data") {
  std::vector<double> voltages;
  for (int i = 0; i <= 40; ++i) voltages.push_back(-1.55 + i * 0.05);
  std::mt19937 rng(11);
  std::normal_distribution<double> noise(0.0, 0.05);
  FitProblem prob;
  prob.model = hyperbola_model_on(voltages);
  prob.y = prob.model((Eigen::VectorXd(3) << 3.5, -0.55, 0.30).finished());
  prob.sigma = Eigen::VectorXd::Constant(voltages.size(), 0.05);
  for (Eigen::Index i = 0; i < prob.y.size(); ++i) prob.y(i) += noise(rng);
  prob.params = {{"a", 2.0, 0.1, 20.0},
                 {"v0", -0.2, -3.0, 3.0},
                 {"b", 0.6, 0.0, 5.0}};
  const auto res = fit(prob);
  CHECK(res.converged);
  CHECK(std::abs(res.estimates(1) + 0.55) < 3.0 * res.std_errors(1));
  CHECK(std::abs(res.estimates(2) - 0.30) < 3.0 * res.std_errors(2));
  CHECK(res.std_errors(1) < 0.02);
  CHECK(res.std_errors(2) < 0.08);
}

TEST_CASE("temperature-vs-beta fit recovers the RF heating coefficient") {
  ThermoParams base;
  base.saturation = std::pow(mhz_to_rad_us(2.0) / 2.0, 2);
  const double c_true = 8.4e-20;
  const double delta_true = mhz_to_rad_us(-11.7);
  std::vector<TemperaturePoint> pts;
  for (double beta : {0.1, 0.35, 0.6, 0.85, 1.0, 1.15, 1.3}) {
    const auto t = stationary_temperature(beta, delta_true, c_true, base);
    REQUIRE(t.has_equilibrium);
    pts.push_back({beta, t.temperature_k, 0.05 * t.temperature_k});
  }
  const auto with_rf = fit_temperature_model(pts, true, base);
  CHECK(with_rf.converged);
  CHECK(with_rf.estimates(0) == doctest::Approx(c_true).epsilon(1e-3));
  CHECK(with_rf.estimates(1) == doctest::Approx(delta_true).epsilon(1e-3));
  CHECK(with_rf.chi2 < 1e-10);
  // without the RF term the same data cannot be described
  const auto no_rf = fit_temperature_model(pts, false, base);
  CHECK(no_rf.chi2 > 1e2 * std::max(with_rf.chi2, 1e-12));
  CHECK_THROWS_AS(fit_temperature_model({pts[0], pts[1]}, true, base),
                  std::invalid_argument);
}

TEST_CASE("single-ion spectrum round trip") {
  auto scan = default_scan(0.8);
  const auto grid = linear_grid(-42.0, -8.0, 35);
  SingleIonModelConfig cfg{scan, grid, false};
  const auto model = single_ion_model(cfg);
  const Eigen::VectorXd truth =
      (Eigen::VectorXd(5) << 0.8, 0.6e-3, 1200.0, 40.0, 0.0).finished();
  Eigen::VectorXd y = model(truth);
  std::mt19937 rng(23);
  FitProblem prob;
  prob.sigma = Eigen::VectorXd::Constant(grid.size(), 0.0);
  for (Eigen::Index i = 0; i < y.size(); ++i) {
    const double s = 0.01 * y(i);
    prob.sigma(i) = s;
    y(i) += std::normal_distribution<double>(0.0, s)(rng);
  }
  prob.y = y;
  prob.model = model;
  prob.params = {{"beta", 0.5, 0.0, 3.0},
                 {"temperature_k", 1.0e-3, 0.0, 20e-3},
                 {"scale", 1000.0, 1.0, 1e6},
                 {"background", 20.0, 0.0, 1e4},
                 {"offset_mhz", 0.3, -3.0, 3.0}};
  const auto res = fit(prob);
  CHECK(res.converged);
  CHECK(res.covariance_valid);
  for (int i = 0; i < 5; ++i) {
    CAPTURE(i);
    CHECK(std::abs(res.estimates(i) - truth(i)) <
          3.0 * std::max(res.std_errors(i), 1e-12) + 1e-9);
  }
  CHECK(res.reduced_chi2 < 2.0);
}

TEST_CASE("multi-start finds both signs of a quadratic model") {
  FitProblem prob;
  prob.y = Eigen::VectorXd::Constant(5, 4.0);
  prob.model = [](const Eigen::VectorXd& p) {
    return Eigen::VectorXd::Constant(5, p(0) * p(0));
  };
  prob.params = {{"a", 0.5, -5.0, 5.0}};
  const auto all = multi_start_fit(prob, 12, 42u);
  const auto distinct = distinct_minima(all, 0.05);
  REQUIRE(distinct.size() >= 2);
  std::vector<double> roots;
  for (const auto& r : distinct)
    if (r.chi2 < 1e-8) roots.push_back(r.estimates(0));
  REQUIRE(roots.size() >= 2);
  std::sort(roots.begin(), roots.end());
  CHECK(roots.front() == doctest::Approx(-2.0).epsilon(1e-4));
  CHECK(roots.back() == doctest::Approx(2.0).epsilon(1e-4));
}

TEST_CASE("multi-start results are reproducible for a fixed seed") {
  FitProblem prob;
  prob.y = Eigen::VectorXd::Constant(5, 4.0);
  prob.model = [](const Eigen::VectorXd& p) {
    return Eigen::VectorXd::Constant(5, p(0) * p(0));
  };
  prob.params = {{"a", 0.5, -5.0, 5.0}};
  const auto a = multi_start_fit(prob, 6, 7u);
  const auto b = multi_start_fit(prob, 6, 7u);
  REQUIRE(a.size() == b.size());
  for (std::size_t i = 0; i < a.size(); ++i)
    CHECK(a[i].estimates(0) == b[i].estimates(0));
}
