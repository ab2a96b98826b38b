// Command-line front end: spectrum simulation, dark-resonance fitting,
// micromotion compensation and temperature analysis. All file I/O speaks
// lab units (MHz, gauss, volts, kelvin); see the annotated example config.

#include <iostream>
#include <random>
#include <sstream>

#include <CLI11.hpp>

#include "darkres/io.hpp"
#include "darkres/time_oracle.hpp"

namespace {

using namespace darkres;

constexpr int exit_ok = 0;
constexpr int exit_usage = 1;
constexpr int exit_numerical = 2;

std::vector<double> parse_double_list(const std::string& text) {
  std::vector<double> out;
  std::stringstream ss(text);
  std::string tok;
  while (std::getline(ss, tok, ',')) {
    std::size_t pos = 0;
    const double v = std::stod(tok, &pos);
    if (pos != tok.size()) throw std::invalid_argument("bad number: " + tok);
    out.push_back(v);
  }
  if (out.empty()) throw std::invalid_argument("empty list");
  return out;
}

void write_text(const std::string& path, const std::string& text) {
  if (path.empty() || path == "-") {
    std::cout << text;
    return;
  }
  std::ofstream out(path);
  if (!out) throw CsvError("cannot open for writing: " + path);
  out << text;
}

// Gaussian counts noise on a model spectrum; deterministic for a fixed seed.
void add_noise(Spectrum& s, double sigma_frac, unsigned seed) {
  if (sigma_frac <= 0.0) return;
  std::mt19937 rng(seed);
  s.sigmas.resize(s.values.size());
  for (std::size_t i = 0; i < s.values.size(); ++i) {
    const double sigma = std::max(sigma_frac * std::abs(s.values[i]), 1e-12);
    s.sigmas[i] = sigma;
    s.values[i] += std::normal_distribution<double>(0.0, sigma)(rng);
  }
}

int run_simulate(const std::string& config_path, const std::string& out_path) {
  const RunConfig cfg = read_config(config_path);
  Spectrum s = scan_spectrum(cfg.scan_params(), cfg.scan_grid());
  add_noise(s, cfg.noise_sigma_frac, cfg.noise_seed);
  write_spectrum_csv(out_path, s);
  const auto minima = local_minima(s.values);
  std::cout << "wrote " << s.size() << " points to " << out_path << " ("
            << minima.size() << " local minima)\n";
  return exit_ok;
}

int run_scan_beta(const std::string& config_path, const std::string& betas_arg,
                  const std::string& prefix) {
  const RunConfig cfg = read_config(config_path);
  const auto betas = parse_double_list(betas_arg);
  for (double beta : betas) {
    ScanParams p = cfg.scan_params();
    p.drive.beta = beta;
    Spectrum s = scan_spectrum(p, cfg.scan_grid());
    add_noise(s, cfg.noise_sigma_frac, cfg.noise_seed);
    std::ostringstream name;
    name << prefix << "_beta" << beta << ".csv";
    write_spectrum_csv(name.str(), s);
    std::cout << "wrote " << name.str() << "\n";
  }
  return exit_ok;
}

FitProblem spectrum_problem(const Spectrum& data) {
  FitProblem prob;
  prob.y.resize(data.size());
  for (std::size_t i = 0; i < data.size(); ++i) prob.y(i) = data.values[i];
  if (!data.sigmas.empty()) {
    prob.sigma.resize(data.size());
    for (std::size_t i = 0; i < data.size(); ++i) prob.sigma(i) = data.sigmas[i];
  }
  return prob;
}

int run_fit(const std::string& config_path, const std::string& data_path,
            const std::string& report_path, const std::string& residuals_path,
            int n_ions) {
  const RunConfig cfg = read_config(config_path);
  const Spectrum data = read_spectrum_csv(data_path);
  ScanParams scan = cfg.scan_params();

  const double vmax = *std::max_element(data.values.begin(), data.values.end());
  const double vmin = *std::min_element(data.values.begin(), data.values.end());
  FitProblem prob = spectrum_problem(data);
  std::string report;

  if (n_ions <= 1) {
    SingleIonModelConfig mc{scan, data.detunings_mhz, false};
    prob.model = single_ion_model(mc);
    // coarse beta pre-scan: the model is linear in scale and background, so
    // solve those exactly per trial beta and keep the best chi2 as the start
    double beta0 = cfg.fit_beta_init, scale0 = std::max(4.0 * (vmax - vmin), 1e-6);
    double bg0 = std::max(vmin, 0.0);
    {
      double best = std::numeric_limits<double>::infinity();
      for (double beta = 0.0; beta <= cfg.fit_beta_max + 1e-9; beta += 0.25) {
        ScanParams sp = scan;
        sp.drive.beta = beta;
        sp.temperature_k = cfg.fit_temperature_init_k;
        Eigen::VectorXd f(prob.y.size());
        for (Eigen::Index i = 0; i < prob.y.size(); ++i)
          f(i) = fluorescence_at(sp, data.detunings_mhz[size_t(i)]);
        Eigen::MatrixXd a(prob.y.size(), 2);
        a.col(0) = f;
        a.col(1).setOnes();
        const Eigen::VectorXd c = a.colPivHouseholderQr().solve(prob.y);
        const double chi2 = (prob.y - a * c).squaredNorm();
        if (chi2 < best && c(0) > 0.0) {
          best = chi2;
          beta0 = beta;
          scale0 = c(0);
          bg0 = std::max(c(1), 0.0);
        }
      }
    }
    prob.params = {
        {"beta", beta0, 0.0, cfg.fit_beta_max},
        {"temperature_k", cfg.fit_temperature_init_k, 0.0, cfg.fit_temperature_max_k},
        {"scale", scale0, 0.0, 1e12},
        {"background", bg0, 0.0, 1e12},
        {"offset_mhz", 0.0, -5.0, 5.0}};
    const FitResult res = fit(prob);
    report = format_fit_report(res, "single-ion dark resonance spectrum");
    if (!residuals_path.empty())
      write_residuals_csv(residuals_path, data.detunings_mhz,
                          residuals(prob, res.estimates));
  } else {
    prob.model = multi_ion_model(scan, data.detunings_mhz, n_ions);
    for (int k = 0; k < n_ions; ++k) {
      const std::string tag = std::to_string(k + 1);
      prob.params.push_back({"beta" + tag, cfg.fit_beta_init * (k + 1) / n_ions,
                             0.0, cfg.fit_beta_max});
      prob.params.push_back({"temperature_k" + tag, cfg.fit_temperature_init_k,
                             0.0, cfg.fit_temperature_max_k});
      prob.params.push_back({"weight" + tag, 1.0, 0.1, 10.0});
    }
    prob.params.push_back(
        {"scale", std::max(2.0 * (vmax - vmin), 1e-6), 0.0, 1e12});
    prob.params.push_back({"background", std::max(vmin, 0.0), 0.0, 1e12});
    const auto all = multi_start_fit(prob, cfg.fit_multi_starts, cfg.fit_seed);
    const auto minima = distinct_minima(all);
    std::ostringstream out;
    out << "# multi-ion fit: " << n_ions << " ions, " << cfg.fit_multi_starts
        << " starts, " << minima.size() << " distinct local minima\n";
    for (std::size_t i = 0; i < minima.size(); ++i)
      out << "\n"
          << format_fit_report(minima[i],
                               "local minimum " + std::to_string(i + 1));
    report = out.str();
    if (!residuals_path.empty())
      write_residuals_csv(residuals_path, data.detunings_mhz,
                          residuals(prob, minima.front().estimates));
  }
  write_text(report_path, report);
  return exit_ok;
}

int run_fit_hyperbola(const std::string& data_path,
                      const std::string& report_path) {
  const auto pts = read_beta_voltage_csv(data_path);
  if (pts.size() < 4)
    throw std::invalid_argument("hyperbola fit needs at least 4 points");
  std::vector<double> voltages;
  FitProblem prob;
  prob.y.resize(pts.size());
  prob.sigma.resize(pts.size());
  double bmin = pts[0].beta;
  double v_at_min = pts[0].voltage;
  for (std::size_t i = 0; i < pts.size(); ++i) {
    voltages.push_back(pts[i].voltage);
    prob.y(i) = pts[i].beta;
    prob.sigma(i) = pts[i].sigma;
    if (pts[i].beta < bmin) {
      bmin = pts[i].beta;
      v_at_min = pts[i].voltage;
    }
  }
  prob.model = hyperbola_model_on(voltages);
  const double span =
      *std::max_element(voltages.begin(), voltages.end()) -
      *std::min_element(voltages.begin(), voltages.end());
  prob.params = {
      {"a", 2.0 * (*std::max_element(pts.begin(), pts.end(),
                                     [](const auto& x, const auto& y) {
                                       return x.beta < y.beta;
                                     })).beta / std::max(span, 1e-6),
       1e-6, 1e6},
      {"v0", v_at_min, v_at_min - span, v_at_min + span},
      {"beta_min", std::max(bmin, 1e-6), 0.0, 1e3}};
  const FitResult res = fit(prob);
  write_text(report_path,
             format_fit_report(res, "micromotion compensation hyperbola"));
  return exit_ok;
}

int run_fit_temperature(const std::string& data_path,
                        const std::string& report_path, bool no_rf) {
  const auto pts = read_temperature_csv(data_path);
  ThermoParams base;
  base.saturation = std::pow(mhz_to_rad_us(2.0) / 2.0, 2);
  const FitResult res = fit_temperature_model(pts, !no_rf, base);
  write_text(report_path,
             format_fit_report(res, no_rf ? "stationary temperature, no RF term"
                                          : "stationary temperature with RF heating"));
  return exit_ok;
}

int run_oracle_check(const std::string& config_path, int n_detunings) {
  const RunConfig cfg = read_config(config_path);
  ScanParams p = cfg.scan_params();
  const DephasingSplit split = thermal_dephasing(p.temperature_k, p.sys);
  const auto grid = linear_grid(cfg.scan_min_mhz, cfg.scan_max_mhz,
                                std::max(n_detunings, 2));
  PropagationConfig pcfg;
  pcfg.steps_per_period = cfg.oracle_steps_per_period;
  pcfg.t_transient = cfg.oracle_transient_us;
  pcfg.n_periods_average = cfg.oracle_average_periods;

  double worst = 0.0;
  double worst_det = grid.front();
  for (double det : grid) {
    ScanParams local = p;
    local.ir.detuning = mhz_to_rad_us(det);
    const auto pair = build_liouvillian(local.sys, local.uv, local.ir, local.b,
                                        split.share_uv, split.share_ir);
    const auto rho_f =
        floquet_steady_state(pair.l0, pair.dl, local.drive, local.floquet);
    const auto traj =
        propagate(pair.l0, pair.dl, local.drive, default_initial_state(), pcfg);
    const auto rho_t = period_average(traj, local.drive);
    for (int i = 0; i < n_levels; ++i) {
      const double d = std::abs(rho_f.population(i) - rho_t.population(i));
      if (d > worst) {
        worst = d;
        worst_det = det;
      }
    }
  }
  std::cout << "# oracle check: harmonic solver vs time-domain integration\n"
            << "beta = " << p.drive.beta << "\n"
            << "n_max = " << p.floquet.n_max << "\n"
            << "detunings = " << grid.size() << "\n"
            << "max_population_deviation = " << worst << "\n"
            << "at_detuning_mhz = " << worst_det << "\n";
  return exit_ok;
}

} // namespace

int main(int argc, char** argv) {
  CLI::App app{"dark-resonance spectra of an RF-modulated trapped ion"};
  app.require_subcommand(1);

  std::string config_path, data_path, out_path = "spectrum.csv";
  std::string report_path = "-", residuals_path, betas_arg, prefix = "scan";
  int n_ions = 1, n_detunings = 10;
  bool no_rf = false;

  auto* simulate = app.add_subcommand("simulate", "config -> spectrum CSV");
  simulate->add_option("-c,--config", config_path, "run configuration")->required();
  simulate->add_option("-o,--output", out_path, "output spectrum CSV");

  auto* fit_cmd = app.add_subcommand("fit", "config + data CSV -> fit report");
  fit_cmd->add_option("-c,--config", config_path)->required();
  fit_cmd->add_option("-d,--data", data_path, "spectrum CSV")->required();
  fit_cmd->add_option("-r,--report", report_path, "report path ('-' = stdout)");
  fit_cmd->add_option("--residuals", residuals_path, "residuals CSV");
  fit_cmd->add_option("--ions", n_ions, "number of ions (>1 uses multi-start)");

  auto* scan_beta = app.add_subcommand("scan-beta", "spectra for a list of beta");
  scan_beta->add_option("-c,--config", config_path)->required();
  scan_beta->add_option("-b,--betas", betas_arg, "comma-separated list")->required();
  scan_beta->add_option("-p,--prefix", prefix, "output file prefix");

  auto* hyp = app.add_subcommand("fit-hyperbola", "beta-vs-voltage CSV -> vertex fit");
  hyp->add_option("-d,--data", data_path)->required();
  hyp->add_option("-r,--report", report_path);

  auto* temp = app.add_subcommand("fit-temperature", "T-vs-beta CSV -> heating fit");
  temp->add_option("-d,--data", data_path)->required();
  temp->add_option("-r,--report", report_path);
  temp->add_flag("--no-rf", no_rf, "fit with the RF heating term removed");

  auto* oracle = app.add_subcommand("oracle-check",
                                    "compare harmonic and time-domain solvers");
  oracle->add_option("-c,--config", config_path)->required();
  oracle->add_option("-n,--detunings", n_detunings, "number of test detunings");

  if (argc <= 1) {
    std::cerr << app.help();
    return exit_usage;
  }
  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? exit_ok : exit_usage;
  }

  try {
    if (simulate->parsed()) return run_simulate(config_path, out_path);
    if (fit_cmd->parsed())
      return run_fit(config_path, data_path, report_path, residuals_path, n_ions);
    if (scan_beta->parsed()) return run_scan_beta(config_path, betas_arg, prefix);
    if (hyp->parsed()) return run_fit_hyperbola(data_path, report_path);
    if (temp->parsed()) return run_fit_temperature(data_path, report_path, no_rf);
    if (oracle->parsed()) return run_oracle_check(config_path, n_detunings);
  } catch (const SolverError& e) {
    std::cerr << "numerical failure: " << e.what() << "\n";
    return exit_numerical;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return exit_usage;
  }
  return exit_usage;
}
