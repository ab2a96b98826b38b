#pragma once

#include <fstream>
#include <iomanip>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "darkres/fitting.hpp"

// Config and CSV boundary. Files speak lab units: plain MHz, gauss, volts,
// kelvin. Everything is converted to angular rad/us on the way in.

namespace darkres {

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class CsvError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Run configuration in user units, with defaults matching the reference
// experimental setup. Rabi frequencies are required: they are free
// parameters of the experiment and have no principled default.
struct RunConfig {
  // [atom]
  double mass_amu = 40.0;
  double gamma_total_mhz = 22.4;
  double branching_s = 0.94;
  double branching_d = 0.06;
  double g_s = 2.0;
  double g_p = 2.0 / 3.0;
  double g_d = 4.0 / 5.0;
  double lambda_uv_nm = 397.0;
  double lambda_ir_nm = 866.0;
  // [uv], [ir]
  double uv_rabi_mhz = 0.0; // required
  double uv_detuning_mhz = -25.0;
  double uv_linewidth_mhz = 0.1;
  double uv_pol_sigma_minus = std::sqrt(0.5);
  double uv_pol_sigma_plus = std::sqrt(0.5);
  double ir_rabi_mhz = 0.0; // required
  double ir_detuning_mhz = 0.0;
  double ir_linewidth_mhz = 0.1;
  double ir_pol_sigma_minus = std::sqrt(0.5);
  double ir_pol_sigma_plus = std::sqrt(0.5);
  // [field]
  double b_gauss = 4.0;
  // [drive]
  double omega_rf_mhz = 22.1;
  double beta = 0.0;
  // [scan]
  double scan_min_mhz = -40.0;
  double scan_max_mhz = 40.0;
  int scan_points = 400;
  double temperature_k = 0.5e-3;
  // [solver]
  int n_max = 5;
  // [oracle]
  int oracle_steps_per_period = 80;
  double oracle_transient_us = 60.0;
  int oracle_average_periods = 20;
  // [noise]
  double noise_sigma_frac = 0.0;
  unsigned noise_seed = 1;
  // [fit]
  double fit_beta_init = 1.0;
  double fit_beta_max = 6.0;
  double fit_temperature_init_k = 0.5e-3;
  double fit_temperature_max_k = 0.05;
  int fit_multi_starts = 8;
  unsigned fit_seed = 12345;

  AtomicSystem atomic_system() const {
    AtomicSystem sys;
    sys.mass_amu = mass_amu;
    sys.gamma_total = mhz_to_rad_us(gamma_total_mhz);
    sys.branching_s = branching_s;
    sys.branching_d = branching_d;
    sys.g_s = g_s;
    sys.g_p = g_p;
    sys.g_d = g_d;
    sys.lambda_uv_nm = lambda_uv_nm;
    sys.lambda_ir_nm = lambda_ir_nm;
    sys.validate();
    return sys;
  }

  LaserField uv_laser() const {
    LaserField uv;
    uv.label = LaserLabel::UV;
    uv.rabi = mhz_to_rad_us(uv_rabi_mhz);
    uv.detuning = mhz_to_rad_us(uv_detuning_mhz);
    uv.linewidth = mhz_to_rad_us(uv_linewidth_mhz);
    uv.wavelength_nm = lambda_uv_nm;
    uv.pol_sigma_minus = uv_pol_sigma_minus;
    uv.pol_sigma_plus = uv_pol_sigma_plus;
    uv.validate();
    return uv;
  }

  LaserField ir_laser() const {
    LaserField ir;
    ir.label = LaserLabel::IR;
    ir.rabi = mhz_to_rad_us(ir_rabi_mhz);
    ir.detuning = mhz_to_rad_us(ir_detuning_mhz);
    ir.linewidth = mhz_to_rad_us(ir_linewidth_mhz);
    ir.wavelength_nm = lambda_ir_nm;
    ir.pol_sigma_minus = ir_pol_sigma_minus;
    ir.pol_sigma_plus = ir_pol_sigma_plus;
    ir.validate();
    return ir;
  }

  ScanParams scan_params() const {
    ScanParams p;
    p.sys = atomic_system();
    p.uv = uv_laser();
    p.ir = ir_laser();
    p.b = MagneticField{b_gauss};
    p.b.validate();
    p.drive = TrapDrive{mhz_to_rad_us(omega_rf_mhz), beta};
    p.drive.validate();
    p.temperature_k = temperature_k;
    p.floquet = FloquetConfig{n_max};
    return p;
  }

  std::vector<double> scan_grid() const {
    return linear_grid(scan_min_mhz, scan_max_mhz, scan_points);
  }
};

namespace detail {

struct ConfigEntry {
  std::string value;
  int line = 0;
};

using ConfigTable = std::map<std::string, ConfigEntry>; // "section.key"

inline ConfigTable parse_config_table(const std::string& text) {
  ConfigTable table;
  std::istringstream in(text);
  std::string line, section;
  int lineno = 0;
  auto trim = [](std::string s) {
    const auto a = s.find_first_not_of(" \t\r");
    if (a == std::string::npos) return std::string{};
    const auto b = s.find_last_not_of(" \t\r");
    return s.substr(a, b - a + 1);
  };
  while (std::getline(in, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    if (line.front() == '[') {
      if (line.back() != ']')
        throw ConfigError("line " + std::to_string(lineno) + ": malformed section");
      section = trim(line.substr(1, line.size() - 2));
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw ConfigError("line " + std::to_string(lineno) + ": expected key = value");
    const std::string key = section + "." + trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    if (auto it = table.find(key); it != table.end())
      throw ConfigError("duplicate key '" + key + "' at lines " +
                        std::to_string(it->second.line) + " and " +
                        std::to_string(lineno));
    table[key] = {value, lineno};
  }
  return table;
}

inline double to_double(const std::string& key, const ConfigEntry& e) {
  std::size_t pos = 0;
  double v = 0.0;
  try {
    v = std::stod(e.value, &pos);
  } catch (const std::exception&) {
    throw ConfigError("line " + std::to_string(e.line) + ": key '" + key +
                      "' has non-numeric value '" + e.value + "'");
  }
  if (pos != e.value.size())
    throw ConfigError("line " + std::to_string(e.line) + ": key '" + key +
                      "' has trailing junk in '" + e.value + "'");
  return v;
}

} // namespace detail

// Sectioned key = value format with '#' comments. Unknown keys are errors.
// Required keys: uv.rabi_mhz and ir.rabi_mhz; everything else defaults.
inline RunConfig parse_config(const std::string& text) {
  const auto table = detail::parse_config_table(text);
  RunConfig cfg;
  std::map<std::string, std::function<void(double)>> setters = {
      {"atom.mass_amu", [&](double v) { cfg.mass_amu = v; }},
      {"atom.gamma_total_mhz", [&](double v) { cfg.gamma_total_mhz = v; }},
      {"atom.branching_s", [&](double v) { cfg.branching_s = v; }},
      {"atom.branching_d", [&](double v) { cfg.branching_d = v; }},
      {"atom.g_s", [&](double v) { cfg.g_s = v; }},
      {"atom.g_p", [&](double v) { cfg.g_p = v; }},
      {"atom.g_d", [&](double v) { cfg.g_d = v; }},
      {"atom.lambda_uv_nm", [&](double v) { cfg.lambda_uv_nm = v; }},
      {"atom.lambda_ir_nm", [&](double v) { cfg.lambda_ir_nm = v; }},
      {"uv.rabi_mhz", [&](double v) { cfg.uv_rabi_mhz = v; }},
      {"uv.detuning_mhz", [&](double v) { cfg.uv_detuning_mhz = v; }},
      {"uv.linewidth_mhz", [&](double v) { cfg.uv_linewidth_mhz = v; }},
      {"uv.pol_sigma_minus", [&](double v) { cfg.uv_pol_sigma_minus = v; }},
      {"uv.pol_sigma_plus", [&](double v) { cfg.uv_pol_sigma_plus = v; }},
      {"ir.rabi_mhz", [&](double v) { cfg.ir_rabi_mhz = v; }},
      {"ir.detuning_mhz", [&](double v) { cfg.ir_detuning_mhz = v; }},
      {"ir.linewidth_mhz", [&](double v) { cfg.ir_linewidth_mhz = v; }},
      {"ir.pol_sigma_minus", [&](double v) { cfg.ir_pol_sigma_minus = v; }},
      {"ir.pol_sigma_plus", [&](double v) { cfg.ir_pol_sigma_plus = v; }},
      {"field.b_gauss", [&](double v) { cfg.b_gauss = v; }},
      {"drive.omega_rf_mhz", [&](double v) { cfg.omega_rf_mhz = v; }},
      {"drive.beta", [&](double v) { cfg.beta = v; }},
      {"scan.min_mhz", [&](double v) { cfg.scan_min_mhz = v; }},
      {"scan.max_mhz", [&](double v) { cfg.scan_max_mhz = v; }},
      {"scan.points", [&](double v) { cfg.scan_points = int(v); }},
      {"scan.temperature_k", [&](double v) { cfg.temperature_k = v; }},
      {"solver.n_max", [&](double v) { cfg.n_max = int(v); }},
      {"oracle.steps_per_period",
       [&](double v) { cfg.oracle_steps_per_period = int(v); }},
      {"oracle.transient_us", [&](double v) { cfg.oracle_transient_us = v; }},
      {"oracle.average_periods",
       [&](double v) { cfg.oracle_average_periods = int(v); }},
      {"noise.sigma_frac", [&](double v) { cfg.noise_sigma_frac = v; }},
      {"noise.seed", [&](double v) { cfg.noise_seed = unsigned(v); }},
      {"fit.beta_init", [&](double v) { cfg.fit_beta_init = v; }},
      {"fit.beta_max", [&](double v) { cfg.fit_beta_max = v; }},
      {"fit.temperature_init_k",
       [&](double v) { cfg.fit_temperature_init_k = v; }},
      {"fit.temperature_max_k",
       [&](double v) { cfg.fit_temperature_max_k = v; }},
      {"fit.multi_starts", [&](double v) { cfg.fit_multi_starts = int(v); }},
      {"fit.seed", [&](double v) { cfg.fit_seed = unsigned(v); }},
  };
  for (const auto& [key, entry] : table) {
    auto it = setters.find(key);
    if (it == setters.end())
      throw ConfigError("line " + std::to_string(entry.line) +
                        ": unknown key '" + key + "'");
    it->second(detail::to_double(key, entry));
  }
  const std::vector<std::string> required = {"uv.rabi_mhz", "ir.rabi_mhz"};
  std::string missing;
  for (const auto& key : required)
    if (!table.count(key)) missing += (missing.empty() ? "" : ", ") + key;
  if (!missing.empty())
    throw ConfigError("missing required keys: " + missing);
  // range checks beyond the type invariants
  if (cfg.scan_points < 2) throw ConfigError("scan.points must be >= 2");
  if (cfg.temperature_k < 0.0) throw ConfigError("scan.temperature_k must be >= 0");
  if (cfg.beta < 0.0) throw ConfigError("drive.beta must be >= 0");
  cfg.scan_params(); // triggers the downstream invariant checks
  return cfg;
}

inline RunConfig read_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file: " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str());
}

// --- CSV -------------------------------------------------------------------

namespace detail {

inline std::vector<std::string> split_csv_row(const std::string& line) {
  std::vector<std::string> fields;
  std::string field;
  std::istringstream ss(line);
  while (std::getline(ss, field, ',')) {
    const auto a = field.find_first_not_of(" \t\r");
    const auto b = field.find_last_not_of(" \t\r");
    fields.push_back(a == std::string::npos ? "" : field.substr(a, b - a + 1));
  }
  return fields;
}

struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<double>> rows;
  std::vector<int> line_numbers;
};

inline CsvTable read_csv_table(const std::string& path,
                               const std::vector<std::string>& expected_header,
                               std::size_t min_columns) {
  std::ifstream in(path);
  if (!in) throw CsvError("cannot open CSV file: " + path);
  CsvTable table;
  std::string line;
  int lineno = 0;
  bool have_header = false;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line.front() == '#') continue;
    const auto fields = split_csv_row(line);
    if (!have_header) {
      if (fields.size() < min_columns ||
          !std::equal(expected_header.begin(),
                      expected_header.begin() + min_columns, fields.begin()))
        throw CsvError(path + ": expected header starting with '" +
                       [&] {
                         std::string h;
                         for (std::size_t i = 0; i < min_columns; ++i)
                           h += (i ? "," : "") + expected_header[i];
                         return h;
                       }() + "'");
      table.header = fields;
      have_header = true;
      continue;
    }
    std::vector<double> row;
    for (const auto& f : fields) {
      try {
        std::size_t pos = 0;
        row.push_back(std::stod(f, &pos));
        if (pos != f.size()) throw std::invalid_argument("junk");
      } catch (const std::exception&) {
        throw CsvError(path + ": malformed row at line " + std::to_string(lineno));
      }
    }
    if (row.size() < min_columns)
      throw CsvError(path + ": too few columns at line " + std::to_string(lineno));
    table.rows.push_back(row);
    table.line_numbers.push_back(lineno);
  }
  if (!have_header) throw CsvError(path + ": missing header row");
  return table;
}

} // namespace detail

// Schema: detuning_mhz,counts,counts_err with '#' comments; the error
// column is optional. Rows are sorted by detuning on load.
inline Spectrum read_spectrum_csv(const std::string& path) {
  const auto table = detail::read_csv_table(
      path, {"detuning_mhz", "counts", "counts_err"}, 2);
  const bool has_err = table.header.size() >= 3;
  std::vector<std::vector<double>> rows = table.rows;
  std::stable_sort(rows.begin(), rows.end(),
                   [](const auto& a, const auto& b) { return a[0] < b[0]; });
  Spectrum s;
  for (const auto& row : rows) {
    if (!s.detunings_mhz.empty() && row[0] <= s.detunings_mhz.back())
      throw CsvError(path + ": duplicate detuning value " + std::to_string(row[0]));
    s.detunings_mhz.push_back(row[0]);
    s.values.push_back(row[1]);
    if (has_err && row.size() >= 3) {
      if (!(row[2] > 0.0))
        throw CsvError(path + ": non-positive uncertainty " + std::to_string(row[2]));
      s.sigmas.push_back(row[2]);
    }
  }
  if (!s.sigmas.empty() && s.sigmas.size() != s.values.size())
    throw CsvError(path + ": inconsistent error column");
  s.validate();
  return s;
}

inline void write_spectrum_csv(const std::string& path, const Spectrum& s) {
  s.validate();
  std::ofstream out(path);
  if (!out) throw CsvError("cannot open for writing: " + path);
  out << std::setprecision(17);
  for (const auto& [k, v] : s.meta) out << "# " << k << " = " << v << "\n";
  out << "detuning_mhz,counts" << (s.sigmas.empty() ? "" : ",counts_err") << "\n";
  for (std::size_t i = 0; i < s.size(); ++i) {
    out << s.detunings_mhz[i] << "," << s.values[i];
    if (!s.sigmas.empty()) out << "," << s.sigmas[i];
    out << "\n";
  }
}

struct BetaVoltagePoint {
  double voltage = 0.0;
  double beta = 0.0;
  double sigma = 0.0;
};

// Schema: voltage_v,beta,beta_err
inline std::vector<BetaVoltagePoint> read_beta_voltage_csv(const std::string& path) {
  const auto table =
      detail::read_csv_table(path, {"voltage_v", "beta", "beta_err"}, 3);
  std::vector<BetaVoltagePoint> pts;
  for (const auto& row : table.rows) pts.push_back({row[0], row[1], row[2]});
  return pts;
}

inline void write_beta_voltage_csv(const std::string& path,
                                   const std::vector<BetaVoltagePoint>& pts) {
  std::ofstream out(path);
  if (!out) throw CsvError("cannot open for writing: " + path);
  out << std::setprecision(17) << "voltage_v,beta,beta_err\n";
  for (const auto& p : pts)
    out << p.voltage << "," << p.beta << "," << p.sigma << "\n";
}

// Schema: beta,temp_k,temp_err_k
inline std::vector<TemperaturePoint> read_temperature_csv(const std::string& path) {
  const auto table =
      detail::read_csv_table(path, {"beta", "temp_k", "temp_err_k"}, 3);
  std::vector<TemperaturePoint> pts;
  for (const auto& row : table.rows) pts.push_back({row[0], row[1], row[2]});
  return pts;
}

inline void write_temperature_csv(const std::string& path,
                                  const std::vector<TemperaturePoint>& pts) {
  std::ofstream out(path);
  if (!out) throw CsvError("cannot open for writing: " + path);
  out << std::setprecision(17) << "beta,temp_k,temp_err_k\n";
  for (const auto& p : pts)
    out << p.beta << "," << p.temperature_k << "," << p.sigma_k << "\n";
}

inline void write_residuals_csv(const std::string& path,
                                const std::vector<double>& grid,
                                const Eigen::VectorXd& res,
                                const std::string& x_name = "detuning_mhz") {
  std::ofstream out(path);
  if (!out) throw CsvError("cannot open for writing: " + path);
  out << std::setprecision(17) << x_name << ",residual\n";
  for (std::size_t i = 0; i < grid.size(); ++i)
    out << grid[i] << "," << res(static_cast<Eigen::Index>(i)) << "\n";
}

inline std::string format_fit_report(const FitResult& r,
                                     const std::string& title) {
  std::ostringstream out;
  out << std::setprecision(10);
  out << "# fit report: " << title << "\n";
  out << "converged = " << (r.converged ? "yes" : "no") << "\n";
  out << "chi2 = " << r.chi2 << "\n";
  out << "reduced_chi2 = " << r.reduced_chi2 << "\n";
  out << "n_evals = " << r.n_evals << "\n";
  out << "iterations = " << r.n_iterations << "\n";
  if (r.unit_weights) out << "weights = unit (no uncertainties supplied)\n";
  if (!r.covariance_valid) out << "covariance = invalid (singular Hessian)\n";
  for (std::size_t i = 0; i < r.names.size(); ++i) {
    out << r.names[i] << " = " << r.estimates(static_cast<Eigen::Index>(i))
        << " +- " << r.std_errors(static_cast<Eigen::Index>(i)) << "\n";
  }
  return out.str();
}

} // namespace darkres
