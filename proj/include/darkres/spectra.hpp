#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "darkres/floquet.hpp"
#include "darkres/thermo.hpp"

// Fluorescence spectra: scans of the IR detuning at fixed UV detuning.
// Detunings are kept in user units (MHz, non-angular) in the Spectrum type;
// conversion to rad/us happens when the solver input is assembled.

namespace darkres {

struct Spectrum {
  std::vector<double> detunings_mhz;          // strictly increasing
  std::vector<double> values;                 // fluorescence (model units or counts)
  std::vector<double> sigmas;                 // optional; empty or same length
  std::map<std::string, double> meta;

  void validate() const {
    if (values.size() != detunings_mhz.size())
      throw std::invalid_argument("spectrum field lengths differ");
    if (!sigmas.empty() && sigmas.size() != detunings_mhz.size())
      throw std::invalid_argument("spectrum field lengths differ");
    for (std::size_t i = 1; i < detunings_mhz.size(); ++i)
      if (!(detunings_mhz[i] > detunings_mhz[i - 1]))
        throw std::invalid_argument("detunings must be strictly increasing");
    for (double s : sigmas)
      if (!(s > 0.0)) throw std::invalid_argument("sigmas must be positive");
  }

  std::size_t size() const { return detunings_mhz.size(); }
};

struct IonModel {
  double beta = 0.0;
  double temperature_k = 0.0;
  double weight = 1.0;

  void validate() const {
    if (beta < 0.0 || temperature_k < 0.0 || !(weight > 0.0))
      throw std::invalid_argument("invalid ion model parameters");
  }
};

// Sum of the two P populations; proportional to the collected fluorescence.
inline double fluorescence(const DensityVector& rho) {
  const Eigen::Index n = n_levels;
  const Complex p = rho.data(idx_p_lo * n + idx_p_lo) + rho.data(idx_p_hi * n + idx_p_hi);
  if (std::abs(p.imag()) > 1e-9)
    throw SolverError("fluorescence has a non-real population");
  return p.real();
}

struct ScanParams {
  AtomicSystem sys;
  LaserField uv;
  LaserField ir;
  MagneticField b;
  TrapDrive drive;
  double temperature_k = 0.0;
  FloquetConfig floquet;
};

// One steady-state solve at a given IR detuning (MHz). Thermal dephasing
// from the temperature is added to the laser linewidths before building L0.
inline double fluorescence_at(const ScanParams& p, double delta_ir_mhz) {
  ScanParams local = p;
  local.ir.detuning = mhz_to_rad_us(delta_ir_mhz);
  const DephasingSplit split = thermal_dephasing(p.temperature_k, p.sys);
  const auto pair = build_liouvillian(local.sys, local.uv, local.ir, local.b,
                                      split.share_uv, split.share_ir);
  const DensityVector rho =
      floquet_steady_state(pair.l0, pair.dl, local.drive, local.floquet);
  return fluorescence(rho);
}

inline Spectrum scan_spectrum(const ScanParams& p,
                              const std::vector<double>& grid_mhz) {
  if (grid_mhz.empty()) throw std::invalid_argument("empty detuning grid");
  for (std::size_t i = 1; i < grid_mhz.size(); ++i)
    if (!(grid_mhz[i] > grid_mhz[i - 1]))
      throw std::invalid_argument("detuning grid must be increasing");
  Spectrum s;
  s.detunings_mhz = grid_mhz;
  s.values.resize(grid_mhz.size());
  for (std::size_t i = 0; i < grid_mhz.size(); ++i) {
    try {
      s.values[i] = fluorescence_at(p, grid_mhz[i]);
    } catch (const SolverError& e) {
      throw SolverError("grid point " + std::to_string(i) + " (" +
                        std::to_string(grid_mhz[i]) + " MHz): " + e.what());
    }
  }
  s.meta["beta"] = p.drive.beta;
  s.meta["temperature_k"] = p.temperature_k;
  s.meta["delta_uv_mhz"] = rad_us_to_mhz(p.uv.detuning);
  s.meta["b_gauss"] = p.b.gauss;
  return s;
}

// Weighted sum of single-ion spectra, one (beta, T, weight) per ion.
inline Spectrum multi_ion_spectrum(const std::vector<IonModel>& ions,
                                   const ScanParams& shared,
                                   const std::vector<double>& grid_mhz) {
  if (ions.empty()) throw std::invalid_argument("at least one ion required");
  Spectrum sum;
  for (std::size_t k = 0; k < ions.size(); ++k) {
    ions[k].validate();
    ScanParams p = shared;
    p.drive.beta = ions[k].beta;
    p.temperature_k = ions[k].temperature_k;
    Spectrum s = scan_spectrum(p, grid_mhz);
    if (k == 0) {
      sum = s;
      for (double& v : sum.values) v *= ions[k].weight;
    } else {
      for (std::size_t i = 0; i < s.values.size(); ++i)
        sum.values[i] += ions[k].weight * s.values[i];
    }
    sum.meta["beta_ion" + std::to_string(k)] = ions[k].beta;
    sum.meta["t_ion" + std::to_string(k)] = ions[k].temperature_k;
  }
  sum.meta.erase("beta");
  sum.meta.erase("temperature_k");
  return sum;
}

inline std::vector<double> linear_grid(double min_mhz, double max_mhz, int points) {
  if (points < 2 || !(max_mhz > min_mhz))
    throw std::invalid_argument("bad grid specification");
  std::vector<double> g(points);
  for (int i = 0; i < points; ++i)
    g[i] = min_mhz + (max_mhz - min_mhz) * i / (points - 1);
  return g;
}

// Indices of strict local minima of a sampled curve.
inline std::vector<std::size_t> local_minima(const std::vector<double>& v) {
  std::vector<std::size_t> out;
  for (std::size_t i = 1; i + 1 < v.size(); ++i)
    if (v[i] < v[i - 1] && v[i] < v[i + 1]) out.push_back(i);
  return out;
}

} // namespace darkres
