#pragma once

#include <cmath>
#include <numbers>

// Unit convention used throughout the library: every frequency-like quantity
// is an angular frequency in rad/us. User-facing files and CLI talk in plain
// MHz; conversion happens at the boundary only (value_rad_us = 2*pi*MHz,
// since 1 MHz = 1/us). Lengths in nm where noted, magnetic field in gauss,
// temperatures in kelvin, powers in J/s.

namespace darkres {

inline constexpr double pi = std::numbers::pi;
inline constexpr double two_pi = 2.0 * pi;

// CODATA 2018
inline constexpr double hbar_si = 1.054571817e-34;       // J s
inline constexpr double k_boltzmann_si = 1.380649e-23;   // J/K
inline constexpr double atomic_mass_si = 1.66053906660e-27;  // kg
inline constexpr double bohr_magneton_si = 9.2740100783e-24; // J/T

// mu_B expressed as an angular frequency per gauss: 2*pi x 1.3996 MHz/G.
inline constexpr double bohr_magneton_rad_us_per_gauss =
    two_pi * bohr_magneton_si / (6.62607015e-34) * 1.0e-10; // 1e-4 T/G, 1e-6 MHz/Hz

inline constexpr double mhz_to_rad_us(double mhz) { return two_pi * mhz; }
inline constexpr double rad_us_to_mhz(double w) { return w / two_pi; }

// rad/us -> rad/s
inline constexpr double rad_us_to_si(double w) { return w * 1.0e6; }

} // namespace darkres
