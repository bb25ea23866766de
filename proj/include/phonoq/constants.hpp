#pragma once

#include <cmath>
#include <numbers>

namespace phonoq {

// CODATA 2018 exact values.
inline constexpr double kPlanck = 6.62607015e-34;          // J s
inline constexpr double kHbar = kPlanck / (2.0 * std::numbers::pi);
inline constexpr double kBoltzmann = 1.380649e-23;         // J/K
inline constexpr double kElectronVolt = 1.602176634e-19;   // J
inline constexpr double kPi = std::numbers::pi;
inline constexpr double kTwoPi = 2.0 * std::numbers::pi;
inline constexpr double kEulerGamma = std::numbers::egamma;

// Unit conversions. Files and CLI flags are SI; rates are kept in rad/s.
inline constexpr double hz_to_rad(double f_hz) { return kTwoPi * f_hz; }
inline constexpr double rad_to_hz(double w) { return w / kTwoPi; }
inline constexpr double ev_to_joule(double ev) { return ev * kElectronVolt; }
inline constexpr double joule_to_ev(double j) { return j / kElectronVolt; }

inline double db_to_linear(double db) { return std::pow(10.0, db / 10.0); }
inline double linear_to_db(double ratio) { return 10.0 * std::log10(ratio); }
inline double dbm_to_watt(double dbm) { return 1e-3 * std::pow(10.0, dbm / 10.0); }
inline double watt_to_dbm(double w) { return 10.0 * std::log10(w / 1e-3); }

// hf / (2 k_B T), the argument of every thermal tanh/coth in the models.
inline double half_reduced_energy(double f_hz, double temp_k) {
  return kPlanck * f_hz / (2.0 * kBoltzmann * temp_k);
}

// Bose occupation 1 / (exp(E/kT) - 1) for an energy in joules.
inline double planck_occupation(double energy_j, double temp_k) {
  if (temp_k <= 0.0) return 0.0;
  return 1.0 / std::expm1(energy_j / (kBoltzmann * temp_k));
}

}  // namespace phonoq
