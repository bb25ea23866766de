#pragma once

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>
#include <vector>

#include "constants.hpp"
#include "fit.hpp"

namespace phonoq {

enum class NoiseForm { full, classical };

// Noise power delivered by a matched resistor into a matched load.
inline double johnson_noise_power(double temp, double bandwidth, double f, NoiseForm form = NoiseForm::full) {
  if (!(temp >= 0.0 && bandwidth > 0.0 && f > 0.0))
    throw std::invalid_argument("johnson_noise_power: need T >= 0, bandwidth > 0, f > 0");
  if (form == NoiseForm::classical) return kBoltzmann * temp * bandwidth;
  const double hf2 = 0.5 * kPlanck * f;
  if (temp == 0.0) return bandwidth * hf2;
  return bandwidth * hf2 / std::tanh(hf2 / (kBoltzmann * temp));
}

// Added noise quanta of an amplifier with noise temperature t_n.
inline double noise_quanta_from_temperature(double t_n, double f) { return kBoltzmann * t_n / (kPlanck * f); }

struct NoiseSweep {
  std::vector<double> temperatures;          // K
  std::vector<double> frequencies;           // Hz
  std::vector<std::vector<double>> p_out;    // W, [temperature][frequency]
  double bandwidth = 1e6;                    // Hz

  void validate() const {
    if (temperatures.size() < 2) throw std::invalid_argument("noise sweep: need at least 2 temperatures");
    if (frequencies.empty()) throw std::invalid_argument("noise sweep: need at least 1 frequency");
    if (!(bandwidth > 0.0)) throw std::invalid_argument("noise sweep: bandwidth must be > 0");
    if (p_out.size() != temperatures.size())
      throw std::invalid_argument("noise sweep: one spectrum per temperature required");
    for (std::size_t i = 0; i < p_out.size(); ++i) {
      if (!(temperatures[i] > 0.0)) throw std::invalid_argument("noise sweep: temperatures must be > 0");
      if (p_out[i].size() != frequencies.size())
        throw std::invalid_argument("noise sweep: spectrum " + std::to_string(i) + " has wrong length");
      for (double p : p_out[i])
        if (!(p > 0.0) || !std::isfinite(p)) throw std::invalid_argument("noise sweep: powers must be > 0");
    }
  }
};

struct GainResult {
  std::vector<double> frequencies;
  std::vector<double> gain;        // linear
  std::vector<double> gain_db;
  std::vector<double> gain_sigma_db;
  std::vector<double> n_sys;
  std::vector<double> n_sys_sigma;
};

struct LineFit {
  double slope = 0.0, intercept = 0.0, sigma_slope = 0.0, sigma_intercept = 0.0;
};

// Weighted straight line y = a + b x with weights w = 1 / sigma^2 (relative scale).
inline LineFit weighted_line(const std::vector<double>& x, const std::vector<double>& y, const std::vector<double>& w) {
  const std::size_t n = x.size();
  if (n < 2 || y.size() != n || w.size() != n) throw std::invalid_argument("weighted_line: need >= 2 matched points");
  double s = 0, sx = 0, sy = 0;
  for (std::size_t i = 0; i < n; ++i) {
    s += w[i];
    sx += w[i] * x[i];
    sy += w[i] * y[i];
  }
  const double xm = sx / s, ym = sy / s;
  double sxx = 0, sxy = 0;
  for (std::size_t i = 0; i < n; ++i) {
    sxx += w[i] * (x[i] - xm) * (x[i] - xm);
    sxy += w[i] * (x[i] - xm) * (y[i] - ym);
  }
  if (!(sxx > 0.0)) throw std::invalid_argument("weighted_line: x values are all equal");
  LineFit out;
  out.slope = sxy / sxx;
  out.intercept = ym - out.slope * xm;
  if (n > 2) {
    double chi2 = 0;
    for (std::size_t i = 0; i < n; ++i) {
      const double r = y[i] - out.intercept - out.slope * x[i];
      chi2 += w[i] * r * r;
    }
    const double s2 = chi2 / static_cast<double>(n - 2);
    out.sigma_slope = std::sqrt(s2 / sxx);
    out.sigma_intercept = std::sqrt(s2 * (1.0 / s + xm * xm / sxx));
  }
  return out;
}

// Y-factor gain: slope of P_out against the load's noise power, per frequency.
inline GainResult gain_from_noise_sweep(const NoiseSweep& sw, NoiseForm form = NoiseForm::full) {
  sw.validate();
  GainResult out;
  const std::size_t nt = sw.temperatures.size();
  for (std::size_t j = 0; j < sw.frequencies.size(); ++j) {
    const double f = sw.frequencies[j];
    std::vector<double> x(nt), y(nt), w(nt);
    for (std::size_t i = 0; i < nt; ++i) {
      x[i] = johnson_noise_power(sw.temperatures[i], sw.bandwidth, f, form);
      y[i] = sw.p_out[i][j];
      w[i] = 1.0 / (y[i] * y[i]);  // fractional measurement noise
    }
    const auto [lo, hi] = std::minmax_element(x.begin(), x.end());
    if (*hi < 3.0 * *lo)
      throw std::invalid_argument("gain_from_noise_sweep: load noise must span at least a factor 3");
    const LineFit lf = weighted_line(x, y, w);
    if (!(lf.slope > 0.0))
      throw fit::fit_error("gain_from_noise_sweep: non-positive slope at " + std::to_string(f) + " Hz");
    const double quantum = kPlanck * f * sw.bandwidth;
    out.frequencies.push_back(f);
    out.gain.push_back(lf.slope);
    out.gain_db.push_back(linear_to_db(lf.slope));
    out.gain_sigma_db.push_back(10.0 / std::log(10.0) * lf.sigma_slope / lf.slope);
    const double n = lf.intercept / (lf.slope * quantum);
    out.n_sys.push_back(n);
    const double rel = std::hypot(lf.sigma_intercept / lf.intercept, lf.sigma_slope / lf.slope);
    out.n_sys_sigma.push_back(std::abs(n) * rel);
  }
  return out;
}

// Linear interpolation of (x, y) at xq; throws outside the grid.
inline double interp_linear(const std::vector<double>& x, const std::vector<double>& y, double xq) {
  if (x.empty() || x.size() != y.size()) throw std::invalid_argument("interp_linear: bad grid");
  const double tol = 1e-9 * std::max(std::abs(x.front()), std::abs(x.back()));
  if (xq < x.front() - tol || xq > x.back() + tol)
    throw std::out_of_range("interp_linear: " + std::to_string(xq) + " outside [" + std::to_string(x.front()) +
                            ", " + std::to_string(x.back()) + "]");
  if (x.size() == 1) return y.front();
  auto it = std::upper_bound(x.begin(), x.end(), xq);
  std::size_t k = static_cast<std::size_t>(std::distance(x.begin(), it));
  k = std::clamp<std::size_t>(k, 1, x.size() - 1);
  const double t = (xq - x[k - 1]) / (x[k] - x[k - 1]);
  return y[k - 1] + t * (y[k] - y[k - 1]);
}

// Input-line attenuation on the transmission grid: gain minus total transmission.
inline std::vector<double> attenuation_from_transmission(const std::vector<double>& s21_freq,
                                                         const std::vector<double>& s21_db,
                                                         const std::vector<double>& gain_freq,
                                                         const std::vector<double>& gain_db) {
  if (s21_freq.size() != s21_db.size()) throw std::invalid_argument("attenuation: transmission grid mismatch");
  std::vector<double> out(s21_freq.size());
  for (std::size_t i = 0; i < s21_freq.size(); ++i)
    out[i] = interp_linear(gain_freq, gain_db, s21_freq[i]) - s21_db[i];
  return out;
}

// Power reaching the sample for a source power and input attenuation in dB.
inline double power_at_sample(double p_source_w, double atten_db) { return p_source_w / db_to_linear(atten_db); }

}  // namespace phonoq
