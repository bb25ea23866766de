#pragma once

// Time-domain ringdown: pulse response simulation, shot averaging,
// exponential decay fits, pump detuning estimators, the self-heating
// thermal model and the ringdown loss budget.

#include <algorithm>
#include <cmath>
#include <complex>
#include <stdexcept>
#include <string>
#include <vector>

#include "phonoq/constants.hpp"
#include "phonoq/fft.hpp"
#include "phonoq/fit.hpp"
#include "phonoq/parallel.hpp"
#include "phonoq/resonance.hpp"
#include "phonoq/rng.hpp"
#include "phonoq/tls_loss.hpp"

namespace phonoq {

struct RingdownShot {
  std::vector<double> time;  // s
  std::vector<double> i_values, q_values;

  cplx at(std::size_t k) const { return {i_values[k], q_values[k]}; }

  void validate() const {
    if (time.size() < 2 || i_values.size() != time.size() || q_values.size() != time.size())
      throw std::invalid_argument("ringdown shot: time, I and Q must have equal length >= 2");
    const double dt = time[1] - time[0];
    if (!(dt > 0)) throw std::invalid_argument("ringdown shot: time must increase");
    for (std::size_t k = 1; k < time.size(); ++k)
      if (std::abs(time[k] - time[k - 1] - dt) > 1e-6 * dt)
        throw std::invalid_argument("ringdown shot: sampling must be uniform");
  }
};

struct RingdownConfig {
  double delta = 0.0;         // rad/s, pump minus resonator
  double a_p = 1.0;           // drive amplitude
  double t_on = 0.15;         // s, pulse length
  double t_total = 0.3;       // s, record length from pulse start
  double sample_rate = 1e4;   // Hz
  double noise = 0.0;         // per-quadrature Gaussian sigma
  std::size_t shots = 1;
  std::uint64_t seed = 1;
  double detuning_jitter = 0.0;  // rad/s, per-shot Gaussian spread of delta
};

// Noiseless demodulated output of a step-driven cavity at time t.
inline cplx ringdown_response(double kappa_e, double kappa, double delta, double a_p, double t_on, double t) {
  if (t < 0) return 0.0;
  const cplx c = (2 * kappa_e / kappa) / cplx(1.0, 2 * delta / kappa);
  auto emitted = [&](double s) { return a_p * c * (1.0 - std::exp(-0.5 * kappa * s) * std::polar(1.0, -delta * s)); };
  if (t <= t_on) return a_p - emitted(t);
  const double s = t - t_on;
  return -emitted(t_on) * std::exp(-0.5 * kappa * s) * std::polar(1.0, -delta * s);
}

inline std::vector<RingdownShot> simulate_ringdown(const ResonanceParams& p, const RingdownConfig& cfg) {
  p.validate();
  if (!(cfg.t_on > 0) || !(cfg.t_total > cfg.t_on)) throw std::invalid_argument("simulate_ringdown: need 0 < t_on < t_total");
  if (cfg.shots == 0) throw std::invalid_argument("simulate_ringdown: at least one shot");
  const double kappa = p.kappa(), ke = p.kappa_e();
  const double fastest = std::max(kappa, std::abs(cfg.delta) + 3 * cfg.detuning_jitter);
  if (!(cfg.sample_rate >= 4 * fastest / kTwoPi))
    throw std::invalid_argument("simulate_ringdown: sample rate does not resolve max(kappa, |delta|)");
  const auto n = static_cast<std::size_t>(std::floor(cfg.t_total * cfg.sample_rate)) + 1;
  std::vector<RingdownShot> out(cfg.shots);
  parallel_for(cfg.shots, [&](std::size_t s) {
    CounterRng r(cfg.seed, s);
    const double delta = cfg.delta + (cfg.detuning_jitter > 0 ? cfg.detuning_jitter * r.normal() : 0.0);
    auto& sh = out[s];
    sh.time.resize(n);
    sh.i_values.resize(n);
    sh.q_values.resize(n);
    for (std::size_t k = 0; k < n; ++k) {
      const double t = static_cast<double>(k) / cfg.sample_rate;
      cplx v = ringdown_response(ke, kappa, delta, cfg.a_p, cfg.t_on, t);
      if (cfg.noise > 0) v += cplx(cfg.noise * r.normal(), cfg.noise * r.normal());
      sh.time[k] = t;
      sh.i_values[k] = v.real();
      sh.q_values[k] = v.imag();
    }
  });
  return out;
}

enum class AverageMode { coherent, incoherent };

struct EnergyTrace {
  std::vector<double> time;
  std::vector<double> energy;
};

// Coherent mean of the complex shots.
inline std::vector<cplx> mean_shot(const std::vector<RingdownShot>& shots) {
  if (shots.empty()) throw std::invalid_argument("average_shots: no shots");
  const std::size_t n = shots.front().time.size();
  for (const auto& s : shots)
    if (s.time.size() != n || s.i_values.size() != n || s.q_values.size() != n)
      throw std::invalid_argument("average_shots: shots differ in length");
  std::vector<cplx> m(n);
  const double inv = 1.0 / static_cast<double>(shots.size());
  for (const auto& s : shots)
    for (std::size_t k = 0; k < n; ++k) m[k] += s.at(k) * inv;
  return m;
}

inline EnergyTrace average_shots(const std::vector<RingdownShot>& shots, AverageMode mode) {
  EnergyTrace e;
  e.time = shots.empty() ? std::vector<double>{} : shots.front().time;
  const auto m = mean_shot(shots);
  e.energy.resize(m.size());
  if (mode == AverageMode::coherent) {
    for (std::size_t k = 0; k < m.size(); ++k) e.energy[k] = std::norm(m[k]);
    return e;
  }
  const double inv = 1.0 / static_cast<double>(shots.size());
  for (const auto& s : shots)
    for (std::size_t k = 0; k < m.size(); ++k) e.energy[k] += std::norm(s.at(k)) * inv;
  return e;
}

struct DecayFit {
  double tau = 0, amplitude = 0, offset = 0;  // A exp(-(t - t_ref)/tau) + c
  double sigma_tau = 0, sigma_amplitude = 0, sigma_offset = 0;
  double t_ref = 0;
  bool identifiable = true;
  fit::FitResult raw;
  std::vector<std::string> warnings;
};

inline DecayFit fit_decay(const EnergyTrace& tr, double t_start, double t_end, double t_ref = NAN,
                          bool fit_offset = true) {
  std::vector<double> t, y;
  for (std::size_t k = 0; k < tr.time.size(); ++k)
    if (tr.time[k] >= t_start && tr.time[k] <= t_end) {
      t.push_back(tr.time[k]);
      y.push_back(tr.energy[k]);
    }
  if (t.size() < 4) throw std::invalid_argument("fit_decay: fewer than 4 samples in window");
  DecayFit out;
  out.t_ref = std::isnan(t_ref) ? t.front() : t_ref;
  const std::size_t n = t.size(), m = std::max<std::size_t>(n / 10, 1);
  double tail = 0, head = 0;
  for (std::size_t k = 0; k < m; ++k) tail += y[n - 1 - k] / m, head += y[k] / m;
  const double c0 = fit_offset ? tail : 0.0;
  const double a0 = head - c0;
  const double scale = std::max({std::abs(head), std::abs(tail), 1e-300});
  if (!(a0 > 1e-9 * scale)) {
    out.identifiable = false;
    out.offset = tail;
    out.tau = out.sigma_tau = out.sigma_amplitude = INFINITY;
    out.warnings.push_back("no decaying component: tau is unidentifiable");
    return out;
  }
  // Seed tau from the time the excess falls to 1/e of its start.
  double tau0 = (t.back() - t.front()) / 3;
  for (std::size_t k = 0; k < n; ++k)
    if (y[k] - c0 < a0 / std::exp(1.0)) {
      tau0 = std::max(t[k] - t.front(), (t[1] - t[0]));
      break;
    }
  const double span = t.back() - t.front();
  std::vector<fit::Param> ps = {
      {"amplitude", a0 * std::exp((t.front() - out.t_ref) / tau0), 1e-12 * scale, 1e12 * scale, fit::Scale::log},
      {"tau", tau0, 1e-6 * span, 1e6 * span, fit::Scale::log},
      {"offset", c0, -1e3 * scale, 1e3 * scale, fit::Scale::linear, scale, !fit_offset}};
  const double tr0 = out.t_ref;
  out.raw = fit::fit_params(ps, [&](const fit::Vector& p) {
    fit::Vector r(static_cast<Eigen::Index>(n));
    for (std::size_t k = 0; k < n; ++k)
      r[static_cast<Eigen::Index>(k)] = (p[0] * std::exp(-(t[k] - tr0) / p[1]) + p[2] - y[k]) / scale;
    return r;
  });
  out.amplitude = out.raw.params[0];
  out.tau = out.raw.params[1];
  out.offset = out.raw.params[2];
  out.sigma_amplitude = out.raw.sigma[0];
  out.sigma_tau = out.raw.sigma[1];
  out.sigma_offset = out.raw.sigma[2];
  out.warnings = out.raw.warnings;
  if (!(out.tau > 0) || !std::isfinite(out.sigma_tau) || out.sigma_tau > out.tau) {
    out.identifiable = false;
    out.warnings.push_back("decay time poorly constrained");
  }
  return out;
}

// Loaded Q from an energy decay time.
inline double quality_from_tau(double f, double tau) { return kTwoPi * f * tau; }

inline double internal_q(double q_total, double q_e) {
  const double inv = 1.0 / q_total - 1.0 / q_e;
  if (!(inv > 0)) throw std::domain_error("internal_q: loaded Q exceeds external Q");
  return 1.0 / inv;
}

struct DetuningEstimate {
  double delta = 0.0;  // rad/s
  bool below_resolution = false;
};

// Pump detuning from |A_S| / |A_R|; sign is +1 when the pump starts
// above the resonance.
inline DetuningEstimate detuning_from_amplitudes(double a_s, double a_r, double kappa_e, double kappa,
                                                 int sign = +1) {
  if (!(a_r > 0)) throw std::invalid_argument("detuning_from_amplitudes: |A_R| must be positive");
  if (!(kappa_e > 0) || !(kappa >= kappa_e)) throw std::invalid_argument("detuning_from_amplitudes: need 0 < kappa_e <= kappa");
  const double q = a_s / a_r, b = kappa / (2 * kappa_e) - 1;
  const double disc = q * q - b * b;
  if (!std::isfinite(disc)) return {0.0, true};
  if (disc < 0) return {0.0, true};
  return {(sign >= 0 ? 1.0 : -1.0) * kappa_e * std::sqrt(disc), false};
}

// Beat frequency of the prompt reflection. The steady-state level a_s is
// removed first so the transient decays to zero inside the segment.
inline DetuningEstimate detuning_from_fft(const std::vector<double>& time, const std::vector<cplx>& values, cplx a_s,
                                          std::size_t pad = 16) {
  if (time.size() != values.size() || time.size() < 8) throw std::invalid_argument("detuning_from_fft: need >= 8 samples");
  const std::size_t n = values.size();
  const double dt = time[1] - time[0];
  const std::size_t m = next_pow2(n * pad);
  std::vector<cplx> buf(m);
  for (std::size_t k = 0; k < n; ++k) buf[k] = values[k] - a_s;
  fft_inplace(buf);
  std::size_t best = 0;
  double pbest = -1;
  for (std::size_t k = 0; k < m; ++k)
    if (std::norm(buf[k]) > pbest) pbest = std::norm(buf[k]), best = k;
  auto pw = [&](std::size_t k) { return std::norm(buf[k % m]); };
  const double y0 = pw(best + m - 1), y1 = pw(best), y2 = pw(best + 1);
  const double den = y0 - 2 * y1 + y2;
  const double frac = den != 0 ? 0.5 * (y0 - y2) / den : 0.0;
  double bin = static_cast<double>(best) + frac;
  if (bin > 0.5 * static_cast<double>(m)) bin -= static_cast<double>(m);
  const double freq = bin / (static_cast<double>(m) * dt);  // Hz
  const double duration = dt * static_cast<double>(n);
  DetuningEstimate out;
  // Demodulated transient rotates as exp(-i delta t).
  out.delta = -kTwoPi * freq;
  // Needs a few beat periods and a peak clear of the DC bins.
  if (std::abs(freq) * duration < 3.0) out.below_resolution = true;
  if (out.below_resolution) out.delta = 0.0;
  return out;
}

struct RingdownResult {
  double t1r = 0, t2r = 0;  // s
  double sigma_t1r = 0, sigma_t2r = 0;
  cplx a_s = 0, a_r = 0;
  double delta = 0;  // rad/s from the amplitude ratio
  double delta_fft = 0;
  bool delta_below_resolution = false, fft_below_resolution = false;
  DecayFit incoherent, coherent;
};

struct RingdownAnalysisOptions {
  double t_on = 0.15;         // s, drive-off instant
  double skip_kappa = 3.0;    // decay fit starts this many 1/kappa after drive-off
  double kappa_e = 0.0;       // rad/s, required for detuning
  double kappa_guess = 0.0;   // rad/s; 0 means estimate from a first fit
  int sign = +1;
};

inline RingdownResult analyze_ringdown(const std::vector<RingdownShot>& shots, const RingdownAnalysisOptions& opt) {
  if (shots.empty()) throw std::invalid_argument("analyze_ringdown: no shots");
  for (const auto& s : shots) s.validate();
  const auto& time = shots.front().time;
  const double t_end = time.back();
  if (!(opt.t_on > time.front() && opt.t_on < t_end)) throw std::invalid_argument("analyze_ringdown: t_on outside record");
  const auto inc = average_shots(shots, AverageMode::incoherent);
  const auto coh = average_shots(shots, AverageMode::coherent);
  const auto mean = mean_shot(shots);
  RingdownResult out;
  double kappa = opt.kappa_guess;
  if (!(kappa > 0)) {
    const auto first = fit_decay(coh, opt.t_on, t_end, opt.t_on);
    if (!first.identifiable) throw fit::fit_error("analyze_ringdown: no decay after drive-off");
    kappa = 1.0 / first.tau;
  }
  const double start = opt.t_on + opt.skip_kappa / kappa;
  out.incoherent = fit_decay(inc, start, t_end, opt.t_on);
  out.coherent = fit_decay(coh, start, t_end, opt.t_on);
  out.t1r = out.incoherent.tau;
  out.sigma_t1r = out.incoherent.sigma_tau;
  out.t2r = out.coherent.tau;
  out.sigma_t2r = out.coherent.sigma_tau;
  // Steady state from the last fifth of the pulse, ringdown start from the
  // coherent fit extrapolated to drive-off.
  cplx s = 0;
  std::size_t cnt = 0, first_after = time.size();
  for (std::size_t k = 0; k < time.size(); ++k) {
    if (time[k] >= opt.t_on - 0.2 * opt.t_on && time[k] <= opt.t_on) s += mean[k], ++cnt;
    if (time[k] > opt.t_on && first_after == time.size()) first_after = k;
  }
  out.a_s = cnt ? s / static_cast<double>(cnt) : cplx(0);
  const double ar_mag = std::sqrt(std::max(out.coherent.amplitude, 0.0));
  out.a_r = first_after < time.size() ? std::polar(ar_mag, std::arg(mean[first_after])) : cplx(ar_mag);
  if (opt.kappa_e > 0 && ar_mag > 0) {
    const auto d = detuning_from_amplitudes(std::abs(out.a_s), ar_mag, opt.kappa_e, 1.0 / out.t1r, opt.sign);
    out.delta = d.delta;
    out.delta_below_resolution = d.below_resolution;
  }
  std::vector<double> seg_t;
  std::vector<cplx> seg_v;
  for (std::size_t k = 0; k < time.size() && time[k] <= opt.t_on; ++k) {
    seg_t.push_back(time[k]);
    seg_v.push_back(mean[k]);
  }
  const auto f = detuning_from_fft(seg_t, seg_v, out.a_s);
  out.delta_fft = f.delta;
  out.fft_below_resolution = f.below_resolution;
  return out;
}

// ---------------------------------------------------------------- thermal

// Quantum of thermal conductance per channel at temperature T (W/K).
inline double conductance_quantum(double temp) {
  return kPi * kPi * kBoltzmann * kBoltzmann * temp / (3.0 * kPlanck);
}

struct ThermalModel {
  double gamma_exp = 2.6;
  double g_th_t0 = 0.0;  // W/K
  double t0 = 0.025;     // K

  static ThermalModel from_channels(double gamma_exp, double channels, double t0) {
    return {gamma_exp, channels * conductance_quantum(t0), t0};
  }
  double channels() const { return g_th_t0 / conductance_quantum(t0); }

  void validate() const {
    if (!(gamma_exp >= 0.5 && gamma_exp <= 4)) throw std::invalid_argument("thermal model: gamma must lie in [0.5, 4]");
    if (!(g_th_t0 > 0) || !(t0 > 0)) throw std::invalid_argument("thermal model: G_th and T0 must be positive");
  }
};

inline double dissipated_power(double nbar, double omega_r, double q_i) { return nbar * kHbar * omega_r * omega_r / q_i; }

inline double effective_temperature(const ThermalModel& m, double p_in) {
  if (!(p_in >= 0)) throw std::invalid_argument("effective_temperature: P_in must be non-negative");
  const double g = m.gamma_exp;
  return m.t0 * std::pow(1.0 + (1.0 + g) * p_in / (m.t0 * m.g_th_t0), 1.0 / (1.0 + g));
}

struct ThermalPoint {
  double p_in = 0;   // W
  double t_eff = 0;  // K
  double sigma = 0;  // K, 0 = unweighted
};

struct ThermalFit {
  ThermalModel model;
  double channels = 0;
  double sigma_gamma = 0, sigma_g_th = 0, sigma_channels = 0;
  fit::FitResult raw;
};

inline ThermalFit fit_thermal_model(const std::vector<ThermalPoint>& pts, double t0) {
  if (pts.size() < 4) throw std::invalid_argument("fit_thermal_model: need at least 4 points");
  double pmin = INFINITY, pmax = 0, tmax = 0;
  for (const auto& p : pts) {
    if (!(p.p_in > 0) || !(p.t_eff > 0)) throw std::invalid_argument("fit_thermal_model: P_in and T_eff must be positive");
    pmin = std::min(pmin, p.p_in);
    pmax = std::max(pmax, p.p_in);
    tmax = std::max(tmax, p.t_eff);
  }
  if (pmax < 10 * pmin) throw std::invalid_argument("fit_thermal_model: P_in must span at least a decade");
  if (tmax < t0 * (1 + 1e-6)) throw fit::fit_error("fit_thermal_model: flat T_eff, model unidentifiable");
  const bool weighted = std::all_of(pts.begin(), pts.end(), [](const ThermalPoint& p) { return p.sigma > 0; });
  // Seed G_th from the low-power linear limit.
  double g0 = INFINITY;
  for (const auto& p : pts)
    if (p.t_eff > t0) g0 = std::min(g0, p.p_in / (p.t_eff - t0));
  if (!std::isfinite(g0)) g0 = pmax / t0;
  ThermalFit best;
  double best_cost = INFINITY;
  for (double gs : {1.0, 2.5, 3.5}) {
    std::vector<fit::Param> ps = {{"gamma", gs, 0.5, 4.0}, {"g_th", g0, 1e-6 * g0, 1e6 * g0, fit::Scale::log}};
    auto r = fit::fit_params(
        ps,
        [&](const fit::Vector& x) {
          ThermalModel m{x[0], x[1], t0};
          fit::Vector res(static_cast<Eigen::Index>(pts.size()));
          for (std::size_t k = 0; k < pts.size(); ++k)
            res[static_cast<Eigen::Index>(k)] =
                (effective_temperature(m, pts[k].p_in) - pts[k].t_eff) / (weighted ? pts[k].sigma : t0);
          return res;
        },
        {}, weighted);
    if (r.cost < best_cost) {
      best_cost = r.cost;
      best.raw = r;
    }
  }
  best.model = {best.raw.params[0], best.raw.params[1], t0};
  best.channels = best.model.channels();
  best.sigma_gamma = best.raw.sigma[0];
  best.sigma_g_th = best.raw.sigma[1];
  best.sigma_channels = best.sigma_g_th / conductance_quantum(t0);
  return best;
}

// Effective temperature from a pump detuning, using the resonator as a
// thermometer: omega_r(T) = omega_p + |delta| with omega_p = omega_r(T0).
inline double teff_from_detuning(const FreqShiftParams& fs, double delta, double t0, double f_r) {
  const double target = freq_shift(fs, t0, f_r) + std::abs(delta) / (kTwoPi * f_r);
  InvertOptions o;
  o.t_lo = std::min(1e-3, 0.5 * t0);
  return invert_freq_to_temperature(fs, target, f_r, o);
}

// ------------------------------------------------------------ loss budget

struct RingdownLossPoint {
  double nbar = 0;
  double t_eff = 0;  // K
  double q_i = 0;
  double sigma = 0;  // absolute sigma on Q_i, 0 = relative weighting
};

struct RingdownLossParams {
  double f_delta0_diss = 1e-5;
  double n_c = 10.3;
  double beta = 0.84;
  double q_rad = 6.14e7;
  double d = 1.84;
  double q_rel_t0 = 1.48e6;
  double t0 = 0.5;  // K, relaxation reference
  double f = 502.1e6;

  TlsLossParams tls() const { return {f_delta0_diss, n_c, beta, d, q_rel_t0, t0, kInf}; }
};

struct LossComponents {
  double resonant = 0, relaxation = 0, radiation = 0;
  double total() const { return resonant + relaxation + radiation; }
};

inline LossComponents ringdown_loss_components(const RingdownLossParams& p, double nbar, double t_eff) {
  const auto t = p.tls();
  return {q_resonant_inv(t, nbar, t_eff, p.f), q_relaxation_inv(t, t_eff), 1.0 / p.q_rad};
}

// Self-consistent operating point: T_eff depends on the dissipated power,
// which depends on Q_i(T_eff).
inline std::pair<double, double> solve_self_heating(const RingdownLossParams& p, const ThermalModel& th, double nbar) {
  double t = th.t0;
  const double w = kTwoPi * p.f;
  for (int it = 0; it < 500; ++it) {
    const double qi = 1.0 / ringdown_loss_components(p, nbar, t).total();
    const double tn = effective_temperature(th, dissipated_power(nbar, w, qi));
    if (std::abs(tn - t) < 1e-14 * t) return {tn, 1.0 / ringdown_loss_components(p, nbar, tn).total()};
    t = tn;
  }
  // Fall back to a bracketed solve of T = T_eff(T).
  auto g = [&](double tt) {
    const double qi = 1.0 / ringdown_loss_components(p, nbar, tt).total();
    return effective_temperature(th, dissipated_power(nbar, w, qi)) - tt;
  };
  double hi = 2 * th.t0;
  while (g(hi) > 0 && hi < 1e3) hi *= 2;
  const double tt = find_root(g, th.t0, hi);
  return {tt, 1.0 / ringdown_loss_components(p, nbar, tt).total()};
}

struct RingdownLossFit {
  RingdownLossParams params;
  double sigma_n_c = 0, sigma_beta = 0, sigma_q_rad = 0;
  fit::FitResult raw;
};

// Fits n_c, beta and Q_rad with F delta0 and the relaxation law held fixed.
inline RingdownLossFit fit_ringdown_loss(const std::vector<RingdownLossPoint>& pts, const RingdownLossParams& fixed,
                                         fit::Tolerances tol = {}) {
  if (pts.size() < 4) throw std::invalid_argument("fit_ringdown_loss: need at least 4 points");
  for (const auto& r : pts)
    if (!(r.nbar >= 0 && r.t_eff > 0 && r.q_i > 0 && r.sigma >= 0))
      throw std::invalid_argument("fit_ringdown_loss: invalid record");
  fixed.tls().validate();
  const bool weighted = std::all_of(pts.begin(), pts.end(), [](const RingdownLossPoint& r) { return r.sigma > 0; });
  double qmax = 0;
  for (const auto& r : pts) qmax = std::max(qmax, r.q_i);
  RingdownLossFit best;
  double best_cost = INFINITY;
  for (double b0 : {0.5, 1.0}) {
    for (double nc0 : {1.0, 30.0}) {
      std::vector<fit::Param> ps = {{"n_c", nc0, 1e-4, 1e12, fit::Scale::log},
                                    {"beta", b0, 1e-3, 2.0, fit::Scale::log},
                                    {"q_rad", 3 * qmax, 1e2, 1e14, fit::Scale::log}};
      auto r = fit::fit_params(
          ps,
          [&](const fit::Vector& x) {
            RingdownLossParams p = fixed;
            p.n_c = x[0];
            p.beta = x[1];
            p.q_rad = x[2];
            fit::Vector res(static_cast<Eigen::Index>(pts.size()));
            for (std::size_t k = 0; k < pts.size(); ++k) {
              const auto& d = pts[k];
              const double m = ringdown_loss_components(p, d.nbar, d.t_eff).total();
              res[static_cast<Eigen::Index>(k)] =
                  weighted ? (m - 1.0 / d.q_i) / (d.sigma / (d.q_i * d.q_i)) : m * d.q_i - 1.0;
            }
            return res;
          },
          tol, weighted);
      if (r.cost < best_cost) {
        best_cost = r.cost;
        best.raw = r;
      }
    }
  }
  best.params = fixed;
  best.params.n_c = best.raw.params[0];
  best.params.beta = best.raw.params[1];
  best.params.q_rad = best.raw.params[2];
  best.sigma_n_c = best.raw.sigma[0];
  best.sigma_beta = best.raw.sigma[1];
  best.sigma_q_rad = best.raw.sigma[2];
  return best;
}

}  // namespace phonoq
