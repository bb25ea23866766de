#pragma once

#include <cmath>
#include <cstdio>
#include <map>
#include <string>
#include <vector>

#include "calib.hpp"
#include "circuit.hpp"
#include "io.hpp"
#include "resonance.hpp"
#include "ringdown.hpp"
#include "rng.hpp"
#include "tls_loss.hpp"

namespace phonoq::synth {

using io::json;

// ------------------------------------------------------- generators

struct ReflectionSpec {
  ResonanceParams truth{499.5e6, 161000, 1.2e7, 0.1};
  int n = 401;
  double span_linewidths = 10.0;  // linear grid span in total linewidths
  double homophasal_w = 0.0;      // > 0 selects a homophasal grid with this span/linewidth
  double noise = 0.0;             // per-quadrature sigma
  std::uint64_t seed = 1;
};

inline ComplexTrace reflection(const ReflectionSpec& s) {
  s.truth.validate();
  ComplexTrace tr;
  const double lw = s.truth.f_r / s.truth.q_total();
  if (s.homophasal_w > 0) {
    tr.freq = homophasal_sweep(s.truth.f_r, kTwoPi * lw, s.homophasal_w * lw, s.n).points;
  } else {
    for (int i = 0; i < s.n; ++i)
      tr.freq.push_back(s.truth.f_r + lw * s.span_linewidths * (static_cast<double>(i) / (s.n - 1) - 0.5));
  }
  CounterRng rng(s.seed);
  for (double f : tr.freq) {
    cplx v = eval_s11(s.truth, f);
    if (s.noise > 0) v += cplx(s.noise * rng.normal(), s.noise * rng.normal());
    tr.value.push_back(v);
  }
  return tr;
}

struct LossGridSpec {
  TlsLossParams truth{};
  int n_pow = 21;
  int n_temp = 10;
  double t_min = 0.025, t_max = 1.0;  // K, log-spaced
  double nbar_min = 1.0;
  double nbar_db_range = 21.0;
  double freq = 500e6;
  double frac_noise = 0.02;  // on Q_i^-1
  std::uint64_t seed = 1;
};

inline LossDataset loss_grid(const LossGridSpec& s) {
  s.truth.validate();
  if (s.n_pow < 1 || s.n_temp < 1) throw std::invalid_argument("loss_grid: need at least one power and temperature");
  LossDataset d;
  CounterRng rng(s.seed);
  for (int it = 0; it < s.n_temp; ++it) {
    const double t = s.n_temp > 1 ? s.t_min * std::pow(s.t_max / s.t_min, it / double(s.n_temp - 1)) : s.t_min;
    for (int ip = 0; ip < s.n_pow; ++ip) {
      const double nb = s.nbar_min * std::pow(10.0, s.nbar_db_range / 10.0 * (s.n_pow > 1 ? ip / double(s.n_pow - 1) : 0.0));
      double inv = q_total_inv(s.truth, nb, t, s.freq);
      if (s.frac_noise > 0) inv *= 1.0 + s.frac_noise * rng.normal();
      const double qi = 1.0 / inv;
      d.push_back({nb, t, qi, s.frac_noise > 0 ? s.frac_noise * qi : 0.0, s.freq});
    }
  }
  return d;
}

struct FreqShiftSpec {
  FreqShiftParams truth{};
  int n = 20;
  double t_min = 0.025, t_max = 1.0;  // K, log-spaced
  double noise_hz = 0.0;
  std::uint64_t seed = 1;
};

inline std::vector<FreqShiftRecord> freq_shift_series(const FreqShiftSpec& s) {
  std::vector<FreqShiftRecord> out;
  CounterRng rng(s.seed);
  for (int i = 0; i < s.n; ++i) {
    const double t = s.t_min * std::pow(s.t_max / s.t_min, s.n > 1 ? i / double(s.n - 1) : 0.0);
    double f = s.truth.f0 * (1.0 + freq_shift(s.truth, t, s.truth.f0));
    if (s.noise_hz > 0) f += s.noise_hz * rng.normal();
    out.push_back({t, f, s.noise_hz});
  }
  return out;
}

struct ParticipationSpec {
  double delta_qz = 4.5e-6, delta_al = 4.9e-4;
  int n = 12;
  double f_al_min = 0.005, f_al_max = 0.025;
  double noise = 2.1e-6;  // absolute sigma on F delta0
  std::uint64_t seed = 1;
};

inline std::vector<ParticipationPoint> participation(const ParticipationSpec& s) {
  std::vector<ParticipationPoint> out;
  CounterRng rng(s.seed);
  for (int i = 0; i < s.n; ++i) {
    const double x = s.f_al_min + (s.f_al_max - s.f_al_min) * (s.n > 1 ? i / double(s.n - 1) : 0.0);
    double y = x * s.delta_al + (1 - x) * s.delta_qz;
    if (s.noise > 0) y += s.noise * rng.normal();
    out.push_back({x, y, s.noise});
  }
  return out;
}

struct RadiationSpec {
  RadiationLeakParams truth{};
  int n_min = 2, n_max = 10;
  double frac_noise = 0.02;  // on Q_i^-1
  std::uint64_t seed = 1;
};

inline std::vector<RadiationPoint> radiation(const RadiationSpec& s) {
  std::vector<RadiationPoint> out;
  CounterRng rng(s.seed);
  for (int n = s.n_min; n <= s.n_max; ++n) {
    double inv = s.truth.q_i_inv(n);
    if (s.frac_noise > 0) inv *= 1.0 + s.frac_noise * rng.normal();
    out.push_back({double(n), 1.0 / inv, s.frac_noise > 0 ? s.frac_noise / inv : 0.0});
  }
  return out;
}

struct PowerSweepSpec {
  RingdownLossParams loss{};
  double gamma = 2.6, channels = 1.6, t0 = 0.025;
  int n = 16;
  double nbar_min = 1e4, nbar_max = 3e8;  // log-spaced
  double t_frac_noise = 0.02;             // on T_eff
  double q_frac_noise = 0.02;             // on Q_i^-1
  std::uint64_t seed = 1;
};

struct PowerSweep {
  std::vector<ThermalPoint> thermal;
  std::vector<RingdownLossPoint> loss;
};

// Self-heated ringdown power sweep: T_eff(P_in) and Q_i(nbar, T_eff).
inline PowerSweep power_sweep(const PowerSweepSpec& s) {
  const auto th = ThermalModel::from_channels(s.gamma, s.channels, s.t0);
  th.validate();
  PowerSweep out;
  CounterRng rng(s.seed);
  const double w = kTwoPi * s.loss.f;
  for (int i = 0; i < s.n; ++i) {
    const double nb = s.nbar_min * std::pow(s.nbar_max / s.nbar_min, s.n > 1 ? i / double(s.n - 1) : 0.0);
    const auto [t_eff, q_i] = solve_self_heating(s.loss, th, nb);
    const double p_in = dissipated_power(nb, w, q_i);
    double t_meas = t_eff, inv = 1.0 / q_i;
    if (s.t_frac_noise > 0) t_meas *= 1.0 + s.t_frac_noise * rng.normal();
    if (s.q_frac_noise > 0) inv *= 1.0 + s.q_frac_noise * rng.normal();
    out.thermal.push_back({p_in, t_meas, s.t_frac_noise * t_eff});
    out.loss.push_back({nb, t_eff, 1.0 / inv, s.q_frac_noise * q_i});
  }
  return out;
}

struct AdmittanceSpec {
  std::vector<BvdCircuit> branches;
  double c0 = 1e-13;
  double f_min = 250e6, f_max = 750e6;
  int n = 10001;
  double frac_noise = 0.0;  // complex multiplicative, 1e-3 is 60 dB SNR
  std::uint64_t seed = 1;
};

// Seventeen well-separated modes between 250 and 750 MHz.
inline std::vector<BvdCircuit> seventeen_modes() {
  std::vector<BvdCircuit> br;
  for (int k = 0; k < 17; ++k) {
    const double f = 260e6 + k * 29e6 + 3e6 * std::sin(k);
    const double w = kTwoPi * f;
    const double l = 1e-4 * (1 + 0.3 * std::cos(k));
    const double c = 1.0 / (w * w * l);
    const double q = 2000 * (1 + 0.5 * std::sin(2.0 * k));
    br.push_back({std::sqrt(l / c) / q, l, c, 0.0, 0.0, 0.0});
  }
  return br;
}

inline ComplexTrace admittance(const AdmittanceSpec& s) {
  if (s.n < 3 || !(s.f_max > s.f_min && s.f_min > 0)) throw std::invalid_argument("admittance: bad grid");
  ComplexTrace tr;
  tr.kind = TraceKind::admittance;
  CounterRng rng(s.seed);
  for (int i = 0; i < s.n; ++i) {
    const double f = s.f_min + (s.f_max - s.f_min) * i / double(s.n - 1);
    cplx y = eval_admittance(s.branches, s.c0, kTwoPi * f);
    if (s.frac_noise > 0) y *= cplx(1.0 + s.frac_noise * rng.normal(), s.frac_noise * rng.normal());
    tr.freq.push_back(f);
    tr.value.push_back(y);
  }
  return tr;
}

struct NoiseSweepSpec {
  double gain_db = 57.4;     // at the band center
  double ripple_db = 0.3;    // sinusoidal gain ripple amplitude
  double ripple_period = 40e6;
  double amp_temp = 1.1;     // K, amplifier noise temperature
  double atten_db = 72.0;    // input line attenuation for the transmission file
  double t_min = 0.5, t_max = 6.0, t_step = 0.25;  // K
  double f_min = 450e6, f_max = 550e6;
  int n_freq = 21;
  double bandwidth = 1e6;
  double frac_noise = 0.002;
  std::uint64_t seed = 1;

  double center() const { return 0.5 * (f_min + f_max); }
  double gain_db_at(double f) const {
    return gain_db + ripple_db * std::sin(kTwoPi * (f - center()) / ripple_period);
  }
};

struct NoiseSweepData {
  NoiseSweep sweep;
  std::vector<double> s21_freq, s21_db;
};

inline NoiseSweepData noise_sweep(const NoiseSweepSpec& s) {
  NoiseSweepData out;
  out.sweep.bandwidth = s.bandwidth;
  for (int j = 0; j < s.n_freq; ++j)
    out.sweep.frequencies.push_back(s.f_min + (s.f_max - s.f_min) * (s.n_freq > 1 ? j / double(s.n_freq - 1) : 0.0));
  const int nt = static_cast<int>(std::floor((s.t_max - s.t_min) / s.t_step + 1e-9)) + 1;
  CounterRng rng(s.seed);
  for (int i = 0; i < nt; ++i) {
    const double t = s.t_min + i * s.t_step;
    out.sweep.temperatures.push_back(t);
    std::vector<double> row;
    for (double f : out.sweep.frequencies) {
      const double g = db_to_linear(s.gain_db_at(f));
      const double n_sys = noise_quanta_from_temperature(s.amp_temp, f);
      double p = g * (kPlanck * f * s.bandwidth * n_sys + johnson_noise_power(t, s.bandwidth, f));
      if (s.frac_noise > 0) p *= 1.0 + s.frac_noise * rng.normal();
      row.push_back(p);
    }
    out.sweep.p_out.push_back(std::move(row));
  }
  for (double f : out.sweep.frequencies) {
    out.s21_freq.push_back(f);
    out.s21_db.push_back(s.gain_db_at(f) - s.atten_db);
  }
  return out;
}

struct ShotSpec {
  ResonanceParams truth{502.1e6, 0.0, 1.19e7, 0.0};  // q_i filled from t1 when zero
  double t1 = 2.7e-3;                                  // s
  RingdownConfig config{};
};

inline ResonanceParams shot_truth(const ShotSpec& s) {
  ResonanceParams p = s.truth;
  if (!(p.q_i > 0)) p.q_i = internal_q(quality_from_tau(p.f_r, s.t1), p.q_e());
  return p;
}

// ----------------------------------------------------- spec & presets

enum class Target { reflection, loss_grid, freq_shift, ringdown, admittance, noise_sweep, participation, radiation, power_sweep };

inline const std::map<std::string, Target>& target_names() {
  static const std::map<std::string, Target> m = {
      {"reflection", Target::reflection},       {"loss-grid", Target::loss_grid},
      {"freq-shift", Target::freq_shift},       {"ringdown", Target::ringdown},
      {"admittance", Target::admittance},       {"noise-sweep", Target::noise_sweep},
      {"participation", Target::participation}, {"radiation", Target::radiation},
      {"power-sweep", Target::power_sweep}};
  return m;
}

inline Target parse_target(const std::string& tag) {
  const auto& m = target_names();
  auto it = m.find(tag);
  if (it == m.end()) throw io::input_error("synth: unknown target '" + tag + "'");
  return it->second;
}

inline std::string target_name(Target t) {
  for (const auto& [k, v] : target_names())
    if (v == t) return k;
  return "?";
}

// Truth and grid are module-specific JSON objects; absent keys take the generator defaults.
struct SynthSpec {
  std::string name;
  std::vector<Target> targets;
  json truth = json::object();
  json grid = json::object();
  json noise = json::object();
  std::uint64_t seed = 1;
};

namespace detail {

inline double num(const json& j, const char* key, double def) {
  if (!j.is_object() || !j.contains(key)) return def;
  if (!j.at(key).is_number()) throw io::input_error(std::string("synth: '") + key + "' must be a number");
  return j.at(key).get<double>();
}

inline int inum(const json& j, const char* key, int def) { return static_cast<int>(num(j, key, def)); }

}  // namespace detail

inline std::map<std::string, SynthSpec> presets() {
  std::map<std::string, SynthSpec> m;
  m["table1-grid"] = {"table1-grid",
                      {Target::loss_grid},
                      {{"f_delta0_diss", 1.26e-5}, {"beta", 0.56}, {"n_c", 10.0}, {"d", 1.9}, {"q_rel_t0", 8.3e6}, {"t0_k", 0.25}},
                      {{"n_pow", 21}, {"n_temp", 10}, {"t_min_k", 0.025}, {"t_max_k", 1.0}, {"nbar_min", 1.0}, {"nbar_db_range", 21.0}, {"freq_hz", 500e6}},
                      {{"frac_q_inv", 0.02}},
                      1};
  m["fig3-freqshift"] = {"fig3-freqshift",
                         {Target::participation, Target::freq_shift},
                         {{"delta_qz", 4.5e-6}, {"delta_al", 4.9e-4}, {"f_delta0_reac", 1.14e-5}, {"f0_hz", 502.1e6}},
                         {{"n", 12}, {"f_al_min", 0.005}, {"f_al_max", 0.025}, {"n_temp", 20}, {"t_min_k", 0.025}, {"t_max_k", 1.0}},
                         {{"sigma_f_delta0", 2.1e-6}, {"sigma_hz", 2.0}},
                         1};
  m["appB-radiation"] = {"appB-radiation",
                         {Target::radiation},
                         {{"q_mirr0_inv", 4.1e-3}, {"beta", 1.71}, {"q_tls", 4.9e5}},
                         {{"n_min", 2}, {"n_max", 10}},
                         {{"frac_q_inv", 0.02}},
                         1};
  m["fig4-ringdown"] = {"fig4-ringdown",
                        {Target::power_sweep},
                        {{"gamma", 2.6}, {"channels", 1.6}, {"t0_k", 0.025}, {"f_delta0_diss", 1e-5}, {"n_c", 10.3},
                         {"beta", 0.84}, {"q_rad", 6.14e7}, {"d", 1.84}, {"q_rel_t0", 1.48e6}, {"t_rel_ref_k", 0.5},
                         {"freq_hz", 502.1e6}},
                        {{"n", 16}, {"nbar_min", 1e4}, {"nbar_max", 3e8}},
                        {{"frac_t_eff", 0.02}, {"frac_q_inv", 0.02}},
                        1};
  m["appF-gaincal"] = {"appF-gaincal",
                       {Target::noise_sweep},
                       {{"gain_db", 57.4}, {"amp_temp_k", 1.1}, {"atten_db", 72.0}, {"ripple_db", 0.3}, {"ripple_period_hz", 40e6}},
                       {{"t_min_k", 0.5}, {"t_max_k", 6.0}, {"t_step_k", 0.25}, {"f_min_hz", 450e6}, {"f_max_hz", 550e6},
                        {"n_freq", 21}, {"bandwidth_hz", 1e6}},
                       {{"frac_p_out", 0.002}},
                       1};
  {
    json branches = json::array();
    for (const auto& b : seventeen_modes()) branches.push_back({{"r_ohm", b.r}, {"l_h", b.l}, {"c_f", b.c}});
    m["17-resonance-admittance"] = {"17-resonance-admittance",
                                    {Target::admittance},
                                    {{"branches", branches}, {"c0_f", 1e-13}},
                                    {{"f_min_hz", 250e6}, {"f_max_hz", 750e6}, {"n", 10001}},
                                    {{"frac_y", 1e-3}},
                                    1};
  }
  m["fig1g-reflection"] = {"fig1g-reflection",
                           {Target::reflection},
                           {{"f_r_hz", 499.5e6}, {"q_i", 161000.0}, {"q_e_mag", 1.2e7}, {"phi_rad", 0.1}},
                           {{"n", 401}, {"span_linewidths", 10.0}},
                           {{"sigma", 1.6e-4}},
                           1};
  m["sec5-ringdown"] = {"sec5-ringdown",
                        {Target::ringdown},
                        {{"f_r_hz", 502.1e6}, {"t1_s", 2.7e-3}, {"q_e_mag", 1.19e7}},
                        {{"t_on_s", 0.03}, {"t_total_s", 0.06}, {"sample_rate_hz", 2e4}, {"shots", 20}, {"delta_rad_s", 2e3}},
                        {{"sigma", 0.02}},
                        1};
  return m;
}

// ---------------------------------------------------------- output

struct FileOut {
  std::string name;  // relative path
  io::Table table;
};

struct Generated {
  std::vector<FileOut> files;
  json manifest;
};

inline Generated generate(const SynthSpec& spec) {
  using detail::inum;
  using detail::num;
  const auto& t = spec.truth;
  const auto& g = spec.grid;
  const auto& nz = spec.noise;
  Generated out;
  json truth_out = json::object();
  for (auto target : spec.targets) {
    switch (target) {
      case Target::reflection: {
        ReflectionSpec s;
        s.truth = {num(t, "f_r_hz", s.truth.f_r), num(t, "q_i", s.truth.q_i), num(t, "q_e_mag", s.truth.qe_mag),
                   num(t, "phi_rad", s.truth.phi)};
        s.n = inum(g, "n", s.n);
        s.span_linewidths = num(g, "span_linewidths", s.span_linewidths);
        s.homophasal_w = num(g, "homophasal_w", 0.0);
        s.noise = num(nz, "sigma", 0.0);
        s.seed = spec.seed;
        out.files.push_back({"trace.csv", io::trace_to_table(reflection(s))});
        truth_out["reflection"] = io::resonance_json(s.truth);
        break;
      }
      case Target::loss_grid: {
        LossGridSpec s;
        auto& p = s.truth;
        p = {num(t, "f_delta0_diss", p.f_delta0_diss), num(t, "n_c", p.n_c), num(t, "beta", p.beta), num(t, "d", p.d),
             num(t, "q_rel_t0", p.q_rel_t0), num(t, "t0_k", p.t0), num(t, "q_bkg", p.q_bkg)};
        s.n_pow = inum(g, "n_pow", s.n_pow);
        s.n_temp = inum(g, "n_temp", s.n_temp);
        s.t_min = num(g, "t_min_k", s.t_min);
        s.t_max = num(g, "t_max_k", s.t_max);
        s.nbar_min = num(g, "nbar_min", s.nbar_min);
        s.nbar_db_range = num(g, "nbar_db_range", s.nbar_db_range);
        s.freq = num(g, "freq_hz", s.freq);
        s.frac_noise = num(nz, "frac_q_inv", 0.0);
        s.seed = spec.seed;
        out.files.push_back({"loss.csv", io::loss_to_table(loss_grid(s))});
        truth_out["loss"] = io::tls_params_json(p);
        break;
      }
      case Target::freq_shift: {
        FreqShiftSpec s;
        s.truth = {num(t, "f_delta0_reac", s.truth.f_delta0_reac), num(t, "f0_hz", s.truth.f0)};
        s.n = inum(g, "n_temp", s.n);
        s.t_min = num(g, "t_min_k", s.t_min);
        s.t_max = num(g, "t_max_k", s.t_max);
        s.noise_hz = num(nz, "sigma_hz", 0.0);
        s.seed = spec.seed + 1;
        out.files.push_back({"freqshift.csv", io::freqshift_to_table(freq_shift_series(s))});
        truth_out["freq_shift"] = {{"f_delta0_reac", s.truth.f_delta0_reac}, {"f0_hz", s.truth.f0}};
        break;
      }
      case Target::participation: {
        ParticipationSpec s;
        s.delta_qz = num(t, "delta_qz", s.delta_qz);
        s.delta_al = num(t, "delta_al", s.delta_al);
        s.n = inum(g, "n", s.n);
        s.f_al_min = num(g, "f_al_min", s.f_al_min);
        s.f_al_max = num(g, "f_al_max", s.f_al_max);
        s.noise = num(nz, "sigma_f_delta0", 0.0);
        s.seed = spec.seed;
        out.files.push_back({"participation.csv", io::participation_to_table(participation(s))});
        truth_out["participation"] = {{"delta_qz", s.delta_qz}, {"delta_al", s.delta_al}};
        break;
      }
      case Target::radiation: {
        RadiationSpec s;
        s.truth = {num(t, "q_mirr0_inv", s.truth.q_mirr0_inv), num(t, "beta", s.truth.beta), num(t, "q_tls", s.truth.q_tls)};
        s.n_min = inum(g, "n_min", s.n_min);
        s.n_max = inum(g, "n_max", s.n_max);
        s.frac_noise = num(nz, "frac_q_inv", 0.0);
        s.seed = spec.seed;
        out.files.push_back({"radiation.csv", io::radiation_to_table(radiation(s))});
        truth_out["radiation"] = {{"q_mirr0_inv", s.truth.q_mirr0_inv}, {"beta", s.truth.beta},
                                  {"q_tls", s.truth.q_tls}, {"q_rad_7", s.truth.q_rad(7)}};
        break;
      }
      case Target::power_sweep: {
        PowerSweepSpec s;
        auto& l = s.loss;
        l.f_delta0_diss = num(t, "f_delta0_diss", l.f_delta0_diss);
        l.n_c = num(t, "n_c", l.n_c);
        l.beta = num(t, "beta", l.beta);
        l.q_rad = num(t, "q_rad", l.q_rad);
        l.d = num(t, "d", l.d);
        l.q_rel_t0 = num(t, "q_rel_t0", l.q_rel_t0);
        l.t0 = num(t, "t_rel_ref_k", l.t0);
        l.f = num(t, "freq_hz", l.f);
        s.gamma = num(t, "gamma", s.gamma);
        s.channels = num(t, "channels", s.channels);
        s.t0 = num(t, "t0_k", s.t0);
        s.n = inum(g, "n", s.n);
        s.nbar_min = num(g, "nbar_min", s.nbar_min);
        s.nbar_max = num(g, "nbar_max", s.nbar_max);
        s.t_frac_noise = num(nz, "frac_t_eff", 0.0);
        s.q_frac_noise = num(nz, "frac_q_inv", 0.0);
        s.seed = spec.seed;
        const auto ps = power_sweep(s);
        out.files.push_back({"thermal.csv", io::thermal_to_table(ps.thermal)});
        out.files.push_back({"ringdown_loss.csv", io::ringdown_loss_to_table(ps.loss)});
        truth_out["power_sweep"] = {{"gamma", s.gamma},         {"channels", s.channels}, {"t0_k", s.t0},
                                    {"f_delta0_diss", l.f_delta0_diss}, {"n_c", l.n_c}, {"beta", l.beta},
                                    {"q_rad", l.q_rad},         {"d", l.d},               {"q_rel_t0", l.q_rel_t0},
                                    {"t_rel_ref_k", l.t0},      {"freq_hz", l.f}};
        break;
      }
      case Target::admittance: {
        AdmittanceSpec s;
        if (t.contains("branches")) {
          for (const auto& b : t.at("branches"))
            s.branches.push_back({num(b, "r_ohm", 0), num(b, "l_h", 0), num(b, "c_f", 0), 0.0, num(b, "b", 0), 0.0});
        } else {
          s.branches = seventeen_modes();
        }
        for (const auto& b : s.branches) b.validate();
        s.c0 = num(t, "c0_f", s.c0);
        s.f_min = num(g, "f_min_hz", s.f_min);
        s.f_max = num(g, "f_max_hz", s.f_max);
        s.n = inum(g, "n", s.n);
        s.frac_noise = num(nz, "frac_y", 0.0);
        s.seed = spec.seed;
        out.files.push_back({"admittance.csv", io::trace_to_table(admittance(s))});
        json br = json::array();
        for (const auto& b : s.branches) {
          auto j = io::circuit_json(b);
          j["pole_hz"] = circuit_to_pole_pair(b).frequency_hz();
          br.push_back(j);
        }
        truth_out["admittance"] = {{"branches", br}, {"c0_f", s.c0}};
        break;
      }
      case Target::noise_sweep: {
        NoiseSweepSpec s;
        s.gain_db = num(t, "gain_db", s.gain_db);
        s.amp_temp = num(t, "amp_temp_k", s.amp_temp);
        s.atten_db = num(t, "atten_db", s.atten_db);
        s.ripple_db = num(t, "ripple_db", s.ripple_db);
        s.ripple_period = num(t, "ripple_period_hz", s.ripple_period);
        s.t_min = num(g, "t_min_k", s.t_min);
        s.t_max = num(g, "t_max_k", s.t_max);
        s.t_step = num(g, "t_step_k", s.t_step);
        s.f_min = num(g, "f_min_hz", s.f_min);
        s.f_max = num(g, "f_max_hz", s.f_max);
        s.n_freq = inum(g, "n_freq", s.n_freq);
        s.bandwidth = num(g, "bandwidth_hz", s.bandwidth);
        s.frac_noise = num(nz, "frac_p_out", 0.0);
        s.seed = spec.seed;
        const auto d = noise_sweep(s);
        out.files.push_back({"sweep.csv", io::sweep_to_table(d.sweep)});
        io::Table s21{{"freq_hz", "s21_db"}, {}};
        for (std::size_t i = 0; i < d.s21_freq.size(); ++i) s21.rows.push_back({d.s21_freq[i], d.s21_db[i]});
        out.files.push_back({"s21.csv", s21});
        truth_out["noise_sweep"] = {{"gain_db_center", s.gain_db}, {"amp_temp_k", s.amp_temp},
                                    {"n_sys_center", noise_quanta_from_temperature(s.amp_temp, s.center())},
                                    {"atten_db", s.atten_db}, {"bandwidth_hz", s.bandwidth},
                                    {"ripple_db", s.ripple_db}, {"ripple_period_hz", s.ripple_period}};
        break;
      }
      case Target::ringdown: {
        ShotSpec s;
        s.truth.f_r = num(t, "f_r_hz", s.truth.f_r);
        s.truth.qe_mag = num(t, "q_e_mag", s.truth.qe_mag);
        s.truth.q_i = num(t, "q_i", 0.0);
        s.t1 = num(t, "t1_s", s.t1);
        auto& c = s.config;
        c.t_on = num(g, "t_on_s", c.t_on);
        c.t_total = num(g, "t_total_s", c.t_total);
        c.sample_rate = num(g, "sample_rate_hz", c.sample_rate);
        c.shots = static_cast<std::size_t>(num(g, "shots", 1));
        c.delta = num(g, "delta_rad_s", 0.0);
        c.noise = num(nz, "sigma", 0.0);
        c.seed = spec.seed;
        const auto p = shot_truth(s);
        const auto shots = simulate_ringdown(p, c);
        for (std::size_t k = 0; k < shots.size(); ++k) {
          char name[32];
          std::snprintf(name, sizeof name, "shots/shot_%05zu.csv", k);
          out.files.push_back({name, io::shot_to_table(shots[k])});
        }
        truth_out["ringdown"] = io::resonance_json(p);
        truth_out["ringdown"]["t1_s"] = s.t1;
        out.manifest["shots"] = {{"count", c.shots}, {"sample_rate_hz", c.sample_rate}, {"t_on_s", c.t_on},
                                 {"t_total_s", c.t_total}, {"delta_rad_s", c.delta},
                                 {"kappa_e_rad_s", p.kappa_e()}};
        break;
      }
    }
  }
  json targets = json::array();
  for (auto tg : spec.targets) targets.push_back(target_name(tg));
  json files = json::array();
  for (const auto& f : out.files) files.push_back(f.name);
  out.manifest["schema_version"] = io::kSchemaVersion;
  out.manifest["tool_version"] = io::version();
  out.manifest["spec"] = {{"name", spec.name}, {"targets", targets}, {"grid", spec.grid}, {"noise", spec.noise}};
  out.manifest["truth"] = truth_out;
  out.manifest["seed"] = spec.seed;
  out.manifest["files"] = files;
  return out;
}

inline SynthSpec spec_from_json(const json& j) {
  SynthSpec s;
  if (!j.is_object()) throw io::input_error("synth spec: expected a JSON object");
  s.name = j.value("name", std::string("custom"));
  if (!j.contains("targets") && !j.contains("target")) throw io::input_error("synth spec: missing 'target'");
  if (j.contains("targets")) {
    for (const auto& x : j.at("targets")) s.targets.push_back(parse_target(x.get<std::string>()));
  } else {
    s.targets.push_back(parse_target(j.at("target").get<std::string>()));
  }
  s.truth = j.value("truth", json::object());
  s.grid = j.value("grid", json::object());
  s.noise = j.value("noise", json::object());
  s.seed = j.value("seed", std::uint64_t{1});
  return s;
}

inline void write_generated(const Generated& g, const std::string& dir) {
  for (const auto& f : g.files) io::write_csv(dir + "/" + f.name, f.table);
  io::write_json(dir + "/manifest.json", g.manifest);
}

}  // namespace phonoq::synth
