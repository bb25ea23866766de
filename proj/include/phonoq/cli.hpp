#pragma once

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <functional>
#include <iostream>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "calib.hpp"
#include "circuit.hpp"
#include "io.hpp"
#include "resonance.hpp"
#include "ringdown.hpp"
#include "synth.hpp"
#include "tls_loss.hpp"
#include "tls_micro.hpp"

namespace phonoq::cli {

using io::json;

inline constexpr int kExitOk = 0;
inline constexpr int kExitInternal = 1;
inline constexpr int kExitInput = 2;
inline constexpr int kExitNotConverged = 3;
inline constexpr int kExitUsage = 64;

inline const std::vector<std::string>& subcommands() {
  static const std::vector<std::string> v = {"fit-s11",   "fit-tls",  "fit-freqshift", "fit-participation",
                                             "fit-radiation", "fit-thermal", "ringdown", "vfit",
                                             "calib",     "synth",    "mc-variance",   "sweep-plan",
                                             "validate"};
  return v;
}

inline std::string usage() {
  std::string s =
      "usage: phonoq [--seed N] [--format json|csv] [--quiet] <subcommand> [options]\n"
      "subcommands:\n";
  for (const auto& c : subcommands()) s += "  " + c + "\n";
  s += "run 'phonoq <subcommand> --help' for options\n";
  return s;
}

// Common result envelope plus plot table.
struct Output {
  json result = json::object();
  io::Table plot;
  std::vector<std::string> warnings;
  bool converged = true;
};

struct Context {
  std::uint64_t seed = 1;
  bool seed_given = false;
  std::string format;  // empty means command default
  bool quiet = false;
  std::vector<std::pair<std::string, std::string>> inputs;  // path, hash

  std::string input(const std::string& path) {
    const std::string data = io::read_file(path);
    inputs.emplace_back(path, io::hex64(io::fnv1a(data)));
    return data;
  }
  io::Table csv(const std::string& path) { return io::parse_csv(input(path), path); }
  json json_file(const std::string& path) {
    const std::string data = input(path);
    try {
      return json::parse(data);
    } catch (const json::parse_error& e) {
      throw io::input_error(path + ": malformed JSON: " + e.what());
    }
  }
};

namespace detail {

inline json vs(double v, double s) { return io::value_sigma(v, s); }

inline std::string plot_path_for(const std::string& out) {
  std::filesystem::path p(out);
  if (p.extension() == ".json") p.replace_extension();
  return p.string() + ".plot.csv";
}

// ------------------------------------------------------------- commands

inline Output fit_s11(Context& ctx, const std::string& path, bool background) {
  const auto tr = io::trace_from_table(ctx.csv(path), TraceKind::reflection);
  ResonanceFitOptions opt;
  opt.fit_background = background;
  const auto r = fit_reflection(tr, opt);
  const auto& p = r.params;
  Output o;
  o.result = {{"f_r_hz", vs(p.f_r, r.sigma_f_r)},
              {"q_i", vs(p.q_i, r.sigma_q_i)},
              {"q_e_mag", vs(p.qe_mag, r.sigma_qe_mag)},
              {"phi_rad", vs(p.phi, r.sigma_phi)},
              {"q_e_dcm", vs(p.q_e(), r.sigma_q_e)},
              {"kappa_i_rad_s", vs(p.kappa_i(), r.sigma_kappa_i)},
              {"kappa_e_rad_s", vs(p.kappa_e(), r.sigma_kappa_e)},
              {"noise_rms", r.noise_rms},
              {"background", {{"a", r.background.a}, {"b_per_hz", r.background.b}, {"theta_rad", r.background.theta}}},
              {"fit", io::fit_summary(r.raw)}};
  o.plot.header = {"freq_hz", "re", "im", "model_re", "model_im"};
  for (std::size_t i = 0; i < tr.freq.size(); ++i) {
    const double f = tr.freq[i];
    const cplx m = eval_s11(p, f) * r.background.at(f, p.f_r);
    o.plot.rows.push_back({f, tr.value[i].real(), tr.value[i].imag(), m.real(), m.imag()});
  }
  o.converged = r.raw.converged;
  o.warnings = r.raw.warnings;
  return o;
}

inline json tls_json(const TlsLossParams& p, const TlsLossParams& s) {
  return {{"f_delta0_diss", vs(p.f_delta0_diss, s.f_delta0_diss)},
          {"n_c", vs(p.n_c, s.n_c)},
          {"beta", vs(p.beta, s.beta)},
          {"d", vs(p.d, s.d)},
          {"q_rel_t0", vs(p.q_rel_t0, s.q_rel_t0)},
          {"t0_k", p.t0},
          {"q_bkg", std::isfinite(p.q_bkg) ? json(vs(p.q_bkg, s.q_bkg)) : json("inf")}};
}

inline Output fit_tls(Context& ctx, const std::string& path, double t0, bool free_bkg) {
  const auto data = io::loss_from_table(ctx.csv(path));
  JointFitOptions opt;
  opt.t0 = t0;
  opt.free_background = free_bkg;
  const auto r = joint_fit(data, opt);
  Output o;
  o.result = {{"params", tls_json(r.params, r.sigma)}, {"n_points", data.size()}, {"fit", io::fit_summary(r.raw)}};
  o.plot.header = {"nbar", "temp_k", "q_i", "q_i_sigma", "model_q_i"};
  for (const auto& d : data)
    o.plot.rows.push_back({d.nbar, d.temp, d.q_i, d.q_i_sigma, 1.0 / q_total_inv(r.params, d.nbar, d.temp, d.freq)});
  o.converged = r.raw.converged;
  o.warnings = r.warnings;
  return o;
}

inline Output fit_freqshift(Context& ctx, const std::string& path, double f_probe) {
  const auto data = io::freqshift_from_table(ctx.csv(path));
  const auto r = fit_freq_shift(data, f_probe);
  Output o;
  o.result = {{"f_delta0_reac", vs(r.params.f_delta0_reac, r.sigma_f_delta0_reac)},
              {"f0_hz", vs(r.params.f0, r.sigma_f0)},
              {"fit", io::fit_summary(r.raw)}};
  o.plot.header = {"temp_k", "f_r_hz", "sigma_hz", "model_f_r_hz"};
  const double probe = f_probe > 0 ? f_probe : r.params.f0;
  for (const auto& d : data)
    o.plot.rows.push_back(
        {d.temp, d.f_r, d.sigma,
         r.params.f0 * (1.0 + r.params.f_delta0_reac / kPi * freq_shift_kernel(d.temp, probe))});
  o.converged = r.raw.converged;
  o.warnings = r.warnings;
  return o;
}

inline Output fit_participation(Context& ctx, const std::string& path) {
  const auto data = io::participation_from_table(ctx.csv(path));
  const auto r = participation_decomposition(data);
  Output o;
  o.result = {{"delta_qz", vs(r.delta_qz, r.sigma_qz)},
              {"delta_al", vs(r.delta_al, r.sigma_al)},
              {"covariance", r.covariance},
              {"chi2", r.chi2},
              {"n_points", r.n}};
  o.plot.header = {"f_al", "f_delta0", "sigma", "model_f_delta0"};
  for (const auto& d : data)
    o.plot.rows.push_back({d.f_al, d.f_delta0, d.sigma, d.f_al * r.delta_al + (1 - d.f_al) * r.delta_qz});
  return o;
}

inline Output fit_radiation(Context& ctx, const std::string& path, double n_extra) {
  const auto data = io::radiation_from_table(ctx.csv(path));
  const auto r = radiation_model_fit(data);
  Output o;
  const auto& s = r.raw.sigma;
  o.result = {{"q_mirr0_inv", vs(r.params.q_mirr0_inv, s[0])},
              {"beta", vs(r.params.beta, s[1])},
              {"q_tls", vs(r.params.q_tls, s[2])},
              {"extrapolation", {{"n_mirr", n_extra}, {"q_rad", vs(r.q_rad(n_extra), r.q_rad_sigma(n_extra))}}},
              {"fit", io::fit_summary(r.raw)}};
  o.plot.header = {"n_mirr", "q_i", "sigma", "model_q_i"};
  for (const auto& d : data) o.plot.rows.push_back({d.n_mirr, d.q_i, d.sigma, 1.0 / r.params.q_i_inv(d.n_mirr)});
  o.converged = r.raw.converged;
  o.warnings = r.warnings;
  return o;
}

inline Output fit_thermal(Context& ctx, const std::string& path, double t0, const std::string& loss_path) {
  const auto data = io::thermal_from_table(ctx.csv(path));
  const auto r = fit_thermal_model(data, t0);
  Output o;
  o.result = {{"gamma_exp", vs(r.model.gamma_exp, r.sigma_gamma)},
              {"g_th_t0_w_per_k", vs(r.model.g_th_t0, r.sigma_g_th)},
              {"channels", vs(r.channels, r.sigma_channels)},
              {"t0_k", r.model.t0},
              {"fit", io::fit_summary(r.raw)}};
  o.plot.header = {"p_in_w", "t_eff_k", "sigma_k", "model_t_eff_k"};
  for (const auto& d : data) o.plot.rows.push_back({d.p_in, d.t_eff, d.sigma, effective_temperature(r.model, d.p_in)});
  o.converged = r.raw.converged;
  o.warnings = r.raw.warnings;
  if (!loss_path.empty()) {
    const auto lp = io::ringdown_loss_from_table(ctx.csv(loss_path));
    const auto lf = fit_ringdown_loss(lp, RingdownLossParams{});
    o.result["loss"] = {{"n_c", vs(lf.params.n_c, lf.sigma_n_c)},
                        {"beta", vs(lf.params.beta, lf.sigma_beta)},
                        {"q_rad", vs(lf.params.q_rad, lf.sigma_q_rad)},
                        {"fit", io::fit_summary(lf.raw)}};
    o.converged = o.converged && lf.raw.converged;
  }
  return o;
}

// Shot files: a directory of shot_*.csv, or a synth output directory with shots/.
inline std::vector<std::string> shot_files(const std::string& dir) {
  namespace fs = std::filesystem;
  fs::path d(dir);
  if (!fs::is_directory(d)) throw io::input_error("not a directory: " + dir);
  if (fs::is_directory(d / "shots")) d /= "shots";
  std::vector<std::string> files;
  for (const auto& e : fs::directory_iterator(d))
    if (e.is_regular_file() && e.path().extension() == ".csv") files.push_back(e.path().string());
  std::sort(files.begin(), files.end());
  if (files.empty()) throw io::input_error("no shot CSV files in " + d.string());
  return files;
}

inline std::optional<json> shot_manifest(const std::string& dir) {
  namespace fs = std::filesystem;
  for (const auto& p : {fs::path(dir) / "manifest.json", fs::path(dir) / ".." / "manifest.json"}) {
    if (fs::exists(p)) {
      const auto m = io::read_json(p.string());
      if (m.contains("shots")) return m.at("shots");
    }
  }
  return std::nullopt;
}

struct RingdownArgs {
  std::string dir;
  double t_on = -1;     // s; <0 means manifest or error
  double kappa_e = -1;  // Hz
  double f_r = 0;       // Hz, for quality factors
  double skip_kappa = 3.0;
};

inline Output ringdown(Context& ctx, RingdownArgs a) {
  const auto files = shot_files(a.dir);
  std::vector<RingdownShot> shots;
  for (const auto& f : files) shots.push_back(io::shot_from_table(ctx.csv(f)));
  if (const auto m = shot_manifest(a.dir)) {
    if (a.t_on < 0 && m->contains("t_on_s")) a.t_on = m->at("t_on_s").get<double>();
    if (a.kappa_e < 0 && m->contains("kappa_e_rad_s")) a.kappa_e = rad_to_hz(m->at("kappa_e_rad_s").get<double>());
  }
  if (a.t_on < 0) throw io::input_error("ringdown: --t-on is required when no manifest is present");
  RingdownAnalysisOptions opt;
  opt.t_on = a.t_on;
  opt.skip_kappa = a.skip_kappa;
  opt.kappa_e = a.kappa_e > 0 ? hz_to_rad(a.kappa_e) : 0.0;
  const auto r = analyze_ringdown(shots, opt);
  Output o;
  o.result = {{"n_shots", shots.size()},
              {"t1r_s", vs(r.t1r, r.sigma_t1r)},
              {"t2r_s", vs(r.t2r, r.sigma_t2r)},
              {"a_s", {r.a_s.real(), r.a_s.imag()}},
              {"a_r", {r.a_r.real(), r.a_r.imag()}},
              {"delta_rad_s", r.delta},
              {"delta_fft_rad_s", r.delta_fft},
              {"delta_below_resolution", r.delta_below_resolution},
              {"fft_below_resolution", r.fft_below_resolution},
              {"fit", io::fit_summary(r.incoherent.raw)}};
  if (a.f_r > 0) {
    const double q = quality_from_tau(a.f_r, r.t1r);
    o.result["q_loaded"] = vs(q, q * r.sigma_t1r / r.t1r);
    if (a.kappa_e > 0) {
      const double qe = a.f_r / a.kappa_e;
      const double qi = internal_q(q, qe);
      // dQi/dQ = (Qi/Q)^2
      o.result["q_i"] = vs(qi, qi * qi / (q * q) * q * r.sigma_t1r / r.t1r);
    }
  }
  const auto inc = average_shots(shots, AverageMode::incoherent);
  const auto coh = average_shots(shots, AverageMode::coherent);
  auto model = [](const DecayFit& d, double t) { return d.amplitude * std::exp(-(t - d.t_ref) / d.tau) + d.offset; };
  o.plot.header = {"time_s", "energy_incoherent", "energy_coherent", "model_incoherent", "model_coherent"};
  for (std::size_t k = 0; k < inc.time.size(); ++k) {
    const double t = inc.time[k];
    if (t < a.t_on) continue;
    o.plot.rows.push_back({t, inc.energy[k], coh.energy[k], model(r.incoherent, t), model(r.coherent, t)});
  }
  o.converged = r.incoherent.raw.converged;
  o.warnings = r.incoherent.warnings;
  for (const auto& w : r.coherent.warnings) o.warnings.push_back(w);
  return o;
}

inline Output vfit(Context& ctx, const std::string& path, int pairs, double z0, int iterations) {
  const auto tr = io::trace_from_table(ctx.csv(path), TraceKind::admittance);
  VectorFitOptions opt;
  opt.iterations = iterations;
  const auto r = vector_fit(tr, static_cast<std::size_t>(pairs), opt);
  Output o;
  json modes = json::array();
  std::vector<CircuitExtraction> ex;
  try {
    ex = extract_circuits(r.model, z0);
  } catch (const fit::fit_error& e) {
    o.warnings.push_back(e.what());
  }
  for (std::size_t i = 0; i < r.model.pairs.size(); ++i) {
    const auto& pp = r.model.pairs[i];
    json m = {{"pole", {pp.pole.real(), pp.pole.imag()}},
              {"residue", {pp.residue.real(), pp.residue.imag()}},
              {"frequency_hz", pp.frequency_hz()}};
    if (i < ex.size()) {
      m["circuit"] = io::circuit_json(ex[i].circuit);
      m["resonance"] = io::resonance_json(ex[i].resonance);
      m["vccs_ratio"] = ex[i].vccs_ratio;
    }
    modes.push_back(m);
  }
  o.result = {{"n_pairs", pairs},
              {"e_farad", r.model.e},
              {"modes", modes},
              {"iterations", r.iterations},
              {"converged", r.converged},
              {"max_rel_error", r.max_rel_error},
              {"rms_rel_error", r.rms_rel_error},
              {"z0_ohm", z0}};
  o.plot.header = {"freq_hz", "re", "im", "model_re", "model_im"};
  for (std::size_t i = 0; i < tr.freq.size(); ++i) {
    const cplx m = eval_admittance(r.model, hz_to_rad(tr.freq[i]));
    o.plot.rows.push_back({tr.freq[i], tr.value[i].real(), tr.value[i].imag(), m.real(), m.imag()});
  }
  o.converged = r.converged;
  for (const auto& w : r.warnings) o.warnings.push_back(w);
  return o;
}

inline Output calib(Context& ctx, const std::string& sweep_path, double bandwidth, const std::string& s21_path,
                    const std::string& form) {
  if (form != "full" && form != "classical") throw io::input_error("calib: --form must be 'full' or 'classical'");
  const auto sw = io::sweep_from_table(ctx.csv(sweep_path), bandwidth);
  const auto g = gain_from_noise_sweep(sw, form == "full" ? NoiseForm::full : NoiseForm::classical);
  Output o;
  o.result = {{"bandwidth_hz", bandwidth},
              {"noise_form", form},
              {"frequencies_hz", g.frequencies},
              {"gain_db", g.gain_db},
              {"gain_sigma_db", g.gain_sigma_db},
              {"n_sys", g.n_sys},
              {"n_sys_sigma", g.n_sys_sigma}};
  o.plot.header = {"freq_hz", "gain_db", "gain_sigma_db", "n_sys", "n_sys_sigma"};
  for (std::size_t j = 0; j < g.frequencies.size(); ++j)
    o.plot.rows.push_back({g.frequencies[j], g.gain_db[j], g.gain_sigma_db[j], g.n_sys[j], g.n_sys_sigma[j]});
  if (!s21_path.empty()) {
    const auto t = ctx.csv(s21_path);
    const std::size_t cf = t.col("freq_hz"), cs = t.col("s21_db");
    std::vector<double> fv, sv;
    for (const auto& row : t.rows) {
      fv.push_back(row[cf]);
      sv.push_back(row[cs]);
    }
    std::vector<double> att;
    try {
      att = attenuation_from_transmission(fv, sv, g.frequencies, g.gain_db);
    } catch (const std::out_of_range& e) {
      throw io::input_error(s21_path + ": " + e.what());
    }
    o.result["attenuation"] = {{"frequencies_hz", fv}, {"atten_db", att}};
  }
  return o;
}

struct McArgs {
  double f_r = 500e6;
  std::vector<double> ratios{100.0};
  std::size_t n_tls = 1000;
  std::size_t trials = 10000;
  std::size_t bootstrap = 200;
};

inline Output mc_variance(Context& ctx, const McArgs& a) {
  Output o;
  json rows = json::array();
  o.plot.header = {"omega_ratio", "ratio", "ci_lo", "ci_hi", "analytic"};
  for (double x : a.ratios) {
    if (!(x > 1)) throw io::input_error("mc-variance: --ratio values must exceed 1");
    VarianceConfig c;
    c.omega_r = hz_to_rad(a.f_r);
    c.omega_max = x * c.omega_r;
    c.n_tls = a.n_tls;
    c.trials = a.trials;
    c.bootstrap = a.bootstrap;
    c.seed = ctx.seed;
    const auto r = variance_mc(c);
    rows.push_back({{"omega_ratio", x},
                    {"ratio", r.ratio},
                    {"ci95", {r.ci_lo, r.ci_hi}},
                    {"analytic", r.analytic},
                    {"var_im", r.var_im},
                    {"var_re", r.var_re}});
    o.plot.rows.push_back({x, r.ratio, r.ci_lo, r.ci_hi, r.analytic});
  }
  o.result = {{"f_r_hz", a.f_r}, {"n_tls", a.n_tls}, {"trials", a.trials}, {"runs", rows}};
  return o;
}

inline Output sweep_plan(double f_r, double kappa_hz, double span, int n) {
  const auto plan = homophasal_sweep(f_r, hz_to_rad(kappa_hz), span, n);
  Output o;
  o.result = {{"f_r_hz", f_r}, {"kappa_hz", kappa_hz}, {"span_hz", plan.span},
              {"n", plan.n},   {"w", plan.w},          {"points_hz", plan.points}};
  o.plot.header = {"index", "freq_hz", "phase_rad"};
  for (std::size_t k = 0; k < plan.points.size(); ++k)
    o.plot.rows.push_back(
        {static_cast<double>(k), plan.points[k], 2.0 * std::atan(2.0 * (plan.points[k] - f_r) / kappa_hz)});
  return o;
}

// ------------------------------------------------------------- validate

struct Diagnostics {
  std::vector<std::string> errors, warnings;
};

inline void check_number(const json& j, const std::string& key, Diagnostics& d, bool positive,
                         std::optional<std::pair<double, double>> bounds = std::nullopt) {
  if (!j.contains(key)) return;
  const auto& v = j.at(key);
  double x;
  if (v.is_object() && v.contains("value") && v.at("value").is_number()) {
    x = v.at("value").get<double>();
  } else if (v.is_number()) {
    x = v.get<double>();
  } else if (v.is_string() && v.get<std::string>() == "inf") {
    return;
  } else {
    d.errors.push_back(key + ": must be a number");
    return;
  }
  if (!std::isfinite(x)) {
    d.errors.push_back(key + ": must be finite");
    return;
  }
  if (positive && !(x > 0)) {
    d.errors.push_back(key + ": must be > 0 (got " + io::fmt(x) + ")");
    return;
  }
  if (bounds && (x < bounds->first || x > bounds->second))
    d.warnings.push_back(key + " = " + io::fmt(x) + " outside the fit bounds [" + io::fmt(bounds->first) + ", " +
                         io::fmt(bounds->second) + "]");
}

inline Diagnostics validate_json(const json& j) {
  Diagnostics d;
  if (!j.is_object()) {
    d.errors.push_back("top level: expected a JSON object");
    return d;
  }
  const json& p = j.contains("params") && j.at("params").is_object() ? j.at("params") : j;
  bool known = false;
  if (p.contains("target") || p.contains("targets")) {
    known = true;
    try {
      synth::spec_from_json(p);
    } catch (const std::exception& e) {
      d.errors.push_back(e.what());
    }
  }
  for (const char* k : {"f_delta0_diss", "n_c", "beta", "d", "q_rel_t0"})
    if (p.contains(k)) known = true;
  if (known && !(p.contains("target") || p.contains("targets"))) {
    check_number(p, "f_delta0_diss", d, true, std::pair{1e-12, 1.0});
    check_number(p, "n_c", d, true, std::pair{1e-8, 1e12});
    check_number(p, "d", d, true, std::pair{0.5, 4.0});
    check_number(p, "q_rel_t0", d, true, std::pair{1.0, 1e16});
    check_number(p, "t0_k", d, true);
    check_number(p, "q_bkg", d, true);
    if (p.contains("beta")) {
      check_number(p, "beta", d, false);
      const auto& v = p.at("beta");
      const double b = v.is_object() && v.contains("value") ? v.at("value").get<double>()
                                                             : (v.is_number() ? v.get<double>() : 1.0);
      if (!(b > 0 && b <= 2)) d.warnings.push_back("beta = " + io::fmt(b) + " outside the physical range (0, 2]");
    }
  }
  for (const char* k : {"f_r_hz", "q_i", "q_e_mag"}) {
    if (p.contains(k)) {
      known = true;
      check_number(p, k, d, true);
    }
  }
  if (!known) d.errors.push_back("unrecognised document: no known parameter or spec keys");
  return d;
}

inline Diagnostics validate_csv(const io::Table& t) {
  Diagnostics d;
  try {
    if (t.has("freq_hz") && t.has("re")) {
      io::trace_from_table(t, TraceKind::reflection).validate();
    } else if (t.has("freq_hz") && t.has("re_siemens")) {
      io::trace_from_table(t, TraceKind::admittance).validate();
    } else if (t.has("nbar") && t.has("temp_k")) {
      validate(io::loss_from_table(t));
    } else if (t.has("f_r_hz") && t.has("temp_k")) {
      io::freqshift_from_table(t);
    } else if (t.has("f_al")) {
      io::participation_from_table(t);
    } else if (t.has("n_mirr")) {
      io::radiation_from_table(t);
    } else if (t.has("p_in_w")) {
      io::thermal_from_table(t);
    } else if (t.has("nbar") && t.has("t_eff_k")) {
      io::ringdown_loss_from_table(t);
    } else if (t.has("time_s")) {
      io::shot_from_table(t).validate();
    } else if (t.has("p_out_w")) {
      io::sweep_from_table(t, 1.0).validate();
    } else {
      d.errors.push_back("unrecognised CSV header");
    }
  } catch (const std::exception& e) {
    d.errors.push_back(e.what());
  }
  return d;
}

}  // namespace detail

// Runs the command line; returns the process exit code.
inline int run(int argc, const char* const* argv, std::ostream& out = std::cout, std::ostream& err = std::cerr) {
  // Unknown subcommands get the usage text and a distinct exit code.
  {
    const std::set<std::string> with_value = {"--seed", "--format"};
    const auto& known = subcommands();
    bool found = false;
    for (int i = 1; i < argc; ++i) {
      const std::string a = argv[i];
      if (a == "-h" || a == "--help" || a == "--version") {
        found = true;
        break;
      }
      if (with_value.count(a)) {
        ++i;
        continue;
      }
      if (!a.empty() && a[0] == '-') continue;
      if (std::find(known.begin(), known.end(), a) == known.end()) {
        err << "phonoq: unknown subcommand '" << a << "'\n" << usage();
        return kExitUsage;
      }
      found = true;
      break;
    }
    if (!found) {
      err << usage();
      return kExitUsage;
    }
  }

  Context ctx;
  CLI::App app{"phonoq: phonon-resonator loss analysis toolkit", "phonoq"};
  app.set_version_flag("--version", io::version());
  app.require_subcommand(1);
  app.fallthrough();
  auto* seed_opt = app.add_option("--seed", ctx.seed, "RNG seed for stochastic steps");
  app.add_option("--format", ctx.format, "Primary output format")->check(CLI::IsMember({"json", "csv"}));
  app.add_flag("--quiet,-q", ctx.quiet, "Suppress diagnostics on stderr");

  std::string out_path, plot_path;
  auto add_io = [&](CLI::App* s) {
    s->add_option("-o,--out", out_path, "Result file (default: stdout)");
    s->add_option("--plot", plot_path, "Plot CSV path (default: next to --out)");
  };
  std::function<Output()> action;
  std::string input;

  auto* s11 = app.add_subcommand("fit-s11", "Fit a reflection trace (freq_hz,re,im)");
  bool background = false;
  s11->add_option("-i,--input", input, "Trace CSV")->required();
  s11->add_flag("--background", background, "Co-fit a complex affine background");
  add_io(s11);
  s11->callback([&] { action = [&] { return detail::fit_s11(ctx, input, background); }; });

  auto* tls = app.add_subcommand("fit-tls", "Joint TLS loss fit (nbar,temp_k,q_i,q_i_sigma,freq_hz)");
  double t0 = 0.25;
  bool free_bkg = false;
  tls->add_option("-i,--input", input, "Loss CSV")->required();
  tls->add_option("--t0", t0, "Relaxation reference temperature in K")->capture_default_str();
  tls->add_flag("--free-background", free_bkg, "Fit a constant background loss");
  add_io(tls);
  tls->callback([&] { action = [&] { return detail::fit_tls(ctx, input, t0, free_bkg); }; });

  auto* fs = app.add_subcommand("fit-freqshift", "Fit the TLS frequency shift (temp_k,f_r_hz,sigma_hz)");
  double f_probe = 0.0;
  fs->add_option("-i,--input", input, "Frequency-shift CSV")->required();
  fs->add_option("--f-probe", f_probe, "Probe frequency in Hz (0 = fitted f0)");
  add_io(fs);
  fs->callback([&] { action = [&] { return detail::fit_freqshift(ctx, input, f_probe); }; });

  auto* part = app.add_subcommand("fit-participation", "Split loss tangents by participation (f_al,f_delta0,sigma)");
  part->add_option("-i,--input", input, "Participation CSV")->required();
  add_io(part);
  part->callback([&] { action = [&] { return detail::fit_participation(ctx, input); }; });

  auto* rad = app.add_subcommand("fit-radiation", "Fit mirror-number radiation loss (n_mirr,q_i,sigma)");
  double n_extra = 7.0;
  rad->add_option("-i,--input", input, "Radiation CSV")->required();
  rad->add_option("--extrapolate", n_extra, "Mirror count for Q_rad extrapolation")->capture_default_str();
  add_io(rad);
  rad->callback([&] { action = [&] { return detail::fit_radiation(ctx, input, n_extra); }; });

  auto* th = app.add_subcommand("fit-thermal", "Fit the self-heating model (p_in_w,t_eff_k,sigma_k)");
  double th_t0 = 0.025;
  std::string loss_path;
  th->add_option("-i,--input", input, "Thermal CSV")->required();
  th->add_option("--t0", th_t0, "Bath temperature in K")->capture_default_str();
  th->add_option("--loss", loss_path, "Ringdown loss CSV (nbar,t_eff_k,q_i,q_i_sigma)");
  add_io(th);
  th->callback([&] { action = [&] { return detail::fit_thermal(ctx, input, th_t0, loss_path); }; });

  auto* rd = app.add_subcommand("ringdown", "Analyse ringdown shots (time_s,i,q per file)");
  detail::RingdownArgs rda;
  rd->add_option("-i,--input", rda.dir, "Directory of shot CSV files")->required();
  rd->add_option("--t-on", rda.t_on, "Drive-off time in s (default: from manifest)");
  rd->add_option("--kappa-e", rda.kappa_e, "External linewidth in Hz (default: from manifest)");
  rd->add_option("--fr", rda.f_r, "Resonance frequency in Hz, enables Q outputs");
  rd->add_option("--skip-kappa", rda.skip_kappa, "Decay-fit start in units of 1/kappa")->capture_default_str();
  add_io(rd);
  rd->callback([&] { action = [&] { return detail::ringdown(ctx, rda); }; });

  auto* vf = app.add_subcommand("vfit", "Vector-fit an admittance trace (freq_hz,re_siemens,im_siemens)");
  int pairs = 1, iterations = 100;
  double z0 = 50.0;
  vf->add_option("-i,--input", input, "Admittance CSV")->required();
  vf->add_option("--pairs", pairs, "Number of complex pole pairs")->required()->check(CLI::PositiveNumber);
  vf->add_option("--z0", z0, "Reference impedance in ohm")->capture_default_str();
  vf->add_option("--iterations", iterations, "Maximum relocation iterations")->capture_default_str();
  add_io(vf);
  vf->callback([&] { action = [&] { return detail::vfit(ctx, input, pairs, z0, iterations); }; });

  auto* cal = app.add_subcommand("calib", "Gain calibration from a noise-temperature sweep (temp_k,freq_hz,p_out_w)");
  double bandwidth = 1e6;
  std::string s21_path, form = "full";
  cal->add_option("-i,--input", input, "Noise sweep CSV")->required();
  cal->add_option("--bandwidth", bandwidth, "Measurement bandwidth in Hz")->capture_default_str();
  cal->add_option("--s21", s21_path, "Total transmission CSV (freq_hz,s21_db) for attenuation");
  cal->add_option("--form", form, "Noise formula: full or classical")->capture_default_str();
  add_io(cal);
  cal->callback([&] { action = [&] { return detail::calib(ctx, input, bandwidth, s21_path, form); }; });

  auto* sy = app.add_subcommand("synth", "Generate synthetic datasets");
  std::string preset, spec_path, synth_dir;
  bool list = false;
  auto* pre_opt = sy->add_option("--preset", preset, "Named preset");
  auto* spec_opt = sy->add_option("--spec", spec_path, "Spec JSON");
  pre_opt->excludes(spec_opt);
  sy->add_option("--out-dir,-d", synth_dir, "Output directory");
  sy->add_flag("--list", list, "List presets");
  sy->add_option("-o,--out", out_path, "Result file (default: stdout)");
  sy->callback([&] {
    action = [&] {
      Output o;
      if (list) {
        json names = json::array();
        for (const auto& [name, s] : synth::presets()) names.push_back(name);
        o.result = {{"presets", names}};
        return o;
      }
      synth::SynthSpec spec;
      if (!preset.empty()) {
        const auto ps = synth::presets();
        const auto it = ps.find(preset);
        if (it == ps.end()) throw io::input_error("synth: unknown preset '" + preset + "'");
        spec = it->second;
      } else if (!spec_path.empty()) {
        spec = synth::spec_from_json(ctx.json_file(spec_path));
      } else {
        throw io::input_error("synth: one of --preset, --spec or --list is required");
      }
      if (ctx.seed_given) spec.seed = ctx.seed;
      ctx.seed = spec.seed;
      if (synth_dir.empty()) throw io::input_error("synth: --out-dir is required");
      const auto g = synth::generate(spec);
      synth::write_generated(g, synth_dir);
      o.result = {{"out_dir", synth_dir}, {"manifest", g.manifest}};
      return o;
    };
  });

  auto* mc = app.add_subcommand("mc-variance", "Monte Carlo variance ratio of dissipative to reactive shifts");
  detail::McArgs mca;
  mc->add_option("--fr", mca.f_r, "Resonance frequency in Hz")->capture_default_str();
  mc->add_option("--ratio", mca.ratios, "omega_max/omega_r values")->delimiter(',');
  mc->add_option("--n-tls", mca.n_tls, "TLS per ensemble")->capture_default_str();
  mc->add_option("--trials", mca.trials, "Ensembles per ratio")->capture_default_str();
  mc->add_option("--bootstrap", mca.bootstrap, "Bootstrap resamples for the interval")->capture_default_str();
  add_io(mc);
  mc->callback([&] { action = [&] { return detail::mc_variance(ctx, mca); }; });

  auto* sp = app.add_subcommand("sweep-plan", "Homophasal frequency points for a reflection sweep");
  double sp_fr = 0, sp_kappa = 0, sp_span = 0;
  int sp_n = 201;
  sp->add_option("--fr", sp_fr, "Resonance frequency in Hz")->required();
  sp->add_option("--kappa", sp_kappa, "Total linewidth in Hz")->required();
  sp->add_option("--span", sp_span, "Sweep span in Hz")->required();
  sp->add_option("--n", sp_n, "Odd number of points")->capture_default_str();
  add_io(sp);
  sp->callback([&] {
    action = [&] {
      try {
        return detail::sweep_plan(sp_fr, sp_kappa, sp_span, sp_n);
      } catch (const std::invalid_argument& e) {
        throw io::input_error(e.what());
      }
    };
  });

  auto* va = app.add_subcommand("validate", "Check a parameter JSON or data CSV");
  std::string va_path;
  va->add_option("path", va_path, "File to check")->required();
  bool validate_mode = false;
  va->callback([&] { validate_mode = true; });

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    out << app.help("", CLI::AppFormatMode::All);
    return kExitOk;
  } catch (const CLI::CallForVersion&) {
    out << io::version() << "\n";
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    err << "phonoq: " << e.what() << "\n";
    return kExitInput;
  }
  ctx.seed_given = seed_opt->count() > 0;

  if (validate_mode) {
    detail::Diagnostics d;
    try {
      if (std::filesystem::path(va_path).extension() == ".csv") {
        d = detail::validate_csv(ctx.csv(va_path));
      } else {
        d = detail::validate_json(ctx.json_file(va_path));
      }
    } catch (const io::input_error& e) {
      err << "phonoq: " << e.what() << "\n";
      return kExitInput;
    }
    if (ctx.format == "json") {
      out << json{{"path", va_path},
                  {"status", d.errors.empty() ? "ok" : "invalid"},
                  {"errors", d.errors},
                  {"warnings", d.warnings}}
                 .dump(2)
          << "\n";
    } else {
      for (const auto& e : d.errors) out << "error: " << e << "\n";
      for (const auto& w : d.warnings) out << "warning: " << w << "\n";
      if (d.errors.empty()) out << "ok\n";
    }
    return d.errors.empty() ? kExitOk : kExitInput;
  }

  const std::string name = app.get_subcommands().front()->get_name();
  Output o;
  try {
    o = action();
  } catch (const io::input_error& e) {
    err << "phonoq " << name << ": input error: " << e.what() << "\n";
    return kExitInput;
  } catch (const std::invalid_argument& e) {
    err << "phonoq " << name << ": input error: " << e.what() << "\n";
    return kExitInput;
  } catch (const std::out_of_range& e) {
    err << "phonoq " << name << ": input error: " << e.what() << "\n";
    return kExitInput;
  } catch (const no_resonance_error& e) {
    err << "phonoq " << name << ": input error: " << e.what() << "\n";
    return kExitInput;
  } catch (const fit::fit_error& e) {
    err << "phonoq " << name << ": fit failed: " << e.what() << "\n";
    return kExitNotConverged;
  } catch (const std::exception& e) {
    err << "phonoq " << name << ": " << e.what() << "\n";
    return kExitInternal;
  }

  json inputs = json::array();
  for (const auto& [p, h] : ctx.inputs) inputs.push_back({{"path", p}, {"fnv1a", h}});
  json doc = {{"tool", "phonoq"},
              {"version", io::version()},
              {"schema_version", io::kSchemaVersion},
              {"subcommand", name},
              {"seed", ctx.seed},
              {"inputs", inputs},
              {"converged", o.converged},
              {"warnings", o.warnings},
              {"result", o.result}};
  const std::string json_text = doc.dump(2) + "\n";
  const std::string csv_text = o.plot.header.empty() ? std::string() : io::to_csv(o.plot);
  const bool csv_primary = ctx.format == "csv" && !csv_text.empty();
  try {
    if (out_path.empty()) {
      out << (csv_primary ? csv_text : json_text);
      if (!plot_path.empty() && !csv_text.empty()) io::write_file(plot_path, csv_text);
    } else {
      io::write_file(out_path, csv_primary ? csv_text : json_text);
      if (!csv_text.empty() && !csv_primary)
        io::write_file(plot_path.empty() ? detail::plot_path_for(out_path) : plot_path, csv_text);
    }
  } catch (const io::input_error& e) {
    err << "phonoq " << name << ": " << e.what() << "\n";
    return kExitInput;
  }
  if (!ctx.quiet)
    for (const auto& w : o.warnings) err << "phonoq " << name << ": warning: " << w << "\n";
  if (!o.converged) {
    if (!ctx.quiet) err << "phonoq " << name << ": fit did not converge\n";
    return kExitNotConverged;
  }
  return kExitOk;
}

}  // namespace phonoq::cli
