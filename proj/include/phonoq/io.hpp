#pragma once

#include <charconv>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "calib.hpp"
#include "circuit.hpp"
#include "resonance.hpp"
#include "ringdown.hpp"
#include "tls_loss.hpp"

namespace phonoq::io {

using nlohmann::json;

// Bad or missing input; maps to exit code 2 in the CLI.
class input_error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

inline constexpr int kSchemaVersion = 1;

inline std::string version() {
#ifdef PHONOQ_VERSION
  return PHONOQ_VERSION;
#else
  return "0.0.0";
#endif
}

// 64-bit FNV-1a.
inline std::uint64_t fnv1a(const std::string& data) {
  std::uint64_t h = 14695981039346656037ull;
  for (unsigned char c : data) {
    h ^= c;
    h *= 1099511628211ull;
  }
  return h;
}

inline std::string hex64(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

inline std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw input_error("cannot open input file: " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline void write_file(const std::string& path, const std::string& data) {
  const std::filesystem::path p(path);
  if (p.has_parent_path()) std::filesystem::create_directories(p.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw input_error("cannot write output file: " + path);
  out << data;
  if (!out) throw input_error("write failed: " + path);
}

inline std::string hash_file(const std::string& path) { return hex64(fnv1a(read_file(path))); }

// Shortest text that round-trips a double.
inline std::string fmt(double v) {
  char buf[64];
  auto r = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, r.ptr);
}

struct Table {
  std::vector<std::string> header;
  std::vector<std::vector<double>> rows;

  std::size_t col(const std::string& name) const {
    for (std::size_t i = 0; i < header.size(); ++i)
      if (header[i] == name) return i;
    throw input_error("missing CSV column '" + name + "'");
  }
  bool has(const std::string& name) const {
    for (const auto& h : header)
      if (h == name) return true;
    return false;
  }
};

inline std::string trim(std::string s) {
  const auto a = s.find_first_not_of(" \t\r\n");
  if (a == std::string::npos) return "";
  const auto b = s.find_last_not_of(" \t\r\n");
  return s.substr(a, b - a + 1);
}

inline std::vector<std::string> split(const std::string& line, char sep = ',') {
  std::vector<std::string> out;
  std::string cur;
  std::istringstream ss(line);
  while (std::getline(ss, cur, sep)) out.push_back(trim(cur));
  if (!line.empty() && line.back() == sep) out.emplace_back();
  return out;
}

// Header row plus numeric rows; blank lines and '#' comments skipped.
inline Table parse_csv(const std::string& text, const std::string& label = "csv") {
  Table t;
  std::istringstream in(text);
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    line = trim(line);
    if (line.empty() || line[0] == '#') continue;
    auto cells = split(line);
    if (t.header.empty()) {
      t.header = cells;
      continue;
    }
    if (cells.size() != t.header.size())
      throw input_error(label + ":" + std::to_string(lineno) + ": expected " + std::to_string(t.header.size()) +
                        " columns, got " + std::to_string(cells.size()));
    std::vector<double> row(cells.size());
    for (std::size_t i = 0; i < cells.size(); ++i) {
      const auto& c = cells[i];
      auto r = std::from_chars(c.data(), c.data() + c.size(), row[i]);
      if (r.ec != std::errc() || r.ptr != c.data() + c.size())
        throw input_error(label + ":" + std::to_string(lineno) + ": not a number: '" + c + "'");
    }
    t.rows.push_back(std::move(row));
  }
  if (t.header.empty()) throw input_error(label + ": empty CSV");
  return t;
}

inline Table read_csv(const std::string& path) { return parse_csv(read_file(path), path); }

inline std::string to_csv(const Table& t) {
  std::string out;
  for (std::size_t i = 0; i < t.header.size(); ++i) out += (i ? "," : "") + t.header[i];
  out += "\n";
  for (const auto& r : t.rows) {
    for (std::size_t i = 0; i < r.size(); ++i) out += (i ? "," : "") + fmt(r[i]);
    out += "\n";
  }
  return out;
}

inline void write_csv(const std::string& path, const Table& t) { write_file(path, to_csv(t)); }

inline json read_json(const std::string& path) {
  const auto text = read_file(path);
  try {
    return json::parse(text);
  } catch (const json::parse_error& e) {
    throw input_error(path + ": malformed JSON: " + e.what());
  }
}

inline void write_json(const std::string& path, const json& j) { write_file(path, j.dump(2) + "\n"); }

// ------------------------------------------------------------- traces

inline ComplexTrace trace_from_table(const Table& t, TraceKind kind) {
  const bool adm = kind == TraceKind::admittance;
  const auto fi = t.col("freq_hz");
  const auto ri = t.col(adm ? "re_siemens" : "re");
  const auto ii = t.col(adm ? "im_siemens" : "im");
  ComplexTrace tr;
  tr.kind = kind;
  for (const auto& r : t.rows) {
    tr.freq.push_back(r[fi]);
    tr.value.emplace_back(r[ri], r[ii]);
  }
  try {
    tr.validate();
  } catch (const std::invalid_argument& e) {
    throw input_error(e.what());
  }
  return tr;
}

inline Table trace_to_table(const ComplexTrace& tr) {
  const bool adm = tr.kind == TraceKind::admittance;
  Table t{{"freq_hz", adm ? "re_siemens" : "re", adm ? "im_siemens" : "im"}, {}};
  for (std::size_t i = 0; i < tr.size(); ++i) t.rows.push_back({tr.freq[i], tr.value[i].real(), tr.value[i].imag()});
  return t;
}

// -------------------------------------------------------- loss grids

inline LossDataset loss_from_table(const Table& t) {
  const auto a = t.col("nbar"), b = t.col("temp_k"), c = t.col("q_i"), f = t.col("freq_hz");
  const bool has_sigma = t.has("q_i_sigma");
  const auto s = has_sigma ? t.col("q_i_sigma") : 0;
  LossDataset d;
  for (const auto& r : t.rows) d.push_back({r[a], r[b], r[c], has_sigma ? r[s] : 0.0, r[f]});
  try {
    validate(d);
  } catch (const std::invalid_argument& e) {
    throw input_error(e.what());
  }
  return d;
}

inline Table loss_to_table(const LossDataset& d) {
  Table t{{"nbar", "temp_k", "q_i", "q_i_sigma", "freq_hz"}, {}};
  for (const auto& r : d) t.rows.push_back({r.nbar, r.temp, r.q_i, r.q_i_sigma, r.freq});
  return t;
}

inline std::vector<FreqShiftRecord> freqshift_from_table(const Table& t) {
  const auto a = t.col("temp_k"), b = t.col("f_r_hz");
  const bool hs = t.has("sigma_hz");
  const auto s = hs ? t.col("sigma_hz") : 0;
  std::vector<FreqShiftRecord> out;
  for (const auto& r : t.rows) out.push_back({r[a], r[b], hs ? r[s] : 0.0});
  return out;
}

inline Table freqshift_to_table(const std::vector<FreqShiftRecord>& d) {
  Table t{{"temp_k", "f_r_hz", "sigma_hz"}, {}};
  for (const auto& r : d) t.rows.push_back({r.temp, r.f_r, r.sigma});
  return t;
}

inline std::vector<ParticipationPoint> participation_from_table(const Table& t) {
  const auto a = t.col("f_al"), b = t.col("f_delta0");
  const bool hs = t.has("sigma");
  const auto s = hs ? t.col("sigma") : 0;
  std::vector<ParticipationPoint> out;
  for (const auto& r : t.rows) out.push_back({r[a], r[b], hs ? r[s] : 0.0});
  return out;
}

inline Table participation_to_table(const std::vector<ParticipationPoint>& d) {
  Table t{{"f_al", "f_delta0", "sigma"}, {}};
  for (const auto& r : d) t.rows.push_back({r.f_al, r.f_delta0, r.sigma});
  return t;
}

inline std::vector<RadiationPoint> radiation_from_table(const Table& t) {
  const auto a = t.col("n_mirr"), b = t.col("q_i");
  const bool hs = t.has("sigma");
  const auto s = hs ? t.col("sigma") : 0;
  std::vector<RadiationPoint> out;
  for (const auto& r : t.rows) out.push_back({r[a], r[b], hs ? r[s] : 0.0});
  return out;
}

inline Table radiation_to_table(const std::vector<RadiationPoint>& d) {
  Table t{{"n_mirr", "q_i", "sigma"}, {}};
  for (const auto& r : d) t.rows.push_back({r.n_mirr, r.q_i, r.sigma});
  return t;
}

inline std::vector<ThermalPoint> thermal_from_table(const Table& t) {
  const auto a = t.col("p_in_w"), b = t.col("t_eff_k");
  const bool hs = t.has("sigma_k");
  const auto s = hs ? t.col("sigma_k") : 0;
  std::vector<ThermalPoint> out;
  for (const auto& r : t.rows) out.push_back({r[a], r[b], hs ? r[s] : 0.0});
  return out;
}

inline Table thermal_to_table(const std::vector<ThermalPoint>& d) {
  Table t{{"p_in_w", "t_eff_k", "sigma_k"}, {}};
  for (const auto& r : d) t.rows.push_back({r.p_in, r.t_eff, r.sigma});
  return t;
}

inline std::vector<RingdownLossPoint> ringdown_loss_from_table(const Table& t) {
  const auto a = t.col("nbar"), b = t.col("t_eff_k"), c = t.col("q_i");
  const bool hs = t.has("q_i_sigma");
  const auto s = hs ? t.col("q_i_sigma") : 0;
  std::vector<RingdownLossPoint> out;
  for (const auto& r : t.rows) out.push_back({r[a], r[b], r[c], hs ? r[s] : 0.0});
  return out;
}

inline Table ringdown_loss_to_table(const std::vector<RingdownLossPoint>& d) {
  Table t{{"nbar", "t_eff_k", "q_i", "q_i_sigma"}, {}};
  for (const auto& r : d) t.rows.push_back({r.nbar, r.t_eff, r.q_i, r.sigma});
  return t;
}

// ---------------------------------------------------------- ringdown

inline RingdownShot shot_from_table(const Table& t) {
  const auto a = t.col("time_s"), b = t.col("i"), c = t.col("q");
  RingdownShot s;
  for (const auto& r : t.rows) {
    s.time.push_back(r[a]);
    s.i_values.push_back(r[b]);
    s.q_values.push_back(r[c]);
  }
  try {
    s.validate();
  } catch (const std::invalid_argument& e) {
    throw input_error(e.what());
  }
  return s;
}

inline Table shot_to_table(const RingdownShot& s) {
  Table t{{"time_s", "i", "q"}, {}};
  for (std::size_t k = 0; k < s.time.size(); ++k) t.rows.push_back({s.time[k], s.i_values[k], s.q_values[k]});
  return t;
}

// ------------------------------------------------------- calibration

// Long-form sweep: one row per (temperature, frequency).
inline NoiseSweep sweep_from_table(const Table& t, double bandwidth) {
  const auto a = t.col("temp_k"), b = t.col("freq_hz"), c = t.col("p_out_w");
  std::map<double, std::map<double, double>> grid;
  for (const auto& r : t.rows) {
    if (!grid[r[a]].emplace(r[b], r[c]).second)
      throw input_error("noise sweep: duplicate row for T = " + fmt(r[a]) + " K, f = " + fmt(r[b]) + " Hz");
  }
  NoiseSweep sw;
  sw.bandwidth = bandwidth;
  for (const auto& [temp, row] : grid) {
    if (sw.frequencies.empty())
      for (const auto& [f, p] : row) sw.frequencies.push_back(f);
    if (row.size() != sw.frequencies.size())
      throw input_error("noise sweep: temperature " + fmt(temp) + " K has a different frequency grid");
    sw.temperatures.push_back(temp);
    std::vector<double> spec;
    std::size_t k = 0;
    for (const auto& [f, p] : row) {
      if (f != sw.frequencies[k++])
        throw input_error("noise sweep: temperature " + fmt(temp) + " K has a different frequency grid");
      spec.push_back(p);
    }
    sw.p_out.push_back(std::move(spec));
  }
  try {
    sw.validate();
  } catch (const std::invalid_argument& e) {
    throw input_error(e.what());
  }
  return sw;
}

inline Table sweep_to_table(const NoiseSweep& sw) {
  Table t{{"temp_k", "freq_hz", "p_out_w"}, {}};
  for (std::size_t i = 0; i < sw.temperatures.size(); ++i)
    for (std::size_t j = 0; j < sw.frequencies.size(); ++j)
      t.rows.push_back({sw.temperatures[i], sw.frequencies[j], sw.p_out[i][j]});
  return t;
}

// ------------------------------------------------------------- JSON

inline json value_sigma(double v, double s) { return {{"value", v}, {"sigma", s}}; }

inline json circuit_json(const BvdCircuit& c) {
  return {{"r_ohm", c.r}, {"l_h", c.l}, {"c_f", c.c}, {"c0_f", c.c0}, {"b", c.b}, {"g", c.g}};
}

inline json resonance_json(const ResonanceParams& p) {
  return {{"f_r_hz", p.f_r},        {"q_i", p.q_i},
          {"q_e_mag", p.qe_mag},    {"phi_rad", p.phi},
          {"q_e_dcm", p.q_e()},     {"kappa_i_rad_s", p.kappa_i()},
          {"kappa_e_rad_s", p.kappa_e()}};
}

inline json tls_params_json(const TlsLossParams& p) {
  return {{"f_delta0_diss", p.f_delta0_diss}, {"n_c", p.n_c}, {"beta", p.beta},     {"d", p.d},
          {"q_rel_t0", p.q_rel_t0},           {"t0_k", p.t0}, {"q_bkg", p.q_bkg}};
}

inline json fit_summary(const fit::FitResult& r) {
  return {{"converged", r.converged}, {"iterations", r.iterations}, {"cost", r.cost},
          {"dof", r.dof()},           {"status", r.status},         {"warnings", r.warnings}};
}

}  // namespace phonoq::io
