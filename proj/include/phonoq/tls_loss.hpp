#pragma once

// Phenomenological TLS loss: saturable resonant absorption, power-law
// relaxation damping, the digamma frequency shift, and the two small
// linear/exponential side models (participation line, mirror leakage).

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <optional>
#include <set>
#include <stdexcept>
#include <string>
#include <vector>

#include "constants.hpp"
#include "fit.hpp"
#include "special.hpp"

namespace phonoq {

inline constexpr double kInf = std::numeric_limits<double>::infinity();

struct TlsLossParams {
  double f_delta0_diss = 1.26e-5;
  double n_c = 10.0;
  double beta = 0.56;
  double d = 1.9;
  double q_rel_t0 = 8.3e6;
  double t0 = 0.25;  // K, reference only, never fitted
  double q_bkg = kInf;

  void validate() const {
    if (!(f_delta0_diss > 0 && n_c > 0 && beta > 0 && d > 0 && q_rel_t0 > 0 && t0 > 0 && q_bkg > 0))
      throw std::invalid_argument("tls params: all values must be strictly positive");
  }
};

inline double q_resonant_inv(const TlsLossParams& p, double nbar, double temp, double f) {
  if (!(temp > 0)) throw std::invalid_argument("q_resonant_inv: T must be > 0");
  const double th = std::tanh(half_reduced_energy(f, temp));
  return p.f_delta0_diss * th / std::sqrt(1.0 + std::pow(nbar / p.n_c, p.beta) * th);
}

inline double q_relaxation_inv(const TlsLossParams& p, double temp) {
  if (!(temp > 0)) throw std::invalid_argument("q_relaxation_inv: T must be > 0");
  return std::pow(temp / p.t0, p.d) / p.q_rel_t0;
}

inline double q_total_inv(const TlsLossParams& p, double nbar, double temp, double f) {
  return q_resonant_inv(p, nbar, temp, f) + q_relaxation_inv(p, temp) + 1.0 / p.q_bkg;
}

struct LossRecord {
  double nbar = 0;
  double temp = 0;  // K
  double q_i = 0;
  double q_i_sigma = 0;
  double freq = 0;  // Hz
};
using LossDataset = std::vector<LossRecord>;

inline void validate(const LossDataset& data) {
  if (data.empty()) throw std::invalid_argument("loss dataset is empty");
  for (std::size_t i = 0; i < data.size(); ++i) {
    const auto& r = data[i];
    if (!(r.nbar >= 0 && r.temp > 0 && r.q_i > 0 && r.freq > 0 && r.q_i_sigma >= 0))
      throw std::invalid_argument("loss dataset: invalid values in record " + std::to_string(i));
  }
}

struct JointFitOptions {
  double t0 = 0.25;
  bool free_background = false;
  // Pinned values; unset entries are fitted.
  std::optional<double> f_delta0_diss, n_c, beta, d, q_rel_t0, q_bkg;
  std::optional<TlsLossParams> guess;
  fit::Tolerances tolerances{};
};

struct TlsLossFit {
  TlsLossParams params;
  TlsLossParams sigma;  // one-sigma per field; 0 for pinned values
  fit::FitResult raw;   // order: f_delta0_diss, n_c, beta, d, q_rel_t0, q_bkg
  std::vector<std::string> warnings;
};

namespace detail {

inline TlsLossParams unpack_loss(const Eigen::VectorXd& x, double t0) {
  return {x[0], x[1], x[2], x[3], x[4], t0, x[5]};
}

inline TlsLossParams seed_loss(const LossDataset& data, double t0) {
  TlsLossParams g;
  g.t0 = t0;
  std::vector<double> nb;
  double tmin = kInf, tmax = 0;
  for (const auto& r : data) {
    nb.push_back(std::max(r.nbar, 1e-3));
    tmin = std::min(tmin, r.temp);
    tmax = std::max(tmax, r.temp);
  }
  std::sort(nb.begin(), nb.end());
  g.n_c = nb[nb.size() / 4];
  double lo_best = 0;
  for (const auto& r : data)
    if (r.temp <= tmin * 1.0001) lo_best = std::max(lo_best, 1.0 / r.q_i);
  g.f_delta0_diss = std::max(lo_best, 1e-9);
  g.beta = 0.8;
  g.d = 2.0;
  double hi_loss = kInf;
  for (const auto& r : data)
    if (r.temp >= tmax * 0.9999) hi_loss = std::min(hi_loss, 1.0 / r.q_i);
  g.q_rel_t0 = std::isfinite(hi_loss) && hi_loss > 0 ? std::pow(tmax / t0, g.d) / hi_loss : 1e7;
  return g;
}

}  // namespace detail

inline TlsLossFit joint_fit(const LossDataset& data, const JointFitOptions& opt = {}) {
  validate(data);
  TlsLossFit out;
  std::set<double> temps, nbars;
  for (const auto& r : data) {
    temps.insert(r.temp);
    nbars.insert(r.nbar);
  }

  const TlsLossParams g = opt.guess ? *opt.guess : detail::seed_loss(data, opt.t0);
  using fit::Param;
  using fit::Scale;
  std::vector<Param> ps = {
      {"f_delta0_diss", opt.f_delta0_diss.value_or(g.f_delta0_diss), 1e-12, 1.0, Scale::log, 1, opt.f_delta0_diss.has_value()},
      {"n_c", opt.n_c.value_or(g.n_c), 1e-8, 1e12, Scale::log, 1, opt.n_c.has_value()},
      {"beta", opt.beta.value_or(g.beta), 1e-3, 2.0, Scale::log, 1, opt.beta.has_value()},
      {"d", opt.d.value_or(g.d), 0.5, 4.0, Scale::log, 1, opt.d.has_value()},
      {"q_rel_t0", opt.q_rel_t0.value_or(g.q_rel_t0), 1.0, 1e16, Scale::log, 1, opt.q_rel_t0.has_value()},
      {"q_bkg", opt.q_bkg.value_or(opt.free_background ? 1e7 : kInf), 1.0, kInf, Scale::log, 1,
       opt.q_bkg.has_value() || !opt.free_background},
  };
  if (!ps[5].fixed) ps[5].upper = 1e16;

  // Residuals in inverse-Q space weighted by the propagated sigma.
  std::vector<double> y(data.size()), w(data.size());
  for (std::size_t i = 0; i < data.size(); ++i) {
    y[i] = 1.0 / data[i].q_i;
    const double s = data[i].q_i_sigma > 0 ? data[i].q_i_sigma / (data[i].q_i * data[i].q_i) : y[i];
    w[i] = 1.0 / s;
  }
  const double t0 = opt.t0;
  auto resid = [&](const Eigen::VectorXd& x) {
    const auto p = detail::unpack_loss(x, t0);
    Eigen::VectorXd r(static_cast<Eigen::Index>(data.size()));
    for (std::size_t i = 0; i < data.size(); ++i)
      r[static_cast<Eigen::Index>(i)] = (q_total_inv(p, data[i].nbar, data[i].temp, data[i].freq) - y[i]) * w[i];
    return r;
  };

  out.raw = fit::fit_params(ps, resid, opt.tolerances);
  out.params = detail::unpack_loss(out.raw.params, t0);
  const auto& s = out.raw.sigma;
  out.sigma = {s[0], s[1], s[2], s[3], s[4], 0.0, s[5]};
  out.warnings = out.raw.warnings;
  if (temps.size() < 2) {
    for (int j : {3, 4}) {
      if (!ps[static_cast<std::size_t>(j)].fixed) out.raw.sigma[j] = kInf;
    }
    out.sigma.d = opt.d ? 0.0 : kInf;
    out.sigma.q_rel_t0 = opt.q_rel_t0 ? 0.0 : kInf;
    out.warnings.push_back("single temperature: d and q_rel_t0 are unidentifiable");
  }
  if (nbars.size() < 2) out.warnings.push_back("single power: n_c and beta are weakly constrained");
  return out;
}

struct FreqShiftParams {
  double f_delta0_reac = 1.14e-5;
  double f0 = 502.1e6;  // Hz
};

// Bracketed term of the shift formula; depends on f and T only via hf/kT.
inline double freq_shift_kernel(double temp, double f) {
  const double y = kPlanck * f / (kTwoPi * kBoltzmann * temp);
  return complex_digamma(cplx(0.5, -y)).real() - std::log(y);
}

// Fractional shift (f_r - f0)/f0.
inline double freq_shift(const FreqShiftParams& p, double temp, double f_r) {
  if (!(temp > 0)) throw std::invalid_argument("freq_shift: T must be > 0");
  return p.f_delta0_reac / kPi * freq_shift_kernel(temp, f_r);
}

struct FreqShiftRecord {
  double temp = 0;
  double f_r = 0;
  double sigma = 0;  // Hz, 0 = unweighted
};

struct FreqShiftFit {
  FreqShiftParams params;
  double sigma_f_delta0_reac = 0;
  double sigma_f0 = 0;
  fit::FitResult raw;  // order: f_delta0_reac, f0
  std::vector<std::string> warnings;
};

// f_probe: frequency used inside the digamma argument (0 = use fitted f0).
inline FreqShiftFit fit_freq_shift(const std::vector<FreqShiftRecord>& series, double f_probe = 0.0,
                                   fit::Tolerances tol = {}) {
  if (series.size() < 3) throw std::invalid_argument("fit_freq_shift: need at least 3 points");
  for (const auto& r : series)
    if (!(r.temp > 0 && r.f_r > 0)) throw std::invalid_argument("fit_freq_shift: invalid record");
  double fref = 0;
  for (const auto& r : series) fref = std::max(fref, r.f_r);
  const double fscale = fref * 1e-6;
  bool weighted = std::all_of(series.begin(), series.end(), [](const auto& r) { return r.sigma > 0; });

  auto model = [&](double fd, double f0, double T) {
    const double probe = f_probe > 0 ? f_probe : f0;
    return f0 * (1.0 + fd / kPi * freq_shift_kernel(T, probe));
  };
  auto resid = [&](const Eigen::VectorXd& x) {
    const double f0 = fref + x[1] * fscale;
    Eigen::VectorXd r(static_cast<Eigen::Index>(series.size()));
    for (std::size_t i = 0; i < series.size(); ++i) {
      const double d = model(x[0], f0, series[i].temp) - series[i].f_r;
      r[static_cast<Eigen::Index>(i)] = weighted ? d / series[i].sigma : d / fscale;
    }
    return r;
  };

  // The model is linear in Fdelta at fixed f0; seed it by a short scan.
  double best_cost = kInf;
  FreqShiftFit out;
  for (double fd0 : {1e-6, 1e-5, 1e-4}) {
    std::vector<fit::Param> ps = {
        {"f_delta0_reac", fd0, 0.0, 1.0, fit::Scale::linear, 1e-5},
        {"f0", 0.0, -1e5, 1e5, fit::Scale::linear, 1.0},
    };
    auto r = fit::fit_params(ps, resid, tol, weighted);
    if (r.cost < best_cost) {
      best_cost = r.cost;
      out.raw = r;
    }
  }
  out.params = {out.raw.params[0], fref + out.raw.params[1] * fscale};
  out.raw.params[1] = out.params.f0;
  out.raw.covariance.row(1) *= fscale;
  out.raw.covariance.col(1) *= fscale;
  out.raw.sigma[1] *= fscale;
  out.sigma_f_delta0_reac = out.raw.sigma[0];
  out.sigma_f0 = out.raw.sigma[1];
  out.warnings = out.raw.warnings;

  // Above the knee the shift must rise with T; flag drops beyond the residual scatter.
  std::vector<FreqShiftRecord> sorted = series;
  std::sort(sorted.begin(), sorted.end(), [](const auto& a, const auto& b) { return a.temp < b.temp; });
  const double rms = std::sqrt(out.raw.cost / static_cast<double>(series.size())) * (weighted ? 1.0 : fscale);
  const double knee = kPlanck * out.params.f0 / (2.0 * kBoltzmann);
  for (std::size_t i = 1; i < sorted.size(); ++i) {
    if (sorted[i - 1].temp < knee) continue;
    const double noise = weighted ? std::hypot(sorted[i].sigma, sorted[i - 1].sigma) : rms;
    if (sorted[i].f_r < sorted[i - 1].f_r - 3.0 * std::max(noise, 1e-12 * fref)) {
      out.warnings.push_back("non-monotone frequency series above the tanh knee at T = " +
                             std::to_string(sorted[i].temp) + " K");
      break;
    }
  }
  return out;
}

struct InvertOptions {
  double t_lo = 1e-3;  // K
  double t_hi = 100.0;
};

// Temperature at which the model reaches the observed fractional shift.
// Zero maps to the T -> 0 limit; other values are taken on the branch
// above the shallow minimum near hf/2k, where the shift rises with T.
inline double invert_freq_to_temperature(const FreqShiftParams& p, double shift, double f_r = 0.0,
                                         InvertOptions opt = {}) {
  const double f = f_r > 0 ? f_r : p.f0;
  if (shift == 0.0) return opt.t_lo;
  auto g = [&](double T) { return freq_shift(p, T, f); };
  // Locate the minimum in log T by golden-section search.
  double a = std::log(opt.t_lo), b = std::log(opt.t_hi);
  const double gr = 0.5 * (std::sqrt(5.0) - 1.0);
  double c = b - gr * (b - a), d = a + gr * (b - a);
  for (int i = 0; i < 200 && b - a > 1e-12; ++i) {
    if (g(std::exp(c)) < g(std::exp(d))) {
      b = d;
    } else {
      a = c;
    }
    c = b - gr * (b - a);
    d = a + gr * (b - a);
  }
  const double tmin = std::exp(0.5 * (a + b));
  const double smin = g(tmin), smax = g(opt.t_hi);
  if (!(shift >= smin && shift <= smax))
    throw std::domain_error("invert_freq_to_temperature: shift " + std::to_string(shift) +
                            " outside attainable interval [" + std::to_string(smin) + ", " +
                            std::to_string(smax) + "]");
  const double lt = find_root([&](double lT) { return g(std::exp(lT)) - shift; }, std::log(tmin),
                              std::log(opt.t_hi));
  return std::exp(lt);
}

struct ParticipationPoint {
  double f_al = 0;
  double f_delta0 = 0;
  double sigma = 0;  // 0 = unit weight
};

struct ParticipationResult {
  double delta_qz = 0, delta_al = 0;
  double sigma_qz = 0, sigma_al = 0;
  double covariance = 0;  // cov(delta_qz, delta_al)
  double chi2 = 0;
  std::size_t n = 0;
};

// Weighted line F delta = F_Al delta_Al + (1 - F_Al) delta_qz.
// Uncertainties use the supplied sigmas as absolute errors; with unit
// weights they are rescaled by the residual variance instead.
inline ParticipationResult participation_decomposition(const std::vector<ParticipationPoint>& pts) {
  if (pts.size() < 2) throw std::invalid_argument("participation_decomposition: need at least 2 points");
  const bool weighted = std::all_of(pts.begin(), pts.end(), [](const auto& p) { return p.sigma > 0; });
  double s = 0, sx = 0, sy = 0, sxx = 0, sxy = 0;
  for (const auto& p : pts) {
    if (!(p.f_al >= 0 && p.f_al <= 1)) throw std::invalid_argument("participation_decomposition: F_Al outside [0, 1]");
    const double w = weighted ? 1.0 / (p.sigma * p.sigma) : 1.0;
    s += w;
    sx += w * p.f_al;
    sy += w * p.f_delta0;
    sxx += w * p.f_al * p.f_al;
    sxy += w * p.f_al * p.f_delta0;
  }
  // Basis (1 - x, x) gives the two deltas directly.
  const double a11 = s - 2 * sx + sxx, a12 = sx - sxx, a22 = sxx;
  const double b1 = sy - sxy, b2 = sxy;
  const double det = a11 * a22 - a12 * a12;
  if (!(std::abs(det) > 1e-14 * (a11 * a22 + a12 * a12)))
    throw std::invalid_argument("participation_decomposition: F_Al values are not distinct; unidentifiable");
  ParticipationResult r;
  r.n = pts.size();
  r.delta_qz = (a22 * b1 - a12 * b2) / det;
  r.delta_al = (a11 * b2 - a12 * b1) / det;
  for (const auto& p : pts) {
    const double w = weighted ? 1.0 / (p.sigma * p.sigma) : 1.0;
    const double e = p.f_delta0 - (p.f_al * r.delta_al + (1 - p.f_al) * r.delta_qz);
    r.chi2 += w * e * e;
  }
  double scale = 1.0;
  if (!weighted) scale = pts.size() > 2 ? r.chi2 / static_cast<double>(pts.size() - 2) : 0.0;
  r.sigma_qz = std::sqrt(scale * a22 / det);
  r.sigma_al = std::sqrt(scale * a11 / det);
  r.covariance = -scale * a12 / det;
  return r;
}

struct RadiationPoint {
  double n_mirr = 0;
  double q_i = 0;
  double sigma = 0;  // on Q_i; 0 = fractional weighting
};

// Mirror leakage Q_i^-1 = L0 exp(-beta N) + 1/Q_TLS. L0 is the inverse-Q
// prefactor, so the leakage-limited Q is exp(beta N)/L0.
struct RadiationLeakParams {
  double q_mirr0_inv = 4.1e-3;
  double beta = 1.71;
  double q_tls = 4.9e5;

  double q_rad(double n) const { return std::exp(beta * n) / q_mirr0_inv; }
  double q_i_inv(double n) const { return q_mirr0_inv * std::exp(-beta * n) + 1.0 / q_tls; }
};

struct RadiationFit {
  RadiationLeakParams params;
  RadiationLeakParams sigma;
  fit::FitResult raw;  // order: q_mirr0_inv, beta, q_tls
  std::vector<std::string> warnings;

  double q_rad(double n) const { return params.q_rad(n); }
  // Delta-method sigma of ln Q_rad(N) times Q_rad.
  double q_rad_sigma(double n) const {
    Eigen::Vector3d g(-1.0 / params.q_mirr0_inv, n, 0.0);
    const double v = g.dot(raw.covariance * g);
    return q_rad(n) * std::sqrt(std::max(v, 0.0));
  }
};

inline RadiationFit radiation_model_fit(const std::vector<RadiationPoint>& pts, fit::Tolerances tol = {}) {
  std::set<double> ns;
  for (const auto& p : pts) {
    if (!(p.q_i > 0)) throw std::invalid_argument("radiation_model_fit: Q_i must be positive");
    ns.insert(p.n_mirr);
  }
  if (ns.size() < 3) throw std::invalid_argument("radiation_model_fit: need at least 3 distinct N_mirr values");
  auto resid = [&](const Eigen::VectorXd& x) {
    const RadiationLeakParams m{x[0], x[1], x[2]};
    Eigen::VectorXd r(static_cast<Eigen::Index>(pts.size()));
    for (std::size_t i = 0; i < pts.size(); ++i) {
      const double y = 1.0 / pts[i].q_i;
      const double s = pts[i].sigma > 0 ? pts[i].sigma / (pts[i].q_i * pts[i].q_i) : y;
      r[static_cast<Eigen::Index>(i)] = (m.q_i_inv(pts[i].n_mirr) - y) / s;
    }
    return r;
  };
  double qmax = 0;
  double nmin = kInf;
  double y_nmin = 0;
  for (const auto& p : pts) {
    qmax = std::max(qmax, p.q_i);
    if (p.n_mirr < nmin) {
      nmin = p.n_mirr;
      y_nmin = 1.0 / p.q_i;
    }
  }
  RadiationFit out;
  double best = kInf;
  for (double b0 : {0.25, 0.5, 1.0, 2.0, 4.0}) {
    std::vector<fit::Param> ps = {
        {"q_mirr0_inv", std::max(y_nmin * std::exp(b0 * nmin), 1e-30), 1e-30, 1e30, fit::Scale::log},
        {"beta", b0, 0.0, 20.0, fit::Scale::linear},
        {"q_tls", qmax * 1.5, 1.0, 1e16, fit::Scale::log},
    };
    try {
      auto r = fit::fit_params(ps, resid, tol);
      if (r.cost < best) {
        best = r.cost;
        out.raw = r;
      }
    } catch (const fit::fit_error&) {
    }
  }
  if (!std::isfinite(best)) throw fit::fit_error("radiation_model_fit: all starts failed");
  out.params = {out.raw.params[0], out.raw.params[1], out.raw.params[2]};
  out.sigma = {out.raw.sigma[0], out.raw.sigma[1], out.raw.sigma[2]};
  out.warnings = out.raw.warnings;
  return out;
}

}  // namespace phonoq
