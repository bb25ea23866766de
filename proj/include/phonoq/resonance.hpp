#pragma once

#include <algorithm>
#include <cmath>
#include <complex>
#include <numeric>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "constants.hpp"
#include "fit.hpp"
#include "special.hpp"

namespace phonoq {

enum class TraceKind { reflection, admittance };

struct ComplexTrace {
  std::vector<double> freq;  // Hz
  std::vector<cplx> value;
  TraceKind kind = TraceKind::reflection;

  std::size_t size() const { return freq.size(); }

  void validate() const {
    if (freq.size() != value.size()) throw std::invalid_argument("trace: frequency/value length mismatch");
    if (freq.size() < 3) throw std::invalid_argument("trace: need at least 3 points");
    for (std::size_t i = 0; i < freq.size(); ++i) {
      if (!std::isfinite(freq[i]) || !std::isfinite(value[i].real()) || !std::isfinite(value[i].imag()))
        throw std::invalid_argument("trace: non-finite sample at row " + std::to_string(i));
      if (i > 0 && !(freq[i] > freq[i - 1]))
        throw std::invalid_argument("trace: frequencies must be strictly increasing (row " +
                                    std::to_string(i) + ")");
    }
  }
};

struct ResonanceParams {
  double f_r = 0.0;     // Hz
  double q_i = 0.0;
  double qe_mag = 0.0;  // |Qe| of the complex external Q
  double phi = 0.0;     // rad

  double q_e() const { return qe_mag / std::cos(phi); }
  double q_total() const { return 1.0 / (1.0 / q_i + 1.0 / q_e()); }
  double kappa_i() const { return kTwoPi * f_r / q_i; }
  double kappa_e() const { return kTwoPi * f_r / q_e(); }
  double kappa() const { return kappa_i() + kappa_e(); }
  double omega_r() const { return kTwoPi * f_r; }

  void validate() const {
    if (!(f_r > 0 && q_i > 0 && qe_mag > 0))
      throw std::invalid_argument("resonance: f_r, Q_i and |Qe| must be positive");
    if (!(std::abs(phi) < kPi / 2)) throw std::invalid_argument("resonance: |phi| must be < pi/2");
  }

  // Build from decay rates in rad/s with phi = 0.
  static ResonanceParams from_rates(double f_r, double kappa_i, double kappa_e) {
    return {f_r, kTwoPi * f_r / kappa_i, kTwoPi * f_r / kappa_e, 0.0};
  }
};

inline cplx eval_s11(const ResonanceParams& p, double f) {
  const double q = p.q_total();
  const cplx num = std::polar(2.0 * q / p.qe_mag, p.phi);
  return 1.0 - num / cplx(1.0, 2.0 * q * (f - p.f_r) / p.f_r);
}

inline std::vector<cplx> eval_s11(const ResonanceParams& p, const std::vector<double>& f) {
  std::vector<cplx> out(f.size());
  for (std::size_t i = 0; i < f.size(); ++i) out[i] = eval_s11(p, f[i]);
  return out;
}

// Photon flux P/(h f_r) shared by both phonon-number forms.
inline double drive_flux(double power_w, double f_r) { return power_w / (kPlanck * f_r); }

// Mean phonon number for an on-resonance drive.
inline double phonon_number_on_resonance(const ResonanceParams& p, double power_w) {
  if (!(power_w >= 0.0)) throw std::invalid_argument("intracavity_phonons: power must be >= 0");
  const double ke = p.kappa_e();
  const double k = p.kappa();
  return 4.0 * ke / (k * k) * drive_flux(power_w, p.f_r);
}

// Mean phonon number for a pump detuned by delta (rad/s).
inline double intracavity_phonons(const ResonanceParams& p, double power_w, double delta = 0.0) {
  if (!(power_w >= 0.0)) throw std::invalid_argument("intracavity_phonons: power must be >= 0");
  const double ke = p.kappa_e();
  const double h = 0.5 * p.kappa();
  return ke / (delta * delta + h * h) * drive_flux(power_w, p.f_r);
}

// Inverse: drive power that yields a given phonon number.
inline double power_for_phonons(const ResonanceParams& p, double nbar, double delta = 0.0) {
  const double h = 0.5 * p.kappa();
  return nbar * (delta * delta + h * h) / p.kappa_e() * kPlanck * p.f_r;
}

struct SweepPlan {
  std::vector<double> points;  // Hz
  double w = 0.0;              // span / linewidth
  double span = 0.0;           // Hz
  int n = 0;
};

// Point set that samples the reflection circle uniformly in phase.
// kappa is the total linewidth in rad/s.
inline SweepPlan homophasal_sweep(double f_r, double kappa, double span, int n) {
  if (n < 3 || n % 2 == 0) throw std::invalid_argument("homophasal_sweep: N must be odd and >= 3");
  if (!(span > 0 && kappa > 0 && f_r > 0))
    throw std::invalid_argument("homophasal_sweep: f_r, kappa and span must be positive");
  SweepPlan plan;
  plan.span = span;
  plan.n = n;
  plan.w = span / rad_to_hz(kappa);
  // 2 atan(W) equals atan(2W/(1-W^2)) on W < 1 and continues smoothly past W = 1.
  const double dtheta = 2.0 * std::atan(plan.w);
  const double denom = std::tan(0.5 * dtheta);
  const int half = (n - 1) / 2;
  plan.points.resize(static_cast<std::size_t>(n));
  for (int k = -half; k <= half; ++k) {
    double f;
    if (k == 0) {
      f = f_r;
    } else if (k == half) {
      f = f_r + 0.5 * span;
    } else if (k == -half) {
      f = f_r - 0.5 * span;
    } else {
      const double th = static_cast<double>(k) * dtheta / static_cast<double>(n - 1);
      f = f_r + 0.5 * span * std::tan(th) / denom;
    }
    plan.points[static_cast<std::size_t>(k + half)] = f;
  }
  return plan;
}

class no_resonance_error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct ResonanceFitOptions {
  std::optional<ResonanceParams> guess;
  bool fit_background = false;
  fit::Tolerances tolerances{};
};

struct Background {
  double a = 1.0;
  double b = 0.0;  // 1/Hz
  double theta = 0.0;
  cplx at(double f, double f_r) const { return std::polar(a + b * (f - f_r), theta); }
};

struct ResonanceFit {
  ResonanceParams params;
  Background background;
  // one-sigma values
  double sigma_f_r = 0, sigma_q_i = 0, sigma_qe_mag = 0, sigma_phi = 0;
  double sigma_q_e = 0, sigma_kappa_i = 0, sigma_kappa_e = 0;
  double noise_rms = 0.0;  // estimated per-point complex noise RMS
  fit::FitResult raw;      // order: f_r, q_i, qe_mag, phi[, a, b, theta]
};

namespace detail {

// Robust complex noise RMS from second differences (insensitive to smooth signal).
inline double trace_noise_rms(const std::vector<cplx>& v) {
  if (v.size() < 5) return 0.0;
  std::vector<double> d2;
  d2.reserve(v.size() - 2);
  for (std::size_t i = 1; i + 1 < v.size(); ++i) d2.push_back(std::abs(v[i + 1] - 2.0 * v[i] + v[i - 1]));
  auto mid = d2.begin() + static_cast<std::ptrdiff_t>(d2.size() / 2);
  std::nth_element(d2.begin(), mid, d2.end());
  // |second difference| is Rayleigh with scale sqrt(6) sigma_component.
  const double sigma_c = *mid / (std::sqrt(6.0) * std::sqrt(2.0 * std::log(2.0)));
  return std::sqrt(2.0) * sigma_c;
}

inline cplx edge_mean(const std::vector<cplx>& v, bool front, std::size_t m) {
  cplx s = 0;
  for (std::size_t i = 0; i < m; ++i) s += front ? v[i] : v[v.size() - 1 - i];
  return s / static_cast<double>(m);
}

inline double propagate(const Eigen::VectorXd& grad, const Eigen::MatrixXd& cov) {
  return std::sqrt(std::max(0.0, grad.dot(cov * grad)));
}

}  // namespace detail

struct SeedInfo {
  ResonanceParams params;
  Background background;
  double noise_rms = 0.0;
  double dip_depth = 0.0;
};

// Automatic starting point from the background-normalised dip.
inline SeedInfo seed_reflection(const ComplexTrace& tr) {
  const auto n = tr.size();
  const std::size_t m = std::max<std::size_t>(2, n / 20);
  const cplx b0 = detail::edge_mean(tr.value, true, m);
  const cplx b1 = detail::edge_mean(tr.value, false, m);
  double f0 = 0, f1 = 0;
  for (std::size_t i = 0; i < m; ++i) {
    f0 += tr.freq[i];
    f1 += tr.freq[n - 1 - i];
  }
  f0 /= static_cast<double>(m);
  f1 /= static_cast<double>(m);
  auto bg = [&](double f) { return b0 + (b1 - b0) * ((f - f0) / (f1 - f0)); };

  SeedInfo s;
  std::vector<double> depth(n);
  for (std::size_t i = 0; i < n; ++i) {
    const cplx b = bg(tr.freq[i]);
    depth[i] = std::abs(b) > 0 ? std::abs(1.0 - tr.value[i] / b) : 0.0;
  }
  const double bmag = 0.5 * (std::abs(b0) + std::abs(b1));
  s.noise_rms = detail::trace_noise_rms(tr.value);
  const auto imax = static_cast<std::size_t>(std::max_element(depth.begin(), depth.end()) - depth.begin());
  s.dip_depth = depth[imax];
  const double noise_rel = bmag > 0 ? s.noise_rms / bmag : 0.0;
  if (!(bmag > 0) || s.dip_depth < std::max(3.0 * noise_rel, 1e-9))
    throw no_resonance_error("no resonance found: dip depth " + std::to_string(s.dip_depth) +
                             " below 3x noise RMS " + std::to_string(noise_rel));

  // Parabolic refinement of the peak of the dip magnitude.
  double fr = tr.freq[imax];
  if (imax > 0 && imax + 1 < n) {
    const double y0 = depth[imax - 1], y1 = depth[imax], y2 = depth[imax + 1];
    const double x0 = tr.freq[imax - 1], x1 = tr.freq[imax], x2 = tr.freq[imax + 1];
    const double d = (x0 - x1) * (x0 - x2) * (x1 - x2);
    const double a = (x2 * (y1 - y0) + x1 * (y0 - y2) + x0 * (y2 - y1)) / d;
    const double b = (x2 * x2 * (y0 - y1) + x1 * x1 * (y2 - y0) + x0 * x0 * (y1 - y2)) / d;
    if (a < 0) fr = std::clamp(-b / (2 * a), x0, x2);
  }

  const double span = tr.freq.back() - tr.freq.front();
  double fwhm = 0.0;
  const bool shallow = s.dip_depth < 10.0 * noise_rel;
  if (!shallow) {
    // |1 - S/bg|^2 is Lorentzian with FWHM f_r / Q.
    const double half = 0.5 * s.dip_depth * s.dip_depth;
    std::size_t lo = imax, hi = imax;
    while (lo > 0 && depth[lo] * depth[lo] >= half) --lo;
    while (hi + 1 < n && depth[hi] * depth[hi] >= half) ++hi;
    auto cross = [&](std::size_t i, std::size_t j) {
      const double yi = depth[i] * depth[i], yj = depth[j] * depth[j];
      if (yi == yj) return tr.freq[i];
      return tr.freq[i] + (half - yi) * (tr.freq[j] - tr.freq[i]) / (yj - yi);
    };
    if (lo > 0 || depth[0] * depth[0] < half) {
      if (hi + 1 < n || depth[n - 1] * depth[n - 1] < half) {
        const double fl = depth[lo] * depth[lo] < half ? cross(lo, lo + 1) : tr.freq[lo];
        const double fh = depth[hi] * depth[hi] < half ? cross(hi - 1, hi) : tr.freq[hi];
        fwhm = fh - fl;
      }
    }
  }
  if (!(fwhm > 0) || fwhm >= span) fwhm = span / 10.0;

  const double q = fr / fwhm;
  const cplx b = bg(fr);
  // Dip vector at resonance: 1 - S/bg = e^{i phi} 2Q/|Qe|.
  cplx dip = 1.0 - (imax < n ? tr.value[imax] / bg(tr.freq[imax]) : cplx(0));
  double phi = std::clamp(std::arg(dip), -1.4, 1.4);
  double qe_mag = 2.0 * q / std::max(std::abs(dip), 1e-12);
  double qe = qe_mag / std::cos(phi);
  double qi = (1.0 / q - 1.0 / qe) > 0 ? 1.0 / (1.0 / q - 1.0 / qe) : 10.0 * q;
  if (!(qe > q)) {
    qe_mag = 2.0 * q;
    qi = 2.0 * q;
  }
  s.params = {fr, qi, qe_mag, phi};
  s.background.a = std::abs(b);
  s.background.b = 0.0;
  s.background.theta = std::arg(b);
  return s;
}

inline ResonanceFit fit_reflection(const ComplexTrace& tr, const ResonanceFitOptions& opt = {}) {
  tr.validate();
  if (tr.kind != TraceKind::reflection) throw std::invalid_argument("fit_reflection: trace is not a reflection trace");

  SeedInfo seed;
  if (opt.guess) {
    opt.guess->validate();
    seed.params = *opt.guess;
    seed.noise_rms = detail::trace_noise_rms(tr.value);
    if (opt.fit_background) {
      const cplx b = 0.5 * (tr.value.front() + tr.value.back());
      seed.background = {std::abs(b), 0.0, std::arg(b)};
    }
  } else {
    seed = seed_reflection(tr);
  }
  const double fr0 = seed.params.f_r;
  const double lw0 = fr0 / seed.params.q_total();
  const double span = tr.freq.back() - tr.freq.front();
  const double big = std::numeric_limits<double>::infinity();

  using fit::Param;
  using fit::Scale;
  std::vector<Param> ps = {
      {"f_r_offset", 0.0, (tr.freq.front() - fr0) / lw0, (tr.freq.back() - fr0) / lw0, Scale::linear, 1.0},
      {"q_i", seed.params.q_i, 1.0, 1e13, Scale::log},
      {"qe_mag", seed.params.qe_mag, 1.0, 1e13, Scale::log},
      {"phi", seed.params.phi, -kPi / 2 + 1e-6, kPi / 2 - 1e-6, Scale::linear},
  };
  if (opt.fit_background) {
    const double a0 = seed.background.a > 0 ? seed.background.a : 1.0;
    ps.push_back({"bg_a", a0, a0 * 1e-6, a0 * 1e6, Scale::log});
    ps.push_back({"bg_b", 0.0, -big, big, Scale::linear, a0 / span});
    ps.push_back({"bg_theta", seed.background.theta, -2 * kPi, 2 * kPi, Scale::linear});
  }

  const bool bgfit = opt.fit_background;
  auto unpack = [&](const Eigen::VectorXd& x) {
    ResonanceParams p{fr0 + x[0] * lw0, x[1], x[2], x[3]};
    Background b;
    if (bgfit) b = {x[4], x[5], x[6]};
    return std::pair{p, b};
  };
  const auto n = tr.size();
  auto resid = [&](const Eigen::VectorXd& x) {
    auto [p, b] = unpack(x);
    Eigen::VectorXd r(2 * static_cast<Eigen::Index>(n));
    for (std::size_t i = 0; i < n; ++i) {
      cplx m = eval_s11(p, tr.freq[i]);
      if (bgfit) m *= b.at(tr.freq[i], p.f_r);
      const cplx d = m - tr.value[i];
      r[static_cast<Eigen::Index>(2 * i)] = d.real();
      r[static_cast<Eigen::Index>(2 * i + 1)] = d.imag();
    }
    return r;
  };

  ResonanceFit out;
  out.raw = fit::fit_params(ps, resid, opt.tolerances);
  auto [p, b] = unpack(out.raw.params);
  out.params = p;
  out.background = b;
  out.noise_rms = seed.noise_rms;

  // Covariance in physical coordinates (f_r in Hz).
  Eigen::MatrixXd cov = out.raw.covariance;
  cov.row(0) *= lw0;
  cov.col(0) *= lw0;
  out.raw.params[0] = p.f_r;
  out.raw.covariance = cov;
  out.raw.sigma = cov.diagonal().cwiseMax(0.0).cwiseSqrt();
  for (Eigen::Index j = 0; j < out.raw.sigma.size(); ++j)
    if (std::isinf(out.raw.sigma[j]) || !std::isfinite(cov(j, j))) out.raw.sigma[j] = std::numeric_limits<double>::infinity();

  const Eigen::MatrixXd c4 = cov.topLeftCorner(4, 4);
  out.sigma_f_r = std::sqrt(std::max(0.0, c4(0, 0)));
  out.sigma_q_i = std::sqrt(std::max(0.0, c4(1, 1)));
  out.sigma_qe_mag = std::sqrt(std::max(0.0, c4(2, 2)));
  out.sigma_phi = std::sqrt(std::max(0.0, c4(3, 3)));
  const double cphi = std::cos(p.phi);
  const double qe = p.q_e();
  Eigen::VectorXd g(4);
  g << 0.0, 0.0, 1.0 / cphi, p.qe_mag * std::sin(p.phi) / (cphi * cphi);
  out.sigma_q_e = detail::propagate(g, c4);
  // kappa_i = 2 pi f_r / q_i
  g << kTwoPi / p.q_i, -kTwoPi * p.f_r / (p.q_i * p.q_i), 0.0, 0.0;
  out.sigma_kappa_i = detail::propagate(g, c4);
  // kappa_e = 2 pi f_r cos(phi) / qe_mag
  g << kTwoPi / qe, 0.0, -kTwoPi * p.f_r * cphi / (p.qe_mag * p.qe_mag),
      -kTwoPi * p.f_r * std::sin(p.phi) / p.qe_mag;
  out.sigma_kappa_e = detail::propagate(g, c4);
  return out;
}

}  // namespace phonoq
