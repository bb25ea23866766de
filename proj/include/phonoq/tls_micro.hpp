#pragma once

// Microscopic two-level-system bath: susceptibilities of discrete and
// continuum ensembles, Bloch saturation, phonon relaxation rates, the
// kinetic master equation and the reactive/dissipative variance study.

#include <algorithm>
#include <cmath>
#include <complex>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "phonoq/constants.hpp"
#include "phonoq/ode.hpp"
#include "phonoq/parallel.hpp"
#include "phonoq/rng.hpp"
#include "phonoq/special.hpp"

namespace phonoq {

class regime_error : public std::domain_error {
 public:
  regime_error(const std::string& what, double crossover_k)
      : std::domain_error(what), crossover_(crossover_k) {}
  double crossover_temperature() const { return crossover_; }

 private:
  double crossover_;
};

struct MaterialParams {
  double rho = 2650.0;                        // kg/m^3
  double v_bar = 4250.0;                      // m/s
  double volume = 1e-15;                      // m^3, mode volume V
  double host_volume = 1e-15;                 // m^3, TLS-hosting volume V_h
  double dos_p = 1e45;                        // 1/(J m^3)
  double m_bar = kElectronVolt;               // J
  double d_bar = kElectronVolt;               // J
  double omega_max = kTwoPi * 200e9;          // rad/s
  double cross_section = 1.0;                 // m^(3-d)
  int dim = 3;

  static MaterialParams quartz() { return {}; }

  void validate() const {
    for (double v : {rho, v_bar, volume, host_volume, dos_p, m_bar, d_bar, omega_max, cross_section})
      if (!(v > 0.0) || !std::isfinite(v)) throw std::invalid_argument("MaterialParams: all fields must be positive");
    if (dim < 1 || dim > 3) throw std::invalid_argument("MaterialParams: dim must be 1, 2 or 3");
  }

  double filling() const { return host_volume / volume; }
  // Bare resonant loss tangent pi P M^2 / (rho v^2).
  double delta0() const { return kPi * dos_p * m_bar * m_bar / (rho * v_bar * v_bar); }
  double f_delta0() const { return filling() * delta0(); }
  // Zero-point strain of the mode.
  double xi_vac(double omega) const { return std::sqrt(kHbar * omega / (2.0 * rho * v_bar * v_bar * volume)); }
  // Mean transverse coupling rate M xi_vac / hbar.
  double g_x_bar(double omega) const { return m_bar * xi_vac(omega) / kHbar; }
};

struct Tls {
  double delta = 0.0;     // J
  double delta0 = 0.0;    // J
  double energy = 0.0;    // J
  double gamma_z = 0.0;   // J per unit strain
  double gamma1 = 0.0;    // rad/s
  double gamma2 = 0.0;    // rad/s
  double d2_delta = 0.0;  // J, curvature of the asymmetry in strain

  static Tls make(double delta, double delta0, double gamma_z, double gamma1, double gamma2) {
    Tls t;
    t.delta = delta;
    t.delta0 = delta0;
    t.energy = std::hypot(delta, delta0);
    t.gamma_z = gamma_z;
    t.gamma1 = gamma1;
    t.gamma2 = gamma2;
    t.validate();
    return t;
  }

  void validate() const {
    if (!(delta0 > 0.0)) throw std::invalid_argument("Tls: tunneling energy must be positive");
    if (!(gamma1 >= 0.0) || !(gamma2 >= 0.5 * gamma1 * (1 - 1e-12)))
      throw std::invalid_argument("Tls: need Gamma2 >= Gamma1/2 >= 0");
    const double e2 = delta * delta + delta0 * delta0;
    if (std::abs(energy * energy - e2) > 1e-15 * e2) throw std::invalid_argument("Tls: E^2 != Delta^2 + Delta0^2");
  }

  // Longitudinal and transverse coupling rates to a strain xi.
  double g_z(double xi) const { return gamma_z * delta / energy * xi / kHbar; }
  double g_x(double xi) const { return gamma_z * delta0 / energy * xi / kHbar; }
};

struct TlsEnsemble {
  std::vector<Tls> members;
  MaterialParams host;

  void validate() const {
    if (members.empty()) throw std::invalid_argument("TlsEnsemble: empty");
    host.validate();
    for (const auto& m : members) m.validate();
  }
};

// Energy relaxation rate of a TLS with full transverse coupling M through
// a d-dimensional Debye phonon bath.
inline double gamma1_phonon(double omega_tls, double temp, const MaterialParams& h) {
  if (!(omega_tls > 0.0)) throw std::invalid_argument("gamma1_phonon: omega must be positive");
  const int d = h.dim;
  const double a = std::pow(2.0, 1 - d) * std::pow(kPi, 1 - 0.5 * d) / std::tgamma(0.5 * d);
  const double base = a * h.m_bar * h.m_bar * std::pow(omega_tls, d) /
                      (kHbar * h.rho * std::pow(h.v_bar, d + 2) * h.cross_section);
  if (temp <= 0.0) return base;
  return base / std::tanh(kHbar * omega_tls / (2 * kBoltzmann * temp));
}

struct EnsembleSpec {
  std::size_t count = 1000;
  bool uniform_energy = false;  // E uniform on (0, E_max] with Delta = 0
  double e_max = 0.0;           // J; 0 means hbar * omega_max
  double delta0_min = 0.0;      // J; 0 means 1e-6 * e_max
  double temp = 0.01;           // K, sets Gamma1 through the coth factor
  double pure_dephasing = 0.0;  // rad/s added to Gamma1/2
  std::uint64_t seed = 1;
};

// Standard tunneling model by default: Delta uniform, Delta0 log-uniform.
inline TlsEnsemble sample_ensemble(const MaterialParams& host, const EnsembleSpec& s) {
  host.validate();
  if (s.count == 0) throw std::invalid_argument("sample_ensemble: count must be positive");
  const double e_max = s.e_max > 0 ? s.e_max : kHbar * host.omega_max;
  const double d0_min = s.delta0_min > 0 ? s.delta0_min : 1e-6 * e_max;
  TlsEnsemble ens;
  ens.host = host;
  ens.members.resize(s.count);
  parallel_for(s.count, [&](std::size_t i) {
    CounterRng r(s.seed, i);
    double delta, delta0;
    if (s.uniform_energy) {
      delta = 0.0;
      delta0 = e_max * r.uniform();
    } else {
      delta = r.uniform(-e_max, e_max);
      delta0 = d0_min * std::exp(r.uniform() * std::log(e_max / d0_min));
    }
    const double e = std::hypot(delta, delta0);
    const double c = delta0 / e;
    const double g1 = c * c * gamma1_phonon(e / kHbar, s.temp, host);
    ens.members[i] = Tls::make(delta, delta0, host.m_bar, g1, 0.5 * g1 + s.pure_dephasing);
  });
  return ens;
}

struct Susceptibility {
  cplx c, d, nd;  // J per unit strain^2
  cplx total() const { return c + d + nd; }
};

namespace detail {

inline double thermal_tanh(double e, double temp) { return std::tanh(e / (2 * kBoltzmann * temp)); }

inline double sech2(double x) {
  if (std::abs(x) > 350) return 0.0;
  const double c = std::cosh(x);
  return 1.0 / (c * c);
}

// Population difference factor of a driven TLS relative to its thermal value.
inline double saturation_factor(const Tls& t, double omega, double rabi) {
  if (rabi == 0.0) return 1.0;
  const double x = (t.energy / kHbar - omega) / t.gamma2;
  const double num = 1.0 + x * x;
  return num / (num + rabi * rabi / (t.gamma1 * t.gamma2));
}

template <class F>
Susceptibility ensemble_sum(std::size_t n, F&& term) {
  constexpr std::size_t block = 4096;
  const std::size_t nb = (n + block - 1) / block;
  std::vector<Susceptibility> parts(nb);
  parallel_for(nb, [&](std::size_t b) {
    Susceptibility s{};
    for (std::size_t i = b * block; i < std::min(n, (b + 1) * block); ++i) {
      const Susceptibility v = term(i);
      s.c += v.c;
      s.d += v.d;
      s.nd += v.nd;
    }
    parts[b] = s;
  });
  std::vector<cplx> c(nb), d(nb), nd(nb);
  for (std::size_t b = 0; b < nb; ++b) {
    c[b] = parts[b].c;
    d[b] = parts[b].d;
    nd[b] = parts[b].nd;
  }
  return {pairwise_sum<cplx>(c.begin(), c.end()), pairwise_sum<cplx>(d.begin(), d.end()),
          pairwise_sum<cplx>(nd.begin(), nd.end())};
}

}  // namespace detail

// Single-TLS contributions; rabi > 0 replaces the thermal population
// difference with its driven steady state.
inline Susceptibility tls_susceptibility(const Tls& t, double omega, double temp, double rabi = 0.0) {
  const double e = t.energy;
  const double th = detail::thermal_tanh(e, temp) * detail::saturation_factor(t, omega, rabi);
  const double hw = kHbar * omega, hg = kHbar * t.gamma2;
  if (hg == 0.0 && e == hw) throw std::domain_error("susceptibility: member sits on the pole E = hbar omega with Gamma2 = 0");
  const double gx = t.gamma_z * t.delta0 / e;
  Susceptibility s;
  s.nd = gx * gx * th * (1.0 / cplx(e - hw, -hg) + 1.0 / cplx(e + hw, hg));
  s.c = 0.5 * (t.delta / e) * t.d2_delta * th;
  if (t.gamma1 > 0.0) {
    const double a = t.gamma_z * t.delta / e;
    s.d = a * a / (kBoltzmann * temp) * detail::sech2(e / (2 * kBoltzmann * temp)) /
          cplx(1.0, -omega / t.gamma1);
  }
  return s;
}

inline Susceptibility susceptibility_discrete(const TlsEnsemble& ens, double omega, double temp,
                                              double rabi = 0.0) {
  if (!(temp > 0.0) || !(omega > 0.0)) throw std::invalid_argument("susceptibility_discrete: need T > 0 and omega > 0");
  if (ens.members.empty()) throw std::invalid_argument("susceptibility_discrete: empty ensemble");
  return detail::ensemble_sum(ens.members.size(),
                              [&](std::size_t i) { return tls_susceptibility(ens.members[i], omega, temp, rabi); });
}

// Continuum limit of the non-diagonal part. gamma2 = 0 drops the
// dephasing term from the digamma argument.
inline cplx susceptibility_continuum(const MaterialParams& h, double omega, double temp, double gamma2 = 0.0) {
  h.validate();
  if (!(temp > 0.0) || !(omega > 0.0)) throw std::invalid_argument("susceptibility_continuum: need T > 0 and omega > 0");
  const double u = 2 * kPi * kBoltzmann * temp;
  const cplx z(0.5 + kHbar * gamma2 / u, -kHbar * omega / u);
  return -2.0 * h.dos_p * h.host_volume * h.m_bar * h.m_bar * (complex_digamma(z) - std::log(kHbar * h.omega_max / u));
}

// Shift and damping of the mode from a susceptibility.
inline double shift_from_chi(const MaterialParams& h, double omega, cplx chi) {
  const double xi = h.xi_vac(omega);
  return -xi * xi / kHbar * chi.real();
}
inline double kappa_from_chi(const MaterialParams& h, double omega, cplx chi) {
  const double xi = h.xi_vac(omega);
  return 2 * xi * xi / kHbar * chi.imag();
}

inline double saturated_population(const Tls& t, double rabi, double detuning, double temp) {
  if (!(t.gamma1 > 0.0) || !(t.gamma2 > 0.0)) throw std::invalid_argument("saturated_population: rates must be positive");
  const double pth = temp > 0 ? 1.0 / (1.0 + std::exp(t.energy / (kBoltzmann * temp))) : 0.0;
  const double x = detuning / t.gamma2;
  const double num = 1.0 + x * x;
  return 0.5 - (0.5 - pth) * num / (num + rabi * rabi / (t.gamma1 * t.gamma2));
}

inline double critical_phonon_number(double g_x, double t1, double t2) {
  if (!(g_x > 0) || !(t1 > 0) || !(t2 > 0)) throw std::invalid_argument("critical_phonon_number: positive inputs required");
  return 1.0 / (4.0 * g_x * g_x * t1 * t2);
}

inline double q_saturated_inv(const MaterialParams& h, double nbar, double temp, double omega, double t1, double t2) {
  h.validate();
  if (!(nbar >= 0) || !(temp > 0) || !(omega > 0)) throw std::invalid_argument("q_saturated_inv: bad inputs");
  const double nc = critical_phonon_number(h.g_x_bar(omega), t1, t2);
  return h.f_delta0() * detail::thermal_tanh(kHbar * omega, temp) / std::sqrt(1.0 + nbar / nc);
}

namespace detail {

inline double relaxation_prefactor(int d) {
  return std::pow(2.0, 2 - d) * std::pow(kPi, 1 - 0.5 * d) / std::tgamma(0.5 * d);
}

// Highest temperature where thermal TLS still relax slowly compared to
// the mode: Gamma1(kT/hbar) <= omega_r / 10.
inline double relaxation_crossover(const MaterialParams& h, double omega) {
  auto g = [&](double t) { return std::log(gamma1_phonon(kBoltzmann * t / kHbar, t, h) / (0.1 * omega)); };
  double lo = 1e-6, hi = 1.0;
  while (g(hi) < 0 && hi < 1e6) hi *= 10;
  return find_root(g, lo, hi);
}

inline void check_relaxation_regime(const MaterialParams& h, double omega, double temp) {
  if (gamma1_phonon(kBoltzmann * temp / kHbar, temp, h) > 0.1 * omega) {
    const double tc = relaxation_crossover(h, omega);
    throw regime_error("relaxation model requires omega_r >> Gamma1(kT/hbar); crossover at T = " +
                           std::to_string(tc) + " K",
                       tc);
  }
}

}  // namespace detail

inline double q_relaxation_micro_inv(const MaterialParams& h, double omega, double temp) {
  h.validate();
  if (!(temp > 0) || !(omega > 0)) throw std::invalid_argument("q_relaxation_micro_inv: need T > 0 and omega > 0");
  detail::check_relaxation_regime(h, omega, temp);
  const int d = h.dim;
  const double kt = kBoltzmann * temp;
  const double xmax = kHbar * h.omega_max / kt;
  const double in = integrate([d](double x) { return pow_csch(x, d); }, 0.0, xmax > 200 ? INFINITY : xmax);
  const double kappa = h.filling() * detail::relaxation_prefactor(d) * h.d_bar * h.d_bar * h.m_bar * h.m_bar *
                       h.dos_p / (kHbar * h.rho * h.rho * std::pow(h.v_bar, d + 4) * h.cross_section) *
                       std::pow(kt / kHbar, d) * in;
  return kappa / omega;
}

// Fractional shift delta omega_r / omega_r from relaxation-type damping.
inline double relaxation_freq_shift(const MaterialParams& h, double omega, double temp) {
  h.validate();
  if (!(temp > 0) || !(omega > 0)) throw std::invalid_argument("relaxation_freq_shift: need T > 0 and omega > 0");
  detail::check_relaxation_regime(h, omega, temp);
  const int d = h.dim;
  const double kt = kBoltzmann * temp;
  const double xmax = kHbar * h.omega_max / kt;
  const double in = integrate(
      [d](double x) {
        if (x == 0.0) return 0.0;
        const double s = std::sinh(0.5 * x);
        return x > 1400 ? 0.0 : std::pow(x, 2 * d) / (s * s);
      },
      0.0, xmax > 200 ? INFINITY : xmax);
  const double a = detail::relaxation_prefactor(d);
  const double m2 = h.m_bar * h.m_bar, d2 = h.d_bar * h.d_bar;
  return -h.filling() * a * a * d2 * m2 * m2 * h.dos_p /
         (8 * kHbar * kHbar * std::pow(h.rho, 3) * std::pow(h.v_bar, 2 * d + 6) * omega * omega *
          h.cross_section * h.cross_section) *
         std::pow(kt / kHbar, 2 * d) * in;
}

struct TlsState {
  double rho11 = 1.0;
  double rho22 = 0.0;
  cplx rho12 = 0.0;

  void validate(double tol = 1e-12) const {
    if (std::abs(rho11 + rho22 - 1.0) > tol) throw std::invalid_argument("TlsState: populations must sum to 1");
    if (rho11 < -tol || rho22 < -tol || rho11 > 1 + tol || rho22 > 1 + tol)
      throw std::invalid_argument("TlsState: populations outside [0, 1]");
    if (std::norm(rho12) > rho11 * rho22 + tol) throw std::invalid_argument("TlsState: coherence exceeds populations");
  }
};

// Thermal steady state N / (2N + 1) with N the Planck factor at E.
inline double stationary_excited(double energy, double temp) {
  const double n = planck_occupation(energy, temp);
  return n / (2 * n + 1);
}

// Dissipative Bloch equations with Gamma- = (N+1) G and Gamma+ = N G, where
// G is fixed by the total population relaxation rate Gamma1 = (2N+1) G.
inline TlsState evolve_kinetic(const TlsState& s, const Tls& t, double temp, double duration,
                               const OdeOptions& opt = {}) {
  s.validate();
  if (!(duration >= 0)) throw std::invalid_argument("evolve_kinetic: duration must be non-negative");
  if (!(t.gamma1 > 0)) throw std::invalid_argument("evolve_kinetic: Gamma1 must be positive");
  const double n = planck_occupation(t.energy, temp);
  const double g = t.gamma1 / (2 * n + 1);
  const double gm = (n + 1) * g, gp = n * g, gphi = (n + 0.5) * g;
  using V = Eigen::Matrix<double, 4, 1>;
  auto rhs = [&](double, const V& y) {
    const double flow = gm * y[1] - gp * y[0];
    return V(flow, -flow, -gphi * y[2], -gphi * y[3]);
  };
  V y(s.rho11, s.rho22, s.rho12.real(), s.rho12.imag());
  y = integrate_dopri5<4>(rhs, y, 0.0, duration, opt);
  TlsState out{y[0], y[1], cplx(y[2], y[3])};
  return out;
}

struct VarianceConfig {
  double omega_r = kTwoPi * 500e6;
  double omega_max = kTwoPi * 50e9;
  std::size_t n_tls = 1000;
  std::size_t trials = 10000;
  double gamma2 = 0.0;  // rad/s; 0 means 0.01 omega_r
  std::size_t bootstrap = 200;
  double confidence = 0.95;
  std::uint64_t seed = 1;

  double resolved_gamma2() const { return gamma2 > 0 ? gamma2 : 0.01 * omega_r; }
};

struct VarianceResult {
  double ratio = 0.0;  // Var[F delta diss] / Var[F delta reac]
  double ci_lo = 0.0;
  double ci_hi = 0.0;
  double analytic = 0.0;  // (4/pi^2) ln^2(omega_max/omega_r)
  double var_im = 0.0, var_re = 0.0;
  std::uint64_t seed = 0;
};

inline double variance_ratio_analytic(double omega_r, double omega_max) {
  const double l = std::log(omega_max / omega_r);
  return 4.0 / (kPi * kPi) * l * l;
}

namespace detail {

// Zero-temperature contribution of one TLS with unit coupling.
inline cplx chi0_term(double detuning, double omega, double gamma2) {
  return 1.0 / cplx(detuning, -gamma2) + 1.0 / cplx(detuning + 2 * omega, gamma2);
}

inline double sample_variance(const std::vector<double>& x, const std::vector<std::size_t>* idx = nullptr) {
  const std::size_t n = idx ? idx->size() : x.size();
  auto at = [&](std::size_t i) { return idx ? x[(*idx)[i]] : x[i]; };
  double mean = 0;
  for (std::size_t i = 0; i < n; ++i) mean += at(i);
  mean /= static_cast<double>(n);
  double ss = 0;
  for (std::size_t i = 0; i < n; ++i) ss += (at(i) - mean) * (at(i) - mean);
  return ss / static_cast<double>(n - 1);
}

}  // namespace detail

// Per-TLS variance ratio by quadrature over a uniform TLS frequency.
inline double variance_ratio_quadrature(const VarianceConfig& c) {
  const double w = c.omega_r, wm = c.omega_max, g = c.resolved_gamma2();
  // Substituting Delta = Gamma2 sinh(u) flattens the Lorentzian peak.
  const double u0 = std::asinh(-w / g), u1 = std::asinh((wm - w) / g);
  auto moment = [&](auto part, int power) {
    auto f = [&](double u) {
      const double x = g * std::sinh(u);
      return std::pow(part(detail::chi0_term(x, w, g)), power) * g * std::cosh(u);
    };
    return integrate(f, u0, 0.0, 1e-11) + integrate(f, 0.0, u1, 1e-11);
  };
  auto re = [](cplx z) { return z.real(); };
  auto im = [](cplx z) { return z.imag(); };
  const double var_im = moment(im, 2) / wm - std::pow(moment(im, 1) / wm, 2);
  const double var_re = moment(re, 2) / wm - std::pow(moment(re, 1) / wm, 2);
  const double l = std::log(wm / w);
  return 4 * l * l / (kPi * kPi) * var_im / var_re;
}

inline VarianceResult variance_mc(const VarianceConfig& c) {
  if (!(c.omega_max > c.omega_r) || !(c.omega_r > 0)) throw std::invalid_argument("variance_mc: need omega_max > omega_r > 0");
  if (c.trials < 100) throw std::invalid_argument("variance_mc: at least 100 trials required");
  if (c.n_tls == 0) throw std::invalid_argument("variance_mc: n_tls must be positive");
  const double g = c.resolved_gamma2();
  std::vector<double> im(c.trials), re(c.trials);
  parallel_for(c.trials, [&](std::size_t t) {
    CounterRng r(c.seed, t);
    double si = 0, sr = 0;
    for (std::size_t i = 0; i < c.n_tls; ++i) {
      const cplx z = detail::chi0_term(r.uniform(0.0, c.omega_max) - c.omega_r, c.omega_r, g);
      si += z.imag();
      sr += z.real();
    }
    im[t] = si;
    re[t] = sr;
  });
  const double l = std::log(c.omega_max / c.omega_r);
  const double scale = 4 * l * l / (kPi * kPi);
  VarianceResult out;
  out.seed = c.seed;
  out.analytic = variance_ratio_analytic(c.omega_r, c.omega_max);
  out.var_im = detail::sample_variance(im);
  out.var_re = detail::sample_variance(re);
  out.ratio = scale * out.var_im / out.var_re;
  if (c.bootstrap > 0) {
    std::vector<double> boots(c.bootstrap);
    parallel_for(c.bootstrap, [&](std::size_t b) {
      CounterRng r(c.seed ^ 0x5bd1e995u, b);
      std::vector<std::size_t> idx(c.trials);
      for (auto& k : idx) k = static_cast<std::size_t>(r.next_u64() % c.trials);
      boots[b] = scale * detail::sample_variance(im, &idx) / detail::sample_variance(re, &idx);
    });
    std::sort(boots.begin(), boots.end());
    const double a = 0.5 * (1 - c.confidence);
    auto q = [&](double p) {
      const double pos = p * static_cast<double>(boots.size() - 1);
      const auto k = static_cast<std::size_t>(pos);
      const double fr = pos - static_cast<double>(k);
      return k + 1 < boots.size() ? boots[k] * (1 - fr) + boots[k + 1] * fr : boots[k];
    };
    out.ci_lo = q(a);
    out.ci_hi = q(1 - a);
  }
  return out;
}

}  // namespace phonoq
