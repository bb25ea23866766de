#pragma once

#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <boost/math/quadrature/tanh_sinh.hpp>
#include <boost/math/tools/roots.hpp>

#include <cmath>
#include <complex>
#include <cstdint>
#include <functional>
#include <limits>
#include <stdexcept>
#include <string>
#include <utility>

#include "constants.hpp"

namespace phonoq {

using cplx = std::complex<double>;

namespace detail {

// cot(z) without overflow for large |Im z|.
inline cplx complex_cot(cplx z) {
  const double x = z.real();
  const double y = z.imag();
  if (std::abs(y) > 20.0) {
    // cot z = -i s (1 + e) / (1 - e), e = exp(2 i s z), |e| = exp(-2|y|)
    const double s = y > 0 ? 1.0 : -1.0;
    const cplx e = std::exp(cplx(-2.0 * std::abs(y), 2.0 * s * x));
    return cplx(0.0, -s) * (1.0 + e) / (1.0 - e);
  }
  return std::cos(z) / std::sin(z);
}

}  // namespace detail

// Digamma for complex arguments. Upward recurrence to Re z >= 8, then the
// Stirling-type asymptotic series; reflection for Re z < 1/2.
inline cplx complex_digamma(cplx z) {
  if (!std::isfinite(z.real()) || !std::isfinite(z.imag()))
    throw std::domain_error("complex_digamma: non-finite argument");
  if (z.imag() == 0.0 && z.real() <= 0.0 && z.real() == std::floor(z.real()))
    throw std::domain_error("complex_digamma: pole at non-positive integer " +
                            std::to_string(z.real()));
  if (z.real() < 0.5) {
    // psi(z) = psi(1 - z) - pi cot(pi z)
    return complex_digamma(1.0 - z) - kPi * detail::complex_cot(kPi * z);
  }
  cplx acc(0.0, 0.0);
  while (z.real() < 8.0) {
    acc -= 1.0 / z;
    z += 1.0;
  }
  // B_2k / (2k) for k = 1..8
  static constexpr double c[8] = {
      1.0 / 12.0,        -1.0 / 120.0,      1.0 / 252.0,     -1.0 / 240.0,
      1.0 / 132.0,       -691.0 / 32760.0,  1.0 / 12.0,      -3617.0 / 8160.0,
  };
  const cplx w = 1.0 / (z * z);
  cplx series(0.0, 0.0);
  for (int k = 7; k >= 0; --k) series = series * w + c[k];
  series *= w;
  return acc + std::log(z) - 0.5 / z - series;
}

inline double digamma(double x) { return complex_digamma(cplx(x, 0.0)).real(); }

// Adaptive quadrature on [a, b] (b may be +inf).
inline double integrate(const std::function<double(double)>& f, double a, double b,
                        double rel_tol = 1e-12) {
  if (std::isinf(b)) {
    boost::math::quadrature::tanh_sinh<double> ts;
    // tanh_sinh maps the half line internally via exp_sinh; use the
    // substitution x = a + t/(1-t) to stay on a finite interval.
    auto g = [&](double t) {
      if (t >= 1.0) return 0.0;
      const double one_m = 1.0 - t;
      const double x = a + t / one_m;
      const double v = f(x) / (one_m * one_m);
      return std::isfinite(v) ? v : 0.0;
    };
    return ts.integrate(g, 0.0, 1.0, rel_tol);
  }
  double err = 0.0;
  return boost::math::quadrature::gauss_kronrod<double, 61>::integrate(f, a, b, 30, rel_tol, &err);
}

// Root of f on [lo, hi] with a sign change; toms748 to ~full precision.
inline double find_root(const std::function<double(double)>& f, double lo, double hi,
                        int bits = 52, std::uintmax_t max_iter = 200) {
  double flo = f(lo);
  double fhi = f(hi);
  if (flo == 0.0) return lo;
  if (fhi == 0.0) return hi;
  if ((flo > 0) == (fhi > 0))
    throw std::domain_error("find_root: interval does not bracket a root");
  std::uintmax_t it = max_iter;
  auto tol = boost::math::tools::eps_tolerance<double>(bits);
  auto r = boost::math::tools::toms748_solve(f, lo, hi, flo, fhi, tol, it);
  return 0.5 * (r.first + r.second);
}

// x^n csch(x), with the x -> 0 limit handled. Used by relaxation integrals.
inline double pow_csch(double x, double n) {
  if (x == 0.0) return n == 1.0 ? 1.0 : (n > 1.0 ? 0.0 : std::numeric_limits<double>::infinity());
  if (x > 700.0) return 0.0;
  return std::pow(x, n) / std::sinh(x);
}

}  // namespace phonoq
