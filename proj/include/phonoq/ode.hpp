#pragma once

// Adaptive Dormand-Prince 5(4) integrator for small fixed-size systems.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace phonoq {

struct OdeOptions {
  double rtol = 1e-10;
  double atol = 1e-14;
  double initial_step = 0.0;  // 0: pick from the first derivative
  double min_step = 0.0;      // 0: scaled from the interval
  long max_steps = 10'000'000;
};

struct OdeStats {
  long accepted = 0;
  long rejected = 0;
};

template <int N, class Rhs>
Eigen::Matrix<double, N, 1> integrate_dopri5(Rhs&& f, Eigen::Matrix<double, N, 1> y, double t0,
                                              double t1, const OdeOptions& opt = {},
                                              OdeStats* stats = nullptr) {
  using V = Eigen::Matrix<double, N, 1>;
  if (!(t1 >= t0)) throw std::invalid_argument("integrate_dopri5: t1 < t0");
  if (t1 == t0) return y;

  constexpr double c2 = 1.0 / 5, c3 = 3.0 / 10, c4 = 4.0 / 5, c5 = 8.0 / 9;
  constexpr double a21 = 1.0 / 5;
  constexpr double a31 = 3.0 / 40, a32 = 9.0 / 40;
  constexpr double a41 = 44.0 / 45, a42 = -56.0 / 15, a43 = 32.0 / 9;
  constexpr double a51 = 19372.0 / 6561, a52 = -25360.0 / 2187, a53 = 64448.0 / 6561,
                   a54 = -212.0 / 729;
  constexpr double a61 = 9017.0 / 3168, a62 = -355.0 / 33, a63 = 46732.0 / 5247,
                   a64 = 49.0 / 176, a65 = -5103.0 / 18656;
  constexpr double b1 = 35.0 / 384, b3 = 500.0 / 1113, b4 = 125.0 / 192, b5 = -2187.0 / 6784,
                   b6 = 11.0 / 84;
  // error coefficients b - b*
  constexpr double e1 = 71.0 / 57600, e3 = -71.0 / 16695, e4 = 71.0 / 1920,
                   e5 = -17253.0 / 339200, e6 = 22.0 / 525, e7 = -1.0 / 40;

  const double span = t1 - t0;
  const double hmin = opt.min_step > 0 ? opt.min_step : 1e-14 * span;
  double t = t0;
  V k1 = f(t, y);
  double h = opt.initial_step;
  if (h <= 0.0) {
    const double d0 = y.cwiseAbs().maxCoeff();
    const double d1 = k1.cwiseAbs().maxCoeff();
    h = (d0 < 1e-5 || d1 < 1e-5) ? 1e-6 * span : 0.01 * d0 / d1;
    h = std::min(h, span);
  }
  long steps = 0;
  while (t < t1) {
    if (++steps > opt.max_steps) throw std::runtime_error("integrate_dopri5: step budget exhausted");
    if (t + h > t1) h = t1 - t;
    const V k2 = f(t + c2 * h, V(y + h * a21 * k1));
    const V k3 = f(t + c3 * h, V(y + h * (a31 * k1 + a32 * k2)));
    const V k4 = f(t + c4 * h, V(y + h * (a41 * k1 + a42 * k2 + a43 * k3)));
    const V k5 = f(t + c5 * h, V(y + h * (a51 * k1 + a52 * k2 + a53 * k3 + a54 * k4)));
    const V k6 = f(t + h, V(y + h * (a61 * k1 + a62 * k2 + a63 * k3 + a64 * k4 + a65 * k5)));
    const V y5 = y + h * (b1 * k1 + b3 * k3 + b4 * k4 + b5 * k5 + b6 * k6);
    const V k7 = f(t + h, y5);
    const V err = h * (e1 * k1 + e3 * k3 + e4 * k4 + e5 * k5 + e6 * k6 + e7 * k7);
    double en = 0.0;
    for (int i = 0; i < y.size(); ++i) {
      const double sc = opt.atol + opt.rtol * std::max(std::abs(y[i]), std::abs(y5[i]));
      en = std::max(en, std::abs(err[i]) / sc);
    }
    if (!std::isfinite(en)) throw std::runtime_error("integrate_dopri5: non-finite state");
    if (en <= 1.0) {
      t += h;
      y = y5;
      k1 = k7;  // FSAL
      if (stats) ++stats->accepted;
    } else if (stats) {
      ++stats->rejected;
    }
    const double fac = en == 0.0 ? 5.0 : std::clamp(0.9 * std::pow(en, -0.2), 0.2, 5.0);
    h *= fac;
    if (h < hmin && t < t1) throw std::runtime_error("integrate_dopri5: step size underflow");
  }
  return y;
}

}  // namespace phonoq
