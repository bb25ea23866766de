#include <gtest/gtest.h>

#include <cmath>
#include <complex>
#include <vector>

#include "phonoq/fft.hpp"
#include "phonoq/ode.hpp"
#include "phonoq/parallel.hpp"
#include "phonoq/rng.hpp"
#include "phonoq/special.hpp"

using namespace phonoq;

TEST(Digamma, SpecialValues) {
  EXPECT_NEAR(complex_digamma(1.0).real(), -0.57721566490153286061, 1e-15);
  EXPECT_NEAR(complex_digamma(0.5).real(), -1.9635100260214234794, 1e-15);
  EXPECT_NEAR(complex_digamma(1.0).real(), -kEulerGamma, 1e-15);
}

TEST(Digamma, ReferenceValues) {
  struct Ref { cplx z, v; };
  // 40-digit reference values.
  const std::vector<Ref> refs = {
      {{0.3, 2.5}, {0.91274828839561796343, 1.6517469215951299914}},
      {{-3.7, 0.2}, {0.085426161316682423806, 2.2496477386055173901}},
      {{0.5, -40}, {3.6888534095980231764, -1.5707963267948966192}},
      {{12, 1}, {2.4464211487936174754, 0.08668450382193077205}},
      {{0.01, 0.001}, {-99.570785277769331333, 9.9026113114963713176}},
  };
  for (const auto& r : refs) {
    const cplx v = complex_digamma(r.z);
    EXPECT_LT(std::abs(v - r.v) / std::abs(r.v), 1e-12) << r.z;
  }
}

TEST(Digamma, TanhIdentity) {
  // Im psi(1/2 + x/(2 pi i)) = -(pi/2) tanh(x/2)
  const std::vector<std::pair<double, double>> ref = {{0.1, -0.078474431876480012783},
                                                      {1, -0.72589193317292292137},
                                                      {10, -1.5706537051840924173},
                                                      {1e-3, -0.00078539809794760792116},
                                                      {0.05, -0.039261728983794128277},
                                                      {3, -1.4218035520301715967},
                                                      {50, -1.5707963267948966192}};
  for (auto [x, v] : ref) {
    const double im = complex_digamma(cplx(0.5, -x / kTwoPi)).imag();
    EXPECT_NEAR(im, v, 1e-12 * std::abs(v)) << x;
  }
  for (double lx = -3; lx <= std::log10(50.0); lx += 0.05) {
    const double x = std::pow(10.0, lx);
    const double im = complex_digamma(cplx(0.5, -x / kTwoPi)).imag();
    EXPECT_NEAR(im, -0.5 * kPi * std::tanh(0.5 * x), 1e-10) << x;
  }
}

TEST(Digamma, PolesRejected) {
  EXPECT_THROW(complex_digamma(0.0), std::domain_error);
  EXPECT_THROW(complex_digamma(-3.0), std::domain_error);
  EXPECT_NO_THROW(complex_digamma(cplx(-3.0, 1e-3)));
}

TEST(Digamma, Recurrence) {
  for (cplx z : {cplx(0.7, 0.3), cplx(3.2, -5.0), cplx(-2.5, 7.0)}) {
    const cplx lhs = complex_digamma(z + 1.0);
    const cplx rhs = complex_digamma(z) + 1.0 / z;
    EXPECT_LT(std::abs(lhs - rhs), 1e-13 * std::max(1.0, std::abs(lhs)));
  }
}

TEST(Quadrature, CschMoments) {
  const double i3 = integrate([](double x) { return pow_csch(x, 3.0); }, 0.0, INFINITY);
  EXPECT_NEAR(i3 / (std::pow(kPi, 4) / 8.0), 1.0, 1e-10);
  const double i6 = integrate(
      [](double x) {
        if (x == 0) return 0.0;
        if (x > 1400) return 0.0;
        const double s = std::sinh(0.5 * x);
        return std::pow(x, 6) / (s * s);
      },
      0.0, INFINITY);
  EXPECT_NEAR(i6 / (64.0 * std::pow(kPi, 6) / 21.0), 1.0, 1e-10);
}

TEST(Roots, Bracketed) {
  const double r = find_root([](double x) { return x * x - 2.0; }, 0.0, 2.0);
  EXPECT_NEAR(r, std::sqrt(2.0), 1e-15);
  EXPECT_THROW(find_root([](double x) { return x * x + 1.0; }, 0.0, 2.0), std::domain_error);
}

TEST(Ode, HarmonicOscillator) {
  using V = Eigen::Vector2d;
  auto f = [](double, const V& y) { return V(y[1], -y[0]); };
  const V y = integrate_dopri5<2>(f, V(1.0, 0.0), 0.0, 10.0);
  EXPECT_NEAR(y[0], std::cos(10.0), 1e-8);
  EXPECT_NEAR(y[1], -std::sin(10.0), 1e-8);
}

TEST(Fft, MatchesDirectDft) {
  std::vector<cplx> a(16);
  CounterRng rng(3);
  for (auto& v : a) v = {rng.normal(), rng.normal()};
  auto b = a;
  fft_inplace(b);
  for (std::size_t k = 0; k < 16; ++k) {
    cplx s = 0;
    for (std::size_t n = 0; n < 16; ++n) s += a[n] * std::polar(1.0, -kTwoPi * double(k * n) / 16.0);
    EXPECT_LT(std::abs(s - b[k]), 1e-12);
  }
  fft_inplace(b, true);
  for (std::size_t k = 0; k < 16; ++k) EXPECT_LT(std::abs(a[k] - b[k]), 1e-14);
  std::vector<cplx> bad(12);
  EXPECT_THROW(fft_inplace(bad), std::invalid_argument);
}

TEST(Rng, Deterministic) {
  CounterRng a(42, 7), b(42, 7), c(42, 8);
  for (int i = 0; i < 100; ++i) {
    const double x = a.normal();
    EXPECT_EQ(x, b.normal());
    (void)c;
  }
  CounterRng d(42, 7), e(42, 8);
  EXPECT_NE(d.next_u64(), e.next_u64());
}

TEST(Rng, Moments) {
  CounterRng r(1);
  double s = 0, s2 = 0, u = 0;
  const int n = 200000;
  for (int i = 0; i < n; ++i) {
    const double x = r.normal();
    s += x;
    s2 += x * x;
    u += r.uniform();
  }
  EXPECT_NEAR(s / n, 0.0, 0.01);
  EXPECT_NEAR(s2 / n, 1.0, 0.01);
  EXPECT_NEAR(u / n, 0.5, 0.005);
}

TEST(Parallel, ThreadCountIndependent) {
  std::vector<double> a(1000), b(1000);
  auto body = [](std::vector<double>& v) {
    return [&v](std::size_t i) {
      CounterRng r(5, i);
      v[i] = r.normal();
    };
  };
  parallel_for(1000, body(a), 1);
  parallel_for(1000, body(b), 4);
  EXPECT_EQ(a, b);
  EXPECT_EQ(pairwise_sum<double>(a.begin(), a.end()), pairwise_sum<double>(b.begin(), b.end()));
}
