#include <gtest/gtest.h>

#include <cmath>
#include <vector>

#include "phonoq/rng.hpp"
#include "phonoq/tls_loss.hpp"

using namespace phonoq;

namespace {

TlsLossParams table1() { return {1.26e-5, 10.0, 0.56, 1.9, 8.3e6, 0.25, kInf}; }

LossDataset grid(const TlsLossParams& p, double frac_noise, std::uint64_t seed, int n_pow = 21, int n_t = 10) {
  LossDataset d;
  CounterRng rng(seed);
  for (int it = 0; it < n_t; ++it) {
    const double T = n_t > 1 ? 0.025 * std::pow(40.0, it / double(n_t - 1)) : 0.05;
    for (int ip = 0; ip < n_pow; ++ip) {
      const double nb = std::pow(126.0, ip / double(n_pow - 1));
      const double inv = q_total_inv(p, nb, T, 500e6) * (1.0 + frac_noise * rng.normal());
      const double qi = 1.0 / inv;
      d.push_back({nb, T, qi, frac_noise > 0 ? frac_noise * qi : 0.0, 500e6});
    }
  }
  return d;
}

}  // namespace

TEST(ResonantLoss, ZeroTemperatureLimit) {
  const auto p = table1();
  const double v = q_resonant_inv(p, 0.0, 1e-6, 500e6);
  EXPECT_DOUBLE_EQ(v, 1.26e-5);
  EXPECT_NEAR(1.0 / v, 7.94e4, 100);
}

TEST(ResonantLoss, GoldenAt24mK) {
  EXPECT_NEAR(half_reduced_energy(500e6, 0.024), 0.49992115347564804668, 1e-14);
  EXPECT_NEAR(q_resonant_inv(table1(), 0.0, 0.024, 500e6), 5.8218948437625186535e-6, 1e-18);
}

TEST(ResonantLoss, Monotone) {
  const auto p = table1();
  double prev = 1;
  for (double nb = 0; nb < 1e9; nb = nb * 3 + 0.1) {
    const double v = q_resonant_inv(p, nb, 0.05, 500e6);
    EXPECT_LE(v, prev);
    prev = v;
  }
  EXPECT_LT(q_resonant_inv(p, 1e30, 0.05, 500e6), 1e-6 * p.f_delta0_diss);
  prev = 1;
  for (double T = 1e-3; T < 10; T *= 1.2) {
    const double v = q_resonant_inv(p, 0.0, T, 500e6);
    EXPECT_LE(v, prev);
    prev = v;
  }
}

TEST(RelaxationLoss, Values) {
  auto p = table1();
  EXPECT_DOUBLE_EQ(q_relaxation_inv(p, p.t0), 1.0 / 8.3e6);
  EXPECT_NEAR(1.0 / q_relaxation_inv(p, 0.5), 2223929.9347628083157, 1e-6);
  p.d = 1.0;
  EXPECT_DOUBLE_EQ(1.0 / q_relaxation_inv(p, 2 * p.t0), p.q_rel_t0 / 2);
}

TEST(JointFit, NoiselessExact) {
  const auto truth = table1();
  auto r = joint_fit(grid(truth, 0.0, 1));
  EXPECT_TRUE(r.raw.converged);
  EXPECT_NEAR(r.params.f_delta0_diss / truth.f_delta0_diss, 1, 1e-6);
  EXPECT_NEAR(r.params.n_c / truth.n_c, 1, 1e-6);
  EXPECT_NEAR(r.params.beta / truth.beta, 1, 1e-6);
  EXPECT_NEAR(r.params.d / truth.d, 1, 1e-6);
  EXPECT_NEAR(r.params.q_rel_t0 / truth.q_rel_t0, 1, 1e-6);
  EXPECT_TRUE(std::isinf(r.params.q_bkg));
}

TEST(JointFit, NoisyWithinThreeSigma) {
  const auto truth = table1();
  auto r = joint_fit(grid(truth, 0.02, 3));
  EXPECT_TRUE(r.raw.converged);
  EXPECT_LE(std::abs(r.params.f_delta0_diss - truth.f_delta0_diss), 3 * r.sigma.f_delta0_diss);
  EXPECT_LE(std::abs(r.params.n_c - truth.n_c), 3 * r.sigma.n_c);
  EXPECT_LE(std::abs(r.params.beta - truth.beta), 3 * r.sigma.beta);
  EXPECT_LE(std::abs(r.params.d - truth.d), 3 * r.sigma.d);
  EXPECT_LE(std::abs(r.params.q_rel_t0 - truth.q_rel_t0), 3 * r.sigma.q_rel_t0);
  // Fitted total is at least each component.
  for (const auto& rec : grid(truth, 0, 1)) {
    const double tot = q_total_inv(r.params, rec.nbar, rec.temp, rec.freq);
    EXPECT_GE(tot, q_resonant_inv(r.params, rec.nbar, rec.temp, rec.freq));
    EXPECT_GE(tot, q_relaxation_inv(r.params, rec.temp));
  }
}

TEST(JointFit, FreeBackground) {
  auto truth = table1();
  truth.q_bkg = 1e6;
  JointFitOptions opt;
  opt.free_background = true;
  auto r0 = joint_fit(grid(truth, 0.0, 1), opt);
  EXPECT_NEAR(r0.params.q_bkg / 1e6, 1.0, 1e-6);
  auto r = joint_fit(grid(truth, 0.02, 5), opt);
  EXPECT_LE(std::abs(r.params.q_bkg - 1e6), 2 * r.sigma.q_bkg);
}

TEST(JointFit, SingleTemperatureUnidentifiable) {
  auto r = joint_fit(grid(table1(), 0.0, 1, 21, 1));
  EXPECT_TRUE(std::isinf(r.sigma.d));
  EXPECT_TRUE(std::isinf(r.sigma.q_rel_t0));
  EXPECT_FALSE(r.warnings.empty());
}

TEST(JointFit, PinnedValuesHeld) {
  JointFitOptions opt;
  opt.beta = 0.56;
  opt.d = 1.9;
  auto r = joint_fit(grid(table1(), 0.0, 1), opt);
  EXPECT_EQ(r.params.beta, 0.56);
  EXPECT_EQ(r.sigma.beta, 0.0);
  EXPECT_NEAR(r.params.n_c / 10.0, 1, 1e-6);
}

TEST(FreqShift, Golden) {
  FreqShiftParams p{1.14e-5, 502.1e6};
  EXPECT_NEAR(freq_shift(p, 0.5, 502.1e6) / 0.000010550114857452681103, 1.0, 1e-12);
  EXPECT_NEAR(freq_shift(p, 0.06, 502.1e6) / 2.9772836303694009383e-6, 1.0, 1e-12);
}

TEST(FreqShift, ZeroTemperatureLimit) {
  FreqShiftParams p{1.14e-5, 502.1e6};
  // Vanishes quadratically in T.
  const double a = freq_shift(p, 1e-4, 502.1e6), b = freq_shift(p, 1e-5, 502.1e6);
  EXPECT_LT(std::abs(a), 2e-10);
  EXPECT_NEAR(a / b, 100.0, 0.1);
}

TEST(FreqShift, MonotoneAboveKnee) {
  FreqShiftParams p{1.14e-5, 502.1e6};
  const double knee = kPlanck * 502.1e6 / (2 * kBoltzmann);
  double prev = -1;
  for (double T = knee; T < 5.0; T *= 1.01) {
    const double v = freq_shift(p, T, 502.1e6);
    EXPECT_GT(v, prev);
    prev = v;
  }
}

TEST(FreqShift, ScaleInvariance) {
  for (double s : {0.5, 2.0, 7.0}) {
    EXPECT_EQ(freq_shift_kernel(0.1, 5e8), freq_shift_kernel(0.1 * s, 5e8 * s)) << s;
  }
}

namespace {

std::vector<FreqShiftRecord> shift_series(FreqShiftParams p, double noise_hz, std::uint64_t seed) {
  std::vector<FreqShiftRecord> s;
  CounterRng rng(seed);
  for (int i = 0; i < 15; ++i) {
    const double T = 0.02 * std::pow(50.0, i / 14.0);
    s.push_back({T, p.f0 * (1 + freq_shift(p, T, p.f0)) + noise_hz * rng.normal(), noise_hz});
  }
  return s;
}

}  // namespace

TEST(FitFreqShift, NoiselessRecovery) {
  FreqShiftParams truth{1.14e-5, 502.1e6};
  auto r = fit_freq_shift(shift_series(truth, 0.0, 1));
  EXPECT_NEAR(r.params.f_delta0_reac / truth.f_delta0_reac, 1, 1e-6);
  EXPECT_NEAR(r.params.f0 / truth.f0, 1, 1e-12);
}

TEST(FitFreqShift, ConstantSeriesGivesZero) {
  std::vector<FreqShiftRecord> s;
  CounterRng rng(4);
  for (int i = 0; i < 12; ++i) s.push_back({0.02 * std::pow(50.0, i / 11.0), 5e8 + 0.5 * rng.normal(), 0.5});
  auto r = fit_freq_shift(s);
  EXPECT_LE(r.params.f_delta0_reac, 3 * r.sigma_f_delta0_reac + 1e-12);
}

TEST(FitFreqShift, MillikelvinSeriesRegime) {
  for (int k = 0; k < 12; ++k) {
    FreqShiftParams truth{4.5e-6 * std::pow(3e-5 / 4.5e-6, k / 11.0), 4.5e8 + 2e7 * k};
    auto r = fit_freq_shift(shift_series(truth, 2.0, 20 + k));
    EXPECT_LE(std::abs(r.params.f_delta0_reac - truth.f_delta0_reac), 2.5 * r.sigma_f_delta0_reac) << k;
  }
}

TEST(FitFreqShift, FlagsNonMonotoneSeries) {
  FreqShiftParams truth{1.14e-5, 502.1e6};
  auto s = shift_series(truth, 1.0, 2);
  s[12].f_r -= 3000;
  auto r = fit_freq_shift(s);
  EXPECT_FALSE(r.warnings.empty());
}

TEST(InvertShift, RoundTrip) {
  FreqShiftParams p{1.14e-5, 502.1e6};
  for (double T : {0.025, 0.06, 0.3, 2.0}) {
    const double s = freq_shift(p, T, p.f0);
    EXPECT_NEAR(invert_freq_to_temperature(p, s) / T, 1.0, 1e-9) << T;
  }
  EXPECT_EQ(invert_freq_to_temperature(p, 0.0), 1e-3);
  EXPECT_THROW(invert_freq_to_temperature(p, 1.0), std::domain_error);
  EXPECT_THROW(invert_freq_to_temperature(p, -1e-5), std::domain_error);
}

TEST(InvertShift, HeatingRange) {
  FreqShiftParams p{1.14e-5, 502.1e6};
  EXPECT_NEAR(freq_shift(p, 0.025, 502.1e6), 3.3710413776454223959e-7, 1e-18);
  const double t_hot = invert_freq_to_temperature(p, 3.5e-6);
  EXPECT_GT(t_hot, 0.065);
}

TEST(Participation, ExactLine) {
  std::vector<ParticipationPoint> pts;
  for (int i = 0; i < 12; ++i) {
    const double f = 0.002 + 0.05 * i / 11.0;
    pts.push_back({f, f * 4.9e-4 + (1 - f) * 4.5e-6, 1e-7});
  }
  auto r = participation_decomposition(pts);
  EXPECT_NEAR(r.delta_qz / 4.5e-6, 1, 1e-10);
  EXPECT_NEAR(r.delta_al / 4.9e-4, 1, 1e-10);
}

TEST(Participation, TwoEndpoints) {
  auto r = participation_decomposition({{0.0, 3e-6, 0}, {1.0, 7e-4, 0}});
  EXPECT_NEAR(r.delta_qz / 3e-6, 1.0, 1e-12);
  EXPECT_NEAR(r.delta_al / 7e-4, 1.0, 1e-12);
}

TEST(Participation, IdenticalFractionsRejected) {
  EXPECT_THROW(participation_decomposition({{0.1, 1e-5, 0}, {0.1, 2e-5, 0}, {0.1, 3e-5, 0}}),
               std::invalid_argument);
}

TEST(Radiation, NoiselessRecoveryAndExtrapolation) {
  RadiationLeakParams truth{4.1e-3, 1.71, 4.9e5};
  std::vector<RadiationPoint> pts;
  for (int n = 2; n <= 10; ++n) pts.push_back({double(n), 1.0 / truth.q_i_inv(n), 0});
  auto r = radiation_model_fit(pts);
  EXPECT_NEAR(r.params.q_mirr0_inv / 4.1e-3, 1, 1e-6);
  EXPECT_NEAR(r.params.beta / 1.71, 1, 1e-6);
  EXPECT_NEAR(r.params.q_tls / 4.9e5, 1, 1e-6);
  EXPECT_NEAR(r.q_rad(7) / 3.85e7, 1, 0.01);
}

TEST(Radiation, FlatDataGivesFlatModel) {
  std::vector<RadiationPoint> pts;
  for (int n = 2; n <= 10; ++n) pts.push_back({double(n), 3e5, 0});
  auto r = radiation_model_fit(pts);
  for (int n = 2; n <= 10; ++n) EXPECT_NEAR(r.params.q_i_inv(n) * 3e5, 1.0, 1e-6);
}
