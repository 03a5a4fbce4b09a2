#include <gtest/gtest.h>

#include <numbers>

#include "metaqubit/ramsey.hpp"

using namespace metaqubit;

namespace {

std::vector<double> delays(double hi, int n) {
  std::vector<double> v;
  for (int i = 0; i < n; ++i) v.push_back(hi * i / (n - 1.0));
  return v;
}

// Gaussian static noise alone: contrast exp(-(t/T)^2) with T = sqrt(2)/(k sigma).
double static_t2(double sens, double sigma_mg) {
  return std::sqrt(2.0) / (2 * std::numbers::pi * sens * 1e3 * sigma_mg);
}

}  // namespace

TEST(FieldIntegral, StaticPlusHarmonic) {
  const std::vector<Harmonic> h{{50.0, 2.0}};
  const double t = 1e-3;
  // B(t) = 0.5 + 2 sin(w t + 0.3)
  const double w = 2 * std::numbers::pi * 50;
  const double want = 0.5 * t + 2.0 / w * (std::cos(0.3) - std::cos(w * t + 0.3));
  EXPECT_NEAR(field_integral(0.5, h, {0.3}, t), want, 1e-15);
}

TEST(Calibration, StaticOnlyInvertsClosedForm) {
  const double sigma = calibrate_noise(96e-6, 2.8);
  EXPECT_NEAR(static_t2(2.8, sigma), 96e-6, 1e-15);
  EXPECT_THROW(calibrate_noise(96e-6, 0.0), std::domain_error);
  EXPECT_THROW(calibrate_noise(96e-6, 2.8, {}, 1.0 / 50e-6), std::domain_error);
  EXPECT_THROW(calibrate_noise(1e-6, 2.8, {{60, 1000.0}}), std::domain_error);
}

TEST(Calibration, CalibratedNoiseReproducesSTarget) {
  const NoiseModel noise = calibrated_noise(96e-6, 350e-6, default_harmonics());
  const auto scan = ramsey_scan(2.8, noise, delays(300e-6, 31), 20000, 4);
  const auto fit = fit_t2star(scan);
  EXPECT_NEAR(fit.t2, 96e-6, 4e-6);
}

TEST(RamseyScan, T2ScalesInverselyWithSensitivity) {
  NoiseModel noise;
  noise.sigma_b_mg = 1.0;
  const double base = static_t2(1.0, 1.0);
  for (double sens : {1.0, 2.0, 4.0}) {
    const double want = base / sens;
    const auto fit = fit_t2star(ramsey_scan(sens, noise, delays(3 * want, 31), 4000, 7));
    EXPECT_NEAR(fit.t2, want, 4 * fit.t2_sigma) << sens;
    EXPECT_LT(std::abs(fit.t2 / want - 1), 0.05) << sens;
  }
}

TEST(RamseyScan, FlatContrastFlagsUpperBound) {
  NoiseModel noise;
  noise.sigma_b_mg = 1.0;
  const auto fit = fit_t2star(ramsey_scan(0.0, noise, delays(1e-3, 31), 1000, 3));
  EXPECT_TRUE(fit.at_upper_bound);
}

TEST(RamseyScan, VanishedContrastFlagsLowerBound) {
  NoiseModel noise;
  noise.sigma_b_mg = 1e4;
  EXPECT_TRUE(fit_t2star(ramsey_scan(2.8, noise, delays(1e-3, 31), 1000, 3)).at_lower_bound);
  std::vector<double> late = delays(1e-3, 31);
  for (auto& t : late) t += 1e-4;
  EXPECT_TRUE(fit_t2star(ramsey_scan(2.8, noise, late, 1000, 3)).at_lower_bound);
}

TEST(RamseyScan, DeterministicAcrossWorkers) {
  const NoiseModel noise = calibrated_noise(96e-6, 350e-6, default_harmonics());
  const auto a = ramsey_scan(2.24, noise, delays(300e-6, 16), 2000, 11, RamseyReadout::fringe, 1);
  const auto b = ramsey_scan(2.24, noise, delays(300e-6, 16), 2000, 11, RamseyReadout::fringe, 3);
  EXPECT_EQ(a.bright, b.bright);
}

TEST(RamseyScan, QuadratureReadoutTracksEnvelope) {
  NoiseModel noise;
  noise.residual_rate = 1.0 / 100e-6;
  const auto scan = ramsey_scan(0.0, noise, delays(200e-6, 11), 20000, 5, RamseyReadout::quadrature);
  for (std::size_t i = 0; i < scan.delays.size(); ++i) {
    const double env = std::exp(-std::pow(scan.delays[i] / 100e-6, 2));
    EXPECT_NEAR(scan.contrast(static_cast<Eigen::Index>(i)), env, 0.05);
  }
}

TEST(RamseyScan, InputValidation) {
  NoiseModel noise;
  EXPECT_THROW(ramsey_scan(1.0, noise, {1.0, 0.5}, 10, 1), std::domain_error);
  EXPECT_THROW(ramsey_scan(1.0, noise, {0.0}, 0, 1), std::domain_error);
  noise.sigma_b_mg = -1;
  EXPECT_THROW(ramsey_scan(1.0, noise, {0.0}, 10, 1), std::domain_error);
  RamseyScan tiny;
  tiny.delays = {0, 1, 2};
  EXPECT_THROW(fit_t2star(tiny), FitFailure);
}

TEST(Benchmark, HierarchyHolds) {
  const NoiseModel noise = calibrated_noise(96e-6, 350e-6, default_harmonics());
  const auto rows = benchmark_suite(noise, 3000, 21);
  ASSERT_EQ(rows.size(), 3u);
  EXPECT_LT(rows[0].fit.t2, rows[1].fit.t2);
  EXPECT_GT(rows[2].fit.t2 / rows[0].fit.t2, 3.0);
  EXPECT_EQ(rows[2].sensitivity, 0.0);
}
