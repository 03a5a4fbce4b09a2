#include <gtest/gtest.h>

#include <cmath>

#include "metaqubit/scatter.hpp"
#include "oracles.hpp"

using namespace metaqubit;
using P = Polarization;

namespace {

const std::vector<P> kAll{P::sigma_plus, P::sigma_minus, P::pi};

ScatterParams classical_zero_field() {
  ScatterParams p;
  p.b_gauss = 0.0;
  p.options.mode = PumpingMode::classical;
  return p;
}

}  // namespace

// Frozen values of the equal-intensity rate chain, solved in exact rational
// arithmetic.
TEST(RateChainOracle, FrozenValues) {
  const auto s = oracle::chain_expected_photons({P::sigma_plus}, kAll);
  EXPECT_NEAR(s(0), 31.0 / 11, 1e-12);
  EXPECT_NEAR(s(1), 0.0, 1e-12);
  const auto sp = oracle::chain_expected_photons(kAll, {P::sigma_plus});
  EXPECT_NEAR(sp(2), 46.0 / 7, 1e-12);
  EXPECT_NEAR(sp(3), 38.0 / 7, 1e-12);
  EXPECT_NEAR(sp(4), 0.0, 1e-12);
  const auto pi = oracle::chain_expected_photons(kAll, {P::pi});
  EXPECT_NEAR(pi(3), 6.0, 1e-9);
  EXPECT_NEAR(pi(4), 6.0, 1e-9);
  const auto mix = oracle::chain_expected_photons(kAll, {P::sigma_plus, P::pi});
  EXPECT_NEAR(mix(2), 384.0 / 29, 1e-12);
  EXPECT_NEAR(mix(3), 366.0 / 29, 1e-12);
  EXPECT_NEAR(mix(4), 330.0 / 29, 1e-12);
  EXPECT_NEAR(mix(5), 0.0, 1e-12);
}

TEST(Pumping, ClassicalZeroFieldMatchesRateChain) {
  const auto p = classical_zero_field();
  const auto dm = detection_matrix_D(p, 40000, 11);
  const auto settings = d_detection_settings();
  for (std::size_t r = 0; r < settings.size(); ++r) {
    const auto want = oracle::chain_expected_photons(kAll, settings[r]);
    for (int c = 0; c < 4; ++c) {
      const auto ri = static_cast<Eigen::Index>(r);
      const double tol = 4.0 * dm.std_error(ri, c) + 1e-12;
      EXPECT_NEAR(dm.mean(ri, c), want(2 + c), tol) << dm.rows[r] << " / " << dm.cols[static_cast<std::size_t>(c)];
    }
  }
  const auto sm = detection_matrix_S(p, 40000, 12);
  const auto want = oracle::chain_expected_photons({P::sigma_plus}, kAll);
  EXPECT_NEAR(sm.mean(0, 0), want(0), 4 * sm.std_error(0, 0));
  EXPECT_EQ(sm.mean(0, 1), 0.0);
}

TEST(Pumping, BrightSStateScattersAboutTwoPointEight) {
  const PumpModel model = build_model(2.2, {BeamConfig::make(Color::blue_493, {P::sigma_plus}, 0.1),
                                            BeamConfig::all(Color::red_650, 0.1)});
  const auto bright = simulate_pumping(model, s_state(-1), 20000, 3);
  EXPECT_NEAR(bright.mean, 2.8, 0.28);
  const auto dark = simulate_pumping(model, s_state(1), 1000, 3);
  EXPECT_EQ(dark.mean, 0.0);
}

TEST(Pumping, DeterministicForSeedAndIndependentOfWorkers) {
  const PumpModel model = build_model(2.2, {BeamConfig::all(Color::blue_493, 0.1),
                                            BeamConfig::make(Color::red_650, {P::sigma_plus, P::pi}, 0.1)});
  PumpingOptions one, four;
  four.workers = 4;
  const JumpSampler s1(model, one), s4(model, four);
  const auto a = simulate_pumping(s1, d_state(-3), 10000, 99, 0, one);
  const auto b = simulate_pumping(s4, d_state(-3), 10000, 99, 0, four);
  EXPECT_EQ(a.counts.sum, b.counts.sum);
  EXPECT_EQ(a.counts.sum_sq, b.counts.sum_sq);
  const auto c = simulate_pumping(s1, d_state(-3), 10000, 100, 0, one);
  EXPECT_NE(a.counts.sum, c.counts.sum);
}

TEST(Pumping, StepCapRaisesNamingTheStart) {
  // sigma+ and sigma- 493 light at B = 0 leaves no dark S state; with no 650
  // light D3/2 is dark, so the cap must be tiny to trigger.
  const PumpModel model = build_model(2.2, {BeamConfig::all(Color::blue_493, 0.1), BeamConfig::all(Color::red_650, 0.1)});
  PumpingOptions opt;
  opt.step_cap = 5;
  try {
    simulate_pumping(model, s_state(-1), 1000, 1, opt);
    FAIL() << "expected the step cap to trip";
  } catch (const std::runtime_error& e) {
    EXPECT_NE(std::string(e.what()).find("s-1/2"), std::string::npos);
  }
}

TEST(Pumping, RejectsBadInput) {
  EXPECT_THROW(build_model(-1.0, {BeamConfig::all(Color::red_650, 0.1)}), std::domain_error);
  EXPECT_THROW(build_model(1.0, {}), std::domain_error);
  EXPECT_THROW(build_model(1.0, {BeamConfig::all(Color::red_650, 0.1), BeamConfig::all(Color::red_650, 0.2)}),
               std::domain_error);
  const PumpModel model = build_model(1.0, {BeamConfig::all(Color::red_650, 0.1)});
  EXPECT_THROW(simulate_pumping(model, d_state(1), 0, 1), std::domain_error);
}

TEST(Pumping, ZeroFieldIsFlagged) {
  const PumpModel model = build_model(0.0, {BeamConfig::all(Color::red_650, 0.1)});
  EXPECT_FALSE(model.warnings().empty());
}

TEST(DetectionMatrix, ZeroPatternAndSymmetryAtWorkingPoint) {
  ScatterParams p;
  const auto dm = detection_matrix_D(p, 20000, 5);
  const bool zero[5][4] = {{0, 0, 1, 1}, {1, 1, 0, 0}, {1, 0, 0, 1}, {0, 0, 0, 1}, {1, 0, 0, 0}};
  for (int r = 0; r < 5; ++r)
    for (int c = 0; c < 4; ++c) {
      if (zero[r][c]) EXPECT_EQ(dm.mean(r, c), 0.0) << r << "," << c;
      else EXPECT_GT(dm.mean(r, c), 1.0) << r << "," << c;
    }
  EXPECT_GT(dm.mean(0, 0), dm.mean(0, 1));
  // Mirror m -> -m with sigma+ <-> sigma-.
  const int mirror[5] = {1, 0, 2, 4, 3};
  for (int r = 0; r < 5; ++r)
    for (int c = 0; c < 4; ++c) {
      const double se = std::hypot(dm.std_error(r, c), dm.std_error(mirror[r], 3 - c));
      EXPECT_NEAR(dm.mean(r, c), dm.mean(mirror[r], 3 - c), 4 * se + 1e-12);
    }
}

TEST(DetectionMatrix, SMatrixDiagonal) {
  const auto dm = detection_matrix_S(ScatterParams{}, 20000, 8);
  EXPECT_EQ(dm.mean(0, 1), 0.0);
  EXPECT_EQ(dm.mean(1, 0), 0.0);
  EXPECT_NEAR(dm.mean(0, 0), 2.8, 0.28);
  EXPECT_NEAR(dm.mean(1, 1), 2.8, 0.28);
}

TEST(DetectionMatrix, RepumpIntensityDoesNotChangePhotonBudget) {
  ScatterParams p;
  const auto a = detection_matrix_S(p, 40000, 21);
  p.saturation_650 *= 2;
  const auto b = detection_matrix_S(p, 40000, 22);
  EXPECT_NEAR(a.mean(0, 0), b.mean(0, 0), 2 * std::hypot(a.std_error(0, 0), b.std_error(0, 0)) + 0.02);
}

TEST(DetectionMatrix, StandardErrorScalesWithTrials) {
  ScatterParams p;
  p.options.mode = PumpingMode::classical;
  const auto a = detection_matrix_S(p, 10000, 31);
  const auto b = detection_matrix_S(p, 40000, 31);
  const double ratio = a.std_error(0, 0) / b.std_error(0, 0);
  EXPECT_NEAR(ratio, 2.0, 0.4);
}

TEST(DetectionMatrix, TwoPhotonResonanceWarns) {
  ScatterParams p;
  const double split = zeeman_splitting(Manifold::D_three_half, p.b_gauss);
  p.sigma_detuning_650_hz = split;  // sigma+ & pi now on two-photon resonance
  p.options.mode = PumpingMode::classical;
  const auto dm = detection_matrix_D(p, 200, 1);
  bool found = false;
  for (const auto& w : dm.warnings) found |= w.find("sigma+&pi") != std::string::npos;
  EXPECT_TRUE(found);
}

TEST(DarkStates, SinglePolarizations) {
  const auto sp = find_dark_states({P::sigma_plus}, 2.2);
  ASSERT_EQ(sp.size(), 2u);
  EXPECT_NEAR(std::abs(sp[0].amplitudes(2)), 1.0, 1e-12);
  EXPECT_NEAR(std::abs(sp[1].amplitudes(3)), 1.0, 1e-12);
  EXPECT_TRUE(sp[0].stationary && sp[1].stationary);
  const auto pi = find_dark_states({P::pi}, 2.2);
  ASSERT_EQ(pi.size(), 2u);
  EXPECT_TRUE(pi[0].stationary && pi[1].stationary);
}

TEST(DarkStates, MixedSettingHasOneStationaryState) {
  const auto ds = find_dark_states({P::sigma_plus, P::pi}, 2.2);
  ASSERT_EQ(ds.size(), 2u);
  int stationary = 0;
  for (const auto& d : ds) stationary += d.stationary;
  EXPECT_EQ(stationary, 1);
  EXPECT_NEAR(std::abs(ds[0].amplitudes(3)), 1.0, 1e-12);
  // The superposition is dark: zero coupling into P1/2.
  EXPECT_LT((d_to_p_coupling({P::sigma_plus, P::pi}) * ds[1].amplitudes).norm(), 1e-12);
}

TEST(DarkStates, TwoPhotonResonanceMakesBothStationary) {
  const double split = zeeman_splitting(Manifold::D_three_half, 2.2);
  const auto ds = find_dark_states({P::sigma_plus, P::pi}, 2.2, {split, split, 0.0});
  ASSERT_EQ(ds.size(), 2u);
  EXPECT_TRUE(ds[0].stationary && ds[1].stationary);
}

TEST(DarkStates, DimensionTwoForEverySetAtZeroField) {
  const std::vector<std::vector<P>> sets{{P::sigma_plus}, {P::sigma_minus}, {P::pi}, {P::sigma_plus, P::pi},
                                         {P::sigma_minus, P::pi}, kAll, {P::sigma_plus, P::sigma_minus}};
  for (const auto& s : sets) {
    const auto ds = find_dark_states(s, 0.0);
    EXPECT_EQ(ds.size(), 2u) << setting_label(s);
    for (const auto& d : ds) EXPECT_TRUE(d.stationary);
  }
}

TEST(DarkStates, ZeroPatternAgreesWithEigenstateDarkStates) {
  ScatterParams p;
  p.options.mode = PumpingMode::classical;
  const auto dm = detection_matrix_D(p, 500, 3);
  const auto settings = d_detection_settings();
  for (std::size_t r = 0; r < settings.size(); ++r) {
    for (const auto& d : find_dark_states(settings[r], p.b_gauss)) {
      Eigen::Index l;
      if (d.amplitudes.cwiseAbs().maxCoeff(&l) > 1 - 1e-12 && d.stationary)
        EXPECT_EQ(dm.mean(static_cast<Eigen::Index>(r), l), 0.0);
    }
  }
}

TEST(DarkStates, EmptySetRejected) { EXPECT_THROW(find_dark_states({}, 1.0), std::domain_error); }
