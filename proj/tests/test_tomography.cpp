#include <gtest/gtest.h>

#include <random>

#include "metaqubit/tomography.hpp"
#include "oracles.hpp"

using namespace metaqubit;

namespace {

Eigen::Vector4d random_simplex(std::mt19937_64& g, bool boundary) {
  std::exponential_distribution<double> ex(1.0);
  Eigen::Vector4d d;
  for (int i = 0; i < 4; ++i) d(i) = ex(g);
  if (boundary) d(static_cast<Eigen::Index>(g() % 4)) = 0.0;
  return d / d.sum();
}

CountsVector exact_counts(const Eigen::Vector4d& d, double e, double cb, const Eigen::MatrixXd& m,
                          BackgroundModel bg = BackgroundModel::efficiency_scaled) {
  CountsVector c;
  c.means = expected_counts(d, e, cb, m, bg);
  c.trials = 1;
  return c;
}

}  // namespace

TEST(SolveS, StatedFormula) {
  const auto p = solve_S(3.0, 1.0);
  EXPECT_DOUBLE_EQ(p.s0, 0.25);
  EXPECT_DOUBLE_EQ(p.s1, 0.75);
  EXPECT_DOUBLE_EQ(solve_S(0.0, 2.0).s0, 1.0);
  EXPECT_THROW(solve_S(0.0, 0.0), std::domain_error);
  EXPECT_THROW(solve_S(-1.0, 1.0), std::domain_error);
}

TEST(SynthCounts, MeansConvergeAndAreSeeded) {
  const Eigen::MatrixXd m = reference_detection_matrix();
  const Eigen::Vector4d d(0.1, 0.2, 0.3, 0.4);
  const auto a = synth_counts(d, 0.8, 0.05, m, 200000, 4);
  const Eigen::VectorXd want = expected_counts(d, 0.8, 0.05, m);
  for (Eigen::Index i = 0; i < 5; ++i) EXPECT_NEAR(a.means(i), want(i), 4 * std::sqrt(want(i) / 200000));
  const auto b = synth_counts(d, 0.8, 0.05, m, 200000, 4);
  EXPECT_EQ(a.means, b.means);
  EXPECT_THROW(synth_counts(Eigen::Vector4d(0.5, 0.5, 0.5, 0), 1, 0, m, 10, 1), std::domain_error);
}

TEST(SolveDirect, NoiselessRoundTrip) {
  const Eigen::MatrixXd m = reference_detection_matrix();
  std::mt19937_64 g(7);
  for (int k = 0; k < 20; ++k) {
    const Eigen::Vector4d d = random_simplex(g, k % 3 == 0);
    for (auto bg : {BackgroundModel::efficiency_scaled, BackgroundModel::additive}) {
      const auto est = solve_direct(exact_counts(d, 0.7, 0.15, m, bg), m, bg);
      EXPECT_LT((est.d - d).cwiseAbs().maxCoeff(), 1e-9);
      EXPECT_NEAR(est.efficiency, 0.7, 1e-9);
      EXPECT_NEAR(est.background, 0.15, 1e-9);
    }
  }
}

TEST(SolveConstrained, NoiselessRoundTrip) {
  const Eigen::MatrixXd m = reference_detection_matrix();
  std::mt19937_64 g(8);
  for (int k = 0; k < 20; ++k) {
    const Eigen::Vector4d d = random_simplex(g, k % 2 == 0);
    const double cb = k % 4 == 0 ? 0.0 : 0.2;
    for (auto w : {ResidualWeighting::poisson, ResidualWeighting::uniform}) {
      const auto est = solve_constrained(exact_counts(d, 0.9, cb, m), m, 0.9, BackgroundModel::efficiency_scaled, w);
      EXPECT_LT((est.d - d).cwiseAbs().maxCoeff(), 1e-9);
      EXPECT_NEAR(est.background, cb, 1e-9);
      EXPECT_NEAR(est.objective, 0.0, 1e-12);
    }
  }
}

TEST(SolveConstrained, MatchesGridOracle) {
  const Eigen::MatrixXd m = reference_detection_matrix();
  std::mt19937_64 g(9);
  for (int k = 0; k < 3; ++k) {
    const Eigen::Vector4d d = random_simplex(g, k == 1);
    const auto counts = synth_counts(d, 0.8, 0.05, m, 300, 100 + static_cast<std::uint64_t>(k));
    const auto est = solve_constrained(counts, m, 0.8);
    Eigen::VectorXd w(5);
    for (int i = 0; i < 5; ++i) w(i) = 300.0 / std::max(counts.means(i), 1.0 / 300);
    const auto grid = oracle::grid_search(counts.means, m, 0.8, w, true);
    EXPECT_LE(est.objective, grid.objective * (1 + 1e-12) + 1e-12);
    const auto f = make_objective(counts, m, 0.8, BackgroundModel::efficiency_scaled, ResidualWeighting::poisson);
    Eigen::Matrix<double, 5, 1> theta;
    theta << est.d, est.background;
    const Eigen::Vector4d grad = f.gradient(theta).head<4>();
    const Eigen::Matrix4d hess = 2 * f.hessian().topLeftCorner<4, 4>();
    EXPECT_LE(grid.objective - est.objective, oracle::grid_objective_bound(grad, hess, 1e-3));
    EXPECT_LT((grid.d - est.d).cwiseAbs().maxCoeff(), 5e-3);
  }
}

TEST(SolveConstrained, InteriorDataAgreesWithDirect) {
  const Eigen::MatrixXd m = reference_detection_matrix();
  const Eigen::Vector4d d(0.3, 0.2, 0.25, 0.25);
  const auto counts = synth_counts(d, 0.85, 0.1, m, 100000, 12);
  const auto direct = solve_direct(counts, m);
  ASSERT_FALSE(direct.out_of_bounds);
  const auto cons = solve_constrained(counts, m, direct.efficiency);
  EXPECT_LT((direct.d - cons.d).cwiseAbs().maxCoeff(), 1e-9);
  EXPECT_TRUE(cons.active_constraints.empty());
}

TEST(SolveConstrained, ProjectsOutOfBoundsOntoSimplex) {
  const Eigen::MatrixXd m = reference_detection_matrix();
  CountsVector c;
  c.means = Eigen::VectorXd(5);
  c.means << 0.0, 9.0, 2.0, 0.0, 14.0;
  c.trials = 1000;
  const auto est = solve_constrained(c, m, 1.0);
  EXPECT_NEAR(est.d.sum(), 1.0, 1e-12);
  EXPECT_GE(est.d.minCoeff(), 0.0);
  EXPECT_GE(est.background, 0.0);
  EXPECT_FALSE(est.active_constraints.empty());
  EXPECT_EQ(est.covariance.rows(), 4);
  // Covariance lives on the simplex tangent space.
  EXPECT_LT((est.covariance * Eigen::Vector4d::Ones()).norm(), 1e-9);
}

TEST(SolveDirect, RankDeficiencyNamesRows) {
  DetectionMatrix dm;
  dm.mean = reference_detection_matrix();
  dm.mean.row(1) = dm.mean.row(0);
  dm.rows = {"a", "b", "c", "d", "e"};
  CountsVector c;
  c.means = Eigen::VectorXd::Ones(5);
  c.trials = 10;
  try {
    solve_direct(c, dm);
    FAIL() << "expected RankError";
  } catch (const RankError& e) {
    const auto& r = e.deficient_rows;
    EXPECT_NE(std::find(r.begin(), r.end(), "a"), r.end());
    EXPECT_NE(std::find(r.begin(), r.end(), "b"), r.end());
    EXPECT_NE(std::string(e.what()).find("rank 5"), std::string::npos);
  }
}

TEST(SolveDirect, CovarianceMatchesSeedScatter) {
  const Eigen::MatrixXd m = reference_detection_matrix();
  const Eigen::Vector4d d(0.25, 0.25, 0.25, 0.25);
  const int reps = 200;
  Eigen::MatrixXd samples(reps, 4);
  Eigen::Matrix4d predicted = Eigen::Matrix4d::Zero();
  for (int k = 0; k < reps; ++k) {
    const auto est = solve_direct(synth_counts(d, 0.8, 0.1, m, 2000, 500 + static_cast<std::uint64_t>(k)), m);
    samples.row(k) = est.d.transpose();
    predicted += est.covariance.topLeftCorner<4, 4>() / reps;
  }
  const Eigen::MatrixXd centered = samples.rowwise() - samples.colwise().mean();
  const Eigen::MatrixXd empirical = centered.transpose() * centered / (reps - 1);
  for (int i = 0; i < 4; ++i) EXPECT_NEAR(std::sqrt(empirical(i, i) / predicted(i, i)), 1.0, 0.2) << i;
}

TEST(Tomography, InputValidation) {
  const Eigen::MatrixXd m = reference_detection_matrix();
  CountsVector c;
  c.means = Eigen::VectorXd::Ones(4);
  EXPECT_THROW(solve_direct(c, m), std::domain_error);
  c.means = Eigen::VectorXd::Ones(5);
  EXPECT_THROW(solve_constrained(c, m, 0.0), std::domain_error);
  c.means(2) = -1;
  EXPECT_THROW(solve_constrained(c, m, 1.0), std::domain_error);
}
