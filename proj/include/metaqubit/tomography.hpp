#pragma once
// Population reconstruction from polarization-resolved mean photon counts.

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "metaqubit/parallel.hpp"
#include "metaqubit/scatter.hpp"

namespace metaqubit {

/// Mean 493 nm counts per detection setting.
struct CountsVector {
  std::vector<std::string> settings;
  Eigen::VectorXd means;
  std::uint64_t trials = 0;
  std::vector<std::vector<std::uint64_t>> raw;  // optional per-trial counts

  void validate(Eigen::Index expected_rows) const {
    if (means.size() != expected_rows)
      throw std::domain_error("CountsVector: " + std::to_string(means.size()) + " settings, detection matrix has " +
                              std::to_string(expected_rows));
    for (Eigen::Index i = 0; i < means.size(); ++i)
      if (!(means(i) >= 0)) throw std::domain_error("CountsVector: mean counts must be >= 0");
  }
};

/// How the background enters the count model.
enum class BackgroundModel {
  efficiency_scaled,  // n = E_d (M d + C_b)
  additive,           // n = E_d M d + C_b
};

struct PopulationEstimate {
  Eigen::Vector4d d = Eigen::Vector4d::Zero();
  double background = 0.0;
  double efficiency = 1.0;
  // direct: 6x6 over (d0..d3, C_b, E_d); constrained: 4x4 over d.
  Eigen::MatrixXd covariance;
  double background_sigma = 0.0;
  std::string method;
  bool out_of_bounds = false;
  std::vector<std::string> active_constraints;
  double objective = 0.0;
};

class RankError : public std::runtime_error {
 public:
  RankError(const std::string& what, std::vector<std::string> rows)
      : std::runtime_error(what), deficient_rows(std::move(rows)) {}
  std::vector<std::string> deficient_rows;
};

struct SPopulations {
  double s0 = 0.0;
  double s1 = 0.0;
};

/// Two-state S1/2 estimator: s0 = n-/(n+ + n-), s1 = n+/(n+ + n-).
/// s1 is the population scattering under sigma+ light (|s-1/2>), s0 the
/// population scattering under sigma- light (|s+1/2>).
inline SPopulations solve_S(double n_plus, double n_minus) {
  if (!(n_plus >= 0 && n_minus >= 0)) throw std::domain_error("solve_S: counts must be >= 0");
  const double total = n_plus + n_minus;
  if (!(total > 0)) throw std::domain_error("solve_S: both counts are zero, the state is undefined");
  return {n_minus / total, n_plus / total};
}

inline Eigen::VectorXd expected_counts(const Eigen::Vector4d& d, double efficiency, double background,
                                       const Eigen::MatrixXd& m, BackgroundModel bg = BackgroundModel::efficiency_scaled) {
  const Eigen::VectorXd ones = Eigen::VectorXd::Ones(m.rows());
  return bg == BackgroundModel::efficiency_scaled ? Eigen::VectorXd(efficiency * (m * d + background * ones))
                                                  : Eigen::VectorXd(efficiency * (m * d) + background * ones);
}

inline void require_simplex(const Eigen::Vector4d& d, const char* what) {
  if ((d.array() < -1e-12).any() || std::abs(d.sum() - 1.0) > 1e-9)
    throw std::domain_error(std::string(what) + ": populations must lie on the simplex");
}

/// Poisson photon counts drawn per trial and setting; returns the empirical means.
inline CountsVector synth_counts(const Eigen::Vector4d& d, double efficiency, double background,
                                 const Eigen::MatrixXd& m, std::uint64_t trials, std::uint64_t seed,
                                 BackgroundModel bg = BackgroundModel::efficiency_scaled, bool keep_raw = false,
                                 const std::vector<std::string>& settings = {}) {
  require_simplex(d, "synth_counts");
  if (!(efficiency > 0 && efficiency <= 1)) throw std::domain_error("synth_counts: efficiency must lie in (0, 1]");
  if (!(background >= 0)) throw std::domain_error("synth_counts: background must be >= 0");
  if (trials < 1) throw std::domain_error("synth_counts: trials must be >= 1");
  const Eigen::VectorXd lambda = expected_counts(d, efficiency, background, m, bg);

  CountsVector out;
  out.settings = settings;
  out.trials = trials;
  out.means = Eigen::VectorXd::Zero(m.rows());
  if (keep_raw) out.raw.assign(static_cast<std::size_t>(m.rows()), {});
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    std::uint64_t sum = 0;
    if (lambda(r) > 0) {
      std::poisson_distribution<std::uint64_t> pois(lambda(r));
      for (std::uint64_t t = 0; t < trials; ++t) {
        StreamRng rng(seed, 0x70000 + static_cast<std::uint64_t>(r), t);
        const auto k = pois(rng);
        sum += k;
        if (keep_raw) out.raw[static_cast<std::size_t>(r)].push_back(k);
      }
    } else if (keep_raw) {
      out.raw[static_cast<std::size_t>(r)].assign(trials, 0);
    }
    out.means(r) = static_cast<double>(sum) / static_cast<double>(trials);
  }
  return out;
}

inline CountsVector synth_counts(const Eigen::Vector4d& d, double efficiency, double background,
                                 const DetectionMatrix& m, std::uint64_t trials, std::uint64_t seed,
                                 BackgroundModel bg = BackgroundModel::efficiency_scaled, bool keep_raw = false) {
  return synth_counts(d, efficiency, background, m.mean, trials, seed, bg, keep_raw, m.rows);
}

namespace detail {

inline std::string row_name(const std::vector<std::string>& names, Eigen::Index i) {
  if (i < static_cast<Eigen::Index>(names.size())) return names[static_cast<std::size_t>(i)];
  return i < 5 ? "row " + std::to_string(i) : "unitarity";
}

inline Eigen::VectorXd count_variance(const CountsVector& c) {
  const double n = static_cast<double>(std::max<std::uint64_t>(c.trials, 1));
  return c.means / n;
}

}  // namespace detail

/// Six equations (five settings plus unitarity) in six unknowns
/// (x_i = E_d d_i, b, E_d); no bounds imposed.
inline PopulationEstimate solve_direct(const CountsVector& counts, const Eigen::MatrixXd& m,
                                       BackgroundModel bg = BackgroundModel::efficiency_scaled,
                                       const std::vector<std::string>& row_names = {}) {
  if (m.rows() != 5 || m.cols() != 4) throw std::domain_error("solve_direct: detection matrix must be 5x4");
  counts.validate(5);
  Eigen::Matrix<double, 6, 6> a = Eigen::Matrix<double, 6, 6>::Zero();
  a.topLeftCorner<5, 4>() = m;
  a.block<5, 1>(0, 4).setOnes();
  a.block<1, 4>(5, 0).setOnes();
  a(5, 5) = -1.0;
  Eigen::Matrix<double, 6, 1> rhs = Eigen::Matrix<double, 6, 1>::Zero();
  rhs.head<5>() = counts.means;

  Eigen::FullPivLU<Eigen::Matrix<double, 6, 6>> lu(a);
  lu.setThreshold(1e-10);
  if (lu.rank() < 6) {
    std::vector<std::string> deficient;
    std::string names;
    for (Eigen::Index r = 0; r < 6; ++r) {
      Eigen::Matrix<double, 5, 6> without;
      for (Eigen::Index i = 0, k = 0; i < 6; ++i)
        if (i != r) without.row(k++) = a.row(i);
      Eigen::FullPivLU<Eigen::Matrix<double, 5, 6>> sub(without);
      sub.setThreshold(1e-10);
      if (sub.rank() == lu.rank()) {
        deficient.push_back(detail::row_name(row_names, r));
        names += (names.empty() ? "" : ", ") + deficient.back();
      }
    }
    throw RankError("solve_direct: linear system has rank " + std::to_string(lu.rank()) +
                        " < 6; linearly dependent rows: " + names,
                    deficient);
  }
  const Eigen::Matrix<double, 6, 1> z = lu.solve(rhs);
  const double e = z(5);
  if (!(std::abs(e) > 0)) throw RankError("solve_direct: recovered efficiency is zero", {});

  PopulationEstimate est;
  est.method = "direct";
  est.efficiency = e;
  est.d = z.head<4>() / e;
  est.background = bg == BackgroundModel::efficiency_scaled ? z(4) / e : z(4);
  est.out_of_bounds = (est.d.array() < 0).any() || (est.d.array() > 1).any();

  // Poisson errors of the means propagated through the solve and the
  // change of variables (x, b, E) -> (d, C_b, E).
  Eigen::Matrix<double, 6, 6> sn = Eigen::Matrix<double, 6, 6>::Zero();
  sn.diagonal().head<5>() = detail::count_variance(counts);
  const Eigen::Matrix<double, 6, 6> ainv = lu.inverse();
  const Eigen::Matrix<double, 6, 6> cov_z = ainv * sn * ainv.transpose();
  Eigen::Matrix<double, 6, 6> jac = Eigen::Matrix<double, 6, 6>::Zero();
  for (int i = 0; i < 4; ++i) {
    jac(i, i) = 1.0 / e;
    jac(i, 5) = -z(i) / (e * e);
  }
  if (bg == BackgroundModel::efficiency_scaled) {
    jac(4, 4) = 1.0 / e;
    jac(4, 5) = -z(4) / (e * e);
  } else {
    jac(4, 4) = 1.0;
  }
  jac(5, 5) = 1.0;
  est.covariance = jac * cov_z * jac.transpose();
  est.background_sigma = std::sqrt(std::max(0.0, est.covariance(4, 4)));
  const Eigen::VectorXd r = counts.means - expected_counts(est.d, e, est.background, m, bg);
  est.objective = r.squaredNorm();
  return est;
}

inline PopulationEstimate solve_direct(const CountsVector& counts, const DetectionMatrix& m,
                                       BackgroundModel bg = BackgroundModel::efficiency_scaled) {
  return solve_direct(counts, m.mean, bg, m.rows);
}

enum class ResidualWeighting { poisson, uniform };

/// Quadratic objective sum_e w_e (n_e - (A theta)_e)^2 over theta = (d0..d3, C_b).
struct CountsObjective {
  Eigen::MatrixXd design;   // rows x 5
  Eigen::VectorXd target;   // rows
  Eigen::VectorXd weight;   // rows

  double operator()(const Eigen::Matrix<double, 5, 1>& theta) const {
    const Eigen::VectorXd r = target - design * theta;
    return (weight.array() * r.array().square()).sum();
  }
  Eigen::Matrix<double, 5, 5> hessian() const {
    return design.transpose() * weight.asDiagonal() * design;  // half of d2f
  }
  Eigen::Matrix<double, 5, 1> gradient(const Eigen::Matrix<double, 5, 1>& theta) const {
    const Eigen::VectorXd r = target - design * theta;
    return -2.0 * design.transpose() * (weight.asDiagonal() * r);
  }
};

inline CountsObjective make_objective(const CountsVector& counts, const Eigen::MatrixXd& m, double efficiency,
                                      BackgroundModel bg, ResidualWeighting weighting) {
  CountsObjective f;
  f.design = Eigen::MatrixXd::Zero(m.rows(), 5);
  f.design.leftCols(4) = efficiency * m;
  f.design.col(4).setConstant(bg == BackgroundModel::efficiency_scaled ? efficiency : 1.0);
  f.target = counts.means;
  f.weight = Eigen::VectorXd::Ones(m.rows());
  if (weighting == ResidualWeighting::poisson) {
    const double n = static_cast<double>(std::max<std::uint64_t>(counts.trials, 1));
    for (Eigen::Index i = 0; i < m.rows(); ++i) f.weight(i) = n / std::max(counts.means(i), 1.0 / n);
  }
  return f;
}

/// Least squares over {d on the simplex, C_b >= 0} with the efficiency held
/// fixed. Solved exactly by enumerating active sets of the five bounds.
inline PopulationEstimate solve_constrained(const CountsVector& counts, const Eigen::MatrixXd& m, double efficiency,
                                            BackgroundModel bg = BackgroundModel::efficiency_scaled,
                                            ResidualWeighting weighting = ResidualWeighting::poisson) {
  if (m.cols() != 4) throw std::domain_error("solve_constrained: detection matrix must have 4 columns");
  if (!(efficiency > 0 && efficiency <= 1))
    throw std::domain_error("solve_constrained: efficiency must lie in (0, 1]");
  counts.validate(m.rows());
  const CountsObjective f = make_objective(counts, m, efficiency, bg, weighting);
  const Eigen::Matrix<double, 5, 5> h = f.hessian();
  const Eigen::Matrix<double, 5, 1> g = f.design.transpose() * (f.weight.asDiagonal() * f.target);

  using Vec5 = Eigen::Matrix<double, 5, 1>;
  Vec5 best = Vec5::Zero();
  double best_f = std::numeric_limits<double>::infinity();
  unsigned best_mask = 0;
  for (unsigned mask = 0; mask < 32; ++mask) {  // bit i set: variable i fixed at zero
    std::vector<int> free;
    for (int i = 0; i < 5; ++i)
      if (!(mask & (1u << i))) free.push_back(i);
    const bool any_d = std::any_of(free.begin(), free.end(), [](int i) { return i < 4; });
    if (!any_d) continue;
    const auto k = static_cast<Eigen::Index>(free.size());
    Eigen::MatrixXd kkt = Eigen::MatrixXd::Zero(k + 1, k + 1);
    Eigen::VectorXd rhs = Eigen::VectorXd::Zero(k + 1);
    for (Eigen::Index a = 0; a < k; ++a) {
      for (Eigen::Index b = 0; b < k; ++b) kkt(a, b) = h(free[a], free[b]);
      rhs(a) = g(free[a]);
      if (free[a] < 4) kkt(a, k) = kkt(k, a) = 1.0;
    }
    rhs(k) = 1.0;
    Eigen::FullPivLU<Eigen::MatrixXd> lu(kkt);
    if (!lu.isInvertible()) continue;
    const Eigen::VectorXd sol = lu.solve(rhs);
    Vec5 theta = Vec5::Zero();
    bool feasible = true;
    for (Eigen::Index a = 0; a < k; ++a) {
      theta(free[a]) = sol(a);
      if (sol(a) < -1e-12) feasible = false;
    }
    if (!feasible) continue;
    const double val = f(theta);
    if (val < best_f) {
      best_f = val;
      best = theta;
      best_mask = mask;
    }
  }
  if (!std::isfinite(best_f)) throw std::runtime_error("solve_constrained: no feasible stationary point found");

  best = best.cwiseMax(0.0);
  best.head<4>() /= best.head<4>().sum();

  PopulationEstimate est;
  est.method = "constrained";
  est.d = best.head<4>();
  est.background = best(4);
  est.efficiency = efficiency;
  est.objective = f(best);
  const char* names[5] = {"d0>=0", "d1>=0", "d2>=0", "d3>=0", "C_b>=0"};
  std::vector<int> active;
  for (int i = 0; i < 5; ++i)
    if (best_mask & (1u << i)) {
      active.push_back(i);
      est.active_constraints.push_back(names[i]);
    }

  // Covariance on the tangent space of the active constraints.
  Eigen::MatrixXd cons = Eigen::MatrixXd::Zero(1 + static_cast<Eigen::Index>(active.size()), 5);
  cons.row(0) << 1, 1, 1, 1, 0;
  for (std::size_t j = 0; j < active.size(); ++j) cons(static_cast<Eigen::Index>(j) + 1, active[j]) = 1.0;
  Eigen::FullPivLU<Eigen::MatrixXd> clu(cons);
  const Eigen::MatrixXd z = clu.kernel();
  Eigen::Matrix<double, 5, 5> cov = Eigen::Matrix<double, 5, 5>::Zero();
  if (clu.rank() < 5 && z.cols() > 0 && z.norm() > 0) {
    const Eigen::MatrixXd reduced = z.transpose() * h * z;
    cov = z * reduced.inverse() * z.transpose();
  }
  est.covariance = cov.topLeftCorner<4, 4>();
  est.background_sigma = std::sqrt(std::max(0.0, cov(4, 4)));
  return est;
}

inline PopulationEstimate solve_constrained(const CountsVector& counts, const DetectionMatrix& m, double efficiency,
                                            BackgroundModel bg = BackgroundModel::efficiency_scaled,
                                            ResidualWeighting weighting = ResidualWeighting::poisson) {
  return solve_constrained(counts, m.mean, efficiency, bg, weighting);
}

/// Reference 5x4 detection matrix for D3/2 population analysis.
inline Eigen::MatrixXd reference_detection_matrix() {
  Eigen::MatrixXd m(5, 4);
  m << 6.6, 5.4, 0, 0,
       0, 0, 5.4, 6.6,
       0, 6, 6, 0,
       13.3, 12.6, 11.4, 0,
       0, 11.4, 12.6, 13.3;
  return m;
}

}  // namespace metaqubit
