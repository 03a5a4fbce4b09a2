#pragma once
// Box-constrained Levenberg-Marquardt and the Rabi-trajectory fit.

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <numbers>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "metaqubit/dynamics.hpp"

namespace metaqubit {

class FitFailure : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct LmOptions {
  int max_iterations = 200;
  double tolerance = 1e-12;   // relative change of the cost
  double initial_lambda = 1e-3;
};

struct LmResult {
  Eigen::VectorXd x;
  double cost = 0.0;  // sum of squared residuals
  int iterations = 0;
  bool converged = false;
  Eigen::MatrixXd jacobian;
};

using ResidualFn = std::function<Eigen::VectorXd(const Eigen::VectorXd&)>;

/// Central-difference Jacobian; steps stay inside [lo, hi].
inline Eigen::MatrixXd numeric_jacobian(const ResidualFn& f, const Eigen::VectorXd& x, const Eigen::VectorXd& lo,
                                        const Eigen::VectorXd& hi, const Eigen::VectorXd& scale) {
  const Eigen::VectorXd f0 = f(x);
  Eigen::MatrixXd j(f0.size(), x.size());
  for (Eigen::Index k = 0; k < x.size(); ++k) {
    const double h = 1e-6 * std::max(std::abs(x(k)), scale(k));
    Eigen::VectorXd xp = x, xm = x;
    xp(k) = std::min(hi(k), x(k) + h);
    xm(k) = std::max(lo(k), x(k) - h);
    j.col(k) = (f(xp) - f(xm)) / (xp(k) - xm(k));
  }
  return j;
}

/// Levenberg-Marquardt with projection onto the box [lo, hi].
inline LmResult bounded_lm(const ResidualFn& f, Eigen::VectorXd x, const Eigen::VectorXd& lo,
                           const Eigen::VectorXd& hi, const Eigen::VectorXd& scale, const LmOptions& opt = {}) {
  x = x.cwiseMax(lo).cwiseMin(hi);
  LmResult r;
  Eigen::VectorXd res = f(x);
  double cost = res.squaredNorm();
  double lambda = opt.initial_lambda;
  for (r.iterations = 0; r.iterations < opt.max_iterations; ++r.iterations) {
    const Eigen::MatrixXd j = numeric_jacobian(f, x, lo, hi, scale);
    const Eigen::MatrixXd jtj = j.transpose() * j;
    const Eigen::VectorXd g = j.transpose() * res;
    bool improved = false;
    for (int attempt = 0; attempt < 30; ++attempt) {
      Eigen::MatrixXd a = jtj;
      a.diagonal() += lambda * jtj.diagonal().cwiseMax(1e-300);
      const Eigen::VectorXd step = a.ldlt().solve(-g);
      const Eigen::VectorXd trial = (x + step).cwiseMax(lo).cwiseMin(hi);
      const Eigen::VectorXd tres = f(trial);
      const double tcost = tres.squaredNorm();
      if (std::isfinite(tcost) && tcost <= cost) {
        const double rel = (cost - tcost) / std::max(cost, 1e-300);
        const double moved = (trial - x).cwiseQuotient(scale).norm();
        x = trial;
        res = tres;
        cost = tcost;
        lambda = std::max(lambda / 3.0, 1e-12);
        improved = true;
        if (rel < opt.tolerance || moved < 1e-14) r.converged = true;
        break;
      }
      lambda *= 4.0;
    }
    if (!improved || r.converged) {
      r.converged = true;
      break;
    }
  }
  r.x = x;
  r.cost = cost;
  r.jacobian = numeric_jacobian(f, x, lo, hi, scale);
  return r;
}

/// Parameter covariance s^2 (J^T J)^{-1} with s^2 = cost / (m - n).
inline Eigen::MatrixXd lm_covariance(const LmResult& r) {
  const auto m = r.jacobian.rows(), n = r.jacobian.cols();
  const double s2 = m > n ? r.cost / static_cast<double>(m - n) : 0.0;
  Eigen::CompleteOrthogonalDecomposition<Eigen::MatrixXd> cod(r.jacobian.transpose() * r.jacobian);
  return s2 * cod.pseudoInverse();
}

struct RabiData {
  std::vector<double> times;
  Eigen::MatrixXd populations;  // times x 4
  Quartet initial = basis_quartet(3);
  DriveKind kind = DriveKind::dm1;
  double phase = 0.0;
};

struct RabiFit {
  double rabi = 0.0;
  double tau = std::numeric_limits<double>::infinity();
  double rabi_sigma = 0.0;
  double tau_sigma = 0.0;
  double decay_rate = 0.0;        // 1/tau
  double decay_rate_sigma = 0.0;
  Eigen::Matrix2d covariance = Eigen::Matrix2d::Zero();  // over (rabi, 1/tau)
  double residual = 0.0;          // sum of squared residuals
  bool tau_at_bound = false;      // decay rate pinned at zero
  bool rabi_at_bound = false;
  int iterations = 0;
};

inline Eigen::MatrixXd rabi_model(const RabiData& d, double rabi, double rate) {
  const EffectiveDrive drive{d.kind, rabi, d.phase, 0.0};
  const DecayModel decay{rate > 0 ? 1.0 / rate : std::numeric_limits<double>::infinity()};
  return evolve(d.initial, drive, decay, d.times).populations;
}

/// Least-squares fit of (Omega, 1/tau) to four-population trajectories.
/// Starts are seeded from a log grid in Omega and a short grid in 1/tau.
inline RabiFit fit_rabi(const RabiData& d) {
  const auto n = static_cast<Eigen::Index>(d.times.size());
  if (n < 8) throw FitFailure("fit_rabi: at least 8 time points are required, got " + std::to_string(n));
  if (d.populations.rows() != n || d.populations.cols() != 4)
    throw FitFailure("fit_rabi: population table must be " + std::to_string(n) + " x 4");
  const double span = d.times.back() - d.times.front();
  if (!(span > 0)) throw FitFailure("fit_rabi: time points must span a positive interval");
  const Eigen::RowVector4d mean = d.populations.colwise().mean();
  if ((d.populations.rowwise() - mean).cwiseAbs().maxCoeff() < 1e-12)
    throw FitFailure("fit_rabi: trajectories are constant; no oscillation to fit (Omega -> 0)");

  const double per_cycle = d.kind == DriveKind::dm1 ? std::sqrt(18.0) : 1.0;
  const double omega_lo = 1e-3 * 2.0 * std::numbers::pi * per_cycle / span;
  const double omega_hi = 2.0 * std::numbers::pi * per_cycle * static_cast<double>(n) / span;
  const double rate_hi = 1e3 / span;

  const ResidualFn residual = [&](const Eigen::VectorXd& p) {
    const Eigen::MatrixXd m = rabi_model(d, p(0), p(1));
    const Eigen::MatrixXd diff = m - d.populations;
    return Eigen::VectorXd(Eigen::Map<const Eigen::VectorXd>(diff.data(), diff.size()));
  };

  struct Seed {
    double cost;
    Eigen::Vector2d x;
  };
  std::vector<Seed> seeds;
  const int grid = 160;
  const double rates[] = {0.0, 0.3 / span, 1.0 / span, 3.0 / span};
  for (int k = 0; k < grid; ++k) {
    const double cycles = 0.05 * std::pow(static_cast<double>(n) / 4.0 / 0.05, k / (grid - 1.0));
    const double omega = std::clamp(2.0 * std::numbers::pi * per_cycle * cycles / span, omega_lo, omega_hi);
    for (double rate : rates) {
      const Eigen::Vector2d x(omega, rate);
      seeds.push_back({residual(x).squaredNorm(), x});
    }
  }
  std::sort(seeds.begin(), seeds.end(), [](const Seed& a, const Seed& b) { return a.cost < b.cost; });

  const Eigen::Vector2d lo(omega_lo, 0.0), hi(omega_hi, rate_hi);
  const Eigen::Vector2d scale(omega_hi * 1e-3, 1.0 / span);
  LmResult best;
  best.cost = std::numeric_limits<double>::infinity();
  for (std::size_t s = 0; s < std::min<std::size_t>(4, seeds.size()); ++s) {
    const LmResult r = bounded_lm(residual, seeds[s].x, lo, hi, scale);
    if (r.cost < best.cost) best = r;
  }
  if (!std::isfinite(best.cost) || !best.converged)
    throw FitFailure("fit_rabi: no start converged; best cost " + std::to_string(best.cost));

  RabiFit fit;
  fit.rabi = best.x(0);
  fit.decay_rate = best.x(1);
  fit.residual = best.cost;
  fit.iterations = best.iterations;
  fit.covariance = lm_covariance(best);
  fit.rabi_sigma = std::sqrt(std::max(0.0, fit.covariance(0, 0)));
  fit.decay_rate_sigma = std::sqrt(std::max(0.0, fit.covariance(1, 1)));
  fit.tau_at_bound = fit.decay_rate <= 0.0;
  fit.rabi_at_bound = fit.rabi <= omega_lo * (1 + 1e-9) || fit.rabi >= omega_hi * (1 - 1e-9);
  if (fit.tau_at_bound) {
    fit.tau = std::numeric_limits<double>::infinity();
    fit.tau_sigma = std::numeric_limits<double>::infinity();
  } else {
    fit.tau = 1.0 / fit.decay_rate;
    fit.tau_sigma = fit.decay_rate_sigma / (fit.decay_rate * fit.decay_rate);
  }
  return fit;
}

}  // namespace metaqubit
