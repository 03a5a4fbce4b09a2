#pragma once
// Independent reference computations. None of these call into the solvers
// they are used to check.

#include <cmath>
#include <limits>
#include <vector>

#include <Eigen/Dense>

#include "metaqubit/atomic.hpp"
#include "metaqubit/tomography.hpp"

namespace oracle {

using metaqubit::Polarization;

/// Expected 493 nm photons from each lower level for an incoherent rate chain
/// with equal intensity in every listed polarization and equal detunings.
/// Index order: s-1/2, s+1/2, d-3/2, d-1/2, d+1/2, d+3/2. Absorbing (dark)
/// levels give 0.
inline Eigen::VectorXd chain_expected_photons(const std::vector<Polarization>& blue,
                                              const std::vector<Polarization>& red, double branching_s = 0.75) {
  using namespace metaqubit;
  auto level = [](int g) { return g < 2 ? s_state(2 * g - 1) : d_state(2 * (g - 2) - 3); };
  auto weight = [&](int g, int p) {
    const auto& pols = g < 2 ? blue : red;
    double w = 0;
    for (Polarization q : pols) w += cg_weight(level(g), p_state(2 * p - 1), q);
    return w;
  };
  auto decay = [&](int p, int g) {
    double w = 0;
    for (Polarization q : kAllPolarizations) w += cg_weight(level(g), p_state(2 * p - 1), q);
    return (g < 2 ? branching_s : 1 - branching_s) * w;
  };
  // One step of the embedded chain: excite, then decay.
  Eigen::MatrixXd step = Eigen::MatrixXd::Zero(6, 6);
  Eigen::VectorXd photon = Eigen::VectorXd::Zero(6);
  std::vector<bool> dark(6);
  for (int g = 0; g < 6; ++g) {
    const double tot = weight(g, 0) + weight(g, 1);
    dark[static_cast<std::size_t>(g)] = tot <= 0;
    if (tot <= 0) continue;
    for (int p = 0; p < 2; ++p) {
      const double pe = weight(g, p) / tot;
      for (int h = 0; h < 6; ++h) {
        step(g, h) += pe * decay(p, h);
        if (h < 2) photon(g) += pe * decay(p, h);
      }
    }
  }
  // N = photon + step * N on bright levels, N = 0 on dark ones.
  Eigen::MatrixXd a = Eigen::MatrixXd::Identity(6, 6);
  Eigen::VectorXd b = Eigen::VectorXd::Zero(6);
  for (int g = 0; g < 6; ++g) {
    if (dark[static_cast<std::size_t>(g)]) continue;
    a.row(g) -= step.row(g);
    b(g) = photon(g);
  }
  return a.fullPivLu().solve(b);
}

inline double factorial(int n) { return std::tgamma(n + 1.0); }

/// Wigner small-d element d^j_{m',m}(beta) from the general sum formula,
/// all angular momenta doubled.
inline double wigner_small_d(int tj, int tmp, int tm, double beta) {
  const int jpm = (tj + tmp) / 2, jmm = (tj - tmp) / 2, jp = (tj + tm) / 2, jm = (tj - tm) / 2;
  const double pre = std::sqrt(factorial(jpm) * factorial(jmm) * factorial(jp) * factorial(jm));
  const double c = std::cos(beta / 2), s = std::sin(beta / 2);
  double sum = 0;
  for (int k = 0; k <= tj; ++k) {
    const int a = jp - k, b = jmm - k, d = k + (tmp - tm) / 2;
    if (a < 0 || b < 0 || d < 0) continue;
    const double term = std::pow(c, tj - 2 * k + (tm - tmp) / 2) * std::pow(s, 2 * k + (tmp - tm) / 2) /
                        (factorial(a) * factorial(k) * factorial(b) * factorial(d));
    sum += ((k + (tmp - tm) / 2) % 2 == 0 ? 1.0 : -1.0) * term;
  }
  return pre * sum;
}

struct GridResult {
  Eigen::Vector4d d;
  double background = 0;
  double objective = std::numeric_limits<double>::infinity();
};

/// Exhaustive search over the simplex grid of step h with C_b >= 0
/// minimized exactly at each grid point. Weighted objective
/// sum_e w_e (n_e - E (M d)_e - k C_b)^2 where k = E (scaled) or 1 (additive).
inline GridResult grid_search(const Eigen::VectorXd& n, const Eigen::MatrixXd& m, double efficiency,
                              const Eigen::VectorXd& w, bool scaled_background, double h = 1e-3) {
  const int steps = static_cast<int>(std::lround(1.0 / h));
  const Eigen::MatrixXd a = efficiency * m;
  const double k = scaled_background ? efficiency : 1.0;
  const double sw = w.sum() * k * k;
  const Eigen::Index rows = n.size();
  GridResult best;
  Eigen::VectorXd base(rows), dir(rows);
  for (int i0 = 0; i0 <= steps; ++i0)
    for (int i1 = 0; i0 + i1 <= steps; ++i1) {
      const double d0 = i0 * h, d1 = i1 * h;
      // Along this line d2 = j h, d3 = 1 - d0 - d1 - d2: residual = base - j*dir.
      const double rest = 1.0 - d0 - d1;
      base = n - a.col(0) * d0 - a.col(1) * d1 - a.col(3) * rest;
      dir = (a.col(2) - a.col(3)) * h;
      // Quadratic pieces in j for c free and c = 0.
      const double wbb = (w.array() * base.array() * base.array()).sum();
      const double wbd = (w.array() * base.array() * dir.array()).sum();
      const double wdd = (w.array() * dir.array() * dir.array()).sum();
      const double sb = k * (w.array() * base.array()).sum();
      const double sd = k * (w.array() * dir.array()).sum();
      for (int j = 0; i0 + i1 + j <= steps; ++j) {
        const double jj = j;
        const double f0 = wbb - 2 * jj * wbd + jj * jj * wdd;  // c = 0
        const double cs = (sb - jj * sd) / sw;                 // unconstrained optimum in c
        const double f = cs > 0 ? f0 - cs * cs * sw : f0;
        if (f < best.objective) {
          best.objective = f;
          best.d = {d0, d1, jj * h, rest - jj * h};
          best.background = cs > 0 ? cs : 0.0;
        }
      }
    }
  return best;
}

/// Upper bound on f(nearest grid point) - f(x*) for a minimizer x* of the
/// quadratic with gradient g (w.r.t. d) and Hessian H (4x4, w.r.t. d).
inline double grid_objective_bound(const Eigen::Vector4d& grad, const Eigen::Matrix4d& hess, double h) {
  const double lmax = Eigen::SelfAdjointEigenSolver<Eigen::Matrix4d>(hess).eigenvalues().cwiseAbs().maxCoeff();
  return grad.lpNorm<1>() * 3 * h + 0.5 * lmax * 12 * h * h;
}

}  // namespace oracle
