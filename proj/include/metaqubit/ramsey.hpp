#pragma once
// Ramsey dephasing under shot-to-shot magnetic noise and T2* extraction.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numbers>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "metaqubit/atomic.hpp"
#include "metaqubit/dynamics.hpp"
#include "metaqubit/fitting.hpp"
#include "metaqubit/parallel.hpp"

namespace metaqubit {

struct Harmonic {
  double frequency_hz = 60.0;
  double amplitude_mg = 0.0;
};

inline std::vector<Harmonic> default_harmonics() { return {{60.0, 0.3}, {120.0, 0.15}, {180.0, 0.1}}; }

/// Field noise per shot: a static Gaussian offset plus line harmonics with a
/// random phase. The residual rate dephases every qubit as exp(-(rate t)^2).
struct NoiseModel {
  double sigma_b_mg = 0.0;
  std::vector<Harmonic> harmonics;
  double residual_rate = 0.0;  // 1/s

  void validate() const {
    if (!(sigma_b_mg >= 0)) throw std::domain_error("NoiseModel: sigma_b_mg must be >= 0");
    if (!(residual_rate >= 0)) throw std::domain_error("NoiseModel: residual_rate must be >= 0");
    for (const auto& h : harmonics)
      if (!(h.frequency_hz > 0 && h.amplitude_mg >= 0))
        throw std::domain_error("NoiseModel: harmonics need frequency > 0 and amplitude >= 0");
  }
};

enum class RamseyReadout {
  fringe,      // fixed analysis phase, P = (1 + C cos phi)/2
  quadrature,  // half the shots at analysis phase pi/2, contrast from both quadratures
};

struct RamseyScan {
  std::vector<double> delays;       // s
  Eigen::VectorXd probability;      // bright-state fraction (fringe quadrature)
  Eigen::VectorXd probability_err;  // binomial standard error
  Eigen::VectorXd contrast;         // estimate of <C cos phi>
  Eigen::VectorXd contrast_err;
  std::vector<std::uint64_t> bright; // successes per delay (fringe quadrature)
  std::uint64_t shots = 0;
  double sensitivity = 0.0;         // kHz/mG
  RamseyReadout readout = RamseyReadout::fringe;
};

/// Field integral over [0, t] in mG*s for one noise realization.
inline double field_integral(double static_mg, const std::vector<Harmonic>& h, const std::vector<double>& phase,
                             double t) {
  double acc = static_mg * t;
  for (std::size_t k = 0; k < h.size(); ++k) {
    const double w = 2.0 * std::numbers::pi * h[k].frequency_hz;
    acc += h[k].amplitude_mg / w * (std::cos(phase[k]) - std::cos(w * t + phase[k]));
  }
  return acc;
}

/// Per-shot phase 2 pi s * integral(dB dt) and biased-coin readout.
inline RamseyScan ramsey_scan(double sensitivity_khz_per_mg, const NoiseModel& noise,
                              const std::vector<double>& delays, std::uint64_t shots, std::uint64_t seed,
                              RamseyReadout readout = RamseyReadout::fringe, unsigned workers = 1) {
  noise.validate();
  if (shots < 1) throw std::domain_error("ramsey_scan: shots must be >= 1");
  if (!(sensitivity_khz_per_mg >= 0)) throw std::domain_error("ramsey_scan: sensitivity must be >= 0");
  for (std::size_t i = 0; i < delays.size(); ++i) {
    if (!(delays[i] >= 0)) throw std::domain_error("ramsey_scan: delays must be >= 0");
    if (i > 0 && delays[i] < delays[i - 1]) throw std::domain_error("ramsey_scan: delays must be ascending");
  }
  const auto nd = static_cast<Eigen::Index>(delays.size());
  RamseyScan scan;
  scan.delays = delays;
  scan.shots = shots;
  scan.sensitivity = sensitivity_khz_per_mg;
  scan.readout = readout;
  scan.probability = Eigen::VectorXd::Zero(nd);
  scan.probability_err = Eigen::VectorXd::Zero(nd);
  scan.contrast = Eigen::VectorXd::Zero(nd);
  scan.contrast_err = Eigen::VectorXd::Zero(nd);
  scan.bright.assign(delays.size(), 0);
  std::vector<std::uint64_t> bright_q(delays.size(), 0), shots_q(delays.size(), 0), shots_i(delays.size(), 0);

  const double k_rad = 2.0 * std::numbers::pi * sensitivity_khz_per_mg * 1e3;  // rad / (mG s)
  parallel_chunks(delays.size(), 1, workers, [&](std::size_t b, std::size_t e, std::size_t) {
    std::vector<double> ph(noise.harmonics.size());
    for (std::size_t d = b; d < e; ++d) {
      const double t = delays[d];
      const double envelope = std::exp(-std::pow(noise.residual_rate * t, 2));
      for (std::uint64_t s = 0; s < shots; ++s) {
        StreamRng rng(seed, d, s);
        std::normal_distribution<double> gauss(0.0, 1.0);
        const double b_static = noise.sigma_b_mg * gauss(rng);
        for (auto& p : ph) p = 2.0 * std::numbers::pi * rng.uniform();
        const double phi = k_rad * field_integral(b_static, noise.harmonics, ph, t);
        const bool quad = readout == RamseyReadout::quadrature && (s % 2 == 1);
        const double p_bright = 0.5 * (1.0 + envelope * (quad ? std::sin(phi) : std::cos(phi)));
        const bool hit = rng.uniform() < p_bright;
        if (quad) {
          ++shots_q[d];
          bright_q[d] += hit;
        } else {
          ++shots_i[d];
          scan.bright[d] += hit;
        }
      }
    }
  });

  for (Eigen::Index d = 0; d < nd; ++d) {
    const auto i = static_cast<std::size_t>(d);
    const double n = static_cast<double>(shots_i[i]);
    const double p = static_cast<double>(scan.bright[i]) / n;
    scan.probability(d) = p;
    scan.probability_err(d) = std::sqrt(p * (1.0 - p) / n);
    const double x = 2.0 * p - 1.0;
    if (readout == RamseyReadout::fringe) {
      scan.contrast(d) = x;
      scan.contrast_err(d) = 2.0 * scan.probability_err(d);
    } else {
      const double nq = static_cast<double>(shots_q[i]);
      const double pq = static_cast<double>(bright_q[i]) / nq;
      const double y = 2.0 * pq - 1.0;
      scan.contrast(d) = std::sqrt(x * x + y * y);
      scan.contrast_err(d) = 2.0 * std::sqrt(std::max(p * (1 - p) / n, pq * (1 - pq) / nq));
    }
  }
  return scan;
}

struct T2Fit {
  double t2 = 0.0;
  double t2_sigma = 0.0;
  double floor = 0.0;
  double floor_sigma = 0.0;
  double chi2 = 0.0;
  bool at_lower_bound = false;  // below the shortest positive delay; only an upper limit is known
  bool at_upper_bound = false;  // pinned at 100x the scan span
};

/// Bound on the fitted contrast floor; a floor near 1 would make T2*
/// unidentifiable on flat data.
inline constexpr double kFloorLimit = 0.5;

/// Weighted fit of c(t) = f + (1 - f) exp(-(t/T)^2) to the scan contrast.
/// Weights use the Agresti-Coull variance so that 0 or shots successes keep
/// a finite error bar; the covariance is (J^T W J)^{-1}.
inline T2Fit fit_t2star(const RamseyScan& scan) {
  const auto nd = static_cast<Eigen::Index>(scan.delays.size());
  if (nd < 6) throw FitFailure("fit_t2star: at least 6 delays are required, got " + std::to_string(nd));
  double min_step = std::numeric_limits<double>::infinity();
  for (std::size_t i = 1; i < scan.delays.size(); ++i)
    if (scan.delays[i] > scan.delays[i - 1]) min_step = std::min(min_step, scan.delays[i] - scan.delays[i - 1]);
  const double span = scan.delays.back();
  if (!(span > 0) || !std::isfinite(min_step)) throw FitFailure("fit_t2star: delays must span a positive range");

  Eigen::VectorXd sigma(nd);
  for (Eigen::Index d = 0; d < nd; ++d) {
    const double n = static_cast<double>(scan.readout == RamseyReadout::fringe ? scan.shots : scan.shots / 2);
    const double k = scan.probability(d) * n;
    const double pt = (k + 2.0) / (n + 4.0);
    const double var_p = pt * (1.0 - pt) / (n + 4.0);
    sigma(d) = 2.0 * std::sqrt(var_p) * (scan.readout == RamseyReadout::fringe ? 1.0 : std::sqrt(2.0));
  }

  const double t_lo = 0.1 * min_step, t_hi = 100.0 * span;
  const ResidualFn residual = [&](const Eigen::VectorXd& p) {
    Eigen::VectorXd r(nd);
    for (Eigen::Index d = 0; d < nd; ++d) {
      const double t = scan.delays[static_cast<std::size_t>(d)];
      const double model = p(1) + (1.0 - p(1)) * std::exp(-std::pow(t / p(0), 2));
      r(d) = (scan.contrast(d) - model) / sigma(d);
    }
    return r;
  };

  const Eigen::Vector2d lo(t_lo, -kFloorLimit), hi(t_hi, kFloorLimit), scale(span, 1.0);
  LmResult best;
  best.cost = std::numeric_limits<double>::infinity();
  for (int k = 0; k < 24; ++k) {
    const double t0 = t_lo * std::pow(t_hi / t_lo, k / 23.0);
    for (double f0 : {0.0, 0.25}) {
      const Eigen::Vector2d x0(t0, f0);
      if (residual(x0).squaredNorm() > 4.0 * best.cost && std::isfinite(best.cost)) continue;
      const LmResult r = bounded_lm(residual, x0, lo, hi, scale);
      if (r.cost < best.cost) best = r;
    }
  }
  if (!std::isfinite(best.cost)) throw FitFailure("fit_t2star: no start converged");

  T2Fit fit;
  fit.t2 = best.x(0);
  fit.floor = best.x(1);
  fit.chi2 = best.cost;
  Eigen::CompleteOrthogonalDecomposition<Eigen::MatrixXd> cod(best.jacobian.transpose() * best.jacobian);
  const Eigen::MatrixXd cov = cod.pseudoInverse();
  fit.t2_sigma = std::sqrt(std::max(0.0, cov(0, 0)));
  fit.floor_sigma = std::sqrt(std::max(0.0, cov(1, 1)));
  const double first = *std::upper_bound(scan.delays.begin(), scan.delays.end(), 0.0);
  fit.at_lower_bound = fit.t2 < first;
  fit.at_upper_bound = fit.t2 >= t_hi * (1 - 1e-6);
  return fit;
}

/// Static field RMS giving a Gaussian T2* of `target` at the given
/// sensitivity, after the harmonics and residual rate take their share.
inline double calibrate_noise(double target_t2, double sensitivity_khz_per_mg,
                              const std::vector<Harmonic>& harmonics = {}, double residual_rate = 0.0) {
  if (!(sensitivity_khz_per_mg > 0))
    throw std::domain_error("calibrate_noise: sensitivity must be > 0; a first-order insensitive qubit cannot "
                            "calibrate the field noise");
  if (!(target_t2 > 0)) throw std::domain_error("calibrate_noise: target T2* must be > 0");
  if (std::isinf(target_t2)) return 0.0;
  const double inv2 = 1.0 / (target_t2 * target_t2) - residual_rate * residual_rate;
  if (!(inv2 > 0))
    throw std::domain_error("calibrate_noise: residual dephasing alone already exceeds the target T2*");
  const double k = 2.0 * std::numbers::pi * sensitivity_khz_per_mg * 1e3;
  double var = 2.0 * inv2 / (k * k);
  for (const auto& h : harmonics) var -= 0.5 * h.amplitude_mg * h.amplitude_mg;
  if (!(var >= 0))
    throw std::domain_error("calibrate_noise: line harmonics alone dephase faster than the target T2*");
  return std::sqrt(var);
}

struct QubitSpec {
  std::string name;
  double sensitivity = 0.0;  // kHz/mG
  std::vector<double> delays;
};

/// The three qubits compared in the coherence benchmark.
inline std::vector<QubitSpec> benchmark_qubits(const AtomConstants& c = barium()) {
  const auto linspace = [](double hi, int n) {
    std::vector<double> v(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) v[static_cast<std::size_t>(i)] = hi * i / (n - 1.0);
    return v;
  };
  const SynthStates s = make_synth_states(std::numbers::pi);
  return {
      {"S doublet", qubit_sensitivity(s_state(1), s_state(-1), c), linspace(300e-6, 31)},
      {"d+3/2/d-1/2", qubit_sensitivity(d_state(3), d_state(-1), c), linspace(300e-6, 31)},
      {"D1/D2", qubit_sensitivity(s.d1, s.d2, c), linspace(1200e-6, 31)},
  };
}

/// Noise model reproducing the target T2* of the S doublet (field noise) and
/// of the insensitive synthetic qubit (residual rate).
inline NoiseModel calibrated_noise(double s_target, double synth_target, const std::vector<Harmonic>& harmonics,
                                   const AtomConstants& c = barium()) {
  NoiseModel m;
  m.harmonics = harmonics;
  m.residual_rate = std::isinf(synth_target) ? 0.0 : 1.0 / synth_target;
  m.sigma_b_mg = calibrate_noise(s_target, qubit_sensitivity(s_state(1), s_state(-1), c), harmonics,
                                 m.residual_rate);
  return m;
}

struct BenchmarkRow {
  std::string qubit;
  double sensitivity = 0.0;
  T2Fit fit;
  RamseyScan scan;
};

inline std::vector<BenchmarkRow> benchmark_suite(const NoiseModel& noise, std::uint64_t shots, std::uint64_t seed,
                                                 const std::vector<QubitSpec>& qubits = benchmark_qubits(),
                                                 RamseyReadout readout = RamseyReadout::fringe,
                                                 unsigned workers = 1) {
  std::vector<BenchmarkRow> rows;
  for (std::size_t q = 0; q < qubits.size(); ++q) {
    BenchmarkRow row;
    row.qubit = qubits[q].name;
    row.sensitivity = qubits[q].sensitivity;
    row.scan = ramsey_scan(qubits[q].sensitivity, noise, qubits[q].delays, shots, mix64(seed + 0x100 * (q + 1)),
                           readout, workers);
    row.fit = fit_t2star(row.scan);
    rows.push_back(std::move(row));
  }
  return rows;
}

}  // namespace metaqubit
