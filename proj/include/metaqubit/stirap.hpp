#pragma once
// Three-level Lambda transfer d+3/2 -> d-1/2 through p+1/2 with Gaussian
// 650 nm pulses. The pump (sigma-) couples d+3/2 to p+1/2, the Stokes
// (sigma+) couples d-1/2 to p+1/2. Spontaneous decay out of P1/2 is a pure
// loss here; population that would be re-fed into D3/2 is not tracked.

#include <cmath>
#include <complex>
#include <numbers>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <unsupported/Eigen/MatrixFunctions>

#include "metaqubit/atomic.hpp"

namespace metaqubit {

struct StirapParams {
  double pump_rabi = 2.0 * std::numbers::pi * 20e6;    // rad/s, peak
  double stokes_rabi = 2.0 * std::numbers::pi * 20e6;  // rad/s, peak
  double width = 1.5e-6;   // s, Gaussian exp(-((t - t0)/width)^2)
  double delay = 1.5e-6;   // s, pump centre minus Stokes centre; > 0 is counterintuitive
  double total = 10e-6;    // s, pulses centred in the window
  double detuning = 0.0;   // rad/s, one-photon, common to both legs
  std::size_t steps = 20000;

  void validate() const {
    if (!(pump_rabi >= 0 && stokes_rabi >= 0)) throw std::domain_error("StirapParams: Rabi frequencies must be >= 0");
    if (!(width > 0)) throw std::domain_error("StirapParams: width must be > 0");
    if (!(total > 0)) throw std::domain_error("StirapParams: total must be > 0");
    if (steps < 1) throw std::domain_error("StirapParams: steps must be >= 1");
  }
};

struct StirapResult {
  double fidelity = 0.0;        // final population of d-1/2
  double initial_left = 0.0;    // final population of d+3/2
  double peak_p = 0.0;          // max population of p+1/2 during the sequence
  double lost = 0.0;            // norm lost through P1/2 decay
  std::vector<std::string> warnings;
};

inline double gaussian_envelope(double t, double centre, double width) {
  const double x = (t - centre) / width;
  return std::exp(-x * x);
}

inline StirapResult stirap_prepare(const StirapParams& prm, const AtomConstants& c = barium()) {
  prm.validate();
  c.validate();
  StirapResult res;
  if (prm.delay < 0)
    res.warnings.push_back("intuitive pulse order (pump before Stokes); adiabatic dark-state transfer not expected");

  using Mat3 = Eigen::Matrix3cd;
  const cplx I(0.0, 1.0);
  const double gamma = c.p_decay_rate();
  const double mid = 0.5 * prm.total;
  const double t_stokes = mid - 0.5 * prm.delay;
  const double t_pump = mid + 0.5 * prm.delay;
  const double dt = prm.total / static_cast<double>(prm.steps);

  // Basis: 0 = d+3/2, 1 = p+1/2, 2 = d-1/2.
  Eigen::Vector3cd psi(1.0, 0.0, 0.0);
  for (std::size_t k = 0; k < prm.steps; ++k) {
    const double t = (static_cast<double>(k) + 0.5) * dt;
    const double op = prm.pump_rabi * gaussian_envelope(t, t_pump, prm.width);
    const double os = prm.stokes_rabi * gaussian_envelope(t, t_stokes, prm.width);
    Mat3 h = Mat3::Zero();
    h(0, 1) = h(1, 0) = 0.5 * op;
    h(2, 1) = h(1, 2) = 0.5 * os;
    h(1, 1) = cplx(-prm.detuning, -0.5 * gamma);
    psi = (-I * dt * h).exp() * psi;
    res.peak_p = std::max(res.peak_p, std::norm(psi(1)));
  }
  res.initial_left = std::norm(psi(0));
  res.fidelity = std::norm(psi(2));
  res.lost = 1.0 - psi.squaredNorm();
  return res;
}

}  // namespace metaqubit
