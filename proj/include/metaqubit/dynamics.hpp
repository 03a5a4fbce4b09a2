#pragma once
// Coherent Raman dynamics inside the D3/2 quartet, depolarizing decay and
// the synthetic (magnetically insensitive) qubit built from it.

#include <cmath>
#include <complex>
#include <limits>
#include <numbers>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "metaqubit/atomic.hpp"

namespace metaqubit {

using Density = Eigen::Matrix4cd;

enum class DriveKind {
  dm1,  // Delta m = +-1, proportional to J_x
  dm2,  // Delta m = +-2, two decoupled pairs
};

inline std::string to_string(DriveKind k) { return k == DriveKind::dm1 ? "dm1" : "dm2"; }

struct EffectiveDrive {
  DriveKind kind = DriveKind::dm1;
  double rabi = 1.0;       // rad/s
  double phase = 0.0;      // rad
  double detuning = 0.0;   // rad/s, two-photon

  void validate() const {
    if (!(rabi > 0) || !std::isfinite(rabi)) throw std::domain_error("EffectiveDrive: rabi must be > 0");
    if (!std::isfinite(phase) || !std::isfinite(detuning))
      throw std::domain_error("EffectiveDrive: phase and detuning must be finite");
  }
};

/// Depolarization toward I/4 at rate 1/tau; tau = inf means decay-free.
struct DecayModel {
  double tau = std::numeric_limits<double>::infinity();

  bool decay_free() const { return std::isinf(tau); }
  double rate() const { return decay_free() ? 0.0 : 1.0 / tau; }
  void validate() const {
    if (!(tau > 0)) throw std::domain_error("DecayModel: tau must be > 0 or infinite");
  }
};

/// Interaction-picture Hamiltonian in rad/s, basis (d-3/2, d-1/2, d+1/2, d+3/2).
/// Upper off-diagonal elements carry e^{+i phi}. A two-photon detuning shifts
/// the coupled levels of every pair apart by `detuning`.
inline Eigen::Matrix4cd hamiltonian(const EffectiveDrive& drive) {
  drive.validate();
  Eigen::Matrix4cd h = Eigen::Matrix4cd::Zero();
  const cplx up = std::polar(0.5 * drive.rabi, drive.phase);
  if (drive.kind == DriveKind::dm1) {
    const double c[3] = {std::sqrt(3.0 / 18.0), std::sqrt(4.0 / 18.0), std::sqrt(3.0 / 18.0)};
    for (int k = 0; k < 3; ++k) {
      h(k, k + 1) = c[k] * up;
      h(k + 1, k) = std::conj(h(k, k + 1));
    }
  } else {
    for (int k = 0; k < 2; ++k) {
      h(k, k + 2) = up;
      h(k + 2, k) = std::conj(up);
    }
  }
  const double per_m = drive.kind == DriveKind::dm1 ? drive.detuning : 0.5 * drive.detuning;
  for (int k = 0; k < 4; ++k) h(k, k) -= per_m * (k - 1.5);
  return h;
}

/// Spin-3/2 J_x.
inline Eigen::Matrix4d jx_quartet() {
  Eigen::Matrix4d j = Eigen::Matrix4d::Zero();
  const double c[3] = {std::sqrt(3.0) / 2.0, 1.0, std::sqrt(3.0) / 2.0};
  for (int k = 0; k < 3; ++k) j(k, k + 1) = j(k + 1, k) = c[k];
  return j;
}

/// exp(-i H t) for Hermitian H, via its eigendecomposition.
class Propagator {
 public:
  explicit Propagator(const Eigen::Matrix4cd& h) : eig_(h) {
    if (eig_.info() != Eigen::Success) throw std::runtime_error("Propagator: eigendecomposition failed");
  }
  Eigen::Matrix4cd operator()(double t) const {
    Eigen::Vector4cd phases;
    for (int k = 0; k < 4; ++k) phases(k) = std::exp(cplx(0.0, -eig_.eigenvalues()(k) * t));
    return eig_.eigenvectors() * phases.asDiagonal() * eig_.eigenvectors().adjoint();
  }

 private:
  Eigen::SelfAdjointEigenSolver<Eigen::Matrix4cd> eig_;
};

inline Density density_of(const Quartet& psi) { return psi * psi.adjoint(); }

inline void validate_density(const Density& rho, const char* what) {
  if ((rho - rho.adjoint()).cwiseAbs().maxCoeff() > 1e-12)
    throw std::domain_error(std::string(what) + ": density matrix is not Hermitian");
  if (std::abs(rho.trace().real() - 1.0) > 1e-9)
    throw std::domain_error(std::string(what) + ": density matrix trace differs from 1");
  Eigen::SelfAdjointEigenSolver<Density> es(rho, Eigen::EigenvaluesOnly);
  if (es.eigenvalues().minCoeff() < -1e-10)
    throw std::domain_error(std::string(what) + ": density matrix has a negative eigenvalue");
}

struct Trajectory {
  std::vector<double> times;
  Eigen::MatrixXd populations;  // times x 4
  std::vector<Density> states;
};

/// rho(t) = e^{-t/tau} U rho0 U^dagger + (1 - e^{-t/tau}) I/4, which is the
/// exact solution since the uniform mixture commutes with every U.
inline Trajectory evolve(const Density& initial, const EffectiveDrive& drive, const DecayModel& decay,
                         const std::vector<double>& times) {
  validate_density(initial, "evolve");
  decay.validate();
  for (std::size_t i = 0; i < times.size(); ++i) {
    if (!(times[i] >= 0)) throw std::domain_error("evolve: times must be >= 0");
    if (i > 0 && times[i] < times[i - 1]) throw std::domain_error("evolve: times must be ascending");
  }
  const Propagator u(hamiltonian(drive));
  const Density mixed = Density::Identity() * 0.25;
  Trajectory out;
  out.times = times;
  out.populations.resize(static_cast<Eigen::Index>(times.size()), 4);
  out.states.reserve(times.size());
  for (std::size_t i = 0; i < times.size(); ++i) {
    const Eigen::Matrix4cd ut = u(times[i]);
    const double keep = decay.decay_free() ? 1.0 : std::exp(-times[i] * decay.rate());
    Density rho = keep * (ut * initial * ut.adjoint()) + (1.0 - keep) * mixed;
    rho = 0.5 * (rho + rho.adjoint()).eval();
    out.populations.row(static_cast<Eigen::Index>(i)) = rho.diagonal().real().transpose();
    out.states.push_back(rho);
  }
  return out;
}

inline Trajectory evolve(const Quartet& initial, const EffectiveDrive& drive, const DecayModel& decay,
                         const std::vector<double>& times) {
  require_normalized(initial, "evolve");
  return evolve(density_of(initial), drive, decay, times);
}

/// Pure-state propagation without decay.
inline Quartet evolve_state(const Quartet& initial, const EffectiveDrive& drive, double t) {
  require_normalized(initial, "evolve_state");
  return Propagator(hamiltonian(drive))(t) * initial;
}

/// Rotation angle of the dm1 drive after time t.
inline double dm1_angle(double rabi, double t) { return rabi * t / std::sqrt(18.0); }

namespace detail {

/// Closed-form spin-3/2 small-d elements for m = 3/2 and 1/2, indexed by m'
/// ascending; signs are not tracked. Negative m mirrors the positive column.
inline Eigen::Vector4d wigner_column(double theta, int two_m) {
  const double c = std::cos(theta / 2), s = std::sin(theta / 2);
  const double r3 = std::sqrt(3.0);
  switch (two_m) {
    case 3: return {-s * s * s, r3 * c * s * s, -r3 * c * c * s, c * c * c};
    case 1: return {r3 * c * s * s, 0.5 * s * (3 * std::cos(theta) + 1), 0.5 * c * (3 * std::cos(theta) - 1),
                    r3 * c * c * s};
    default: break;
  }
  Eigen::Vector4d v = wigner_column(theta, -two_m);
  return v.reverse();
}

}  // namespace detail

/// |d^{3/2}_{m',m}(theta)|^2 for m' ascending.
inline Eigen::Vector4d wigner_oracle(double theta, int two_m = 3) {
  if (!(theta >= 0 && theta <= 2 * std::numbers::pi + 1e-12))
    throw std::domain_error("wigner_oracle: theta must lie in [0, 2 pi]");
  if (two_m != 3 && two_m != 1 && two_m != -1 && two_m != -3)
    throw std::domain_error("wigner_oracle: 2*m must be one of -3, -1, 1, 3");
  return detail::wigner_column(theta, two_m).array().square();
}

struct SynthStates {
  Quartet d1, d2, b1, b2;
};

inline SynthStates make_synth_states(double phi) {
  const cplx e = std::polar(1.0, phi);
  const double h = 0.5, r = std::sqrt(3.0) / 2.0;
  SynthStates s;
  s.d1 = h * basis_quartet(3) + e * r * basis_quartet(-1);
  s.d2 = h * basis_quartet(-3) + e * r * basis_quartet(1);
  s.b1 = r * basis_quartet(3) - e * h * basis_quartet(-1);
  s.b2 = r * basis_quartet(-3) - e * h * basis_quartet(1);
  return s;
}

struct PulseSchedule {
  EffectiveDrive drive;
  double duration = 0.0;
  Quartet initial;
  Quartet result;
};

/// dm2 pulse of duration (2/3) pi/Omega taking d+3/2 to D1(phi). The full
/// d+3/2 -> d-1/2 transfer takes pi/Omega.
inline PulseSchedule prepare_D1(double rabi, double phi) {
  PulseSchedule p;
  p.drive = {DriveKind::dm2, rabi, phi + 0.5 * std::numbers::pi, 0.0};
  p.drive.validate();
  p.duration = (2.0 / 3.0) * std::numbers::pi / rabi;
  p.initial = basis_quartet(3);
  p.result = evolve_state(p.initial, p.drive, p.duration);
  return p;
}

/// Same construction from d-3/2, ending in D2(phi).
inline PulseSchedule prepare_D2(double rabi, double phi) {
  PulseSchedule p;
  p.drive = {DriveKind::dm2, rabi, -phi - 0.5 * std::numbers::pi, 0.0};
  p.drive.validate();
  p.duration = (2.0 / 3.0) * std::numbers::pi / rabi;
  p.initial = basis_quartet(-3);
  p.result = evolve_state(p.initial, p.drive, p.duration);
  return p;
}

inline double fidelity(const Quartet& a, const Quartet& b) { return std::norm(a.dot(b)); }

struct SynthProjection {
  double p_d1 = 0.0;
  double p_d2 = 0.0;
  double leakage = 0.0;
  bool assumption_based = false;  // populations-only rule, valid inside span{D1, D2}
};

inline SynthProjection project_synth(const Density& rho, double phi) {
  validate_density(rho, "project_synth");
  const SynthStates s = make_synth_states(phi);
  SynthProjection p;
  p.p_d1 = s.d1.dot(rho * s.d1).real();
  p.p_d2 = s.d2.dot(rho * s.d2).real();
  p.leakage = 1.0 - p.p_d1 - p.p_d2;
  return p;
}

inline SynthProjection project_synth(const Quartet& psi, double phi) {
  require_normalized(psi, "project_synth");
  return project_synth(density_of(psi), phi);
}

/// Population-only rule: D1 lives on {d+3/2, d-1/2} and D2 on {d-3/2, d+1/2}.
inline SynthProjection project_synth(const Eigen::Vector4d& populations) {
  if ((populations.array() < -1e-12).any() || std::abs(populations.sum() - 1.0) > 1e-9)
    throw std::domain_error("project_synth: populations must be nonnegative and sum to 1");
  SynthProjection p;
  p.p_d1 = populations(3) + populations(1);
  p.p_d2 = populations(0) + populations(2);
  p.leakage = 0.0;
  p.assumption_based = true;
  return p;
}

}  // namespace metaqubit
