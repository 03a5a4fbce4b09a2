#pragma once
// Optical pumping of the S1/2 + P1/2 + D3/2 system under 493 nm and 650 nm
// light, with the number of emitted 493 nm photons as the observable.
//
// Excitation is treated in the weak-drive limit: P1/2 amplitudes follow the
// lower-manifold amplitudes adiabatically, so between emissions a lower
// manifold evolves under
//
//   H_eff = diag(E_l) - (i/2) sum_p G_p(t)^dagger G_p(t),
//   G_p(t)_l = g_pl exp(-i delta_q t),
//
// where g_pl carries the signed Clebsch-Gordan amplitude, the intensity of
// the polarization component q connecting l to p and a Lorentzian factor for
// that component's detuning. |G_p psi|^2 is the rate of excitation into p.
// Every excitation is followed by spontaneous decay into a definite lower
// sublevel (branching ratio times line strength), so after each jump the
// state is again a Zeeman basis state. The two colours are mutually
// incoherent and coherences are only kept within one lower manifold.

#include <algorithm>
#include <array>
#include <atomic>
#include <cmath>
#include <functional>
#include <numbers>
#include <optional>
#include <queue>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <unsupported/Eigen/MatrixFunctions>

#include "metaqubit/atomic.hpp"
#include "metaqubit/parallel.hpp"

namespace metaqubit {

enum class Color { blue_493, red_650 };

inline std::string to_string(Color c) { return c == Color::blue_493 ? "493nm" : "650nm"; }

/// Manifold a colour excites out of.
inline Manifold lower_manifold(Color c) {
  return c == Color::blue_493 ? Manifold::S_half : Manifold::D_three_half;
}

inline std::size_t pol_index(Polarization p) { return static_cast<std::size_t>(p); }

/// One laser colour with per-polarization saturation parameter and
/// detuning. The detuning is the laser offset from the zero-field line
/// centre in Hz; Zeeman shifts of the individual transitions come on top.
struct BeamConfig {
  Color color = Color::red_650;
  std::array<double, 3> intensity{};    // indexed by Polarization
  std::array<double, 3> detuning_hz{};  // indexed by Polarization

  static BeamConfig make(Color c, std::initializer_list<Polarization> pols, double saturation,
                         double detuning_hz = 0.0) {
    BeamConfig b;
    b.color = c;
    for (Polarization p : pols) {
      b.intensity[pol_index(p)] = saturation;
      b.detuning_hz[pol_index(p)] = detuning_hz;
    }
    return b;
  }
  static BeamConfig all(Color c, double saturation) {
    return make(c, {Polarization::sigma_plus, Polarization::sigma_minus, Polarization::pi}, saturation);
  }

  bool on() const {
    return std::any_of(intensity.begin(), intensity.end(), [](double s) { return s > 0; });
  }
  bool has(Polarization p) const { return intensity[pol_index(p)] > 0; }

  void validate() const {
    for (std::size_t i = 0; i < 3; ++i) {
      if (!std::isfinite(intensity[i]) || intensity[i] < 0)
        throw std::domain_error("BeamConfig: intensities must be finite and >= 0");
      if (!std::isfinite(detuning_hz[i])) throw std::domain_error("BeamConfig: detunings must be finite");
    }
  }
};

enum class PumpingMode {
  coherent,   // quantum-jump trajectories with coherent lower-manifold evolution
  classical,  // rate chain over Zeeman basis states
};

struct PumpingOptions {
  PumpingMode mode = PumpingMode::coherent;
  double dark_epsilon = 1e-6;       // relative to the model's rate scale
  std::uint64_t step_cap = 1000000; // jump events per trajectory
  double max_capped_fraction = 0.01;
  unsigned workers = 1;
  std::size_t max_grid_steps = 4000000;
};

/// Excitation data for one lower manifold under one colour.
struct ManifoldCoupling {
  Manifold manifold = Manifold::S_half;
  int dim = 0;
  Eigen::MatrixXcd amplitude;  // 2 x dim, sqrt(rate) in sqrt(1/s); rows p-1/2, p+1/2
  Eigen::MatrixXd laser_offset; // 2 x dim, rad/s, detuning of the component driving (l, p)
  Eigen::VectorXd energy;      // dim, Zeeman shifts in rad/s

  // Rotating frame making the coupling time independent, when one exists.
  bool frame_consistent = true;
  Eigen::VectorXd frame;  // theta_l, rad/s

  double classical_rate(int l) const { return amplitude.col(l).squaredNorm(); }
};

/// Assembled excitation and decay channels. Immutable after build().
class PumpModel {
 public:
  static PumpModel build(double b_gauss, const std::vector<BeamConfig>& beams,
                         const AtomConstants& constants = barium()) {
    constants.validate();
    if (!(b_gauss >= 0)) throw std::domain_error("build_model: B must be >= 0");
    if (beams.empty()) throw std::domain_error("build_model: beam set is empty");
    bool have[2] = {false, false};
    for (const auto& b : beams) {
      b.validate();
      auto& flag = have[b.color == Color::blue_493 ? 0 : 1];
      if (flag) throw std::domain_error("build_model: more than one beam of colour " + to_string(b.color));
      flag = true;
    }

    PumpModel m;
    m.constants_ = constants;
    m.b_gauss_ = b_gauss;
    m.beams_ = beams;
    if (b_gauss == 0.0)
      m.warnings_.push_back("B = 0: Zeeman sublevels are degenerate, coherent dark states are stationary");

    const BeamConfig off_blue{Color::blue_493, {}, {}};
    const BeamConfig off_red{Color::red_650, {}, {}};
    m.s_ = couple(constants, b_gauss, m.beam_or(Color::blue_493, off_blue));
    m.d_ = couple(constants, b_gauss, m.beam_or(Color::red_650, off_red));

    m.rate_scale_ = 0.0;
    for (int l = 0; l < m.s_.dim; ++l) m.rate_scale_ = std::max(m.rate_scale_, m.s_.classical_rate(l));
    for (int l = 0; l < m.d_.dim; ++l) m.rate_scale_ = std::max(m.rate_scale_, m.d_.classical_rate(l));

    // Decay of each P sublevel into the six lower sublevels.
    for (int p = 0; p < 2; ++p) {
      const ZeemanState up = ZeemanState::from_index(Manifold::P_half, p);
      for (int l = 0; l < 6; ++l) {
        const ZeemanState low = lower_level(l);
        Polarization q;
        double w = 0.0;
        if (polarization_between(low, up, q)) w = constants.branching(low.manifold()) * cg_weight(low, up, q);
        m.decay_(p, l) = w;
      }
    }
    return m;
  }

  /// Lower sublevels in global order: s-1/2, s+1/2, d-3/2, d-1/2, d+1/2, d+3/2.
  static ZeemanState lower_level(int global) {
    return global < 2 ? ZeemanState::from_index(Manifold::S_half, global)
                      : ZeemanState::from_index(Manifold::D_three_half, global - 2);
  }
  static int global_index(const ZeemanState& s) {
    if (s.manifold() == Manifold::P_half) throw std::domain_error("P1/2 is not a lower level");
    return s.manifold() == Manifold::S_half ? s.index() : 2 + s.index();
  }

  const ManifoldCoupling& coupling(Manifold m) const {
    if (m == Manifold::S_half) return s_;
    if (m == Manifold::D_three_half) return d_;
    throw std::domain_error("coupling: P1/2 has no excitation channels");
  }

  /// Incoherent excitation rate out of a lower Zeeman sublevel, 1/s.
  double excitation_rate(const ZeemanState& s) const { return coupling(s.manifold()).classical_rate(s.index()); }

  /// Excitation rate out of s driven by one polarization of its colour.
  double excitation_rate(const ZeemanState& s, Polarization pol) const {
    const auto& c = coupling(s.manifold());
    double r = 0.0;
    for (int p = 0; p < 2; ++p) {
      Polarization q;
      if (polarization_between(s, ZeemanState::from_index(Manifold::P_half, p), q) && q == pol)
        r += std::norm(c.amplitude(p, s.index()));
    }
    return r;
  }

  /// Probability that P sublevel p (0: -1/2, 1: +1/2) decays into global lower level l.
  double decay_probability(int p, int l) const { return decay_(p, l); }

  double rate_scale() const { return rate_scale_; }
  double field() const { return b_gauss_; }
  const AtomConstants& constants() const { return constants_; }
  const std::vector<BeamConfig>& beams() const { return beams_; }
  const std::vector<std::string>& warnings() const { return warnings_; }
  bool degenerate_zeeman() const { return b_gauss_ == 0.0; }

 private:
  const BeamConfig& beam_or(Color c, const BeamConfig& fallback) const {
    for (const auto& b : beams_)
      if (b.color == c) return b;
    return fallback;
  }

  static ManifoldCoupling couple(const AtomConstants& c, double b_gauss, const BeamConfig& beam) {
    ManifoldCoupling mc;
    mc.manifold = lower_manifold(beam.color);
    mc.dim = dimension(mc.manifold);
    mc.amplitude = Eigen::MatrixXcd::Zero(2, mc.dim);
    mc.laser_offset = Eigen::MatrixXd::Zero(2, mc.dim);
    mc.energy = Eigen::VectorXd::Zero(mc.dim);
    const double gamma = c.p_decay_rate();
    for (int l = 0; l < mc.dim; ++l) {
      const ZeemanState low = ZeemanState::from_index(mc.manifold, l);
      mc.energy(l) = zeeman_shift(low, b_gauss, c);
      for (int p = 0; p < 2; ++p) {
        const ZeemanState up = ZeemanState::from_index(Manifold::P_half, p);
        Polarization q;
        if (!polarization_between(low, up, q)) continue;
        const double s = beam.intensity[pol_index(q)];
        const double offset = 2.0 * std::numbers::pi * beam.detuning_hz[pol_index(q)];
        mc.laser_offset(p, l) = offset;
        if (s <= 0) continue;
        const double detuning = offset - (zeeman_shift(up, b_gauss, c) - mc.energy(l));
        const double lorentz = 1.0 / (1.0 + std::pow(2.0 * detuning / gamma, 2));
        mc.amplitude(p, l) = std::sqrt(0.5 * gamma * s * lorentz) * cg_amplitude(low, up, q);
      }
    }
    solve_frame(mc);
    return mc;
  }

  // Look for theta_l, alpha_p with laser_offset(p, l) + theta_l = alpha_p on
  // every active coupling (a spanning-tree walk of the bipartite graph).
  static void solve_frame(ManifoldCoupling& mc) {
    const int n = mc.dim;
    std::vector<std::optional<double>> theta(n), alpha(2);
    mc.frame_consistent = true;
    const double tol = 1e-9 * (1.0 + mc.laser_offset.cwiseAbs().maxCoeff());
    for (int root = 0; root < n; ++root) {
      if (theta[root]) continue;
      theta[root] = 0.0;
      std::queue<int> todo;  // lower levels >= 0, upper levels encoded as -(p+1)
      todo.push(root);
      while (!todo.empty()) {
        const int v = todo.front();
        todo.pop();
        if (v >= 0) {
          for (int p = 0; p < 2; ++p) {
            if (std::abs(mc.amplitude(p, v)) == 0.0) continue;
            const double a = mc.laser_offset(p, v) + *theta[v];
            if (!alpha[p]) {
              alpha[p] = a;
              todo.push(-(p + 1));
            } else if (std::abs(*alpha[p] - a) > tol) {
              mc.frame_consistent = false;
            }
          }
        } else {
          const int p = -v - 1;
          for (int l = 0; l < n; ++l) {
            if (std::abs(mc.amplitude(p, l)) == 0.0) continue;
            const double t = *alpha[p] - mc.laser_offset(p, l);
            if (!theta[l]) {
              theta[l] = t;
              todo.push(l);
            } else if (std::abs(*theta[l] - t) > tol) {
              mc.frame_consistent = false;
            }
          }
        }
      }
    }
    mc.frame = Eigen::VectorXd::Zero(n);
    for (int l = 0; l < n; ++l) mc.frame(l) = theta[l].value_or(0.0);
  }

  AtomConstants constants_;
  double b_gauss_ = 0.0;
  std::vector<BeamConfig> beams_;
  std::vector<std::string> warnings_;
  ManifoldCoupling s_, d_;
  Eigen::Matrix<double, 2, 6> decay_ = Eigen::Matrix<double, 2, 6>::Zero();
  double rate_scale_ = 0.0;
};

inline PumpModel build_model(double b_gauss, const std::vector<BeamConfig>& beams,
                             const AtomConstants& constants = barium()) {
  return PumpModel::build(b_gauss, beams, constants);
}

/// No-jump evolution of one lower basis state sampled on a time grid:
/// remaining norm and per-channel excitation rates.
struct NoJumpTable {
  std::vector<double> time;
  std::vector<double> norm;                    // ||psi(t)||^2, nonincreasing
  std::vector<std::array<double, 2>> rate;     // |G_p psi|^2 for p = -1/2, +1/2
  double dark_weight = 0.0;                    // norm never released by a jump
};

namespace detail {

inline double frame_spread(const ManifoldCoupling& mc) {
  double hi = 0.0;
  for (int a = 0; a < mc.dim; ++a)
    for (int b = 0; b < mc.dim; ++b) {
      double f = std::abs((mc.energy(a) - mc.frame(a)) - (mc.energy(b) - mc.frame(b)));
      if (!mc.frame_consistent) f = std::abs(mc.energy(a) - mc.energy(b));
      hi = std::max(hi, f);
    }
  if (!mc.frame_consistent) hi += 2.0 * mc.laser_offset.cwiseAbs().maxCoeff();
  return hi;
}

inline double smallest_beat(const ManifoldCoupling& mc) {
  double lo = std::numeric_limits<double>::infinity();
  auto consider = [&](double f) {
    if (f > 1e-9) lo = std::min(lo, f);
  };
  for (int a = 0; a < mc.dim; ++a)
    for (int b = 0; b < mc.dim; ++b) {
      if (mc.frame_consistent)
        consider(std::abs((mc.energy(a) - mc.frame(a)) - (mc.energy(b) - mc.frame(b))));
      else
        consider(std::abs(mc.energy(a) - mc.energy(b)));
    }
  if (!mc.frame_consistent)
    for (int i = 0; i < mc.laser_offset.size(); ++i)
      for (int j = 0; j < mc.laser_offset.size(); ++j)
        consider(std::abs(mc.laser_offset(i) - mc.laser_offset(j)));
  return lo;
}

}  // namespace detail

/// Integrates the no-jump evolution of basis state `start` of a manifold until
/// the window-averaged jump rate falls below dark_epsilon * rate_scale.
inline NoJumpTable no_jump_table(const ManifoldCoupling& mc, int start, double rate_scale,
                                 const PumpingOptions& opt) {
  using Mat = Eigen::MatrixXcd;
  using Vec = Eigen::VectorXcd;
  const int n = mc.dim;
  const cplx I(0.0, 1.0);
  NoJumpTable tab;
  if (rate_scale <= 0) {
    tab.time = {0.0};
    tab.norm = {1.0};
    tab.rate = {{0.0, 0.0}};
    tab.dark_weight = 1.0;
    return tab;
  }

  double max_rate = 0.0;
  for (int l = 0; l < n; ++l) max_rate = std::max(max_rate, mc.classical_rate(l));
  max_rate = std::max(max_rate, rate_scale * 1e-3);
  const double fastest = std::max(max_rate, detail::frame_spread(mc));
  const double dt = 0.05 / fastest;
  const double beat = detail::smallest_beat(mc);
  double window = 20.0 / max_rate;
  if (std::isfinite(beat)) window = std::max(window, 4.0 * 2.0 * std::numbers::pi / beat);
  const std::size_t window_steps = std::max<std::size_t>(8, static_cast<std::size_t>(window / dt));
  const double threshold = opt.dark_epsilon * rate_scale;

  auto coupling_at = [&](double t) {
    Mat g = mc.amplitude;
    if (!mc.frame_consistent)
      for (int p = 0; p < 2; ++p)
        for (int l = 0; l < n; ++l) g(p, l) *= std::exp(-I * mc.laser_offset(p, l) * t);
    return g;
  };
  auto h_eff_at = [&](double t) {
    const Mat g = coupling_at(t);
    Mat h = -0.5 * I * (g.adjoint() * g);
    for (int l = 0; l < n; ++l)
      h(l, l) += mc.frame_consistent ? mc.energy(l) - mc.frame(l) : mc.energy(l);
    return h;
  };

  Mat step;
  if (mc.frame_consistent) step = (-I * dt * h_eff_at(0.0)).exp();

  Vec psi = Vec::Zero(n);
  psi(start) = 1.0;
  double t = 0.0;
  double window_sum = 0.0;
  std::vector<double> history;
  history.reserve(1 << 16);
  auto record = [&] {
    const Mat g = coupling_at(t);
    const Vec a = g * psi;
    const std::array<double, 2> r{std::norm(a(0)), std::norm(a(1))};
    tab.time.push_back(t);
    tab.norm.push_back(psi.squaredNorm());
    tab.rate.push_back(r);
    history.push_back(r[0] + r[1]);
    window_sum += r[0] + r[1];
    if (history.size() > window_steps) window_sum -= history[history.size() - 1 - window_steps];
  };
  record();
  for (std::size_t k = 0;; ++k) {
    const double nrm = tab.norm.back();
    if (nrm < 1e-15) {
      tab.dark_weight = 0.0;
      break;
    }
    if (history.size() > window_steps && window_sum / static_cast<double>(window_steps) < threshold * nrm) {
      tab.dark_weight = nrm;
      break;
    }
    if (k >= opt.max_grid_steps)
      throw std::runtime_error("simulate_pumping: no-jump evolution from " +
                               PumpModel::lower_level(mc.manifold == Manifold::S_half ? start : start + 2).label() +
                               " did not settle within the integration horizon");
    if (mc.frame_consistent) {
      psi = step * psi;
    } else {
      psi = (-I * dt * h_eff_at(t + 0.5 * dt)).exp() * psi;
    }
    t += dt;
    record();
  }
  // Keep the recorded norm monotone against rounding.
  for (std::size_t k = 1; k < tab.norm.size(); ++k) tab.norm[k] = std::min(tab.norm[k], tab.norm[k - 1]);
  tab.dark_weight = std::min(tab.dark_weight, tab.norm.back());
  return tab;
}

/// Sampler for the next landing state from any lower basis state.
class JumpSampler {
 public:
  JumpSampler(const PumpModel& model, const PumpingOptions& opt) : model_(&model), opt_(opt) {
    for (int l = 0; l < 6; ++l) {
      const ZeemanState s = PumpModel::lower_level(l);
      const auto& mc = model.coupling(s.manifold());
      if (opt.mode == PumpingMode::coherent) {
        tables_[l] = no_jump_table(mc, s.index(), model.rate_scale(), opt);
      } else {
        NoJumpTable tab;
        const double r0 = std::norm(mc.amplitude(0, s.index()));
        const double r1 = std::norm(mc.amplitude(1, s.index()));
        tab.time = {0.0, 1.0};
        tab.norm = {1.0, 0.0};
        tab.rate = {{r0, r1}, {r0, r1}};
        tab.dark_weight = (r0 + r1 < opt.dark_epsilon * model.rate_scale() || model.rate_scale() <= 0) ? 1.0 : 0.0;
        tables_[l] = std::move(tab);
      }
    }
  }

  const NoJumpTable& table(int global) const { return tables_[global]; }

  /// Returns the global index of the next lower level, or -1 if the
  /// trajectory stays dark.
  template <class Rng>
  int next(int from, Rng& rng) const {
    const NoJumpTable& tab = tables_[from];
    const double r = rng.uniform();
    if (r < tab.dark_weight || tab.norm.size() < 2) return -1;
    // First grid index with norm < r.
    const auto it = std::lower_bound(tab.norm.begin(), tab.norm.end(), r, std::greater<double>());
    std::size_t k1 = static_cast<std::size_t>(it - tab.norm.begin());
    if (k1 == 0) k1 = 1;
    if (k1 >= tab.norm.size()) k1 = tab.norm.size() - 1;
    const std::size_t k0 = k1 - 1;
    const double span = tab.norm[k0] - tab.norm[k1];
    const double u = span > 0 ? std::clamp((tab.norm[k0] - r) / span, 0.0, 1.0) : 0.0;
    const double r0 = (1 - u) * tab.rate[k0][0] + u * tab.rate[k1][0];
    const double r1 = (1 - u) * tab.rate[k0][1] + u * tab.rate[k1][1];
    const double tot = r0 + r1;
    const int p = (tot <= 0 || rng.uniform() * tot < r0) ? 0 : 1;

    double x = rng.uniform();
    int land = 5;
    for (int l = 0; l < 6; ++l) {
      x -= model_->decay_probability(p, l);
      if (x < 0) {
        land = l;
        break;
      }
    }
    return land;
  }

 private:
  const PumpModel* model_;
  PumpingOptions opt_;
  std::array<NoJumpTable, 6> tables_;
};

struct PumpingResult {
  double mean = 0.0;
  double std_error = 0.0;
  std::uint64_t trials = 0;
  std::uint64_t capped = 0;
  CountAccumulator counts;
};

/// Photons of one trajectory (493 nm emissions until dark); nullopt if the
/// event cap was hit.
template <class Rng>
std::optional<std::uint64_t> pumping_trajectory(const JumpSampler& sampler, int start, Rng& rng,
                                                 std::uint64_t step_cap) {
  std::uint64_t photons = 0;
  int at = start;
  for (std::uint64_t events = 0; events < step_cap; ++events) {
    const int next = sampler.next(at, rng);
    if (next < 0) return photons;
    if (next < 2) ++photons;
    at = next;
  }
  return std::nullopt;
}

inline PumpingResult simulate_pumping(const JumpSampler& sampler, const ZeemanState& initial,
                                      std::uint64_t trials, std::uint64_t seed, std::uint64_t stream,
                                      const PumpingOptions& opt) {
  if (trials < 1) throw std::domain_error("simulate_pumping: trials must be >= 1");
  const int start = PumpModel::global_index(initial);
  constexpr std::size_t kChunk = 4096;
  const std::size_t chunks = (trials + kChunk - 1) / kChunk;
  std::vector<CountAccumulator> partial(chunks);
  std::vector<std::uint64_t> capped(chunks, 0);
  const auto cap_limit = static_cast<std::uint64_t>(opt.max_capped_fraction * static_cast<double>(trials));
  std::atomic<std::uint64_t> capped_total{0};

  parallel_chunks(trials, kChunk, opt.workers, [&](std::size_t b, std::size_t e, std::size_t c) {
    for (std::size_t i = b; i < e; ++i) {
      StreamRng rng(seed, stream, i);
      const auto n = pumping_trajectory(sampler, start, rng, opt.step_cap);
      if (n) {
        partial[c].add(*n);
      } else {
        ++capped[c];
        if (capped_total.fetch_add(1) + 1 > cap_limit)
          throw std::runtime_error("simulate_pumping: step cap of " + std::to_string(opt.step_cap) +
                                   " events exceeded on more than " +
                                   std::to_string(100.0 * opt.max_capped_fraction) +
                                   "% of trajectories starting in " + initial.label() +
                                   "; the configuration has no reachable dark state");
      }
    }
  });

  PumpingResult res;
  for (std::size_t c = 0; c < chunks; ++c) {
    res.counts.merge(partial[c]);
    res.capped += capped[c];
  }
  res.trials = trials;
  res.mean = res.counts.mean();
  res.std_error = res.counts.std_error();
  return res;
}

inline PumpingResult simulate_pumping(const PumpModel& model, const ZeemanState& initial,
                                      std::uint64_t trials, std::uint64_t seed,
                                      const PumpingOptions& opt = {}) {
  const JumpSampler sampler(model, opt);
  return simulate_pumping(sampler, initial, trials, seed, 0, opt);
}

// ---------------------------------------------------------------------------
// Detection matrices

struct DetectionMatrix {
  std::vector<std::string> rows;
  std::vector<std::string> cols;
  Eigen::MatrixXd mean;
  Eigen::MatrixXd std_error;
  std::uint64_t trials = 0;
  std::vector<std::string> warnings;
};

/// Physical settings shared by the detection-matrix experiments.
struct ScatterParams {
  double b_gauss = 2.2;
  double saturation_493 = 0.1;
  double saturation_650 = 0.1;
  // Laser offsets from line centre, Hz. With a common offset the
  // sigma and pi components sit one Zeeman splitting apart relative to
  // their own resonances.
  double detuning_493_hz = 0.0;
  double sigma_detuning_650_hz = 0.0;
  double pi_detuning_650_hz = 0.0;
  PumpingOptions options;
};

/// Two-photon mismatch (rad/s) of the Lambda systems formed by a sigma and
/// the pi component on D3/2; zero means the mixed dark state is stationary.
inline double two_photon_mismatch(Polarization sigma, double sigma_offset_hz, double pi_offset_hz, double b_gauss,
                                  const AtomConstants& c = barium()) {
  // d_m --sigma--> p <--pi-- d_{m +- 1}; dressed energies must agree.
  const double split = 2.0 * std::numbers::pi * zeeman_splitting(Manifold::D_three_half, b_gauss, c);
  const double sign = sigma == Polarization::sigma_plus ? 1.0 : -1.0;
  return 2.0 * std::numbers::pi * (sigma_offset_hz - pi_offset_hz) - sign * split;
}

inline DetectionMatrix detection_matrix_S(const ScatterParams& prm, std::uint64_t trials, std::uint64_t seed) {
  DetectionMatrix dm;
  dm.rows = {"sigma+", "sigma-"};
  dm.cols = {"s-1/2", "s+1/2"};
  dm.mean = Eigen::MatrixXd::Zero(2, 2);
  dm.std_error = Eigen::MatrixXd::Zero(2, 2);
  dm.trials = trials;
  const Polarization settings[2] = {Polarization::sigma_plus, Polarization::sigma_minus};
  for (int r = 0; r < 2; ++r) {
    const auto blue = BeamConfig::make(Color::blue_493, {settings[r]}, prm.saturation_493, prm.detuning_493_hz);
    auto red = BeamConfig::all(Color::red_650, prm.saturation_650);
    red.detuning_hz = {prm.sigma_detuning_650_hz, prm.sigma_detuning_650_hz, prm.pi_detuning_650_hz};
    const PumpModel model = build_model(prm.b_gauss, {blue, red});
    for (const auto& w : model.warnings())
      if (std::find(dm.warnings.begin(), dm.warnings.end(), w) == dm.warnings.end()) dm.warnings.push_back(w);
    const JumpSampler sampler(model, prm.options);
    for (int c = 0; c < 2; ++c) {
      const auto res = simulate_pumping(sampler, s_state(2 * c - 1), trials, seed,
                                        static_cast<std::uint64_t>(16 * r + c), prm.options);
      dm.mean(r, c) = res.mean;
      dm.std_error(r, c) = res.std_error;
    }
  }
  return dm;
}

/// The five 650 nm polarization settings used for D3/2 detection.
inline std::vector<std::vector<Polarization>> d_detection_settings() {
  using P = Polarization;
  return {{P::sigma_plus}, {P::sigma_minus}, {P::pi}, {P::sigma_plus, P::pi}, {P::sigma_minus, P::pi}};
}

inline std::string setting_label(const std::vector<Polarization>& pols) {
  std::string s;
  for (Polarization p : pols) s += (s.empty() ? "" : "&") + to_string(p);
  return s;
}

inline DetectionMatrix detection_matrix_D(const ScatterParams& prm, std::uint64_t trials, std::uint64_t seed) {
  const auto settings = d_detection_settings();
  DetectionMatrix dm;
  for (const auto& s : settings) dm.rows.push_back(setting_label(s));
  dm.cols = {"d-3/2", "d-1/2", "d+1/2", "d+3/2"};
  dm.mean = Eigen::MatrixXd::Zero(5, 4);
  dm.std_error = Eigen::MatrixXd::Zero(5, 4);
  dm.trials = trials;
  for (std::size_t r = 0; r < settings.size(); ++r) {
    BeamConfig red{Color::red_650, {}, {}};
    for (Polarization p : settings[r]) {
      red.intensity[pol_index(p)] = prm.saturation_650;
      red.detuning_hz[pol_index(p)] = p == Polarization::pi ? prm.pi_detuning_650_hz : prm.sigma_detuning_650_hz;
    }
    auto blue = BeamConfig::all(Color::blue_493, prm.saturation_493);
    blue.detuning_hz.fill(prm.detuning_493_hz);
    if (settings[r].size() == 2) {
      const double mis = two_photon_mismatch(settings[r][0], prm.sigma_detuning_650_hz, prm.pi_detuning_650_hz,
                                             prm.b_gauss);
      if (std::abs(mis) < 1e-6 * (1.0 + std::abs(2.0 * std::numbers::pi * prm.sigma_detuning_650_hz)))
        dm.warnings.push_back("row " + dm.rows[r] +
                              ": sigma and pi share a detuning from resonance; the second dark state is "
                              "stationary and the row loses rank");
    }
    const PumpModel model = build_model(prm.b_gauss, {blue, red});
    for (const auto& w : model.warnings())
      if (std::find(dm.warnings.begin(), dm.warnings.end(), w) == dm.warnings.end()) dm.warnings.push_back(w);
    const JumpSampler sampler(model, prm.options);
    for (int c = 0; c < 4; ++c) {
      const auto res = simulate_pumping(sampler, d_state(2 * c - 3), trials, seed,
                                        static_cast<std::uint64_t>(16 * r + c), prm.options);
      dm.mean(static_cast<Eigen::Index>(r), c) = res.mean;
      dm.std_error(static_cast<Eigen::Index>(r), c) = res.std_error;
    }
  }
  return dm;
}

// ---------------------------------------------------------------------------
// Dark states of D3/2 under 650 nm light

struct DarkState {
  Quartet amplitudes;
  bool stationary = true;
};

/// 2x4 map from D3/2 amplitudes to P1/2 amplitudes for unit intensity in
/// each listed polarization.
inline Eigen::Matrix<cplx, 2, 4> d_to_p_coupling(const std::vector<Polarization>& pols) {
  Eigen::Matrix<cplx, 2, 4> c = Eigen::Matrix<cplx, 2, 4>::Zero();
  for (int p = 0; p < 2; ++p)
    for (int l = 0; l < 4; ++l) {
      Polarization q;
      const ZeemanState low = ZeemanState::from_index(Manifold::D_three_half, l);
      const ZeemanState up = ZeemanState::from_index(Manifold::P_half, p);
      if (polarization_between(low, up, q) && std::find(pols.begin(), pols.end(), q) != pols.end())
        c(p, l) = cg_amplitude(low, up, q);
    }
  return c;
}

/// Dark states of the quartet for a set of 650 nm polarizations. Zeeman
/// eigenstates come first (always stationary), followed by an orthonormal
/// basis of the remaining dark superpositions. A superposition is
/// stationary when its components are degenerate in the frame that makes
/// the light time independent (B = 0, or sigma and pi on two-photon
/// resonance).
inline std::vector<DarkState> find_dark_states(const std::vector<Polarization>& pols, double b_gauss,
                                               const std::array<double, 3>& detuning_hz = {},
                                               const AtomConstants& c = barium()) {
  if (pols.empty()) throw std::domain_error("find_dark_states: polarization set is empty");
  if (!(b_gauss >= 0)) throw std::domain_error("find_dark_states: B must be >= 0");
  const auto C = d_to_p_coupling(pols);

  std::vector<DarkState> out;
  std::vector<int> coupled;
  for (int l = 0; l < 4; ++l) {
    if (C.col(l).norm() < 1e-14) {
      out.push_back({basis_quartet(2 * l - 3), true});
    } else {
      coupled.push_back(l);
    }
  }
  if (coupled.empty()) return out;

  Eigen::MatrixXcd sub(2, static_cast<Eigen::Index>(coupled.size()));
  for (std::size_t k = 0; k < coupled.size(); ++k) sub.col(static_cast<Eigen::Index>(k)) = C.col(coupled[k]);
  Eigen::JacobiSVD<Eigen::MatrixXcd> svd(sub, Eigen::ComputeFullV);
  svd.setThreshold(1e-12);
  const auto rank = svd.rank();

  BeamConfig red{Color::red_650, {}, detuning_hz};
  for (Polarization p : pols) red.intensity[pol_index(p)] = 1.0;
  const PumpModel model = build_model(b_gauss, {red}, c);
  const auto& mc = model.coupling(Manifold::D_three_half);
  const double scale = 1.0 + mc.energy.cwiseAbs().maxCoeff() + mc.laser_offset.cwiseAbs().maxCoeff();

  for (Eigen::Index k = rank; k < sub.cols(); ++k) {
    Quartet v = Quartet::Zero();
    for (std::size_t j = 0; j < coupled.size(); ++j) v(coupled[j]) = svd.matrixV()(static_cast<Eigen::Index>(j), k);
    Eigen::Index big = 0;
    v.cwiseAbs().maxCoeff(&big);
    v *= std::polar(1.0, -std::arg(v(big)));
    v.normalize();

    bool stationary = mc.frame_consistent;
    if (stationary) {
      std::optional<double> level;
      for (int l = 0; l < 4; ++l) {
        if (std::abs(v(l)) < 1e-12) continue;
        const double e = mc.energy(l) - mc.frame(l);
        if (!level) level = e;
        else if (std::abs(*level - e) > 1e-9 * scale) stationary = false;
      }
    }
    out.push_back({v, stationary});
  }
  return out;
}

}  // namespace metaqubit
