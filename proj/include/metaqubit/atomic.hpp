#pragma once
// Level structure and angular-momentum algebra of a nuclear-spin-zero
// alkaline-earth ion with S1/2, P1/2 and D3/2 manifolds.

#include <array>
#include <cmath>
#include <complex>
#include <cstdint>
#include <numbers>
#include <stdexcept>
#include <string>

#include <Eigen/Dense>

namespace metaqubit {

using cplx = std::complex<double>;
using Quartet = Eigen::Matrix<cplx, 4, 1>;

enum class Manifold { S_half, P_half, D_three_half };

enum class Polarization { sigma_plus, sigma_minus, pi };

inline constexpr std::array<Polarization, 3> kAllPolarizations{
    Polarization::sigma_plus, Polarization::sigma_minus, Polarization::pi};

/// Twice the angular momentum J of a manifold.
constexpr int two_j(Manifold m) { return m == Manifold::D_three_half ? 3 : 1; }

constexpr int dimension(Manifold m) { return two_j(m) + 1; }

/// Change of 2*m_J (upper minus lower) driven by a polarization.
constexpr int two_delta_m(Polarization p) {
  switch (p) {
    case Polarization::sigma_plus: return 2;
    case Polarization::sigma_minus: return -2;
    case Polarization::pi: return 0;
  }
  return 0;
}

inline std::string to_string(Manifold m) {
  switch (m) {
    case Manifold::S_half: return "S1/2";
    case Manifold::P_half: return "P1/2";
    case Manifold::D_three_half: return "D3/2";
  }
  return "?";
}

inline std::string to_string(Polarization p) {
  switch (p) {
    case Polarization::sigma_plus: return "sigma+";
    case Polarization::sigma_minus: return "sigma-";
    case Polarization::pi: return "pi";
  }
  return "?";
}

/// One magnetic sublevel. m_J is stored doubled so half-integers stay exact.
class ZeemanState {
 public:
  ZeemanState(Manifold manifold, int two_mj) : manifold_(manifold), two_mj_(two_mj) {
    const int tj = two_j(manifold);
    if (two_mj > tj || two_mj < -tj || ((two_mj - tj) % 2) != 0)
      throw std::domain_error("ZeemanState: 2*m_J=" + std::to_string(two_mj) + " not allowed in " +
                              to_string(manifold));
  }

  constexpr Manifold manifold() const { return manifold_; }
  constexpr int two_mj() const { return two_mj_; }
  constexpr double mj() const { return 0.5 * two_mj_; }

  /// Position in the manifold basis ordered by ascending m_J.
  constexpr int index() const { return (two_mj_ + two_j(manifold_)) / 2; }

  static ZeemanState from_index(Manifold m, int idx) {
    return ZeemanState(m, 2 * idx - two_j(m));
  }

  friend constexpr bool operator==(const ZeemanState&, const ZeemanState&) = default;

  std::string label() const {
    const char c = manifold_ == Manifold::S_half ? 's' : manifold_ == Manifold::P_half ? 'p' : 'd';
    return std::string(1, c) + (two_mj_ > 0 ? "+" : "-") + std::to_string(std::abs(two_mj_)) + "/2";
  }

 private:
  Manifold manifold_;
  int two_mj_;
};

inline ZeemanState s_state(int two_mj) { return {Manifold::S_half, two_mj}; }
inline ZeemanState p_state(int two_mj) { return {Manifold::P_half, two_mj}; }
inline ZeemanState d_state(int two_mj) { return {Manifold::D_three_half, two_mj}; }

/// Atomic constants of 138Ba+. Frequencies in Hz, times in s.
struct AtomConstants {
  double mu_b_hz_per_gauss = 1.4e6;
  double g_s = 2.0;
  double g_p = 2.0 / 3.0;
  double g_d = 4.0 / 5.0;
  double p_lifetime = 7.86e-9;
  double d_lifetime = 80.0;
  double branching_s = 0.75;  // P1/2 -> S1/2 fraction (3:1 against D3/2)

  double branching_d() const { return 1.0 - branching_s; }
  double p_decay_rate() const { return 1.0 / p_lifetime; }

  double g_factor(Manifold m) const {
    switch (m) {
      case Manifold::S_half: return g_s;
      case Manifold::P_half: return g_p;
      case Manifold::D_three_half: return g_d;
    }
    return 0.0;
  }

  double branching(Manifold lower) const {
    if (lower == Manifold::S_half) return branching_s;
    if (lower == Manifold::D_three_half) return branching_d();
    throw std::domain_error("branching: P1/2 does not decay into itself");
  }

  void validate() const {
    if (!(mu_b_hz_per_gauss > 0 && g_s > 0 && g_p > 0 && g_d > 0 && p_lifetime > 0 && d_lifetime > 0))
      throw std::domain_error("AtomConstants: all entries must be strictly positive");
    if (!(branching_s > 0 && branching_s < 1))
      throw std::domain_error("AtomConstants: branching fraction must lie in (0, 1)");
  }
};

inline const AtomConstants& barium() {
  static const AtomConstants c{};
  return c;
}

/// Splitting between adjacent m_J levels, g * mu_B * B, in Hz.
inline double zeeman_splitting(Manifold m, double b_gauss, const AtomConstants& c = barium()) {
  if (!(b_gauss >= 0)) throw std::domain_error("zeeman_splitting: B must be >= 0");
  return c.g_factor(m) * c.mu_b_hz_per_gauss * b_gauss;
}

/// Linear Zeeman shift of a sublevel in rad/s.
inline double zeeman_shift(const ZeemanState& s, double b_gauss, const AtomConstants& c = barium()) {
  return 2.0 * std::numbers::pi * c.g_factor(s.manifold()) * c.mu_b_hz_per_gauss * s.mj() * b_gauss;
}

namespace detail {

inline double factorial(int n) {
  if (n < 0) throw std::logic_error("factorial of negative argument");
  return std::tgamma(n + 1.0);
}

}  // namespace detail

/// Clebsch-Gordan coefficient <j1 m1; j2 m2 | J M> via the Racah formula.
/// All arguments are doubled; Condon-Shortley phase convention.
inline double clebsch_gordan(int tj1, int tm1, int tj2, int tm2, int tJ, int tM) {
  using detail::factorial;
  if (tm1 + tm2 != tM) return 0.0;
  if (std::abs(tm1) > tj1 || std::abs(tm2) > tj2 || std::abs(tM) > tJ) return 0.0;
  if (tJ < std::abs(tj1 - tj2) || tJ > tj1 + tj2) return 0.0;
  if ((tj1 + tj2 + tJ) % 2 != 0) return 0.0;

  const int a = (tJ + tj1 - tj2) / 2, b = (tJ - tj1 + tj2) / 2, cc = (tj1 + tj2 - tJ) / 2;
  const double pre = std::sqrt((tJ + 1.0) * factorial(a) * factorial(b) * factorial(cc) /
                               factorial((tj1 + tj2 + tJ) / 2 + 1));
  const double norm = std::sqrt(factorial((tJ + tM) / 2) * factorial((tJ - tM) / 2) *
                                factorial((tj1 - tm1) / 2) * factorial((tj1 + tm1) / 2) *
                                factorial((tj2 - tm2) / 2) * factorial((tj2 + tm2) / 2));
  double sum = 0.0;
  for (int k = 0;; ++k) {
    const int d1 = cc - k;
    const int d2 = (tj1 - tm1) / 2 - k;
    const int d3 = (tj2 + tm2) / 2 - k;
    const int d4 = (tJ - tj2 + tm1) / 2 + k;
    const int d5 = (tJ - tj1 - tm2) / 2 + k;
    if (d1 < 0 || d2 < 0 || d3 < 0) break;
    if (d4 < 0 || d5 < 0) continue;
    const double term = 1.0 / (factorial(k) * factorial(d1) * factorial(d2) * factorial(d3) *
                               factorial(d4) * factorial(d5));
    sum += (k % 2 == 0) ? term : -term;
  }
  return pre * norm * sum;
}

namespace detail {

inline void check_dipole_pair(const ZeemanState& lower, const ZeemanState& upper) {
  if (upper.manifold() != Manifold::P_half || lower.manifold() == Manifold::P_half)
    throw std::domain_error("dipole coupling requires lower in S1/2 or D3/2 and upper in P1/2, got " +
                            lower.label() + " -> " + upper.label());
}

}  // namespace detail

/// Signed dipole amplitude <J m; 1 q | J' m'> between a lower sublevel and a
/// P1/2 sublevel for the given polarization; zero if the selection rule fails.
inline double cg_amplitude(const ZeemanState& lower, const ZeemanState& upper, Polarization pol) {
  detail::check_dipole_pair(lower, upper);
  const int dq = two_delta_m(pol);
  if (upper.two_mj() - lower.two_mj() != dq) return 0.0;
  return clebsch_gordan(two_j(lower.manifold()), lower.two_mj(), 2, dq, two_j(upper.manifold()),
                        upper.two_mj());
}

/// Relative line strength. For a fixed upper state the weights over all
/// channels into one lower manifold sum to 1.
inline double cg_weight(const ZeemanState& lower, const ZeemanState& upper, Polarization pol) {
  const double a = cg_amplitude(lower, upper, pol);
  return a * a;
}

/// Polarization connecting two sublevels, if any.
inline bool polarization_between(const ZeemanState& lower, const ZeemanState& upper, Polarization& out) {
  for (Polarization p : kAllPolarizations) {
    if (upper.two_mj() - lower.two_mj() == two_delta_m(p)) {
      out = p;
      return true;
    }
  }
  return false;
}

/// J_z on the D3/2 quartet, basis ordered by ascending m_J.
inline Eigen::Matrix4d jz_quartet() {
  return Eigen::Vector4d(-1.5, -0.5, 0.5, 1.5).asDiagonal();
}

inline void require_normalized(const Quartet& v, const char* what) {
  if (std::abs(v.norm() - 1.0) > 1e-9)
    throw std::domain_error(std::string(what) + ": state vector is not normalized (norm " +
                            std::to_string(v.norm()) + ")");
}

/// <a|J_z|b> in units of hbar.
inline cplx jz_expectation(const Quartet& a, const Quartet& b) {
  require_normalized(a, "jz_expectation");
  require_normalized(b, "jz_expectation");
  return a.dot(jz_quartet().cast<cplx>() * b);
}

inline Quartet basis_quartet(int two_mj) {
  Quartet v = Quartet::Zero();
  v(d_state(two_mj).index()) = 1.0;
  return v;
}

/// First-order field sensitivity |g mu_B (<a|Jz|a> - <b|Jz|b>)| of a qubit
/// transition, in kHz/mG.
inline double qubit_sensitivity(const ZeemanState& a, const ZeemanState& b,
                                const AtomConstants& c = barium()) {
  if (a.manifold() != b.manifold())
    throw std::domain_error("qubit_sensitivity: " + a.label() + " and " + b.label() +
                            " lie in different manifolds");
  // MHz/G and kHz/mG are the same number.
  return std::abs(c.g_factor(a.manifold()) * c.mu_b_hz_per_gauss * 1e-6 * (a.mj() - b.mj()));
}

inline double qubit_sensitivity(const Quartet& a, const Quartet& b, const AtomConstants& c = barium()) {
  const double za = jz_expectation(a, a).real();
  const double zb = jz_expectation(b, b).real();
  // Differences at rounding level mean an insensitive pair.
  const double dz = std::abs(za - zb) < 1e-12 ? 0.0 : za - zb;
  return std::abs(c.g_d * c.mu_b_hz_per_gauss * 1e-6 * dz);
}

}  // namespace metaqubit
