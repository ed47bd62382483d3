#pragma once

// Stationary scattering on piecewise-constant barriers.
//
// Inside a segment of height V the pair (psi, psi') is carried across a
// distance d by the real unimodular matrix
//
//     [  c(d)        s(d) ]      c = cos(q d),  s = sin(q d) / q,
//     [ -q^2 s(d)    c(d) ]      q^2 = 2 (E - V),
//
// which turns into cosh/sinh under the barrier and into the exact linear
// solution (c = 1, s = d) at E = V. The plane-wave transfer matrix follows
// by changing basis to (e^{ikx}, e^{-ikx}) at both edges.

#include <algorithm>
#include <array>
#include <cmath>
#include <complex>
#include <span>
#include <string>
#include <vector>

#include "qsplit/error.hpp"
#include "qsplit/field.hpp"
#include "qsplit/potential.hpp"

namespace qsplit {

inline constexpr cplx kI{0.0, 1.0};

/// Total decay exponent sum(kappa * width) above which transfer matrix
/// entries squared would leave the double range.
inline constexpr double kMaxOpacity = 300.0;

class EnergyMode {
 public:
  static EnergyMode from_energy(double energy) {
    if (!(energy > 0.0) || !std::isfinite(energy))
      throw Error(ErrorKind::InvalidArgument, "EnergyMode",
                  "energy must be strictly positive, got " + std::to_string(energy));
    return EnergyMode(energy, std::sqrt(2.0 * energy));
  }
  static EnergyMode from_wavenumber(double k) {
    if (!(k > 0.0) || !std::isfinite(k))
      throw Error(ErrorKind::InvalidArgument, "EnergyMode",
                  "wavenumber must be strictly positive, got " + std::to_string(k));
    return EnergyMode(0.5 * k * k, k);
  }

  double energy() const noexcept { return energy_; }
  double k() const noexcept { return k_; }

 private:
  EnergyMode(double e, double k) : energy_(e), k_(k) {}
  double energy_;
  double k_;
};

struct Wavevector {
  cplx q;
  bool degenerate = false;
};

/// q = sqrt(2(E - V)), imaginary below the barrier top, zero (flagged) at E = V.
inline Wavevector segment_wavevector(double energy, double height) {
  if (!(energy > 0.0))
    throw Error(ErrorKind::InvalidArgument, "segment_wavevector", "energy must be positive");
  const double q2 = 2.0 * (energy - height);
  if (q2 > 0.0) return {cplx(std::sqrt(q2), 0.0), false};
  if (q2 < 0.0) return {cplx(0.0, std::sqrt(-q2)), false};
  return {cplx(0.0, 0.0), true};
}

struct Matrix2 {
  std::array<cplx, 4> m{cplx(1.0), cplx(0.0), cplx(0.0), cplx(1.0)};

  cplx& operator()(int r, int c) { return m[static_cast<std::size_t>(2 * r + c)]; }
  const cplx& operator()(int r, int c) const { return m[static_cast<std::size_t>(2 * r + c)]; }

  cplx det() const { return m[0] * m[3] - m[1] * m[2]; }

  friend Matrix2 operator*(const Matrix2& a, const Matrix2& b) {
    Matrix2 out;
    for (int r = 0; r < 2; ++r)
      for (int c = 0; c < 2; ++c) out(r, c) = a(r, 0) * b(0, c) + a(r, 1) * b(1, c);
    return out;
  }
};

/// (psi, psi') at one point.
struct WaveState {
  cplx value;
  cplx slope;
};

namespace detail {

struct SegmentPropagator {
  double cos_part;
  double sin_part;  // sin(qd)/q, sinh(kd)/k, or d
};

inline SegmentPropagator segment_propagator(double q2, double d) {
  if (q2 > 0.0) {
    const double q = std::sqrt(q2);
    return {std::cos(q * d), std::sin(q * d) / q};
  }
  if (q2 < 0.0) {
    const double kappa = std::sqrt(-q2);
    return {std::cosh(kappa * d), std::sinh(kappa * d) / kappa};
  }
  return {1.0, d};
}

/// Carries (psi, psi') a signed distance d through uniform potential.
inline WaveState propagate(const WaveState& s, double q2, double d) {
  const auto p = segment_propagator(q2, d);
  return {p.cos_part * s.value + p.sin_part * s.slope,
          -q2 * p.sin_part * s.value + p.cos_part * s.slope};
}

inline WaveState plane_wave_state(double k, cplx forward, cplx backward, double x) {
  const cplx e = std::polar(1.0, k * x);
  const cplx ec = std::conj(e);
  return {forward * e + backward * ec, kI * k * (forward * e - backward * ec)};
}

inline double opacity(const PotentialSpec& spec, double energy) {
  double sum = 0.0;
  for (const auto& s : spec.segments())
    if (s.height > energy) sum += std::sqrt(2.0 * (s.height - energy)) * s.width;
  return sum;
}

inline void check_opacity(const PotentialSpec& spec, double energy, const char* op) {
  const double tau = opacity(spec, energy);
  if (tau > kMaxOpacity)
    throw Error(ErrorKind::NumericalOverflow, op,
                "barrier opacity sum(kappa*w) = " + std::to_string(tau) + " exceeds " +
                    std::to_string(kMaxOpacity));
}

}  // namespace detail

/// Plane-wave transfer matrix: maps (c+, c-) in the basis (e^{ikx}, e^{-ikx})
/// at x = a to the pair at x = b. det M = 1.
inline Matrix2 total_transfer(const PotentialSpec& spec, const EnergyMode& mode) {
  detail::check_opacity(spec, mode.energy(), "total_transfer");
  // Real unimodular (psi, psi') propagator across the whole support.
  double f00 = 1.0, f01 = 0.0, f10 = 0.0, f11 = 1.0;
  for (const auto& seg : spec.segments()) {
    const double q2 = 2.0 * (mode.energy() - seg.height);
    const auto p = detail::segment_propagator(q2, seg.width);
    const double g00 = p.cos_part, g01 = p.sin_part, g10 = -q2 * p.sin_part, g11 = p.cos_part;
    const double n00 = g00 * f00 + g01 * f10, n01 = g00 * f01 + g01 * f11;
    const double n10 = g10 * f00 + g11 * f10, n11 = g10 * f01 + g11 * f11;
    f00 = n00, f01 = n01, f10 = n10, f11 = n11;
  }
  const double k = mode.k();
  const double a = spec.left_edge(), b = spec.right_edge();
  Matrix2 basis_a;  // (c+, c-) -> (psi, psi') at a
  const cplx ea = std::polar(1.0, k * a);
  basis_a(0, 0) = ea;
  basis_a(0, 1) = std::conj(ea);
  basis_a(1, 0) = kI * k * ea;
  basis_a(1, 1) = -kI * k * std::conj(ea);
  Matrix2 inverse_b;  // (psi, psi') -> (c+, c-) at b
  const cplx eb = std::polar(1.0, -k * b);
  inverse_b(0, 0) = 0.5 * eb;
  inverse_b(0, 1) = eb / (2.0 * kI * k);
  inverse_b(1, 0) = 0.5 * std::conj(eb);
  inverse_b(1, 1) = -std::conj(eb) / (2.0 * kI * k);
  Matrix2 f;
  f(0, 0) = f00, f(0, 1) = f01, f(1, 0) = f10, f(1, 1) = f11;
  return inverse_b * f * basis_a;
}

struct ScatteringAmplitudes {
  cplx transmitted;  // A_full^T
  cplx reflected;    // A_full^R
  double T = 0.0;
  double R = 0.0;
};

/// Left-incident solution: e^{ikx} + A_R e^{-ikx} on the left, A_T e^{ikx}
/// on the right.
inline ScatteringAmplitudes solve_full(const PotentialSpec& spec, const EnergyMode& mode) {
  const Matrix2 m = total_transfer(spec, mode);
  const cplx m22 = m(1, 1);
  if (!(std::abs(m22) > 0.0) || !std::isfinite(std::abs(m22)))
    throw Error(ErrorKind::SolveSingular, "solve_full", "transfer matrix element M22 is singular");
  ScatteringAmplitudes out;
  out.transmitted = 1.0 / m22;
  out.reflected = -m(1, 0) / m22;
  out.T = std::norm(out.transmitted);
  out.R = std::norm(out.reflected);
  return out;
}

enum class Side { Left, Right };

/// Asymptotic coefficients on one side. Left: incoming multiplies e^{ikx},
/// outgoing e^{-ikx}. Right: incoming multiplies e^{-ikx}, outgoing e^{ikx}.
struct BoundaryAmplitudes {
  cplx incoming;
  cplx outgoing;
  Side side = Side::Left;
};

/// A solution written in the basis of the two scattering states,
/// psi = alpha * Psi_L + beta * Psi_R, where Psi_L is incident from the left
/// and Psi_R from the right.
struct StateCoefficients {
  cplx alpha;
  cplx beta;

  friend StateCoefficients operator+(StateCoefficients l, StateCoefficients r) {
    return {l.alpha + r.alpha, l.beta + r.beta};
  }
};

/// Both scattering states of one (barrier, energy), evaluable anywhere.
///
/// Each state is carried from the side where it is purely outgoing, i.e. in
/// the direction in which it grows under a barrier, so that opaque barriers
/// cost no accuracy.
class ScatteringStates {
 public:
  ScatteringStates(const PotentialSpec& spec, const EnergyMode& mode)
      : spec_(spec), mode_(mode), amplitudes_(solve_full(spec, mode)) {
    const Matrix2 m = total_transfer(spec, mode);
    transmitted_right_ = 1.0 / m(1, 1);
    reflected_right_ = m(0, 1) / m(1, 1);

    const auto bounds = spec_.boundaries();
    const auto segs = spec_.segments();
    const double k = mode_.k();
    const std::size_t n = segs.size();
    q2_.resize(n);
    for (std::size_t i = 0; i < n; ++i) q2_[i] = 2.0 * (mode_.energy() - segs[i].height);

    from_right_.resize(n + 1);
    from_right_[n] = detail::plane_wave_state(k, amplitudes_.transmitted, 0.0, bounds[n]);
    for (std::size_t i = n; i-- > 0;)
      from_right_[i] = detail::propagate(from_right_[i + 1], q2_[i], -segs[i].width);

    from_left_.resize(n + 1);
    from_left_[0] = detail::plane_wave_state(k, 0.0, transmitted_right_, bounds[0]);
    for (std::size_t i = 0; i < n; ++i)
      from_left_[i + 1] = detail::propagate(from_left_[i], q2_[i], segs[i].width);
  }

  const PotentialSpec& spec() const noexcept { return spec_; }
  const EnergyMode& mode() const noexcept { return mode_; }
  const ScatteringAmplitudes& amplitudes() const noexcept { return amplitudes_; }
  cplx right_transmitted() const noexcept { return transmitted_right_; }
  cplx right_reflected() const noexcept { return reflected_right_; }

  WaveState left_incident(double x) const {
    const double k = mode_.k();
    if (x < spec_.left_edge())
      return detail::plane_wave_state(k, 1.0, amplitudes_.reflected, x);
    if (x >= spec_.right_edge())
      return detail::plane_wave_state(k, amplitudes_.transmitted, 0.0, x);
    const std::size_t i = segment_index(x);
    return detail::propagate(from_right_[i + 1], q2_[i], x - spec_.boundaries()[i + 1]);
  }

  WaveState right_incident(double x) const {
    const double k = mode_.k();
    if (x < spec_.left_edge()) return detail::plane_wave_state(k, 0.0, transmitted_right_, x);
    if (x >= spec_.right_edge())
      return detail::plane_wave_state(k, reflected_right_, 1.0, x);
    const std::size_t i = segment_index(x);
    return detail::propagate(from_left_[i], q2_[i], x - spec_.boundaries()[i]);
  }

  WaveState evaluate(const StateCoefficients& c, double x) const {
    WaveState out{0.0, 0.0};
    if (c.alpha != 0.0) {
      const auto l = left_incident(x);
      out.value += c.alpha * l.value;
      out.slope += c.alpha * l.slope;
    }
    if (c.beta != 0.0) {
      const auto r = right_incident(x);
      out.value += c.beta * r.value;
      out.slope += c.beta * r.slope;
    }
    return out;
  }

  /// Scattering-basis coefficients of the unique solution with the given
  /// asymptotic pair.
  StateCoefficients coefficients(const BoundaryAmplitudes& boundary) const {
    if (boundary.side == Side::Left) {
      const cplx alpha = boundary.incoming;
      return {alpha, (boundary.outgoing - alpha * amplitudes_.reflected) / transmitted_right_};
    }
    const cplx beta = boundary.incoming;
    return {(boundary.outgoing - beta * reflected_right_) / amplitudes_.transmitted, beta};
  }

 private:
  std::size_t segment_index(double x) const {
    const auto bounds = spec_.boundaries();
    auto it = std::upper_bound(bounds.begin(), bounds.end(), x);
    auto i = static_cast<std::size_t>(it - bounds.begin()) - 1;
    return std::min(i, spec_.segments().size() - 1);
  }

  PotentialSpec spec_;
  EnergyMode mode_;
  ScatteringAmplitudes amplitudes_;
  cplx transmitted_right_;
  cplx reflected_right_;
  std::vector<double> q2_;
  std::vector<WaveState> from_right_;  // left-incident state at each boundary
  std::vector<WaveState> from_left_;   // right-incident state at each boundary
};

/// Samples of the solution fixed by one asymptotic coefficient pair.
inline ComponentField evaluate_state(const PotentialSpec& spec, const EnergyMode& mode,
                                     const BoundaryAmplitudes& boundary,
                                     std::span<const double> x_grid) {
  const ScatteringStates states(spec, mode);
  const auto c = states.coefficients(boundary);
  ComponentField out;
  out.x.assign(x_grid.begin(), x_grid.end());
  out.values.resize(x_grid.size());
  for (std::size_t i = 0; i < x_grid.size(); ++i) out.values[i] = states.evaluate(c, x_grid[i]).value;
  return out;
}

}  // namespace qsplit
