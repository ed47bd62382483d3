#pragma once

// Decomposition of the left-incident state into to-be-transmitted and
// to-be-reflected parts, Psi_full = Psi_tr + Psi_ref, with
//
//   left of the barrier:  Psi_tr  = A_tr  e^{ikx}
//                         Psi_ref = A_ref e^{ikx} + A_R e^{-ikx}
//   A_tr + A_ref = 1,  |A_tr|^2 = T,  |A_ref|^2 = R,
//
// and Psi_ref chosen odd about the barrier midpoint x_c. The piecewise
// components psi_tr, psi_ref agree with Psi_tr, Psi_ref for x <= x_c; beyond
// x_c psi_ref vanishes and psi_tr carries all of Psi_full.

#include <algorithm>
#include <array>
#include <cmath>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "qsplit/error.hpp"
#include "qsplit/field.hpp"
#include "qsplit/potential.hpp"
#include "qsplit/scattering.hpp"

namespace qsplit {

inline constexpr double kNormalizationTolerance = 1e-10;
inline constexpr double kParityTolerance = 1e-8;
inline constexpr double kOddnessTolerance = 1e-7;

enum class Parity { Odd, Even, Undetermined };

constexpr std::string_view to_string(Parity p) noexcept {
  switch (p) {
    case Parity::Odd: return "odd";
    case Parity::Even: return "even";
    case Parity::Undetermined: return "undetermined";
  }
  return "undetermined";
}

struct SplitAmplitudes {
  cplx tr_in;   // A_tr^In
  cplx ref_in;  // A_ref^In
  int root_sign = +1;
  Parity parity = Parity::Undetermined;
};

/// The two exact solutions of {A_tr + A_ref = 1, |A_tr|^2 = T, |A_ref|^2 = R}:
/// A_tr = T +- i sqrt(TR). Index 0 carries root_sign +1.
inline std::array<SplitAmplitudes, 2> split_amplitude_candidates(double T, double R) {
  if (!(T >= 0.0 && T <= 1.0 + kNormalizationTolerance && R >= 0.0 &&
        R <= 1.0 + kNormalizationTolerance) ||
      std::abs(T + R - 1.0) > kNormalizationTolerance)
    throw Error(ErrorKind::NotNormalized, "split_amplitude_candidates",
                "T = " + std::to_string(T) + ", R = " + std::to_string(R) +
                    " do not sum to one");
  const double s = std::sqrt(std::max(T, 0.0) * std::max(R, 0.0));
  std::array<SplitAmplitudes, 2> out;
  for (int i = 0; i < 2; ++i) {
    const int sign = i == 0 ? +1 : -1;
    const cplx tr(T, sign * s);
    out[static_cast<std::size_t>(i)] = {tr, 1.0 - tr, sign, Parity::Undetermined};
  }
  return out;
}

enum class Component { full, tr_state, ref_state, tr, ref };

constexpr std::string_view to_string(Component c) noexcept {
  switch (c) {
    case Component::full: return "full";
    case Component::tr_state: return "TR";
    case Component::ref_state: return "REF";
    case Component::tr: return "tr";
    case Component::ref: return "ref";
  }
  return "full";
}

/// One candidate root together with its midpoint residual |Psi_ref(x_c)|.
struct SplitCandidate {
  SplitAmplitudes amplitudes;
  StateCoefficients tr_coefficients;
  StateCoefficients ref_coefficients;
  double midpoint_residual = 0.0;
};

/// Selected split for one (barrier, energy), evaluable at any x.
class SubprocessStates {
 public:
  SubprocessStates(std::shared_ptr<const ScatteringStates> states, SplitCandidate chosen,
                   SplitCandidate other)
      : states_(std::move(states)), chosen_(chosen), other_(other) {}

  const ScatteringStates& scattering() const noexcept { return *states_; }
  const ScatteringAmplitudes& amplitudes() const noexcept { return states_->amplitudes(); }
  const SplitAmplitudes& split() const noexcept { return chosen_.amplitudes; }
  const SplitCandidate& chosen() const noexcept { return chosen_; }
  /// The root not selected; kept for diagnostics.
  const SplitCandidate& rejected() const noexcept { return other_; }
  double midpoint() const noexcept { return states_->spec().midpoint(); }

  StateCoefficients coefficients(Component c) const {
    switch (c) {
      case Component::full: return {1.0, 0.0};
      case Component::tr_state: return chosen_.tr_coefficients;
      case Component::ref_state: return chosen_.ref_coefficients;
      default: break;
    }
    throw Error(ErrorKind::InvalidArgument, "SubprocessStates::coefficients",
                "piecewise components have no single coefficient pair");
  }

  /// Coefficients in force at x. Points at x_c belong to the left piece.
  StateCoefficients coefficients_at(Component c, double x) const {
    if (c == Component::tr) return x <= midpoint() ? chosen_.tr_coefficients : StateCoefficients{1.0, 0.0};
    if (c == Component::ref) return x <= midpoint() ? chosen_.ref_coefficients : StateCoefficients{0.0, 0.0};
    return coefficients(c);
  }

  WaveState evaluate(Component c, double x) const {
    return states_->evaluate(coefficients_at(c, x), x);
  }

 private:
  std::shared_ptr<const ScatteringStates> states_;
  SplitCandidate chosen_;
  SplitCandidate other_;
};

namespace detail {

inline SplitCandidate make_candidate(const ScatteringStates& states, const SplitAmplitudes& a) {
  // Psi_tr has left pair (A_tr, 0); Psi_ref has (1 - A_tr, A_R). Writing the
  // reflected coefficient as A_R * A_tr / t' keeps Psi_tr + Psi_ref = Psi_full
  // free of the cancellation in A_R - A_ref * A_R.
  const cplx r = states.amplitudes().reflected;
  const cplx t_right = states.right_transmitted();
  const cplx beta = a.tr_in == 0.0 ? cplx(0.0) : r * a.tr_in / t_right;
  SplitCandidate c;
  c.amplitudes = a;
  c.tr_coefficients = {a.tr_in, -beta};
  c.ref_coefficients = {a.ref_in, beta};
  c.midpoint_residual =
      std::abs(states.evaluate(c.ref_coefficients, states.spec().midpoint()).value);
  return c;
}

}  // namespace detail

/// Builds both candidate splits and keeps the one whose Psi_ref vanishes at
/// the barrier midpoint.
inline SubprocessStates select_odd_split(std::shared_ptr<const ScatteringStates> states) {
  const auto& spec = states->spec();
  if (!spec.symmetric())
    throw Error(ErrorKind::AsymmetricPotential, "build_decomposition",
                "decomposition requires a symmetric barrier");
  const auto& amp = states->amplitudes();
  const auto roots = split_amplitude_candidates(amp.T, amp.R);
  auto first = detail::make_candidate(*states, roots[0]);
  auto second = detail::make_candidate(*states, roots[1]);
  const bool first_ok = first.midpoint_residual < kParityTolerance;
  const bool second_ok = second.midpoint_residual < kParityTolerance;
  if (!first_ok && !second_ok)
    throw Error(ErrorKind::OddSelectionFailed, "build_decomposition",
                "midpoint residuals " + std::to_string(first.midpoint_residual) + " (root +1), " +
                    std::to_string(second.midpoint_residual) + " (root -1) both exceed " +
                    std::to_string(kParityTolerance));
  if (second.midpoint_residual < first.midpoint_residual) std::swap(first, second);
  if (first_ok && second_ok) {
    // Coinciding roots (R = 0 or T = 0): Psi_ref is odd and even at once.
    first.amplitudes.parity = Parity::Undetermined;
    second.amplitudes.parity = Parity::Undetermined;
  } else {
    first.amplitudes.parity = Parity::Odd;
    second.amplitudes.parity = Parity::Even;
  }
  return SubprocessStates(std::move(states), first, second);
}

inline SubprocessStates select_odd_split(const PotentialSpec& spec, const EnergyMode& mode) {
  if (!spec.symmetric())
    throw Error(ErrorKind::AsymmetricPotential, "build_decomposition",
                "decomposition requires a symmetric barrier");
  return select_odd_split(std::make_shared<const ScatteringStates>(spec, mode));
}

struct DecompositionReport {
  double state_sum_residual = 0.0;      // max |Psi_tr + Psi_ref - Psi_full|
  double piecewise_sum_residual = 0.0;  // max |psi_tr + psi_ref - Psi_full|
  double midpoint_residual = 0.0;       // |Psi_ref(x_c)|
  double rejected_midpoint_residual = 0.0;
  double parity_residual = 0.0;         // max |Psi_ref(x) + Psi_ref(2x_c - x)| / max |Psi_ref|
  double tr_norm_residual = 0.0;        // ||A_tr|^2 - T|
  double ref_norm_residual = 0.0;       // ||A_ref|^2 - R|
};

struct StationaryDecomposition {
  EnergyMode mode;
  ScatteringAmplitudes amplitudes;
  SplitAmplitudes split;
  SplitAmplitudes rejected;
  double x_c = 0.0;
  ComponentField psi_full;
  ComponentField psi_TR;
  ComponentField psi_REF;
  ComponentField psi_tr;
  ComponentField psi_ref;
  DecompositionReport report;
  SubprocessStates states;
};

inline StationaryDecomposition build_decomposition(const PotentialSpec& spec,
                                                   const EnergyMode& mode,
                                                   std::span<const double> x_grid) {
  auto sub = select_odd_split(spec, mode);
  const double xc = spec.midpoint();
  const std::size_t n = x_grid.size();

  auto blank = [&] {
    ComponentField f;
    f.x.assign(x_grid.begin(), x_grid.end());
    f.values.resize(n);
    return f;
  };
  StationaryDecomposition dec{mode,        sub.amplitudes(), sub.split(), sub.rejected().amplitudes,
                              xc,          blank(),          blank(),     blank(),
                              blank(),     blank(),          {},          sub};

  DecompositionReport& rep = dec.report;
  double max_ref = 0.0;
  double parity = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double x = x_grid[i];
    const cplx full = sub.evaluate(Component::full, x).value;
    const cplx tr = sub.evaluate(Component::tr_state, x).value;
    const cplx ref = sub.evaluate(Component::ref_state, x).value;
    const cplx mirrored = sub.evaluate(Component::ref_state, 2.0 * xc - x).value;
    dec.psi_full.values[i] = full;
    dec.psi_TR.values[i] = tr;
    dec.psi_REF.values[i] = ref;
    dec.psi_tr.values[i] = x <= xc ? tr : full;
    dec.psi_ref.values[i] = x <= xc ? ref : cplx(0.0);
    rep.state_sum_residual = std::max(rep.state_sum_residual, std::abs(tr + ref - full));
    rep.piecewise_sum_residual = std::max(
        rep.piecewise_sum_residual, std::abs(dec.psi_tr.values[i] + dec.psi_ref.values[i] - full));
    max_ref = std::max(max_ref, std::abs(ref));
    parity = std::max(parity, std::abs(ref + mirrored));
  }
  rep.midpoint_residual = sub.chosen().midpoint_residual;
  rep.rejected_midpoint_residual = sub.rejected().midpoint_residual;
  rep.parity_residual = max_ref > 0.0 ? parity / max_ref : 0.0;
  rep.tr_norm_residual = std::abs(std::norm(dec.split.tr_in) - dec.amplitudes.T);
  rep.ref_norm_residual = std::abs(std::norm(dec.split.ref_in) - dec.amplitudes.R);

  if (rep.parity_residual > kOddnessTolerance)
    throw Error(ErrorKind::OddSelectionFailed, "build_decomposition",
                "selected Psi_ref is not odd about x_c: relative residual " +
                    std::to_string(rep.parity_residual));
  return dec;
}

struct DerivativeJump {
  cplx tr;   // psi_tr'(x_c+) - psi_tr'(x_c-)
  cplx ref;  // psi_ref'(x_c+) - psi_ref'(x_c-)
};

/// One-sided second-order difference estimates of the slope jumps of the
/// piecewise components at x_c, with step h.
inline DerivativeJump derivative_jump(const SubprocessStates& sub, double h = 1e-3) {
  if (!(h > 0.0))
    throw Error(ErrorKind::InvalidArgument, "derivative_jump", "step must be positive");
  const double xc = sub.midpoint();
  auto right_slope = [&](Component c) {
    // Values on x > x_c, with the x_c sample taken as the right-side limit.
    auto v = [&](double x) { return sub.evaluate(c, x).value; };
    const cplx at = c == Component::ref ? cplx(0.0) : sub.evaluate(Component::full, xc).value;
    return (-3.0 * at + 4.0 * v(xc + h) - v(xc + 2.0 * h)) / (2.0 * h);
  };
  auto left_slope = [&](Component c) {
    auto v = [&](double x) { return sub.evaluate(c, x).value; };
    return (3.0 * v(xc) - 4.0 * v(xc - h) + v(xc - 2.0 * h)) / (2.0 * h);
  };
  return {right_slope(Component::tr) - left_slope(Component::tr),
          right_slope(Component::ref) - left_slope(Component::ref)};
}

inline DerivativeJump derivative_jump(const StationaryDecomposition& dec, double h = 1e-3) {
  return derivative_jump(dec.states, h);
}

/// Slope jumps from the analytic slopes: the ref component loses Psi_ref'(x_c)
/// and the tr component gains it.
inline DerivativeJump exact_derivative_jump(const SubprocessStates& sub) {
  const cplx slope = sub.evaluate(Component::ref_state, sub.midpoint()).slope;
  return {slope, -slope};
}

}  // namespace qsplit
