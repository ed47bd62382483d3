#pragma once

// Symmetric piecewise-constant barriers of finite support.
//
// Units throughout the library: hbar = m = 1, so E = k^2 / 2 and the
// particle speed equals k.

#include <algorithm>
#include <cmath>
#include <functional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "qsplit/error.hpp"

namespace qsplit {

struct Segment {
  double width = 0.0;
  double height = 0.0;

  friend bool operator==(const Segment&, const Segment&) = default;
};

inline constexpr double kSymmetryTolerance = 1e-12;

/// Immutable after construction; safe to share across workers.
class PotentialSpec {
 public:
  double left_edge() const noexcept { return a_; }
  double right_edge() const noexcept { return b_; }
  double midpoint() const noexcept { return 0.5 * (a_ + b_); }
  double length() const noexcept { return b_ - a_; }
  bool symmetric() const noexcept { return symmetric_; }
  std::span<const Segment> segments() const noexcept { return segments_; }

  /// Segment boundaries x_0 = a < x_1 < ... < x_n = b.
  std::span<const double> boundaries() const noexcept { return boundaries_; }

  /// V(x). Segments are right-open and V vanishes outside [a, b), so an
  /// interior boundary takes the height of the segment to its right.
  double operator()(double x) const noexcept {
    if (x < a_ || x >= b_) return 0.0;
    auto it = std::upper_bound(boundaries_.begin(), boundaries_.end(), x);
    auto index = static_cast<std::size_t>(it - boundaries_.begin()) - 1;
    index = std::min(index, segments_.size() - 1);
    return segments_[index].height;
  }

  /// Same barrier with every segment height moved by `shift`.
  PotentialSpec shifted(double shift) const {
    PotentialSpec out = *this;
    for (auto& s : out.segments_) s.height += shift;
    return out;
  }

  friend bool operator==(const PotentialSpec& l, const PotentialSpec& r) {
    return l.a_ == r.a_ && l.segments_ == r.segments_;
  }

 private:
  friend PotentialSpec make_piecewise_unchecked(double a, std::vector<Segment> segments);

  double a_ = 0.0;
  double b_ = 0.0;
  bool symmetric_ = true;
  std::vector<Segment> segments_;
  std::vector<double> boundaries_;
};

inline PotentialSpec make_piecewise_unchecked(double a, std::vector<Segment> segments) {
  if (segments.empty())
    throw Error(ErrorKind::InvalidArgument, "make_piecewise", "segment list is empty");
  for (const auto& s : segments) {
    if (!(s.width > 0.0) || !std::isfinite(s.width))
      throw Error(ErrorKind::NonPositiveWidth, "make_piecewise",
                  "segment width " + std::to_string(s.width) + " is not positive");
    if (!std::isfinite(s.height))
      throw Error(ErrorKind::InvalidArgument, "make_piecewise", "segment height is not finite");
  }
  if (!std::isfinite(a))
    throw Error(ErrorKind::InvalidArgument, "make_piecewise", "left edge is not finite");

  PotentialSpec spec;
  spec.a_ = a;
  spec.segments_ = std::move(segments);
  spec.boundaries_.reserve(spec.segments_.size() + 1);
  double x = a;
  spec.boundaries_.push_back(x);
  for (const auto& s : spec.segments_) {
    x += s.width;
    spec.boundaries_.push_back(x);
  }
  spec.b_ = x;

  const auto n = spec.segments_.size();
  for (std::size_t i = 0; i < n / 2 + 1 && spec.symmetric_; ++i) {
    const auto& lo = spec.segments_[i];
    const auto& hi = spec.segments_[n - 1 - i];
    spec.symmetric_ = std::abs(lo.height - hi.height) <= kSymmetryTolerance &&
                      std::abs(lo.width - hi.width) <= kSymmetryTolerance;
  }
  return spec;
}

/// Validated barrier. Asymmetric height or width sequences are refused.
inline PotentialSpec make_piecewise(double a, std::vector<Segment> segments) {
  auto spec = make_piecewise_unchecked(a, std::move(segments));
  if (!spec.symmetric())
    throw Error(ErrorKind::AsymmetricPotential, "make_piecewise",
                "reversed segment sequence differs from the original");
  return spec;
}

inline PotentialSpec make_rectangular(double height, double length, double a) {
  if (!(length > 0.0))
    throw Error(ErrorKind::NonPositiveWidth, "make_rectangular",
                "barrier length " + std::to_string(length) + " is not positive");
  return make_piecewise(a, {Segment{length, height}});
}

inline double evaluate(const PotentialSpec& spec, double x) noexcept { return spec(x); }

/// Uniform segmentation of a smooth barrier on [a, b], each segment taking
/// the value at its centre. Accuracy relative to the smooth profile is the
/// caller's concern.
inline PotentialSpec discretize(const std::function<double(double)>& potential, double a,
                                double b, std::size_t segment_count) {
  if (segment_count == 0)
    throw Error(ErrorKind::InvalidArgument, "discretize", "segment count must be positive");
  if (!(b > a))
    throw Error(ErrorKind::NonPositiveWidth, "discretize", "empty support");
  const double w = (b - a) / static_cast<double>(segment_count);
  std::vector<Segment> segments(segment_count);
  for (std::size_t i = 0; i < segment_count; ++i)
    segments[i] = {w, potential(a + (static_cast<double>(i) + 0.5) * w)};
  // Centre samples of a symmetric profile can differ in the last bits.
  for (std::size_t i = 0; i < segment_count / 2; ++i) {
    auto& lo = segments[i].height;
    auto& hi = segments[segment_count - 1 - i].height;
    if (std::abs(lo - hi) <= kSymmetryTolerance) lo = hi = 0.5 * (lo + hi);
  }
  return make_piecewise(a, std::move(segments));
}

}  // namespace qsplit
