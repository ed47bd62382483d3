#pragma once

#include <cmath>
#include <complex>
#include <cstddef>
#include <span>
#include <vector>

#include "qsplit/error.hpp"

namespace qsplit {

using cplx = std::complex<double>;

/// Complex samples of one component on an x-grid.
struct ComponentField {
  std::vector<double> x;
  std::vector<cplx> values;

  std::size_t size() const noexcept { return x.size(); }
};

/// n points from lo to hi inclusive.
inline std::vector<double> uniform_grid(double lo, double hi, std::size_t n) {
  if (n < 2 || !(hi > lo))
    throw Error(ErrorKind::InvalidArgument, "uniform_grid", "need n >= 2 and hi > lo");
  std::vector<double> x(n);
  const double h = (hi - lo) / static_cast<double>(n - 1);
  for (std::size_t i = 0; i < n; ++i) x[i] = lo + static_cast<double>(i) * h;
  x.back() = hi;
  return x;
}

/// Grid anchored on `anchor` with spacing h covering [lo, hi]; the anchor
/// is always a node, so a cut placed there never falls between samples.
inline std::vector<double> anchored_grid(double lo, double hi, double h, double anchor) {
  if (!(h > 0.0) || !(hi > lo))
    throw Error(ErrorKind::InvalidArgument, "anchored_grid", "need h > 0 and hi > lo");
  const auto first = static_cast<long long>(std::floor((lo - anchor) / h));
  const auto last = static_cast<long long>(std::ceil((hi - anchor) / h));
  std::vector<double> x;
  x.reserve(static_cast<std::size_t>(last - first + 1));
  for (long long i = first; i <= last; ++i) x.push_back(anchor + static_cast<double>(i) * h);
  return x;
}

inline double grid_spacing(std::span<const double> x) {
  if (x.size() < 2)
    throw Error(ErrorKind::InvalidArgument, "grid_spacing", "grid has fewer than two points");
  return (x.back() - x.front()) / static_cast<double>(x.size() - 1);
}

template <class T>
T trapezoid(std::span<const double> x, std::span<const T> f) {
  T sum{};
  for (std::size_t i = 1; i < x.size(); ++i) sum += 0.5 * (x[i] - x[i - 1]) * (f[i] + f[i - 1]);
  return sum;
}

/// Composite Simpson weights for an odd number of equally spaced nodes.
inline std::vector<double> simpson_weights(std::size_t n, double h) {
  if (n < 3 || n % 2 == 0)
    throw Error(ErrorKind::InvalidArgument, "simpson_weights", "need an odd node count >= 3");
  std::vector<double> w(n);
  for (std::size_t i = 0; i < n; ++i) w[i] = (i % 2 == 1 ? 4.0 : 2.0) * h / 3.0;
  w.front() = w.back() = h / 3.0;
  return w;
}

}  // namespace qsplit
