#pragma once

// Crank-Nicolson reference propagator for i psi_t = -psi_xx / 2 + V psi on a
// hard-walled uniform grid. Used only to cross-check spectral synthesis.

#include <algorithm>
#include <cmath>
#include <complex>
#include <span>
#include <string>
#include <vector>

#include "qsplit/error.hpp"
#include "qsplit/field.hpp"
#include "qsplit/potential.hpp"

namespace qsplit {

inline constexpr double kContaminationLimit = 1e-6;
inline constexpr std::size_t kWallBand = 5;

struct GridSpec {
  double x_min = -160.0;
  double x_max = 160.0;
  std::size_t n_x = 40961;
  double dt = 0.01;
  std::size_t n_t = 8000;

  double dx() const noexcept { return (x_max - x_min) / static_cast<double>(n_x - 1); }
  std::vector<double> nodes() const { return uniform_grid(x_min, x_max, n_x); }
};

struct OracleRun {
  std::vector<double> times;
  std::vector<ComponentField> fields;  // full component at each sampled time
  double norm_drift = 0.0;             // max | ||psi(t)|| - ||psi(0)|| |
  double wall_probability = 0.0;       // largest probability seen next to a wall
};

/// Cell average of V over [x - dx/2, x + dx/2].
inline double cell_average(const PotentialSpec& spec, double x, double dx) {
  const double lo = x - 0.5 * dx, hi = x + 0.5 * dx;
  const auto bounds = spec.boundaries();
  const auto segs = spec.segments();
  double sum = 0.0;
  for (std::size_t i = 0; i < segs.size(); ++i) {
    const double overlap = std::min(hi, bounds[i + 1]) - std::max(lo, bounds[i]);
    if (overlap > 0.0) sum += overlap * segs[i].height;
  }
  return sum / dx;
}

namespace detail {

inline double discrete_norm(std::span<const cplx> psi, double dx) {
  double s = 0.0;
  for (const auto& v : psi) s += std::norm(v);
  return std::sqrt(s * dx);
}

inline double wall_probability(std::span<const cplx> psi, double dx) {
  double s = 0.0;
  const std::size_t n = psi.size();
  for (std::size_t i = 0; i < std::min(kWallBand, n); ++i) s += std::norm(psi[i]) + std::norm(psi[n - 1 - i]);
  return s * dx;
}

}  // namespace detail

/// Propagates `initial` (sampled on grid.nodes()) and records the field at
/// each requested time, rounded to the nearest step.
inline OracleRun crank_nicolson_propagate(const PotentialSpec& spec, const ComponentField& initial,
                                          const GridSpec& grid,
                                          std::span<const double> sample_times) {
  if (grid.n_x < 3 || !(grid.dt > 0.0) || !(grid.x_max > grid.x_min))
    throw Error(ErrorKind::InvalidArgument, "crank_nicolson_propagate", "degenerate grid");
  const std::size_t n = grid.n_x;
  const double dx = grid.dx();
  if (initial.size() != n || initial.values.size() != n ||
      std::abs(initial.x.front() - grid.x_min) > 1e-9 * dx ||
      std::abs(initial.x.back() - grid.x_max) > 1e-9 * dx)
    throw Error(ErrorKind::GridMismatch, "crank_nicolson_propagate",
                "initial field is not sampled on the propagation grid");

  std::vector<std::size_t> sample_steps;
  for (double t : sample_times) {
    const auto step = static_cast<long long>(std::llround(t / grid.dt));
    if (step < 0 || static_cast<std::size_t>(step) > grid.n_t)
      throw Error(ErrorKind::InvalidArgument, "crank_nicolson_propagate",
                  "sample time " + std::to_string(t) + " outside the run");
    sample_steps.push_back(static_cast<std::size_t>(step));
  }

  const auto x = grid.nodes();
  // Interior unknowns 1..n-2; the walls stay at zero.
  const std::size_t m = n - 2;
  const cplx half_i_dt(0.0, 0.5 * grid.dt);
  const double off = -0.5 / (dx * dx);
  std::vector<cplx> diag(m);
  for (std::size_t i = 0; i < m; ++i) {
    const double h = 1.0 / (dx * dx) + cell_average(spec, x[i + 1], dx);
    diag[i] = 1.0 + half_i_dt * h;
  }
  const cplx a_off = half_i_dt * off;  // sub/super-diagonal of (1 + i dt H / 2)
  const cplx b_off = -a_off;           // of (1 - i dt H / 2)

  // Thomas factorisation of the constant left-hand matrix.
  std::vector<cplx> c_prime(m), inv_pivot(m);
  {
    cplx pivot = diag[0];
    inv_pivot[0] = 1.0 / pivot;
    c_prime[0] = a_off * inv_pivot[0];
    for (std::size_t i = 1; i < m; ++i) {
      pivot = diag[i] - a_off * c_prime[i - 1];
      inv_pivot[i] = 1.0 / pivot;
      c_prime[i] = a_off * inv_pivot[i];
    }
  }

  std::vector<cplx> psi(initial.values.begin() + 1, initial.values.end() - 1);
  std::vector<cplx> rhs(m);
  const double norm0 = detail::discrete_norm(psi, dx);

  OracleRun run;
  auto record = [&](std::size_t step) {
    for (std::size_t s = 0; s < sample_steps.size(); ++s) {
      if (sample_steps[s] != step) continue;
      ComponentField f;
      f.x = x;
      f.values.assign(n, 0.0);
      std::copy(psi.begin(), psi.end(), f.values.begin() + 1);
      run.times.push_back(static_cast<double>(step) * grid.dt);
      run.fields.push_back(std::move(f));
    }
  };
  auto check = [&] {
    run.norm_drift = std::max(run.norm_drift, std::abs(detail::discrete_norm(psi, dx) - norm0));
    const double wall = detail::wall_probability(psi, dx);
    run.wall_probability = std::max(run.wall_probability, wall);
    if (wall > kContaminationLimit)
      throw Error(ErrorKind::BoundaryContamination, "crank_nicolson_propagate",
                  "probability " + std::to_string(wall) + " within " + std::to_string(kWallBand) +
                      " points of a wall");
  };

  check();
  record(0);
  const std::size_t last = sample_steps.empty()
                               ? grid.n_t
                               : *std::max_element(sample_steps.begin(), sample_steps.end());
  for (std::size_t step = 1; step <= last; ++step) {
    // rhs = (1 - i dt H / 2) psi
    for (std::size_t i = 0; i < m; ++i) {
      const cplx b_diag = 2.0 - diag[i];
      cplx v = b_diag * psi[i];
      if (i > 0) v += b_off * psi[i - 1];
      if (i + 1 < m) v += b_off * psi[i + 1];
      rhs[i] = v;
    }
    rhs[0] *= inv_pivot[0];
    for (std::size_t i = 1; i < m; ++i) rhs[i] = (rhs[i] - a_off * rhs[i - 1]) * inv_pivot[i];
    psi[m - 1] = rhs[m - 1];
    for (std::size_t i = m - 1; i-- > 0;) psi[i] = rhs[i] - c_prime[i] * psi[i + 1];
    if (step % 100 == 0 || step == last) check();
    record(step);
  }
  return run;
}

struct FieldDistance {
  double l2 = 0.0;
  double linf = 0.0;
};

/// Distances between two fields after removing the optimal global phase.
inline FieldDistance compare_fields(const ComponentField& a, const ComponentField& b) {
  if (a.size() != b.size() || a.values.size() != b.values.size() || a.values.size() != a.size())
    throw Error(ErrorKind::GridMismatch, "compare_fields", "fields have different sizes");
  for (std::size_t i = 0; i < a.size(); ++i)
    if (std::abs(a.x[i] - b.x[i]) > 1e-9 * (1.0 + std::abs(a.x[i])))
      throw Error(ErrorKind::GridMismatch, "compare_fields", "fields live on different grids");
  std::vector<cplx> cross(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) cross[i] = std::conj(b.values[i]) * a.values[i];
  const cplx inner = trapezoid<cplx>(a.x, cross);
  const cplx phase = std::abs(inner) > 0.0 ? inner / std::abs(inner) : cplx(1.0);
  FieldDistance d;
  std::vector<double> diff2(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double e = std::abs(a.values[i] - phase * b.values[i]);
    diff2[i] = e * e;
    d.linf = std::max(d.linf, e);
  }
  d.l2 = a.size() > 1 ? std::sqrt(trapezoid<double>(a.x, diff2)) : std::sqrt(diff2[0]);
  return d;
}

/// Keeps every `stride`-th sample starting at `offset`.
inline ComponentField subsample(const ComponentField& f, std::size_t offset, std::size_t stride) {
  ComponentField out;
  for (std::size_t i = offset; i < f.size(); i += stride) {
    out.x.push_back(f.x[i]);
    out.values.push_back(f.values[i]);
  }
  return out;
}

}  // namespace qsplit
