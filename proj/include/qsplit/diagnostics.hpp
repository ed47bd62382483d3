#pragma once

// Time series of packet observables on one position grid.

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <span>
#include <vector>

#include "qsplit/error.hpp"
#include "qsplit/field.hpp"
#include "qsplit/packet.hpp"
#include "qsplit/parallel.hpp"
#include "qsplit/potential.hpp"

namespace qsplit {

struct DiagnosticsRow {
  double t = 0.0;
  double T = 0.0;
  double R = 0.0;
  double total = 0.0;
  cplx overlap;
  double xbar_full = 0.0;
  double pbar_full = 0.0;
  double varx_full = 0.0;
  // NaN when the component is empty.
  double xbar_tr = std::numeric_limits<double>::quiet_NaN();
  double xbar_ref = std::numeric_limits<double>::quiet_NaN();
  double pbar_tr = std::numeric_limits<double>::quiet_NaN();
  double pbar_ref = std::numeric_limits<double>::quiet_NaN();
  double varx_tr = std::numeric_limits<double>::quiet_NaN();
  double varx_ref = std::numeric_limits<double>::quiet_NaN();
  double continuity_residual = 0.0;  // max over psi_tr and psi_ref, 2h clear of x_c
  double identity_residual = 0.0;    // max |psi_tr + psi_ref - Psi_full|
  double ref_current_at_cut = 0.0;   // current of psi_ref one node left of x_c
};

struct DiagnosticsOptions {
  double dt = 0.01;  // time step of the continuity stencil
  SynthesisOptions synthesis{};
  Executor exec{};
};

namespace detail {

inline void fill_moments(const EvolvedField& f, Component c, double& xbar, double& pbar,
                         double& varx) {
  try {
    const auto m = moments(f, c);
    xbar = m.xbar, pbar = m.pbar, varx = m.var_x;
  } catch (const Error& e) {
    if (e.kind() != ErrorKind::ZeroNorm) throw;
  }
}

/// max |d rho/dt + dj/dx| with central differences, skipping nodes whose
/// stencils reach within 2h of x_c or of a jump in V.
inline double grid_continuity_residual(std::span<const double> x, std::span<const cplx> before,
                                       std::span<const cplx> now, std::span<const cplx> after,
                                       double dt, double xc, std::span<const double> jumps) {
  const std::size_t n = x.size();
  if (n < 5) return 0.0;
  const double h = grid_spacing(x);
  std::vector<double> current(n, 0.0);
  for (std::size_t i = 1; i + 1 < n; ++i)
    current[i] = std::imag(std::conj(now[i]) * (now[i + 1] - now[i - 1])) / (2.0 * h);
  double worst = 0.0;
  for (std::size_t i = 2; i + 2 < n; ++i) {
    if (std::abs(x[i] - xc) < 2.0 * h + 1e-9 * h) continue;
    if (std::any_of(jumps.begin(), jumps.end(),
                    [&](double b) { return std::abs(x[i] - b) < 2.0 * h; }))
      continue;
    const double drho = (std::norm(after[i]) - std::norm(before[i])) / (2.0 * dt);
    const double dj = (current[i + 1] - current[i - 1]) / (2.0 * h);
    worst = std::max(worst, std::abs(drho + dj));
  }
  return worst;
}

}  // namespace detail

inline DiagnosticsRow diagnostics_at(const Synthesizer& s, double t, double dt) {
  const auto now = s.snapshot(t);
  const auto before = s.snapshot(t - dt);
  const auto after = s.snapshot(t + dt);
  DiagnosticsRow row;
  row.t = t;
  const auto n = norms(now);
  row.T = n.T, row.R = n.R, row.total = n.total;
  row.overlap = overlap(now);
  detail::fill_moments(now, Component::full, row.xbar_full, row.pbar_full, row.varx_full);
  detail::fill_moments(now, Component::tr, row.xbar_tr, row.pbar_tr, row.varx_tr);
  detail::fill_moments(now, Component::ref, row.xbar_ref, row.pbar_ref, row.varx_ref);
  const auto jumps = potential_jumps(s.spec());
  for (Component c : {Component::tr, Component::ref})
    row.continuity_residual =
        std::max(row.continuity_residual,
                 detail::grid_continuity_residual(now.x, before.component(c), now.component(c),
                                                  after.component(c), dt, now.x_c, jumps));
  for (std::size_t i = 0; i < now.x.size(); ++i)
    row.identity_residual =
        std::max(row.identity_residual, std::abs(now.tr[i] + now.ref[i] - now.full[i]));
  // psi_ref vanishes at x_c itself, so its current there is zero for every t.
  if (const auto kink = kink_index(now.x, now.x_c); kink && *kink > 0) {
    const auto d = piecewise_derivative(now.ref, grid_spacing(now.x), kink);
    const std::size_t i = *kink - 1;
    row.ref_current_at_cut = std::imag(std::conj(now.ref[i]) * d[i]);
  }
  return row;
}

inline std::vector<DiagnosticsRow> diagnostics_series(const PotentialSpec& spec,
                                                      const PacketSpec& packet,
                                                      std::span<const double> times,
                                                      std::vector<double> x_grid,
                                                      const DiagnosticsOptions& opt = {}) {
  if (!(opt.dt > 0.0))
    throw Error(ErrorKind::InvalidArgument, "diagnostics", "dt must be positive");
  const Synthesizer s(spec, packet, std::move(x_grid), opt.synthesis, opt.exec);
  std::vector<DiagnosticsRow> rows;
  rows.reserve(times.size());
  for (double t : times) rows.push_back(diagnostics_at(s, t, opt.dt));
  return rows;
}

struct QuadraticFit {
  double c0 = 0.0, c1 = 0.0, c2 = 0.0;  // y = c0 + c1 t + c2 t^2
  double r_squared = 0.0;
};

/// Least-squares quadratic through (t_i, y_i), solved in t centred on its mean.
inline QuadraticFit fit_quadratic(std::span<const double> t, std::span<const double> y) {
  const std::size_t n = t.size();
  if (n < 3 || y.size() != n)
    throw Error(ErrorKind::InvalidArgument, "fit_quadratic", "need at least 3 matching samples");
  double mean = 0.0;
  for (double v : t) mean += v;
  mean /= static_cast<double>(n);
  double s[5] = {}, r[3] = {};
  for (std::size_t i = 0; i < n; ++i) {
    const double u = t[i] - mean;
    double p = 1.0;
    for (int k = 0; k < 5; ++k) {
      s[k] += p;
      if (k < 3) r[k] += p * y[i];
      p *= u;
    }
  }
  // Normal equations [[s0 s1 s2][s1 s2 s3][s2 s3 s4]] b = r by Cramer's rule.
  auto det3 = [](double a, double b, double c, double d, double e, double f, double g, double h,
                 double i) { return a * (e * i - f * h) - b * (d * i - f * g) + c * (d * h - e * g); };
  const double d = det3(s[0], s[1], s[2], s[1], s[2], s[3], s[2], s[3], s[4]);
  if (d == 0.0) throw Error(ErrorKind::SolveSingular, "fit_quadratic", "degenerate sample times");
  const double b0 = det3(r[0], s[1], s[2], r[1], s[2], s[3], r[2], s[3], s[4]) / d;
  const double b1 = det3(s[0], r[0], s[2], s[1], r[1], s[3], s[2], r[2], s[4]) / d;
  const double b2 = det3(s[0], s[1], r[0], s[1], s[2], r[1], s[2], s[3], r[2]) / d;
  QuadraticFit fit;
  fit.c2 = b2;
  fit.c1 = b1 - 2.0 * b2 * mean;
  fit.c0 = b0 - b1 * mean + b2 * mean * mean;
  double ybar = 0.0;
  for (double v : y) ybar += v;
  ybar /= static_cast<double>(n);
  double ss_res = 0.0, ss_tot = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double u = t[i] - mean;
    const double e = y[i] - (b0 + b1 * u + b2 * u * u);
    ss_res += e * e;
    ss_tot += (y[i] - ybar) * (y[i] - ybar);
  }
  fit.r_squared = ss_tot > 0.0 ? 1.0 - ss_res / ss_tot : 1.0;
  return fit;
}

}  // namespace qsplit
