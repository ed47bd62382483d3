#pragma once

// Characteristic times of the transmission and reflection sub-processes.
//
// Dwell time: tau = N / J_in, with N the probability of the piecewise
// component inside the barrier region and J_in = k |A_sub^In|^2 its incident
// flux. Reflection integrates only [a, x_c] since psi_ref vanishes beyond x_c.
//
// Larmor clock: a field confined to [a, b] shifts the barrier by -+ omega/2
// for spin up/down. The in-plane precession angle of a sub-process is
// phi = arg(A_up) - arg(A_down) of its outgoing amplitude, and the raw time
// phi / omega is extrapolated to omega -> 0.

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "qsplit/error.hpp"
#include "qsplit/field.hpp"
#include "qsplit/packet.hpp"
#include "qsplit/parallel.hpp"
#include "qsplit/potential.hpp"
#include "qsplit/scattering.hpp"
#include "qsplit/splitting.hpp"

namespace qsplit {

inline constexpr double kZeroFlux = 1e-14;
inline constexpr double kMaxRelativeField = 0.01;

enum class Subprocess { Transmission, Reflection };

constexpr std::string_view to_string(Subprocess s) noexcept {
  return s == Subprocess::Transmission ? "tr" : "ref";
}

struct ClockConfig {
  std::vector<double> omegas;  // descending, all > 0
  int extrapolation_order = 2;

  /// omega_i = factor_i * E.
  static ClockConfig relative(double energy, std::span<const double> factors, int order = 2) {
    ClockConfig c;
    for (double f : factors) c.omegas.push_back(f * energy);
    c.extrapolation_order = order;
    return c;
  }
};

/// Weak-field regime: omega > 0, descending, omega <= 0.01 E.
inline void validate_clock(const ClockConfig& c, double energy) {
  if (c.omegas.empty())
    throw Error(ErrorKind::InvalidArgument, "larmor_times", "empty omega sequence");
  if (c.extrapolation_order < 1)
    throw Error(ErrorKind::InvalidArgument, "larmor_times", "extrapolation order must be >= 1");
  for (std::size_t i = 0; i < c.omegas.size(); ++i) {
    const double w = c.omegas[i];
    if (!(w > 0.0))
      throw Error(ErrorKind::InvalidArgument, "larmor_times", "omega must be positive");
    if (i > 0 && !(w < c.omegas[i - 1]))
      throw Error(ErrorKind::InvalidArgument, "larmor_times", "omega sequence must descend");
    if (w > kMaxRelativeField * energy * (1.0 + 1e-12))
      throw Error(ErrorKind::InvalidArgument, "larmor_times",
                  "omega = " + std::to_string(w) + " exceeds 0.01 E = " +
                      std::to_string(kMaxRelativeField * energy));
  }
}

namespace detail {

/// Composite Simpson integral of |psi_sub|^2 over [lo, hi], split at every
/// segment boundary and at x_c.
inline double component_probability(const SubprocessStates& sub, Component c, double lo,
                                    double hi, std::size_t panels) {
  std::vector<double> cuts{lo, hi};
  for (double x : sub.scattering().spec().boundaries())
    if (x > lo && x < hi) cuts.push_back(x);
  if (sub.midpoint() > lo && sub.midpoint() < hi) cuts.push_back(sub.midpoint());
  std::sort(cuts.begin(), cuts.end());
  const std::size_t n = panels + (panels % 2);
  double total = 0.0;
  for (std::size_t p = 0; p + 1 < cuts.size(); ++p) {
    const double x0 = cuts[p], x1 = cuts[p + 1];
    const double h = (x1 - x0) / static_cast<double>(n);
    double s = 0.0;
    for (std::size_t i = 0; i <= n; ++i) {
      const double x = i == n ? x1 : x0 + static_cast<double>(i) * h;
      const double v = std::norm(sub.evaluate(c, x).value);
      const double w = (i == 0 || i == n) ? 1.0 : (i % 2 == 1 ? 4.0 : 2.0);
      s += w * v;
    }
    total += s * h / 3.0;
  }
  return total;
}

inline double phase_difference(cplx up, cplx down) { return std::arg(up * std::conj(down)); }

}  // namespace detail

/// Stationary dwell time of one sub-process.
inline double dwell_time(const SubprocessStates& sub, Subprocess which,
                         std::size_t panels = 2048) {
  const auto& spec = sub.scattering().spec();
  const double k = sub.scattering().mode().k();
  const double weight = which == Subprocess::Transmission ? std::norm(sub.split().tr_in)
                                                          : std::norm(sub.split().ref_in);
  if (weight < kZeroFlux)
    throw Error(ErrorKind::ZeroFlux, "dwell_time",
                std::string(to_string(which)) + " sub-process carries no incident flux");
  const double a = spec.left_edge();
  const double hi = which == Subprocess::Transmission ? spec.right_edge() : sub.midpoint();
  const Component c = which == Subprocess::Transmission ? Component::tr : Component::ref;
  return detail::component_probability(sub, c, a, hi, panels) / (k * weight);
}

inline double dwell_time(const StationaryDecomposition& dec, Subprocess which,
                         std::size_t panels = 2048) {
  return dwell_time(dec.states, which, panels);
}

struct RichardsonResult {
  double limit = 0.0;
  std::vector<double> residuals;  // |raw_i - limit|, in omega order
  bool monotone = true;
  bool within_spread = true;
};

/// Polynomial extrapolation to omega -> 0 in u = omega^order (Neville), using
/// every sample; residuals measure each raw value against the limit.
inline RichardsonResult richardson(std::span<const double> omegas, std::span<const double> raw,
                                   int order) {
  const std::size_t n = raw.size();
  std::vector<double> u(n), p(raw.begin(), raw.end());
  for (std::size_t i = 0; i < n; ++i) u[i] = std::pow(omegas[i], order);
  for (std::size_t level = 1; level < n; ++level)
    for (std::size_t i = 0; i + level < n; ++i)
      p[i] = (u[i] * p[i + 1] - u[i + level] * p[i]) / (u[i] - u[i + level]);
  RichardsonResult r;
  r.limit = p[0];
  for (std::size_t i = 0; i < n; ++i) r.residuals.push_back(std::abs(raw[i] - r.limit));
  for (std::size_t i = 1; i < n; ++i)
    if (r.residuals[i] > r.residuals[i - 1]) r.monotone = false;
  if (n >= 2) {
    const double spread = std::abs(raw[n - 1] - raw[n - 2]);
    r.within_spread = std::abs(r.limit - raw[n - 1]) <= spread + 1e-14 * std::abs(r.limit);
  }
  return r;
}

struct LarmorEstimate {
  std::vector<double> omegas;
  std::vector<double> raw;           // phi(omega) / omega
  std::vector<double> out_of_plane;  // ln(|A_up| / |A_down|) / omega, recorded only
  double limit = 0.0;
  std::vector<double> residuals;
  bool within_spread = true;
};

inline LarmorEstimate finish_estimate(LarmorEstimate e, int order) {
  const auto r = richardson(e.omegas, e.raw, order);
  if (!r.monotone)
    throw Error(ErrorKind::ExtrapolationDiverged, "larmor_times",
                "extrapolation residuals grow as omega shrinks");
  e.limit = r.limit;
  e.residuals = r.residuals;
  e.within_spread = r.within_spread;
  return e;
}

/// Stationary Larmor time of one sub-process.
inline LarmorEstimate larmor_times(const PotentialSpec& spec, const EnergyMode& mode,
                                   const ClockConfig& config, Subprocess which) {
  validate_clock(config, mode.energy());
  {
    const auto base = select_odd_split(spec, mode);
    const double w = which == Subprocess::Transmission ? base.amplitudes().T : base.amplitudes().R;
    if (w < kZeroFlux)
      throw Error(ErrorKind::ZeroFlux, "larmor_times",
                  std::string(to_string(which)) + " sub-process is absent at this energy");
  }
  auto outgoing = [&](const PotentialSpec& shifted) {
    // psi_tr leaves through Psi_full's right side, psi_ref through its left.
    const auto sub = select_odd_split(shifted, mode);
    return which == Subprocess::Transmission ? sub.amplitudes().transmitted
                                             : sub.amplitudes().reflected;
  };
  LarmorEstimate e;
  for (double omega : config.omegas) {
    const cplx up = outgoing(spec.shifted(-0.5 * omega));
    const cplx down = outgoing(spec.shifted(+0.5 * omega));
    e.omegas.push_back(omega);
    e.raw.push_back(detail::phase_difference(up, down) / omega);
    e.out_of_plane.push_back(std::log(std::abs(up) / std::abs(down)) / omega);
  }
  return finish_estimate(std::move(e), config.extrapolation_order);
}

struct ClockResult {
  double energy = 0.0;
  double length = 0.0;
  std::optional<double> dwell_tr;
  std::optional<double> dwell_ref;
  std::optional<LarmorEstimate> larmor_tr;
  std::optional<LarmorEstimate> larmor_ref;
};

/// Dwell and Larmor times of both sub-processes; absent sub-processes are
/// left empty instead of raising ZeroFlux.
inline ClockResult clock_times(const PotentialSpec& spec, const EnergyMode& mode,
                               const ClockConfig& config, std::size_t panels = 2048) {
  ClockResult r;
  r.energy = mode.energy();
  r.length = spec.length();
  const auto sub = select_odd_split(spec, mode);
  for (Subprocess s : {Subprocess::Transmission, Subprocess::Reflection}) {
    const double w = s == Subprocess::Transmission ? std::norm(sub.split().tr_in)
                                                   : std::norm(sub.split().ref_in);
    if (w < kZeroFlux) continue;
    const double dwell = dwell_time(sub, s, panels);
    auto larmor = larmor_times(spec, mode, config, s);
    if (s == Subprocess::Transmission) {
      r.dwell_tr = dwell;
      r.larmor_tr = std::move(larmor);
    } else {
      r.dwell_ref = dwell;
      r.larmor_ref = std::move(larmor);
    }
  }
  return r;
}

struct NonInvasiveness {
  std::vector<double> omegas;
  std::vector<double> deviations;  // |(T_up + T_down)/2 - T|
  double exponent = 0.0;           // least-squares slope of log deviation vs log omega
};

/// Convergence of the spin-averaged transmission probability to the
/// field-free value as omega -> 0.
inline NonInvasiveness non_invasiveness(const PotentialSpec& spec, const EnergyMode& mode,
                                        std::span<const double> omegas) {
  NonInvasiveness out;
  const double t0 = solve_full(spec, mode).T;
  for (double w : omegas) {
    const double up = select_odd_split(spec.shifted(-0.5 * w), mode).amplitudes().T;
    const double down = select_odd_split(spec.shifted(+0.5 * w), mode).amplitudes().T;
    out.omegas.push_back(w);
    out.deviations.push_back(std::abs(0.5 * (up + down) - t0));
  }
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  const double n = static_cast<double>(omegas.size());
  for (std::size_t i = 0; i < omegas.size(); ++i) {
    const double lx = std::log(out.omegas[i]);
    const double ly = std::log(std::max(out.deviations[i], std::numeric_limits<double>::min()));
    sx += lx, sy += ly, sxx += lx * lx, sxy += lx * ly;
  }
  out.exponent = (n * sxy - sx * sy) / (n * sxx - sx * sx);
  return out;
}

struct PacketReadout {
  double t = 0.0;
  double peak_x = 0.0;
  double overlap_ratio = 0.0;     // |<psi_tr|psi_ref>| / sqrt(T R)
  double outgoing_fraction = 0.0; // share of the sub-packet past the barrier
  LarmorEstimate estimate;
};

inline constexpr double kReadoutFraction = 0.99;

/// Packet-level Larmor readout: relative phase of the spin-up and spin-down
/// sub-packets at the sub-packet peak, late enough that psi_tr and psi_ref no
/// longer overlap. The omega sequence is relative to E0 = k0^2 / 2.
inline PacketReadout larmor_packet_readout(const PotentialSpec& spec, const PacketSpec& packet,
                                           const ClockConfig& config, Subprocess which, double t,
                                           std::vector<double> x_grid,
                                           SynthesisOptions options = {}, Executor exec = {}) {
  validate_clock(config, 0.5 * packet.k0 * packet.k0);
  const Synthesizer base(spec, packet, std::move(x_grid), options, exec);
  const auto snap = base.snapshot(t);
  const auto n = norms(snap);
  const double sub_norm = which == Subprocess::Transmission ? n.T : n.R;
  if (sub_norm < kZeroNorm)
    throw Error(ErrorKind::ZeroFlux, "larmor_packet_readout",
                std::string(to_string(which)) + " sub-packet is empty");

  PacketReadout out;
  out.t = t;
  const double tr_ref = n.T * n.R;
  const double ov = std::abs(overlap(snap));
  out.overlap_ratio = tr_ref > 0.0 ? ov / std::sqrt(tr_ref) : 0.0;

  const auto psi = snap.component(which == Subprocess::Transmission ? Component::tr : Component::ref);
  const auto& x = snap.x;
  auto outgoing_region = [&](double xi) {
    return which == Subprocess::Transmission ? xi >= spec.right_edge() : xi <= spec.left_edge();
  };
  std::vector<double> outside(x.size());
  double peak = -1.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double rho = std::norm(psi[i]);
    outside[i] = outgoing_region(x[i]) ? rho : 0.0;
    if (outgoing_region(x[i]) && rho > peak) peak = rho, out.peak_x = x[i];
  }
  out.outgoing_fraction = trapezoid<double>(x, outside) / sub_norm;
  if (ov > kOverlapDecayFraction * std::sqrt(tr_ref) || out.outgoing_fraction < kReadoutFraction)
    throw Error(ErrorKind::PrematureReadout, "larmor_packet_readout",
                "at t = " + std::to_string(t) + " overlap ratio is " +
                    std::to_string(out.overlap_ratio) + " and outgoing fraction " +
                    std::to_string(out.outgoing_fraction));

  const Component c = which == Subprocess::Transmission ? Component::tr : Component::ref;
  const std::vector<double> at_peak{out.peak_x};
  LarmorEstimate e;
  for (double omega : config.omegas) {
    const Synthesizer up(spec.shifted(-0.5 * omega), packet, at_peak, options, exec);
    const Synthesizer down(spec.shifted(+0.5 * omega), packet, at_peak, options, exec);
    const cplx vu = up.snapshot(t).component(c)[0];
    const cplx vd = down.snapshot(t).component(c)[0];
    e.omegas.push_back(omega);
    e.raw.push_back(detail::phase_difference(vu, vd) / omega);
    e.out_of_plane.push_back(std::log(std::abs(vu) / std::abs(vd)) / omega);
  }
  out.estimate = finish_estimate(std::move(e), config.extrapolation_order);
  return out;
}

/// Weighted average of stationary Larmor times over the packet spectrum,
/// with weight |f(k)|^2 T(k) (transmission) or |f(k)|^2 R(k) (reflection).
/// The clock's omega factors are taken relative to each mode's energy.
inline double spectral_average_larmor(const PotentialSpec& spec, const PacketSpec& packet,
                                      std::span<const double> omega_factors, Subprocess which,
                                      SynthesisOptions options = {}, Executor exec = {}) {
  const auto grid = make_spectral_grid(packet, options);
  std::vector<double> num(grid.k.size()), den(grid.k.size());
  exec.for_each(grid.k.size(), [&](std::size_t j) {
    const auto mode = EnergyMode::from_wavenumber(grid.k[j]);
    const auto amp = solve_full(spec, mode);
    const double sub = which == Subprocess::Transmission ? amp.T : amp.R;
    const double w = grid.weights[j] * std::norm(packet.spectrum(grid.k[j])) * sub;
    den[j] = w;
    num[j] = w > 0.0 && sub >= kZeroFlux
                 ? w * larmor_times(spec, mode,
                                    ClockConfig::relative(mode.energy(), omega_factors), which)
                           .limit
                 : 0.0;
  });
  double n = 0.0, d = 0.0;
  for (std::size_t j = 0; j < num.size(); ++j) n += num[j], d += den[j];
  return n / d;
}

struct HartmanRow {
  double kappa_length = 0.0;
  ClockResult times;
};

/// Sub-process times of rectangular barriers of height v0 at E = ratio * v0
/// for a list of opacities kappa*L.
inline std::vector<HartmanRow> hartman_sweep(double v0, double energy_ratio,
                                             std::span<const double> kappa_lengths,
                                             std::span<const double> omega_factors,
                                             double a = 0.0, Executor exec = {}) {
  if (!(energy_ratio > 0.0 && energy_ratio < 1.0))
    throw Error(ErrorKind::InvalidArgument, "hartman_sweep", "need 0 < E/V0 < 1");
  const double energy = energy_ratio * v0;
  const double kappa = std::sqrt(2.0 * (v0 - energy));
  const auto mode = EnergyMode::from_energy(energy);
  const auto config = ClockConfig::relative(energy, omega_factors);
  std::vector<HartmanRow> rows(kappa_lengths.size());
  exec.for_each(rows.size(), [&](std::size_t i) {
    const auto spec = make_rectangular(v0, kappa_lengths[i] / kappa, a);
    rows[i] = {kappa_lengths[i], clock_times(spec, mode, config)};
  });
  return rows;
}

/// True when the transmission dwell times increase strictly along the sweep.
inline bool strictly_increasing_dwell(std::span<const HartmanRow> rows) {
  for (std::size_t i = 1; i < rows.size(); ++i)
    if (!(rows[i].times.dwell_tr.value_or(0.0) > rows[i - 1].times.dwell_tr.value_or(0.0)))
      return false;
  return true;
}

}  // namespace qsplit
