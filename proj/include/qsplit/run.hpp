#pragma once

// Subcommand orchestration: each run writes its CSV tables, the echoed
// config and a metadata record into the output directory.

#include <charconv>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "qsplit/clocks.hpp"
#include "qsplit/config.hpp"
#include "qsplit/diagnostics.hpp"
#include "qsplit/error.hpp"
#include "qsplit/packet.hpp"
#include "qsplit/scattering.hpp"
#include "qsplit/splitting.hpp"
#include "qsplit/tdse_oracle.hpp"

namespace qsplit {

inline constexpr std::string_view kVersion = "1.0.0";

enum ExitCode : int { kExitOk = 0, kExitSchema = 2, kExitNumerical = 3, kExitInternal = 4 };

inline int exit_code(ErrorKind kind) noexcept {
  switch (kind) {
    case ErrorKind::SchemaError:
    case ErrorKind::IoError: return kExitSchema;
    default: return kExitNumerical;
  }
}

/// Shortest decimal that reads back to the same double.
inline std::string format_number(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

class CsvWriter {
 public:
  CsvWriter(const std::filesystem::path& path, std::vector<std::string> header)
      : path_(path), out_(path, std::ios::binary), columns_(header.size()) {
    if (!out_) throw Error(ErrorKind::IoError, "write_csv", "cannot open " + path.string());
    write_line(header);
  }

  void row(const std::vector<double>& values) {
    std::vector<std::string> cells;
    cells.reserve(values.size());
    for (double v : values) cells.push_back(format_number(v));
    write_line(cells);
  }

  void row_cells(const std::vector<std::string>& cells) { write_line(cells); }

 private:
  void write_line(const std::vector<std::string>& cells) {
    if (cells.size() != columns_)
      throw Error(ErrorKind::InvalidArgument, "write_csv", "row width does not match the header");
    for (std::size_t i = 0; i < cells.size(); ++i) {
      if (i) out_ << ',';
      out_ << cells[i];
    }
    out_ << '\n';
    if (!out_) throw Error(ErrorKind::IoError, "write_csv", "write failed for " + path_.string());
  }

  std::filesystem::path path_;
  std::ofstream out_;
  std::size_t columns_;
};

struct RunContext {
  RunConfig config;
  std::filesystem::path out;
  Executor exec;
  json summary = json::object();  // subcommand results for metadata.json
};

namespace detail {

inline const PacketSpec& require_packet(const RunConfig& c, const char* op) {
  if (!c.packet) throw Error(ErrorKind::SchemaError, op, "packet: section required");
  return *c.packet;
}

inline const std::vector<double>& require_energies(const RunConfig& c, const char* op) {
  if (c.energies.empty()) throw Error(ErrorKind::SchemaError, op, "energies: at least one required");
  return c.energies;
}

inline const std::vector<double>& require_times(const RunConfig& c, const char* op) {
  if (c.times.empty()) throw Error(ErrorKind::SchemaError, op, "times: at least one required");
  return c.times;
}

/// Psi_full of the packet at time t on a long grid, synthesized in blocks so
/// the stored stationary samples stay small.
inline std::vector<cplx> blocked_full(const PotentialSpec& spec, const PacketSpec& packet,
                                      const std::vector<double>& x, double t,
                                      const SynthesisOptions& opt, const Executor& exec,
                                      std::size_t block = 4096) {
  std::vector<cplx> out;
  out.reserve(x.size());
  for (std::size_t lo = 0; lo < x.size(); lo += block) {
    const std::size_t hi = std::min(x.size(), lo + block);
    const Synthesizer s(spec, packet, std::vector<double>(x.begin() + lo, x.begin() + hi), opt,
                        exec);
    const auto snap = s.snapshot(t);
    out.insert(out.end(), snap.full.begin(), snap.full.end());
  }
  return out;
}

inline std::vector<double> complex_cells(std::initializer_list<cplx> values) {
  std::vector<double> out;
  for (const auto& v : values) {
    out.push_back(v.real());
    out.push_back(v.imag());
  }
  return out;
}

inline std::vector<std::string> complex_header(std::initializer_list<const char*> names) {
  std::vector<std::string> out;
  for (const char* n : names) {
    out.push_back(std::string("Re_") + n);
    out.push_back(std::string("Im_") + n);
  }
  return out;
}

template <class T>
std::vector<T> concat(std::vector<T> a, const std::vector<T>& b) {
  a.insert(a.end(), b.begin(), b.end());
  return a;
}

}  // namespace detail

inline void run_stationary(RunContext& ctx) {
  const auto& c = ctx.config;
  const auto& spec = *c.potential;
  CsvWriter csv(ctx.out / "stationary.csv",
                {"E", "k", "T", "R", "Re_A_T", "Im_A_T", "Re_A_R", "Im_A_R", "unitarity_residual"});
  double worst = 0.0;
  for (double e : detail::require_energies(c, "stationary")) {
    const auto mode = EnergyMode::from_energy(e);
    const auto amp = solve_full(spec, mode);
    const double residual = std::abs(amp.T + amp.R - 1.0);
    worst = std::max(worst, residual);
    csv.row({e, mode.k(), amp.T, amp.R, amp.transmitted.real(), amp.transmitted.imag(),
             amp.reflected.real(), amp.reflected.imag(), residual});
  }
  ctx.summary["max_unitarity_residual"] = worst;
}

inline void run_decompose(RunContext& ctx) {
  const auto& c = ctx.config;
  const auto& spec = *c.potential;
  const auto x = uniform_grid(c.decompose_grid.x_min, c.decompose_grid.x_max, c.decompose_grid.n);
  CsvWriter fields(ctx.out / "decompose.csv",
                   detail::concat<std::string>(
                       {"E", "x"}, detail::complex_header({"full", "TR", "REF", "tr", "ref"})));
  CsvWriter report(ctx.out / "decompose_report.csv",
                   {"E", "T", "R", "Re_A_tr_in", "Im_A_tr_in", "Re_A_ref_in", "Im_A_ref_in",
                    "root_sign", "parity", "state_sum_residual", "piecewise_sum_residual",
                    "midpoint_residual", "rejected_midpoint_residual", "parity_residual",
                    "tr_norm_residual", "ref_norm_residual", "Re_slope_jump_tr",
                    "Im_slope_jump_tr"});
  for (double e : detail::require_energies(c, "decompose")) {
    const auto dec = build_decomposition(spec, EnergyMode::from_energy(e), x);
    for (std::size_t i = 0; i < x.size(); ++i)
      fields.row(detail::concat<double>(
          {e, x[i]}, detail::complex_cells({dec.psi_full.values[i], dec.psi_TR.values[i],
                                            dec.psi_REF.values[i], dec.psi_tr.values[i],
                                            dec.psi_ref.values[i]})));
    const auto& r = dec.report;
    const auto jump = exact_derivative_jump(dec.states);
    report.row_cells({format_number(e), format_number(dec.amplitudes.T),
                      format_number(dec.amplitudes.R), format_number(dec.split.tr_in.real()),
                      format_number(dec.split.tr_in.imag()), format_number(dec.split.ref_in.real()),
                      format_number(dec.split.ref_in.imag()),
                      format_number(dec.split.root_sign),
                      std::string(to_string(dec.split.parity)),
                      format_number(r.state_sum_residual), format_number(r.piecewise_sum_residual),
                      format_number(r.midpoint_residual),
                      format_number(r.rejected_midpoint_residual),
                      format_number(r.parity_residual), format_number(r.tr_norm_residual),
                      format_number(r.ref_norm_residual), format_number(jump.tr.real()),
                      format_number(jump.tr.imag())});
  }
}

inline void run_evolve(RunContext& ctx) {
  const auto& c = ctx.config;
  const auto& packet = detail::require_packet(c, "evolve");
  const auto& times = detail::require_times(c, "evolve");
  const auto full_grid = position_grid(c);
  std::vector<double> x;
  for (std::size_t i = 0; i < full_grid.size(); i += c.x_stride) x.push_back(full_grid[i]);
  const Synthesizer s(*c.potential, packet, x, c.synthesis, ctx.exec);
  CsvWriter csv(ctx.out / "evolve.csv",
                detail::concat<std::string>(
                    {"t", "x"}, detail::complex_header({"full", "TR", "REF", "tr", "ref"})));
  for (double t : times) {
    const auto f = s.snapshot(t);
    for (std::size_t i = 0; i < x.size(); ++i)
      csv.row(detail::concat<double>(
          {t, x[i]},
          detail::complex_cells({f.full[i], f.tr_state[i], f.ref_state[i], f.tr[i], f.ref[i]})));
  }
  ctx.summary["x_points"] = x.size();
  ctx.summary["samples"] = times.size();
}

inline void run_diagnostics(RunContext& ctx) {
  const auto& c = ctx.config;
  const auto& packet = detail::require_packet(c, "diagnostics");
  const auto& times = detail::require_times(c, "diagnostics");
  DiagnosticsOptions opt;
  opt.dt = c.diagnostics_dt;
  opt.synthesis = c.synthesis;
  opt.exec = ctx.exec;
  const auto rows = diagnostics_series(*c.potential, packet, times, position_grid(c), opt);
  CsvWriter csv(ctx.out / "diagnostics.csv",
                {"t", "T", "R", "Re_overlap", "Im_overlap", "xbar_full", "pbar_full", "varx_full",
                 "xbar_tr", "xbar_ref", "continuity_residual", "total", "pbar_tr", "pbar_ref",
                 "varx_tr", "varx_ref", "identity_residual", "ref_current_at_cut"});
  double worst_sum = 0.0, worst_drift = 0.0, worst_re = 0.0, worst_identity = 0.0;
  for (const auto& r : rows) {
    csv.row({r.t, r.T, r.R, r.overlap.real(), r.overlap.imag(), r.xbar_full, r.pbar_full,
             r.varx_full, r.xbar_tr, r.xbar_ref, r.continuity_residual, r.total, r.pbar_tr,
             r.pbar_ref, r.varx_tr, r.varx_ref, r.identity_residual, r.ref_current_at_cut});
    worst_sum = std::max(worst_sum, std::abs(r.T + r.R - 1.0));
    worst_drift = std::max(worst_drift, std::abs(r.T - rows.front().T));
    worst_re = std::max(worst_re, std::abs(r.overlap.real()));
    worst_identity = std::max(worst_identity, r.identity_residual);
  }
  // Monitored, not enforced: the run records how far each invariant holds.
  ctx.summary["max_abs_T_plus_R_minus_1"] = worst_sum;
  ctx.summary["max_abs_T_drift"] = worst_drift;
  ctx.summary["max_abs_re_overlap"] = worst_re;
  ctx.summary["max_identity_residual"] = worst_identity;
  const auto& last = rows.back();
  ctx.summary["final_overlap_ratio"] =
      std::abs(last.overlap) / std::sqrt(std::max(last.T * last.R, 1e-300));
  ctx.summary["final_ref_current_at_cut"] = last.ref_current_at_cut;
}

/// Returns false when the cross-method distance exceeds the tolerance.
inline bool run_oracle_check(RunContext& ctx) {
  const auto& c = ctx.config;
  const auto& packet = detail::require_packet(c, "oracle-check");
  const auto& spec = *c.potential;
  const auto& o = c.oracle;
  const auto x = o.grid.nodes();
  ComponentField initial{x, detail::blocked_full(spec, packet, x, 0.0, c.synthesis, ctx.exec)};
  const auto run = crank_nicolson_propagate(spec, initial, o.grid, o.sample_times);

  CsvWriter series(ctx.out / "oracle_series.csv", {"t", "l2", "linf"});
  double l2 = 0.0, linf = 0.0, t_max = 0.0;
  for (std::size_t i = 0; i < run.times.size(); ++i) {
    const auto cn = subsample(run.fields[i], 0, o.compare_stride);
    const Synthesizer s(spec, packet, cn.x, c.synthesis, ctx.exec);
    const auto snap = s.snapshot(run.times[i]);
    const auto d = compare_fields(ComponentField{snap.x, snap.full}, cn);
    series.row({run.times[i], d.l2, d.linf});
    l2 = std::max(l2, d.l2);
    linf = std::max(linf, d.linf);
    t_max = std::max(t_max, run.times[i]);
  }
  const bool pass = l2 < o.tolerance;
  CsvWriter csv(ctx.out / "oracle.csv",
                {"t_max", "l2", "linf", "pass", "norm_drift", "wall_probability"});
  csv.row_cells({format_number(t_max), format_number(l2), format_number(linf),
                 pass ? "pass" : "fail", format_number(run.norm_drift),
                 format_number(run.wall_probability)});
  ctx.summary["l2"] = l2;
  ctx.summary["pass"] = pass;
  return pass;
}

namespace detail {

inline std::vector<double> clock_cells(double e, double length, const ClockResult& r) {
  const double nan = std::numeric_limits<double>::quiet_NaN();
  double omega_min = nan, residual = nan;
  for (const auto* est : {r.larmor_tr ? &*r.larmor_tr : nullptr,
                          r.larmor_ref ? &*r.larmor_ref : nullptr}) {
    if (!est) continue;
    omega_min = est->omegas.back();
    residual = std::isnan(residual) ? est->residuals.back()
                                    : std::max(residual, est->residuals.back());
  }
  return {e,
          length,
          r.dwell_tr.value_or(nan),
          r.dwell_ref.value_or(nan),
          r.larmor_tr ? r.larmor_tr->limit : nan,
          r.larmor_ref ? r.larmor_ref->limit : nan,
          omega_min,
          residual};
}

inline const std::vector<std::string> kClockColumns{
    "E", "L", "tau_dwell_tr", "tau_dwell_ref", "tau_larmor_tr", "tau_larmor_ref", "omega_min",
    "residual"};

inline void raw_rows(CsvWriter& csv, double e, const ClockResult& r) {
  for (const auto& [name, est] : {std::pair{"tr", &r.larmor_tr}, std::pair{"ref", &r.larmor_ref}}) {
    if (!*est) continue;
    const auto& v = **est;
    for (std::size_t i = 0; i < v.omegas.size(); ++i)
      csv.row_cells({format_number(e), name, format_number(v.omegas[i]), format_number(v.raw[i]),
                     format_number(v.out_of_plane[i]), format_number(v.residuals[i])});
  }
}

}  // namespace detail

inline void run_clock(RunContext& ctx) {
  const auto& c = ctx.config;
  const auto& spec = *c.potential;
  const auto& energies = detail::require_energies(c, "clock");
  CsvWriter csv(ctx.out / "clock.csv", detail::kClockColumns);
  CsvWriter raw(ctx.out / "clock_raw.csv",
                {"E", "subprocess", "omega", "raw", "out_of_plane", "residual"});
  std::vector<ClockResult> results(energies.size());
  ctx.exec.for_each(energies.size(), [&](std::size_t i) {
    const auto mode = EnergyMode::from_energy(energies[i]);
    results[i] = clock_times(spec, mode,
                             ClockConfig::relative(mode.energy(), c.clock.omega_factors,
                                                   c.clock.extrapolation_order),
                             c.clock.panels);
  });
  for (std::size_t i = 0; i < energies.size(); ++i) {
    csv.row(detail::clock_cells(energies[i], spec.length(), results[i]));
    detail::raw_rows(raw, energies[i], results[i]);
  }

  if (c.packet && c.clock.packet_readout) {
    const auto& packet = *c.packet;
    const double e0 = 0.5 * packet.k0 * packet.k0;
    const auto config =
        ClockConfig::relative(e0, c.clock.omega_factors, c.clock.extrapolation_order);
    CsvWriter readout(ctx.out / "clock_packet.csv",
                      {"subprocess", "t", "peak_x", "overlap_ratio", "outgoing_fraction",
                       "tau_packet", "tau_spectral", "relative_difference"});
    const auto x = position_grid(c);
    for (Subprocess s : {Subprocess::Transmission, Subprocess::Reflection}) {
      PacketReadout r;
      try {
        r = larmor_packet_readout(spec, packet, config, s, c.clock.readout_time, x, c.synthesis,
                                  ctx.exec);
      } catch (const Error& e) {
        if (e.kind() != ErrorKind::ZeroFlux) throw;
        continue;
      }
      const double ref = spectral_average_larmor(spec, packet, c.clock.omega_factors, s,
                                                 c.synthesis, ctx.exec);
      readout.row_cells({std::string(to_string(s)), format_number(r.t), format_number(r.peak_x),
                         format_number(r.overlap_ratio), format_number(r.outgoing_fraction),
                         format_number(r.estimate.limit), format_number(ref),
                         format_number(r.estimate.limit / ref - 1.0)});
    }
  }
}

inline void run_hartman(RunContext& ctx) {
  const auto& h = ctx.config.hartman;
  const auto rows = hartman_sweep(h.v0, h.energy_ratio, h.kappa_lengths,
                                  ctx.config.clock.omega_factors, h.a, ctx.exec);
  auto columns = detail::kClockColumns;
  columns.insert(columns.begin(), "kappa_L");
  CsvWriter csv(ctx.out / "hartman.csv", columns);
  for (const auto& r : rows)
    csv.row(detail::concat<double>({r.kappa_length},
                                   detail::clock_cells(r.times.energy, r.times.length, r.times)));
  ctx.summary["dwell_tr_strictly_increasing"] = strictly_increasing_dwell(rows);
}

inline const std::map<std::string, std::function<bool(RunContext&)>>& subcommands() {
  static const std::map<std::string, std::function<bool(RunContext&)>> table{
      {"stationary", [](RunContext& c) { return run_stationary(c), true; }},
      {"decompose", [](RunContext& c) { return run_decompose(c), true; }},
      {"evolve", [](RunContext& c) { return run_evolve(c), true; }},
      {"diagnostics", [](RunContext& c) { return run_diagnostics(c), true; }},
      {"oracle-check", [](RunContext& c) { return run_oracle_check(c); }},
      {"clock", [](RunContext& c) { return run_clock(c), true; }},
      {"hartman-sweep", [](RunContext& c) { return run_hartman(c), true; }},
  };
  return table;
}

inline json tolerances() {
  return {{"symmetry", kSymmetryTolerance},
          {"normalization", kNormalizationTolerance},
          {"midpoint", kParityTolerance},
          {"oddness", kOddnessTolerance},
          {"packet_norm", kNormTolerance},
          {"overlap_real", kOverlapRealTolerance},
          {"overlap_decay_fraction", kOverlapDecayFraction},
          {"zero_norm", kZeroNorm},
          {"zero_flux", kZeroFlux},
          {"max_relative_field", kMaxRelativeField},
          {"boundary_contamination", kContaminationLimit},
          {"max_opacity", kMaxOpacity}};
}

inline void write_json(const std::filesystem::path& path, const json& doc) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorKind::IoError, "write_json", "cannot open " + path.string());
  out << doc.dump(2) << '\n';
}

/// Runs one subcommand and writes config.json, metadata.json and, on
/// failure, error.json. Returns the process exit code.
inline int run(const std::string& subcommand, RunConfig config) {
  const auto start = std::chrono::steady_clock::now();
  RunContext ctx{std::move(config), {}, {}, json::object()};
  ctx.out = ctx.config.output_dir;
  ctx.exec.workers = ctx.config.workers;

  auto write_error = [&](const std::string& kind, const std::string& op, const std::string& detail,
                         int code) {
    try {
      write_json(ctx.out / "error.json", {{"subcommand", subcommand},
                                          {"kind", kind},
                                          {"operation", op},
                                          {"detail", detail},
                                          {"exit_code", code}});
    } catch (...) {
    }
    return code;
  };

  const auto it = subcommands().find(subcommand);
  std::error_code ec;
  std::filesystem::create_directories(ctx.out, ec);
  if (ec) return kExitSchema;
  if (it == subcommands().end())
    return write_error("SchemaError", "run", "unknown subcommand " + subcommand, kExitSchema);

  try {
    std::filesystem::remove(ctx.out / "error.json", ec);
    write_json(ctx.out / "config.json", to_json(ctx.config));
    const bool ok = it->second(ctx);
    const double wall =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    write_json(ctx.out / "metadata.json", {{"subcommand", subcommand},
                                           {"version", std::string(kVersion)},
                                           {"workers", ctx.config.workers},
                                           {"wall_time_s", wall},
                                           {"tolerances", tolerances()},
                                           {"summary", ctx.summary}});
    if (!ok)
      return write_error("InvariantViolated", subcommand, "result outside its tolerance; see CSV",
                         kExitNumerical);
    return kExitOk;
  } catch (const Error& e) {
    const int code = exit_code(e.kind());
    return write_error(std::string(to_string(e.kind())), e.operation(), e.detail(), code);
  } catch (const std::exception& e) {
    return write_error("Internal", subcommand, e.what(), kExitInternal);
  }
}

}  // namespace qsplit
