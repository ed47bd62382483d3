#pragma once

// Run configuration: a JSON document validated against a fixed schema, with
// every default written back so the echoed document replays the run.

#include <cmath>
#include <filesystem>
#include <fstream>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "qsplit/clocks.hpp"
#include "qsplit/error.hpp"
#include "qsplit/packet.hpp"
#include "qsplit/potential.hpp"
#include "qsplit/tdse_oracle.hpp"

namespace qsplit {

using json = nlohmann::ordered_json;

struct PositionGridConfig {
  double x_min = 0.0;
  double x_max = 0.0;
  double spacing = 0.0;  // nodes are x_c + i * spacing
};

struct DecomposeGridConfig {
  double x_min = 0.0;
  double x_max = 0.0;
  std::size_t n = 801;
};

struct ClockSection {
  std::vector<double> omega_factors{1e-2, 1e-3, 1e-4};  // omega = factor * E
  int extrapolation_order = 2;
  std::size_t panels = 2048;
  double readout_time = 100.0;
  bool packet_readout = true;
};

struct OracleSection {
  GridSpec grid;
  std::vector<double> sample_times{0.0, 40.0, 80.0};
  double tolerance = 1e-3;
  std::size_t compare_stride = 4;  // every n-th oracle node is compared
};

struct HartmanSection {
  double v0 = 1.0;
  double energy_ratio = 0.5;
  std::vector<double> kappa_lengths{2, 3, 4, 5, 6, 7, 8, 9, 10};
  double a = 0.0;
};

struct RunConfig {
  double a = 0.0;
  std::vector<Segment> segments;
  std::optional<PotentialSpec> potential;
  std::vector<double> energies;
  std::optional<PacketSpec> packet;
  SynthesisOptions synthesis;
  PositionGridConfig grid;
  DecomposeGridConfig decompose_grid;
  std::vector<double> times;
  double diagnostics_dt = 0.01;
  ClockSection clock;
  OracleSection oracle;
  HartmanSection hartman;
  std::string output_dir = "out";
  std::size_t x_stride = 4;
  unsigned workers = 1;
};

namespace detail {

[[noreturn]] inline void schema_fail(const std::string& path, const std::string& what) {
  throw Error(ErrorKind::SchemaError, "parse_config", path + ": " + what);
}

inline void allow_keys(const json& obj, const std::string& path, std::set<std::string> keys) {
  if (!obj.is_object()) schema_fail(path.empty() ? "<root>" : path, "expected an object");
  for (const auto& [k, v] : obj.items())
    if (!keys.contains(k)) schema_fail(path.empty() ? k : path + "." + k, "unknown key");
}

inline std::string join(const std::string& path, const std::string& key) {
  return path.empty() ? key : path + "." + key;
}

inline double number(const json& obj, const std::string& path, const std::string& key,
                     std::optional<double> fallback = std::nullopt) {
  if (!obj.contains(key)) {
    if (fallback) return *fallback;
    schema_fail(join(path, key), "required number is missing");
  }
  const auto& v = obj.at(key);
  if (!v.is_number()) schema_fail(join(path, key), "expected a number");
  const double d = v.get<double>();
  if (!std::isfinite(d)) schema_fail(join(path, key), "must be finite");
  return d;
}

inline std::size_t count(const json& obj, const std::string& path, const std::string& key,
                         std::size_t fallback) {
  if (!obj.contains(key)) return fallback;
  const auto& v = obj.at(key);
  if (!v.is_number_integer() || v.get<long long>() < 0)
    schema_fail(join(path, key), "expected a non-negative integer");
  return v.get<std::size_t>();
}

inline std::vector<double> number_list(const json& v, const std::string& path) {
  if (!v.is_array()) schema_fail(path, "expected an array of numbers");
  std::vector<double> out;
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (!v[i].is_number()) schema_fail(path + "[" + std::to_string(i) + "]", "expected a number");
    out.push_back(v[i].get<double>());
  }
  return out;
}

/// Either an explicit list or {"start", "stop", "step"} (stop inclusive).
inline std::vector<double> time_list(const json& v, const std::string& path) {
  if (v.is_array()) return number_list(v, path);
  allow_keys(v, path, {"start", "stop", "step"});
  const double start = number(v, path, "start", 0.0);
  const double stop = number(v, path, "stop");
  const double step = number(v, path, "step");
  if (!(step > 0.0) || stop < start) schema_fail(path, "need step > 0 and stop >= start");
  const auto n = static_cast<std::size_t>(std::floor((stop - start) / step + 1e-9));
  std::vector<double> out;
  for (std::size_t i = 0; i <= n; ++i) out.push_back(start + static_cast<double>(i) * step);
  return out;
}

/// Library errors raised while checking a config are reported as schema
/// errors that keep the original kind in the message.
template <class Fn>
void as_schema(const std::string& path, Fn&& fn) {
  try {
    fn();
  } catch (const Error& e) {
    if (e.kind() == ErrorKind::SchemaError) throw;
    schema_fail(path, std::string(to_string(e.kind())) + ": " + e.detail());
  }
}

}  // namespace detail

inline RunConfig config_from_json(const json& doc) {
  using namespace detail;
  allow_keys(doc, "", {"potential", "energy", "energies", "packet", "synthesis", "grid",
                       "decompose_grid", "times", "diagnostics", "clock", "oracle", "hartman",
                       "output_dir", "x_stride", "workers"});
  RunConfig c;

  if (!doc.contains("potential")) schema_fail("potential", "required section is missing");
  const auto& pot = doc.at("potential");
  allow_keys(pot, "potential", {"a", "segments"});
  c.a = number(pot, "potential", "a", 0.0);
  if (!pot.contains("segments") || !pot.at("segments").is_array() || pot.at("segments").empty())
    schema_fail("potential.segments", "expected a non-empty array of [width, height] pairs");
  const auto& segs = pot.at("segments");
  for (std::size_t i = 0; i < segs.size(); ++i) {
    const std::string p = "potential.segments[" + std::to_string(i) + "]";
    const auto pair = number_list(segs[i], p);
    if (pair.size() != 2) schema_fail(p, "expected [width, height]");
    c.segments.push_back({pair[0], pair[1]});
  }
  as_schema("potential.segments", [&] { c.potential = make_piecewise(c.a, c.segments); });
  const PotentialSpec& spec = *c.potential;

  if (doc.contains("energy") && doc.contains("energies"))
    schema_fail("energy", "give either energy or energies, not both");
  if (doc.contains("energy")) c.energies = {number(doc, "", "energy")};
  if (doc.contains("energies")) c.energies = number_list(doc.at("energies"), "energies");
  for (std::size_t i = 0; i < c.energies.size(); ++i)
    if (!(c.energies[i] > 0.0))
      schema_fail("energies[" + std::to_string(i) + "]", "energy must be positive");

  if (doc.contains("synthesis")) {
    const auto& s = doc.at("synthesis");
    allow_keys(s, "synthesis", {"n_k", "span_sigmas"});
    c.synthesis.n_k = count(s, "synthesis", "n_k", c.synthesis.n_k);
    c.synthesis.span_sigmas = number(s, "synthesis", "span_sigmas", c.synthesis.span_sigmas);
  }

  if (doc.contains("packet")) {
    const auto& p = doc.at("packet");
    allow_keys(p, "packet", {"k0", "sigma_k", "x0"});
    PacketSpec packet;
    packet.k0 = number(p, "packet", "k0", packet.k0);
    packet.sigma_k = number(p, "packet", "sigma_k", packet.sigma_k);
    packet.x0 = number(p, "packet", "x0", packet.x0);
    as_schema("packet", [&] {
      validate_packet(packet, spec);
      make_spectral_grid(packet, c.synthesis);
    });
    c.packet = packet;

    const auto fallback = default_position_grid(spec, packet, c.synthesis);
    c.grid = {fallback.front(), fallback.back(), grid_spacing(fallback)};
  }
  if (doc.contains("grid")) {
    const auto& g = doc.at("grid");
    allow_keys(g, "grid", {"x_min", "x_max", "spacing"});
    if (!c.packet && !(g.contains("x_min") && g.contains("x_max") && g.contains("spacing")))
      schema_fail("grid", "without a packet every grid field is required");
    c.grid.x_min = number(g, "grid", "x_min", c.grid.x_min);
    c.grid.x_max = number(g, "grid", "x_max", c.grid.x_max);
    c.grid.spacing = number(g, "grid", "spacing", c.grid.spacing);
    if (!(c.grid.spacing > 0.0) || !(c.grid.x_max > c.grid.x_min))
      schema_fail("grid", "need spacing > 0 and x_max > x_min");
  }

  c.decompose_grid = {spec.left_edge() - 2.0 * spec.length(),
                      spec.right_edge() + 2.0 * spec.length(), 801};
  if (doc.contains("decompose_grid")) {
    const auto& g = doc.at("decompose_grid");
    allow_keys(g, "decompose_grid", {"x_min", "x_max", "n"});
    c.decompose_grid.x_min = number(g, "decompose_grid", "x_min", c.decompose_grid.x_min);
    c.decompose_grid.x_max = number(g, "decompose_grid", "x_max", c.decompose_grid.x_max);
    c.decompose_grid.n = count(g, "decompose_grid", "n", c.decompose_grid.n);
    if (c.decompose_grid.n < 2 || !(c.decompose_grid.x_max > c.decompose_grid.x_min))
      schema_fail("decompose_grid", "need n >= 2 and x_max > x_min");
  }

  if (doc.contains("times")) c.times = time_list(doc.at("times"), "times");

  if (doc.contains("diagnostics")) {
    const auto& d = doc.at("diagnostics");
    allow_keys(d, "diagnostics", {"dt"});
    c.diagnostics_dt = number(d, "diagnostics", "dt", c.diagnostics_dt);
    if (!(c.diagnostics_dt > 0.0)) schema_fail("diagnostics.dt", "must be positive");
  }

  if (doc.contains("clock")) {
    const auto& k = doc.at("clock");
    allow_keys(k, "clock",
               {"omega_factors", "extrapolation_order", "panels", "readout_time", "packet_readout"});
    if (k.contains("omega_factors"))
      c.clock.omega_factors = number_list(k.at("omega_factors"), "clock.omega_factors");
    c.clock.extrapolation_order = static_cast<int>(
        count(k, "clock", "extrapolation_order", static_cast<std::size_t>(c.clock.extrapolation_order)));
    c.clock.panels = count(k, "clock", "panels", c.clock.panels);
    c.clock.readout_time = number(k, "clock", "readout_time", c.clock.readout_time);
    if (k.contains("packet_readout")) {
      if (!k.at("packet_readout").is_boolean())
        schema_fail("clock.packet_readout", "expected a boolean");
      c.clock.packet_readout = k.at("packet_readout").get<bool>();
    }
  }
  as_schema("clock", [&] {
    // Factors are relative to E, so validating at E = 1 covers every energy.
    validate_clock(ClockConfig::relative(1.0, c.clock.omega_factors, c.clock.extrapolation_order),
                   1.0);
  });
  if (c.clock.panels < 2) schema_fail("clock.panels", "need at least 2 panels");

  if (doc.contains("oracle")) {
    const auto& o = doc.at("oracle");
    allow_keys(o, "oracle", {"x_min", "x_max", "n_x", "dt", "n_t", "sample_times", "tolerance",
                           "compare_stride"});
    auto& g = c.oracle.grid;
    g.x_min = number(o, "oracle", "x_min", g.x_min);
    g.x_max = number(o, "oracle", "x_max", g.x_max);
    g.n_x = count(o, "oracle", "n_x", g.n_x);
    g.dt = number(o, "oracle", "dt", g.dt);
    g.n_t = count(o, "oracle", "n_t", g.n_t);
    if (o.contains("sample_times"))
      c.oracle.sample_times = time_list(o.at("sample_times"), "oracle.sample_times");
    c.oracle.tolerance = number(o, "oracle", "tolerance", c.oracle.tolerance);
    c.oracle.compare_stride = count(o, "oracle", "compare_stride", c.oracle.compare_stride);
    if (c.oracle.compare_stride == 0) schema_fail("oracle.compare_stride", "must be at least 1");
    if (g.n_x < 3 || !(g.dt > 0.0) || !(g.x_max > g.x_min))
      schema_fail("oracle", "need n_x >= 3, dt > 0 and x_max > x_min");
  }

  if (doc.contains("hartman")) {
    const auto& h = doc.at("hartman");
    allow_keys(h, "hartman", {"V0", "energy_ratio", "kappa_lengths", "a"});
    c.hartman.v0 = number(h, "hartman", "V0", c.hartman.v0);
    c.hartman.energy_ratio = number(h, "hartman", "energy_ratio", c.hartman.energy_ratio);
    c.hartman.a = number(h, "hartman", "a", c.hartman.a);
    if (h.contains("kappa_lengths"))
      c.hartman.kappa_lengths = number_list(h.at("kappa_lengths"), "hartman.kappa_lengths");
    if (!(c.hartman.v0 > 0.0) || !(c.hartman.energy_ratio > 0.0 && c.hartman.energy_ratio < 1.0))
      schema_fail("hartman", "need V0 > 0 and 0 < energy_ratio < 1");
  }

  if (doc.contains("output_dir")) {
    if (!doc.at("output_dir").is_string()) schema_fail("output_dir", "expected a string");
    c.output_dir = doc.at("output_dir").get<std::string>();
  }
  c.x_stride = count(doc, "", "x_stride", c.x_stride);
  if (c.x_stride == 0) schema_fail("x_stride", "must be at least 1");
  c.workers = static_cast<unsigned>(count(doc, "", "workers", c.workers));
  if (c.workers == 0) schema_fail("workers", "must be at least 1");
  return c;
}

inline RunConfig parse_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::IoError, "parse_config", "cannot read " + path.string());
  std::stringstream buffer;
  buffer << in.rdbuf();
  json doc;
  try {
    doc = json::parse(buffer.str());
  } catch (const json::parse_error& e) {
    throw Error(ErrorKind::SchemaError, "parse_config", "<root>: " + std::string(e.what()));
  }
  return config_from_json(doc);
}

/// The materialized configuration; parsing it again yields the same run.
inline json to_json(const RunConfig& c) {
  json doc;
  json segs = json::array();
  for (const auto& s : c.segments) segs.push_back({s.width, s.height});
  doc["potential"] = {{"a", c.a}, {"segments", segs}};
  if (!c.energies.empty()) doc["energies"] = c.energies;
  if (c.packet)
    doc["packet"] = {{"k0", c.packet->k0}, {"sigma_k", c.packet->sigma_k}, {"x0", c.packet->x0}};
  doc["synthesis"] = {{"n_k", c.synthesis.n_k}, {"span_sigmas", c.synthesis.span_sigmas}};
  if (c.grid.spacing > 0.0)
    doc["grid"] = {{"x_min", c.grid.x_min}, {"x_max", c.grid.x_max}, {"spacing", c.grid.spacing}};
  doc["decompose_grid"] = {{"x_min", c.decompose_grid.x_min},
                           {"x_max", c.decompose_grid.x_max},
                           {"n", c.decompose_grid.n}};
  doc["times"] = c.times;
  doc["diagnostics"] = {{"dt", c.diagnostics_dt}};
  doc["clock"] = {{"omega_factors", c.clock.omega_factors},
                  {"extrapolation_order", c.clock.extrapolation_order},
                  {"panels", c.clock.panels},
                  {"readout_time", c.clock.readout_time},
                  {"packet_readout", c.clock.packet_readout}};
  const auto& g = c.oracle.grid;
  doc["oracle"] = {{"x_min", g.x_min},   {"x_max", g.x_max},
                   {"n_x", g.n_x},       {"dt", g.dt},
                   {"n_t", g.n_t},       {"sample_times", c.oracle.sample_times},
                   {"tolerance", c.oracle.tolerance}, {"compare_stride", c.oracle.compare_stride}};
  doc["hartman"] = {{"V0", c.hartman.v0},
                    {"energy_ratio", c.hartman.energy_ratio},
                    {"kappa_lengths", c.hartman.kappa_lengths},
                    {"a", c.hartman.a}};
  doc["output_dir"] = c.output_dir;
  doc["x_stride"] = c.x_stride;
  doc["workers"] = c.workers;
  return doc;
}

/// Position grid of the packet runs, anchored on x_c.
inline std::vector<double> position_grid(const RunConfig& c) {
  if (!(c.grid.spacing > 0.0))
    throw Error(ErrorKind::SchemaError, "position_grid", "grid: no packet and no explicit grid");
  return anchored_grid(c.grid.x_min, c.grid.x_max, c.grid.spacing, c.potential->midpoint());
}

}  // namespace qsplit
