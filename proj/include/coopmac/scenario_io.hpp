#pragma once

// JSON scenario files and the shipped presets.
//
// Units at the file boundary: SNR in dB, T in milliseconds, sigma, t_r, t_b,
// SIFS, DIFS and propagation delay in microseconds, frame sizes in bits,
// bit rate in Mbit/s, f_s in Hz, N0 in watts.

#include <cmath>
#include <cstdint>
#include <fstream>
#include <optional>
#include <random>
#include <sstream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "coopmac/model.hpp"
#include "coopmac/random.hpp"

namespace coopmac {

/// Ranges for draws of omitted SNR / target fields.
struct DrawRanges {
  double snr_lo_db = -20.0;
  double snr_hi_db = -15.0;
  double target_lo = 0.95;
  double target_hi = 0.99;
};

namespace io {

using nlohmann::json;

[[noreturn]] inline void fail(const std::string& field, const std::string& what) {
  throw std::invalid_argument("field '" + field + "': " + what);
}

inline void reject_unknown(const json& obj, const std::string& where, std::initializer_list<std::string_view> known) {
  for (auto it = obj.begin(); it != obj.end(); ++it) {
    bool ok = false;
    for (auto k : known) ok = ok || it.key() == k;
    if (!ok) fail(where.empty() ? it.key() : where + "." + it.key(), "unknown field");
  }
}

inline double number(const json& v, const std::string& field) {
  if (!v.is_number()) fail(field, "expected a number");
  return v.get<double>();
}

inline std::int64_t integer(const json& v, const std::string& field) {
  if (v.is_number_integer()) return v.get<std::int64_t>();
  if (v.is_number_float()) {
    const double d = v.get<double>();
    if (std::floor(d) == d && std::abs(d) < 9.0e15) return static_cast<std::int64_t>(d);
  }
  fail(field, "expected an integer");
}

inline std::uint64_t seed_value(const json& v, const std::string& field) {
  if (v.is_number_unsigned()) return v.get<std::uint64_t>();
  const std::int64_t s = integer(v, field);
  if (s < 0) fail(field, "expected a non-negative integer");
  return static_cast<std::uint64_t>(s);
}

/// A number broadcast to `count` entries, or an array of exactly `count`.
inline std::vector<double> vector_field(const json& v, std::size_t count, const std::string& field) {
  if (v.is_number()) return std::vector<double>(count, v.get<double>());
  if (!v.is_array()) fail(field, "expected a number or an array");
  if (v.size() != count) fail(field, "expected " + std::to_string(count) + " entries, got " + std::to_string(v.size()));
  std::vector<double> out;
  for (std::size_t k = 0; k < v.size(); ++k) out.push_back(number(v[k], field + "[" + std::to_string(k) + "]"));
  return out;
}

inline Matrix<double> matrix_field(const json& v, std::size_t rows, std::size_t cols, const std::string& field) {
  if (v.is_number()) return Matrix<double>(rows, cols, v.get<double>());
  if (!v.is_array() || v.size() != rows) fail(field, "expected " + std::to_string(rows) + " rows");
  Matrix<double> out(rows, cols);
  for (std::size_t i = 0; i < rows; ++i) {
    const std::string row = field + "[" + std::to_string(i) + "]";
    if (!v[i].is_array() || v[i].size() != cols) fail(row, "expected " + std::to_string(cols) + " entries");
    for (std::size_t j = 0; j < cols; ++j) out(i, j) = number(v[i][j], row + "[" + std::to_string(j) + "]");
  }
  return out;
}

inline std::pair<double, double> range_field(const json& v, const std::string& field) {
  if (!v.is_array() || v.size() != 2) fail(field, "expected [lo, hi]");
  const double lo = number(v[0], field), hi = number(v[1], field);
  if (!(lo <= hi)) fail(field, "expected lo <= hi");
  return {lo, hi};
}

inline FusionRule fusion_value(const json& v, const std::string& field) {
  if (!v.is_string()) fail(field, "expected a rule name");
  try {
    return FusionRule::parse(v.get<std::string>());
  } catch (const std::exception& e) {
    fail(field, e.what());
  }
}

inline ChannelAssignment assignment_field(const json& v, std::size_t n, std::size_t m, const std::string& field) {
  ChannelAssignment a;
  if (v.is_string()) {
    try {
      a = ChannelAssignment::parse(v.get<std::string>());
    } catch (const std::exception& e) {
      fail(field, e.what());
    }
  } else {
    const Matrix<double> cells = matrix_field(v, n, m, field);
    a = ChannelAssignment(n, m);
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < m; ++j) {
        if (cells(i, j) != 0.0 && cells(i, j) != 1.0) fail(field, "entries must be 0 or 1");
        a.set(i, j, cells(i, j) == 1.0);
      }
  }
  if (a.num_su() != n || a.num_channels() != m) fail(field, "expected an N x M matrix");
  return a;
}

/// Milliseconds whose product with 1000 reproduces `us` exactly.
inline double exact_ms(double us) {
  double ms = us / 1000.0;
  for (int step = 0; step < 8 && ms * 1000.0 != us; ++step)
    ms = std::nextafter(ms, ms * 1000.0 < us ? HUGE_VAL : -HUGE_VAL);
  return ms;
}

inline json matrix_json(const Matrix<double>& mat) {
  json rows = json::array();
  for (std::size_t i = 0; i < mat.rows(); ++i) {
    json row = json::array();
    for (std::size_t j = 0; j < mat.cols(); ++j) row.push_back(mat(i, j));
    rows.push_back(row);
  }
  return rows;
}

}  // namespace io

/// SNRs and targets drawn from `seed`: SNRs row-major first, then targets.
inline void draw_random_fields(Scenario& sc, const DrawRanges& r, bool draw_snr, bool draw_targets) {
  std::mt19937_64 rng(sc.seed);
  const std::size_t n = sc.num_su, m = sc.num_channels;
  Matrix<double> snr(n, m);
  for (std::size_t k = 0; k < n * m; ++k)
    snr(k / m, k % m) = r.snr_lo_db + (r.snr_hi_db - r.snr_lo_db) * uniform_unit(rng);
  std::vector<double> targets(m);
  for (auto& t : targets) t = r.target_lo + (r.target_hi - r.target_lo) * uniform_unit(rng);
  if (draw_snr) sc.snr_db = snr;
  if (draw_targets) sc.target_pd = targets;
}

/// Builds and validates a scenario; omitted fields take the library defaults.
inline Scenario scenario_from_json(const nlohmann::json& doc) {
  using namespace io;
  if (!doc.is_object()) throw std::invalid_argument("scenario: top level must be an object");
  reject_unknown(doc, "",
                 {"N", "M", "seed", "snr_db", "p_idle", "target_pd", "fusion", "sampling_hz", "noise_power_w",
                  "cycle_ms", "report_us", "broadcast_us", "frames", "m0", "W_max", "delta", "random", "assignment",
                  "design"});
  Scenario sc;
  if (!doc.contains("N")) fail("N", "required");
  if (!doc.contains("M")) fail("M", "required");
  const std::int64_t n = integer(doc["N"], "N"), m = integer(doc["M"], "M");
  if (n < 1) fail("N", "must be >= 1");
  if (m < 1) fail("M", "must be >= 1");
  sc.num_su = static_cast<std::size_t>(n);
  sc.num_channels = static_cast<std::size_t>(m);
  if (doc.contains("seed")) sc.seed = seed_value(doc["seed"], "seed");

  DrawRanges ranges;
  if (doc.contains("random")) {
    const json& r = doc["random"];
    if (!r.is_object()) fail("random", "expected an object");
    reject_unknown(r, "random", {"snr_db", "target_pd"});
    if (r.contains("snr_db")) std::tie(ranges.snr_lo_db, ranges.snr_hi_db) = range_field(r["snr_db"], "random.snr_db");
    if (r.contains("target_pd"))
      std::tie(ranges.target_lo, ranges.target_hi) = range_field(r["target_pd"], "random.target_pd");
  }
  draw_random_fields(sc, ranges, !doc.contains("snr_db"), !doc.contains("target_pd"));
  if (doc.contains("snr_db")) sc.snr_db = matrix_field(doc["snr_db"], sc.num_su, sc.num_channels, "snr_db");
  if (doc.contains("target_pd")) sc.target_pd = vector_field(doc["target_pd"], sc.num_channels, "target_pd");
  sc.p_idle = doc.contains("p_idle") ? vector_field(doc["p_idle"], sc.num_channels, "p_idle")
                                     : std::vector<double>(sc.num_channels, 1.0);

  sc.fusion.assign(sc.num_channels, FusionRule::majority());
  if (doc.contains("fusion")) {
    const json& f = doc["fusion"];
    if (f.is_array()) {
      if (f.size() != sc.num_channels) fail("fusion", "expected M entries");
      for (std::size_t j = 0; j < f.size(); ++j) sc.fusion[j] = fusion_value(f[j], "fusion[" + std::to_string(j) + "]");
    } else {
      sc.fusion.assign(sc.num_channels, fusion_value(f, "fusion"));
    }
  }

  if (doc.contains("sampling_hz")) sc.sampling_hz = number(doc["sampling_hz"], "sampling_hz");
  if (doc.contains("noise_power_w")) sc.noise_power = number(doc["noise_power_w"], "noise_power_w");
  if (doc.contains("cycle_ms")) sc.cycle.cycle_us = number(doc["cycle_ms"], "cycle_ms") * 1000.0;
  if (doc.contains("report_us")) sc.cycle.report_us = number(doc["report_us"], "report_us");
  if (doc.contains("broadcast_us")) sc.cycle.broadcast_us = number(doc["broadcast_us"], "broadcast_us");
  if (doc.contains("m0")) sc.max_backoff_stage = static_cast<int>(integer(doc["m0"], "m0"));
  if (doc.contains("W_max")) sc.max_window = static_cast<int>(integer(doc["W_max"], "W_max"));
  if (doc.contains("delta")) sc.growth_threshold = number(doc["delta"], "delta");

  if (doc.contains("frames")) {
    const json& f = doc["frames"];
    if (!f.is_object()) fail("frames", "expected an object");
    reject_unknown(f, "frames",
                   {"phy_header_bits", "mac_header_bits", "packet_bits", "ack_bits", "sifs_us", "difs_us",
                    "prop_delay_us", "slot_us", "bit_rate_mbps"});
    auto take = [&](const char* key, double& dst) {
      if (f.contains(key)) dst = number(f[key], std::string("frames.") + key);
    };
    take("phy_header_bits", sc.frames.phy_header_bits);
    take("mac_header_bits", sc.frames.mac_header_bits);
    take("packet_bits", sc.frames.packet_bits);
    take("ack_bits", sc.frames.ack_bits);
    take("sifs_us", sc.frames.sifs_us);
    take("difs_us", sc.frames.difs_us);
    take("prop_delay_us", sc.frames.prop_delay_us);
    take("slot_us", sc.frames.slot_us);
    take("bit_rate_mbps", sc.frames.bit_rate);
  }

  if (doc.contains("assignment"))
    sc.assignment = assignment_field(doc["assignment"], sc.num_su, sc.num_channels, "assignment");
  if (doc.contains("design")) {
    const json& d = doc["design"];
    if (!d.is_object()) fail("design", "expected an object");
    reject_unknown(d, "design", {"W", "tau_us"});
    if (!d.contains("W")) fail("design.W", "required");
    if (!d.contains("tau_us")) fail("design.tau_us", "required");
    SensingDesign design;
    design.window = static_cast<int>(integer(d["W"], "design.W"));
    design.tau_us = matrix_field(d["tau_us"], sc.num_su, sc.num_channels, "design.tau_us");
    sc.design = design;
  }
  sc.validate();
  return sc;
}

/// Parses JSON text; syntax errors report line and column.
inline Scenario parse_scenario(std::string_view text, std::optional<std::uint64_t> seed = std::nullopt) {
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(text.begin(), text.end());
  } catch (const nlohmann::json::parse_error& e) {
    std::size_t line = 1, col = 1;
    for (std::size_t k = 0; k + 1 < e.byte && k < text.size(); ++k) {
      if (text[k] == '\n') {
        ++line;
        col = 1;
      } else {
        ++col;
      }
    }
    throw std::invalid_argument("parse error at line " + std::to_string(line) + ", column " + std::to_string(col) +
                                ": " + e.what());
  }
  if (seed && doc.is_object()) doc["seed"] = *seed;
  return scenario_from_json(doc);
}

/// Every field written explicitly, so loading the result reproduces `sc`.
inline nlohmann::json scenario_to_json(const Scenario& sc) {
  using nlohmann::json;
  json doc;
  doc["N"] = sc.num_su;
  doc["M"] = sc.num_channels;
  doc["seed"] = sc.seed;
  doc["snr_db"] = io::matrix_json(sc.snr_db);
  doc["p_idle"] = sc.p_idle;
  doc["target_pd"] = sc.target_pd;
  json fusion = json::array();
  for (const auto& f : sc.fusion) fusion.push_back(f.name());
  doc["fusion"] = fusion;
  doc["sampling_hz"] = sc.sampling_hz;
  doc["noise_power_w"] = sc.noise_power;
  doc["cycle_ms"] = io::exact_ms(sc.cycle.cycle_us);
  doc["report_us"] = sc.cycle.report_us;
  doc["broadcast_us"] = sc.cycle.broadcast_us;
  doc["m0"] = sc.max_backoff_stage;
  doc["W_max"] = sc.max_window;
  doc["delta"] = sc.growth_threshold;
  const FrameTimings& f = sc.frames;
  doc["frames"] = {{"phy_header_bits", f.phy_header_bits}, {"mac_header_bits", f.mac_header_bits},
                   {"packet_bits", f.packet_bits},         {"ack_bits", f.ack_bits},
                   {"sifs_us", f.sifs_us},                 {"difs_us", f.difs_us},
                   {"prop_delay_us", f.prop_delay_us},     {"slot_us", f.slot_us},
                   {"bit_rate_mbps", f.bit_rate}};
  if (sc.assignment) doc["assignment"] = sc.assignment->to_string();
  if (sc.design) doc["design"] = {{"W", sc.design->window}, {"tau_us", io::matrix_json(sc.design->tau_us)}};
  return doc;
}

inline std::string serialize_scenario(const Scenario& sc) { return scenario_to_json(sc).dump(2) + "\n"; }

// ---------------------------------------------------------------------------
// Presets

/// The ten-SU, four-channel layout: 15 (SU, channel) pairs at -10 dB, the
/// rest at -15 dB. Pairs are 1-based.
inline const std::vector<std::pair<int, int>>& strong_pairs_10x4() {
  static const std::vector<std::pair<int, int>> pairs = {{1, 1}, {2, 1}, {3, 1}, {2, 2}, {4, 2},
                                                         {5, 2}, {4, 3}, {6, 3}, {7, 3}, {1, 4},
                                                         {3, 4}, {6, 4}, {8, 4}, {9, 4}, {10, 4}};
  return pairs;
}

inline constexpr std::uint64_t kPaper4x4Seed = 20130;
inline constexpr std::uint64_t kPaper10x4Seed = 20131;

inline Scenario preset_paper_4x4(std::uint64_t seed = kPaper4x4Seed) {
  Scenario sc;
  sc.num_su = 4;
  sc.num_channels = 4;
  sc.seed = seed;
  draw_random_fields(sc, DrawRanges{}, true, true);
  sc.p_idle.assign(4, 1.0);
  sc.fusion.assign(4, FusionRule::majority());
  sc.validate();
  return sc;
}

inline Scenario preset_paper_10x4(std::uint64_t seed = kPaper10x4Seed) {
  Scenario sc;
  sc.num_su = 10;
  sc.num_channels = 4;
  sc.seed = seed;
  draw_random_fields(sc, DrawRanges{}, false, true);
  sc.snr_db = Matrix<double>(10, 4, -15.0);
  ChannelAssignment strong(10, 4);
  for (auto [i, j] : strong_pairs_10x4()) {
    sc.snr_db(i - 1, j - 1) = -10.0;
    strong.set(i - 1, j - 1, true);
  }
  sc.p_idle.assign(4, 0.9);
  sc.fusion.assign(4, FusionRule::majority());
  sc.assignment = strong;
  sc.validate();
  return sc;
}

inline std::vector<std::string> preset_names() { return {"paper_4x4", "paper_10x4"}; }

inline bool is_preset(std::string_view name) { return name == "paper_4x4" || name == "paper_10x4"; }

inline Scenario preset_scenario(std::string_view name, std::optional<std::uint64_t> seed = std::nullopt) {
  if (name == "paper_4x4") return preset_paper_4x4(seed.value_or(kPaper4x4Seed));
  if (name == "paper_10x4") return preset_paper_10x4(seed.value_or(kPaper10x4Seed));
  throw std::invalid_argument("unknown preset '" + std::string(name) + "' (expected paper_4x4 or paper_10x4)");
}

/// A preset name or a path to a JSON scenario file. `seed` replaces the
/// recorded seed before any random draw.
inline Scenario load_scenario(const std::string& source, std::optional<std::uint64_t> seed = std::nullopt) {
  if (is_preset(source)) return preset_scenario(source, seed);
  std::ifstream in(source);
  if (!in) throw std::invalid_argument("cannot open scenario file '" + source + "'");
  std::ostringstream buf;
  buf << in.rdbuf();
  try {
    return parse_scenario(buf.str(), seed);
  } catch (const std::invalid_argument& e) {
    throw std::invalid_argument(source + ": " + e.what());
  }
}

// ---------------------------------------------------------------------------
// Overrides used by sweeps

inline Scenario with_common_idle(Scenario sc, double p) {
  sc.p_idle.assign(sc.num_channels, p);
  sc.validate();
  return sc;
}

/// Adds `shift_db` to every SNR entry.
inline Scenario with_snr_shift(Scenario sc, double shift_db) {
  Matrix<double> shifted(sc.num_su, sc.num_channels);
  for (std::size_t i = 0; i < sc.num_su; ++i)
    for (std::size_t j = 0; j < sc.num_channels; ++j) shifted(i, j) = sc.snr_db(i, j) + shift_db;
  sc.snr_db = shifted;
  return sc;
}

inline Scenario with_fusion(Scenario sc, FusionRule rule) {
  sc.fusion.assign(sc.num_channels, rule);
  return sc;
}

}  // namespace coopmac
