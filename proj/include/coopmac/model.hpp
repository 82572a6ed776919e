#pragma once

// Problem data: scenario, channel assignment matrix and sensing design.
// Internal units: time in microseconds, SNR linear, probabilities plain.

#include <algorithm>
#include <cmath>
#include <compare>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace coopmac {

/// Dense row-major matrix, just enough for N x M problem tables.
template <typename T>
class Matrix {
 public:
  Matrix() = default;
  Matrix(std::size_t rows, std::size_t cols, T fill = T{})
      : rows_(rows), cols_(cols), data_(rows * cols, fill) {}

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }

  T& operator()(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }
  const T& operator()(std::size_t r, std::size_t c) const { return data_[r * cols_ + c]; }

  const std::vector<T>& data() const { return data_; }

  friend bool operator==(const Matrix&, const Matrix&) = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<T> data_;
};

inline double db_to_linear(double db) { return std::pow(10.0, db / 10.0); }

// ---------------------------------------------------------------------------
// Fusion rule

enum class FusionKind { Or, And, Majority, Fixed };

/// a-out-of-b rule: the AP declares a channel busy when at least a of the
/// b sensing SUs report busy.
struct FusionRule {
  FusionKind kind = FusionKind::Majority;
  int fixed_a = 1;  // only for FusionKind::Fixed

  static FusionRule or_rule() { return {FusionKind::Or, 1}; }
  static FusionRule and_rule() { return {FusionKind::And, 1}; }
  static FusionRule majority() { return {FusionKind::Majority, 1}; }
  static FusionRule fixed(int a) { return {FusionKind::Fixed, a}; }

  /// Threshold a for b reporters; 0 when b == 0 (channel unsensed).
  /// A fixed a larger than b is capped at b.
  int resolve(int b) const {
    if (b <= 0) return 0;
    switch (kind) {
      case FusionKind::Or: return 1;
      case FusionKind::And: return b;
      case FusionKind::Majority: return (b + 1) / 2;
      case FusionKind::Fixed: return std::clamp(fixed_a, 1, b);
    }
    return 1;
  }

  std::string name() const {
    switch (kind) {
      case FusionKind::Or: return "or";
      case FusionKind::And: return "and";
      case FusionKind::Majority: return "majority";
      case FusionKind::Fixed: return "fixed:" + std::to_string(fixed_a);
    }
    return "?";
  }

  static FusionRule parse(std::string_view text) {
    if (text == "or" || text == "OR") return or_rule();
    if (text == "and" || text == "AND") return and_rule();
    if (text == "majority" || text == "MAJORITY") return majority();
    if (text.starts_with("fixed:")) {
      const int a = std::stoi(std::string(text.substr(6)));
      if (a < 1) throw std::invalid_argument("fusion rule: fixed threshold must be >= 1");
      return fixed(a);
    }
    throw std::invalid_argument("unknown fusion rule '" + std::string(text) +
                                "' (expected or, and, majority or fixed:<a>)");
  }

  friend bool operator==(const FusionRule&, const FusionRule&) = default;
};

// ---------------------------------------------------------------------------
// Timing constants

/// Frame layout of the contention phase. Header, payload and ACK sizes are in
/// bits; interframe spaces, propagation delay and mini-slot in microseconds.
struct FrameTimings {
  double phy_header_bits = 128.0;
  double mac_header_bits = 272.0;
  double packet_bits = 8184.0;
  double ack_bits = 112.0 + 128.0;  // ACK frame plus PHY header
  double sifs_us = 28.0;
  double difs_us = 128.0;
  double prop_delay_us = 1.0;
  double slot_us = 20.0;            // mini-slot sigma
  double bit_rate = 1.0;            // bits per microsecond

  double header_us() const { return (phy_header_bits + mac_header_bits) / bit_rate; }
  double packet_us() const { return packet_bits / bit_rate; }
  double ack_us() const { return ack_bits / bit_rate; }

  friend bool operator==(const FrameTimings&, const FrameTimings&) = default;
};

struct CycleTimings {
  double cycle_us = 100'000.0;  // T
  double report_us = 80.0;      // t_r, per SU
  double broadcast_us = 80.0;   // t_b

  /// Reporting overhead N * t_r + t_b.
  double reporting_us(std::size_t n_su) const {
    return static_cast<double>(n_su) * report_us + broadcast_us;
  }

  friend bool operator==(const CycleTimings&, const CycleTimings&) = default;
};

// ---------------------------------------------------------------------------
// Channel assignment

/// N x M sensing assignment: entry (i, j) is true when SU i senses channel j.
class ChannelAssignment {
 public:
  ChannelAssignment() = default;
  ChannelAssignment(std::size_t n_su, std::size_t n_ch) : cells_(n_su, n_ch, 0) {}

  static ChannelAssignment full(std::size_t n_su, std::size_t n_ch) {
    ChannelAssignment a(n_su, n_ch);
    for (std::size_t i = 0; i < n_su; ++i)
      for (std::size_t j = 0; j < n_ch; ++j) a.set(i, j, true);
    return a;
  }

  /// Row-major bit mask; bit (N*M - 1 - (i*M + j)) holds cell (i, j) so that
  /// increasing masks walk matrices in lexicographic order.
  static ChannelAssignment from_mask(std::size_t n_su, std::size_t n_ch, std::uint64_t mask) {
    ChannelAssignment a(n_su, n_ch);
    const std::size_t cells = n_su * n_ch;
    for (std::size_t k = 0; k < cells; ++k) {
      if ((mask >> (cells - 1 - k)) & 1U) a.set(k / n_ch, k % n_ch, true);
    }
    return a;
  }

  std::size_t num_su() const { return cells_.rows(); }
  std::size_t num_channels() const { return cells_.cols(); }

  bool assigned(std::size_t i, std::size_t j) const { return cells_(i, j) != 0; }
  void set(std::size_t i, std::size_t j, bool on) { cells_(i, j) = on ? 1 : 0; }

  /// S_i
  std::vector<std::size_t> channels_of(std::size_t i) const {
    std::vector<std::size_t> out;
    for (std::size_t j = 0; j < num_channels(); ++j)
      if (assigned(i, j)) out.push_back(j);
    return out;
  }

  /// S_j^U
  std::vector<std::size_t> sensors_of(std::size_t j) const {
    std::vector<std::size_t> out;
    for (std::size_t i = 0; i < num_su(); ++i)
      if (assigned(i, j)) out.push_back(i);
    return out;
  }

  /// b_j
  int sensor_count(std::size_t j) const {
    int b = 0;
    for (std::size_t i = 0; i < num_su(); ++i) b += assigned(i, j) ? 1 : 0;
    return b;
  }

  std::size_t pair_count() const {
    return static_cast<std::size_t>(std::count(cells_.data().begin(), cells_.data().end(), 1));
  }

  bool empty() const { return pair_count() == 0; }

  /// Rows of 0/1 joined by '|', e.g. "1100|0110".
  std::string to_string() const {
    std::string out;
    for (std::size_t i = 0; i < num_su(); ++i) {
      if (i) out += '|';
      for (std::size_t j = 0; j < num_channels(); ++j) out += assigned(i, j) ? '1' : '0';
    }
    return out;
  }

  static ChannelAssignment parse(std::string_view text) {
    std::vector<std::string> rows;
    std::string cur;
    for (char c : text) {
      if (c == '|' || c == ';' || c == '/') {
        rows.push_back(cur);
        cur.clear();
      } else if (c == '0' || c == '1') {
        cur += c;
      } else if (c != ' ') {
        throw std::invalid_argument("assignment: unexpected character '" + std::string(1, c) + "'");
      }
    }
    rows.push_back(cur);
    const std::size_t m = rows.front().size();
    if (m == 0) throw std::invalid_argument("assignment: empty row");
    ChannelAssignment a(rows.size(), m);
    for (std::size_t i = 0; i < rows.size(); ++i) {
      if (rows[i].size() != m) throw std::invalid_argument("assignment: ragged rows");
      for (std::size_t j = 0; j < m; ++j) a.set(i, j, rows[i][j] == '1');
    }
    return a;
  }

  const std::vector<std::uint8_t>& cells() const { return cells_.data(); }

  friend bool operator==(const ChannelAssignment&, const ChannelAssignment&) = default;
  friend auto operator<=>(const ChannelAssignment& a, const ChannelAssignment& b) {
    return a.cells() <=> b.cells();
  }

 private:
  Matrix<std::uint8_t> cells_;
};

// ---------------------------------------------------------------------------
// Sensing design (decision variables)

/// Sensing times tau^{ij} (microseconds, zero where unassigned) and the
/// minimum contention window W.
struct SensingDesign {
  Matrix<double> tau_us;
  int window = 1;

  SensingDesign() = default;
  SensingDesign(std::size_t n_su, std::size_t n_ch, int w = 1) : tau_us(n_su, n_ch, 0.0), window(w) {}

  /// Uniform sensing time on every assigned pair.
  static SensingDesign uniform(const ChannelAssignment& a, double tau, int w) {
    SensingDesign d(a.num_su(), a.num_channels(), w);
    for (std::size_t i = 0; i < a.num_su(); ++i)
      for (std::size_t j = 0; j < a.num_channels(); ++j)
        if (a.assigned(i, j)) d.tau_us(i, j) = tau;
    return d;
  }

  /// tau_i = sum over S_i
  double su_total(std::size_t i) const {
    double s = 0.0;
    for (std::size_t j = 0; j < tau_us.cols(); ++j) s += tau_us(i, j);
    return s;
  }

  /// Sensing phase length: max_i tau_i.
  double total() const {
    double best = 0.0;
    for (std::size_t i = 0; i < tau_us.rows(); ++i) best = std::max(best, su_total(i));
    return best;
  }

  std::string tau_string() const {
    std::ostringstream os;
    os.precision(17);
    for (std::size_t i = 0; i < tau_us.rows(); ++i) {
      if (i) os << '|';
      for (std::size_t j = 0; j < tau_us.cols(); ++j) {
        if (j) os << ' ';
        os << tau_us(i, j);
      }
    }
    return os.str();
  }

  static Matrix<double> parse_tau(std::string_view text, std::size_t n_su, std::size_t n_ch) {
    Matrix<double> tau(n_su, n_ch, 0.0);
    std::string s(text);
    for (char& c : s)
      if (c == '|' || c == ';' || c == ',') c = ' ';
    std::istringstream is(s);
    for (std::size_t k = 0; k < n_su * n_ch; ++k) {
      double v;
      if (!(is >> v)) throw std::invalid_argument("tau: expected " + std::to_string(n_su * n_ch) + " values");
      tau(k / n_ch, k % n_ch) = v;
    }
    std::string extra;
    if (is >> extra) throw std::invalid_argument("tau: too many values");
    return tau;
  }

  friend bool operator==(const SensingDesign&, const SensingDesign&) = default;
};

/// True when tau > 0 exactly on assigned pairs.
inline bool design_matches(const SensingDesign& d, const ChannelAssignment& a) {
  if (d.tau_us.rows() != a.num_su() || d.tau_us.cols() != a.num_channels()) return false;
  for (std::size_t i = 0; i < a.num_su(); ++i)
    for (std::size_t j = 0; j < a.num_channels(); ++j)
      if (a.assigned(i, j) != (d.tau_us(i, j) > 0.0)) return false;
  return true;
}

// ---------------------------------------------------------------------------
// Scenario

/// Full problem instance.
struct Scenario {
  std::size_t num_su = 1;        // N
  std::size_t num_channels = 1;  // M
  Matrix<double> snr_db;         // N x M
  std::vector<double> p_idle;    // P_j(H0)
  std::vector<double> target_pd; // detection target per channel
  std::vector<FusionRule> fusion;  // one per channel
  double sampling_hz = 6e6;
  double noise_power = 1.0;
  CycleTimings cycle;
  FrameTimings frames;
  int max_backoff_stage = 3;     // m0
  int max_window = 1024;         // W_max
  double growth_threshold = 1e-4;  // delta of the greedy assignment
  std::uint64_t seed = 0;
  std::optional<ChannelAssignment> assignment;
  std::optional<SensingDesign> design;

  friend bool operator==(const Scenario&, const Scenario&) = default;

  double snr(std::size_t i, std::size_t j) const { return db_to_linear(snr_db(i, j)); }

  /// Number of energy-detector samples in tau microseconds.
  double samples(double tau_us) const { return tau_us * 1e-6 * sampling_hz; }

  double reporting_us() const { return cycle.reporting_us(num_su); }

  /// Throws std::invalid_argument naming the first violated invariant.
  void validate() const {
    auto fail = [](const std::string& what) { throw std::invalid_argument("invalid scenario: " + what); };
    if (num_su < 1) fail("N must be >= 1");
    if (num_channels < 1) fail("M must be >= 1");
    if (snr_db.rows() != num_su || snr_db.cols() != num_channels) fail("snr_db must be N x M");
    if (p_idle.size() != num_channels) fail("p_idle must have M entries");
    if (target_pd.size() != num_channels) fail("target_pd must have M entries");
    if (fusion.size() != num_channels) fail("fusion must have M entries");
    for (double v : snr_db.data())
      if (!std::isfinite(v)) fail("snr_db entries must be finite");
    for (double p : p_idle)
      if (!(p >= 0.0 && p <= 1.0)) fail("p_idle entries must lie in [0,1]");
    for (double p : target_pd)
      if (!(p > 0.0 && p < 1.0)) fail("target_pd entries must lie in (0,1)");
    if (!(sampling_hz > 0.0)) fail("sampling frequency must be > 0");
    if (!(noise_power > 0.0)) fail("noise power must be > 0");
    const FrameTimings& f = frames;
    for (double v : {f.phy_header_bits, f.mac_header_bits, f.packet_bits, f.ack_bits, f.sifs_us, f.difs_us,
                     f.prop_delay_us, f.slot_us, f.bit_rate})
      if (!(v > 0.0)) fail("frame timings must be strictly positive");
    if (!(cycle.cycle_us > 0.0 && cycle.report_us >= 0.0 && cycle.broadcast_us >= 0.0))
      fail("cycle timings must be positive");
    if (!(cycle.cycle_us > reporting_us())) fail("cycle length T must exceed N*t_r + t_b");
    if (max_backoff_stage < 0) fail("m0 must be >= 0");
    if (max_window < 1) fail("W_max must be >= 1");
    if (!(growth_threshold >= 0.0)) fail("delta must be >= 0");
    if (assignment && (assignment->num_su() != num_su || assignment->num_channels() != num_channels))
      fail("assignment must be N x M");
    if (design) {
      if (!assignment) fail("a fixed design requires a fixed assignment");
      if (!design_matches(*design, *assignment)) fail("design tau must be > 0 exactly on assigned pairs");
      if (design->window < 1 || design->window > max_window) fail("design W must lie in [1, W_max]");
    }
  }
};

}  // namespace coopmac
