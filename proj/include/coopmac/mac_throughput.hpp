#pragma once

// Saturation contention model (Bianchi fixed point), cycle accounting and the
// normalized-throughput objective.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <stdexcept>
#include <vector>

#include "coopmac/model.hpp"
#include "coopmac/sensing.hpp"

namespace coopmac {

struct BianchiPoint {
  double phi = 0.0;  // per-slot transmission probability
  double p = 0.0;    // conditional collision probability
};

/// Right-hand side of the transmission-probability equation, written with
/// the geometric sum (1 - (2p)^m0) / (1 - 2p) = sum_{k<m0} (2p)^k so that
/// p = 1/2 is not a removable singularity.
inline double bianchi_phi_of_p(double p, int window, int m0) {
  double series = 0.0;
  double term = 1.0;
  for (int k = 0; k < m0; ++k) {
    series += term;
    term *= 2.0 * p;
  }
  const double w = static_cast<double>(window);
  return 2.0 / (1.0 + w + w * p * series);
}

/// |phi - 2(1-2p) / ((1-2p)(W+1) + W p (1 - (2p)^m0))| in the closed form
/// when it is well conditioned.
inline double bianchi_phi_residual(const BianchiPoint& fp, int window, int m0) {
  const double w = static_cast<double>(window);
  const double q = 1.0 - 2.0 * fp.p;
  if (std::abs(q) > 1e-3) {
    const double rhs = 2.0 * q / (q * (w + 1.0) + w * fp.p * (1.0 - std::pow(2.0 * fp.p, m0)));
    return std::abs(fp.phi - rhs);
  }
  return std::abs(fp.phi - bianchi_phi_of_p(fp.p, window, m0));
}

/// |p - (1 - (1 - phi)^(N-1))|
inline double bianchi_p_residual(const BianchiPoint& fp, int n) {
  return std::abs(fp.p - (1.0 - std::pow(1.0 - fp.phi, n - 1)));
}

/// Solves the coupled (phi, p) equations for N saturated stations with
/// minimum window W and m0 backoff stages. The composed map
/// p -> 1 - (1 - phi(p))^(N-1) - p is strictly decreasing, so bisection on
/// p in [0, 1] finds the unique root.
inline BianchiPoint bianchi_fixed_point(int n, int window, int m0) {
  if (n < 1 || window < 1 || m0 < 0) throw std::invalid_argument("bianchi_fixed_point: need N>=1, W>=1, m0>=0");
  if (n == 1) return {bianchi_phi_of_p(0.0, window, m0), 0.0};
  auto gap = [&](double p) { return 1.0 - std::pow(1.0 - bianchi_phi_of_p(p, window, m0), n - 1) - p; };
  double lo = 0.0, hi = 1.0;
  if (gap(hi) >= 0.0) {
    lo = hi;  // W = 1, m0 = 0: every station always transmits
  } else {
    for (int it = 0; it < 2000; ++it) {
      const double mid = 0.5 * (lo + hi);
      if (mid <= lo || mid >= hi) break;
      if (gap(mid) > 0.0) lo = mid;
      else hi = mid;
    }
  }
  const double p = std::abs(gap(lo)) <= std::abs(gap(hi)) ? lo : hi;
  BianchiPoint fp{bianchi_phi_of_p(p, window, m0), p};
  if (bianchi_p_residual(fp, n) > 1e-10 || bianchi_phi_residual(fp, window, m0) > 1e-10)
    throw std::runtime_error("bianchi_fixed_point: did not converge");
  return fp;
}

struct SlotDurations {
  double success_us = 0.0;    // T_s
  double collision_us = 0.0;  // T_c
};

/// Busy-slot lengths under the basic access mechanism.
inline SlotDurations slot_durations(const FrameTimings& f) {
  const double h = f.header_us();
  const double ps = f.packet_us();
  return {h + ps + f.sifs_us + 2.0 * f.prop_delay_us + f.ack_us() + f.difs_us,
          h + ps + f.difs_us + f.prop_delay_us};
}

struct ContentionStats {
  double phi = 0.0;
  double p = 0.0;
  double p_transmit = 0.0;  // P_t
  double p_success = 0.0;   // P_s
  double success_us = 0.0;
  double collision_us = 0.0;
  double mean_slot_us = 0.0;  // average generic slot
};

inline ContentionStats contention_stats(int n, int window, int m0, const FrameTimings& frames) {
  const BianchiPoint fp = bianchi_fixed_point(n, window, m0);
  const SlotDurations slots = slot_durations(frames);
  ContentionStats s;
  s.phi = fp.phi;
  s.p = fp.p;
  s.p_transmit = 1.0 - std::pow(1.0 - fp.phi, n);
  s.p_success = s.p_transmit > 0.0 ? n * fp.phi * std::pow(1.0 - fp.phi, n - 1) / s.p_transmit : 1.0;
  s.success_us = slots.success_us;
  s.collision_us = slots.collision_us;
  s.mean_slot_us = (1.0 - s.p_transmit) * frames.slot_us + s.p_transmit * s.p_success * slots.success_us +
                   s.p_transmit * (1.0 - s.p_success) * slots.collision_us;
  return s;
}

struct CycleThroughput {
  double slots = 0.0;       // whole generic slots in the data phase
  double throughput = 0.0;  // fraction of the cycle carrying payload
};

/// Single-channel throughput for a sensing phase of tau_total microseconds.
inline CycleThroughput single_channel_throughput(double tau_total_us, const ContentionStats& stats,
                                                 std::size_t n_su, const FrameTimings& frames,
                                                 const CycleTimings& cycle) {
  const double budget = cycle.cycle_us - tau_total_us - cycle.reporting_us(n_su);
  const double slots = std::max(0.0, std::floor(budget / stats.mean_slot_us));
  return {slots, slots * stats.p_success * stats.p_transmit * frames.packet_us() / cycle.cycle_us};
}

inline CycleThroughput single_channel_throughput(double tau_total_us, int window, int n, int m0,
                                                 const FrameTimings& frames, const CycleTimings& cycle) {
  return single_channel_throughput(tau_total_us, contention_stats(n, window, m0, frames),
                                   static_cast<std::size_t>(n), frames, cycle);
}

struct IdleEstimate {
  double expected = 0.0;             // E
  std::vector<double> per_channel;   // p_idle[j] * (1 - P_f^j), 0 if unsensed
};

/// Expected number of truly idle channels the AP declares idle, by linearity
/// of expectation. Unsensed channels are never declared idle.
inline IdleEstimate expected_correct_idle(const SensingPerformance& perf, const std::vector<double>& p_idle) {
  if (p_idle.size() != perf.channel_pf.size())
    throw std::invalid_argument("expected_correct_idle: p_idle size mismatch");
  IdleEstimate out{0.0, std::vector<double>(p_idle.size(), 0.0)};
  for (std::size_t j = 0; j < p_idle.size(); ++j) {
    if (!(p_idle[j] >= 0.0 && p_idle[j] <= 1.0))
      throw std::invalid_argument("expected_correct_idle: p_idle must lie in [0,1]");
    if (!perf.sensed(j)) continue;
    out.per_channel[j] = p_idle[j] * (1.0 - *perf.channel_pf[j]);
    out.expected += out.per_channel[j];
  }
  return out;
}

struct ThroughputReport {
  ContentionStats contention;
  double tau_total_us = 0.0;
  double slots_per_cycle = 0.0;
  double single_channel = 0.0;  // T(tau, W)
  double expected_idle = 0.0;   // E
  double normalized = 0.0;      // NT
  std::vector<double> per_channel_idle;
  SensingPerformance sensing;
};

/// NT = T(tau, W) * E / M for a fixed assignment and design.
inline ThroughputReport normalized_throughput(const Scenario& sc, const ChannelAssignment& assign,
                                              const SensingDesign& design) {
  if (!design_matches(design, assign))
    throw std::invalid_argument("normalized_throughput: design must have tau > 0 exactly on assigned pairs");
  if (design.window < 1) throw std::invalid_argument("normalized_throughput: W must be >= 1");
  ThroughputReport r;
  r.tau_total_us = design.total();
  r.sensing = sensing_performance(sc, assign, design.tau_us);
  r.contention = contention_stats(static_cast<int>(sc.num_su), design.window, sc.max_backoff_stage, sc.frames);
  const CycleThroughput ct = single_channel_throughput(r.tau_total_us, r.contention, sc.num_su, sc.frames, sc.cycle);
  r.slots_per_cycle = ct.slots;
  r.single_channel = ct.throughput;
  const IdleEstimate e = expected_correct_idle(r.sensing, sc.p_idle);
  r.expected_idle = e.expected;
  r.per_channel_idle = e.per_channel;
  r.normalized = r.single_channel * r.expected_idle / static_cast<double>(sc.num_channels);
  return r;
}

}  // namespace coopmac
