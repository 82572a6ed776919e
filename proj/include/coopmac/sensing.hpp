#pragma once

// Energy-detection ROC, a-out-of-b cooperative fusion and the equal-P_d
// inversion used to eliminate detector thresholds.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <optional>
#include <span>
#include <stdexcept>
#include <vector>

#include "coopmac/gaussian.hpp"
#include "coopmac/model.hpp"

namespace coopmac {

/// Inputs of a single energy detector (SU i on channel j).
struct DetectorContext {
  double noise_power = 1.0;   // N0, watts
  double sampling_hz = 6e6;   // f_s
  double snr = 0.0;           // gamma, linear
  double sense_time_s = 0.0;  // tau, seconds
  std::optional<double> threshold;  // epsilon, watts

  double samples() const { return sense_time_s * sampling_hz; }

  void check() const {
    if (!(noise_power > 0.0 && sampling_hz > 0.0 && snr > 0.0 && sense_time_s > 0.0))
      throw std::invalid_argument("detector: N0, f_s, snr and tau must be positive");
    if (samples() < 1.0) throw std::invalid_argument("detector: tau * f_s must be at least one sample");
    if (!threshold) throw std::invalid_argument("detector: threshold epsilon is required");
  }
};

/// P_d for a given threshold.
inline double detection_probability(const DetectorContext& ctx) {
  ctx.check();
  const double ratio = *ctx.threshold / ctx.noise_power;
  return gaussian_tail((ratio - ctx.snr - 1.0) * std::sqrt(ctx.samples() / (2.0 * ctx.snr + 1.0)));
}

/// P_f for a given threshold.
inline double false_alarm_from_threshold(const DetectorContext& ctx) {
  ctx.check();
  const double ratio = *ctx.threshold / ctx.noise_power;
  return gaussian_tail((ratio - 1.0) * std::sqrt(ctx.samples()));
}

/// sqrt(2 gamma + 1) * Q^-1(target_pd): the tau-independent part of the
/// false-alarm argument.
inline double false_alarm_offset(double target_pd, double snr) {
  return std::sqrt(2.0 * snr + 1.0) * gaussian_tail_inverse(target_pd);
}

inline double false_alarm_with_offset(double offset, double snr, double sense_time_s, double sampling_hz) {
  return gaussian_tail(offset + std::sqrt(sense_time_s * sampling_hz) * snr);
}

/// P_f of a detector whose threshold is set to reach target_pd.
/// snr linear, sense time in seconds, sampling frequency in Hz.
inline double false_alarm_from_target_pd(double target_pd, double snr, double sense_time_s, double sampling_hz) {
  if (!(target_pd > 0.0 && target_pd < 1.0))
    throw std::domain_error("false_alarm_from_target_pd: target must lie in (0,1)");
  if (!(snr >= 0.0 && sense_time_s > 0.0 && sampling_hz > 0.0))
    throw std::invalid_argument("false_alarm_from_target_pd: snr, tau and f_s must be positive");
  return false_alarm_with_offset(false_alarm_offset(target_pd, snr), snr, sense_time_s, sampling_hz);
}

/// Probability that at least `a` of the independent Bernoulli trials in
/// `per_su` succeed (Poisson-binomial upper tail), by a DP over counts.
inline double fused_probability(std::span<const double> per_su, int a) {
  const int b = static_cast<int>(per_su.size());
  if (a < 1 || a > b) throw std::domain_error("fused_probability: need 1 <= a <= b");
  // dist[k] = P(k successes among the trials seen so far)
  double dist_buf[64];
  std::vector<double> dist_heap;
  double* dist = dist_buf;
  if (b + 1 > 64) {
    dist_heap.assign(static_cast<std::size_t>(b) + 1, 0.0);
    dist = dist_heap.data();
  }
  for (int k = 0; k <= b; ++k) dist[k] = 0.0;
  dist[0] = 1.0;
  for (int t = 0; t < b; ++t) {
    const double p = per_su[static_cast<std::size_t>(t)];
    if (!(p >= 0.0 && p <= 1.0)) throw std::domain_error("fused_probability: entries must lie in [0,1]");
    for (int k = t + 1; k >= 1; --k) dist[k] = dist[k] * (1.0 - p) + dist[k - 1] * p;
    dist[0] *= (1.0 - p);
  }
  // Summing the shorter side is more accurate near 0 and 1.
  if (a > b / 2) {
    double tail = 0.0;
    for (int k = a; k <= b; ++k) tail += dist[k];
    return std::min(1.0, tail);
  }
  double head = 0.0;
  for (int k = 0; k < a; ++k) head += dist[k];
  return std::clamp(1.0 - head, 0.0, 1.0);
}

/// Binomial upper tail sum_{l=a}^{b} C(b,l) p^l (1-p)^{b-l}.
inline double binomial_upper_tail(int a, int b, double p) {
  std::vector<double> same(static_cast<std::size_t>(b), p);
  return fused_probability(same, a);
}

/// Common per-SU probability p* whose a-out-of-b fusion equals target.
inline double invert_equal_fused(int a, int b, double target) {
  if (a < 1 || a > b) throw std::domain_error("invert_equal_fused: need 1 <= a <= b");
  if (!(target > 0.0 && target < 1.0)) throw std::domain_error("invert_equal_fused: target must lie in (0,1)");
  if (b == 1) return target;
  double lo = 1e-12;
  double hi = 1.0 - 1e-12;
  for (int it = 0; it < 200 && hi - lo > 0.0; ++it) {
    const double mid = 0.5 * (lo + hi);
    if (mid == lo || mid == hi) break;
    if (binomial_upper_tail(a, b, mid) < target) lo = mid;
    else hi = mid;
  }
  const double elo = std::abs(binomial_upper_tail(a, b, lo) - target);
  const double ehi = std::abs(binomial_upper_tail(a, b, hi) - target);
  return elo < ehi ? lo : hi;
}

/// Per-link and fused sensing performance for one assignment.
struct SensingPerformance {
  Matrix<double> link_pd;  // P_d^{ij}, meaningful where assigned
  Matrix<double> link_pf;  // P_f^{ij}
  std::vector<std::optional<double>> channel_pd;  // empty = unsensed
  std::vector<std::optional<double>> channel_pf;
  std::vector<int> threshold_a;  // a_j (0 when unsensed)
  std::vector<int> sensors_b;    // b_j

  bool sensed(std::size_t j) const { return channel_pf[j].has_value(); }
};

/// Sensing performance under the equality trick: every SU sensing channel j
/// operates at the common P_d that makes the fused P_d hit target_pd[j].
/// `tau_us` holds sensing times in microseconds.
inline SensingPerformance sensing_performance(const Scenario& sc, const ChannelAssignment& assign,
                                              const Matrix<double>& tau_us) {
  const std::size_t n = sc.num_su, m = sc.num_channels;
  if (assign.num_su() != n || assign.num_channels() != m || tau_us.rows() != n || tau_us.cols() != m)
    throw std::invalid_argument("sensing_performance: dimension mismatch");
  SensingPerformance perf{Matrix<double>(n, m, 0.0), Matrix<double>(n, m, 0.0),
                          std::vector<std::optional<double>>(m), std::vector<std::optional<double>>(m),
                          std::vector<int>(m, 0), std::vector<int>(m, 0)};
  std::vector<double> pd, pf;
  for (std::size_t j = 0; j < m; ++j) {
    const auto sensors = assign.sensors_of(j);
    const int b = static_cast<int>(sensors.size());
    perf.sensors_b[j] = b;
    if (b == 0) continue;
    const int a = sc.fusion[j].resolve(b);
    perf.threshold_a[j] = a;
    const double p_star = invert_equal_fused(a, b, sc.target_pd[j]);
    pd.clear();
    pf.clear();
    for (std::size_t i : sensors) {
      const double tau = tau_us(i, j);
      if (!(tau > 0.0)) throw std::invalid_argument("sensing_performance: assigned pair with tau <= 0");
      perf.link_pd(i, j) = p_star;
      const double snr = sc.snr(i, j);
      perf.link_pf(i, j) = false_alarm_with_offset(false_alarm_offset(p_star, snr), snr, tau * 1e-6, sc.sampling_hz);
      pd.push_back(p_star);
      pf.push_back(perf.link_pf(i, j));
    }
    perf.channel_pd[j] = fused_probability(pd, a);
    perf.channel_pf[j] = fused_probability(pf, a);
  }
  return perf;
}

}  // namespace coopmac
