#pragma once

// Joint search over sensing times tau^{ij} and the contention window W.
//
// For every candidate W the sensing times are improved one coordinate at a
// time (SU by SU, channel by channel) with a log-grid scan refined by golden
// section; the best (W, tau) over all candidates is returned. The detection
// constraint is met with equality by construction (see sensing_performance).

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <memory>
#include <mutex>
#include <optional>
#include <stdexcept>
#include <unordered_map>
#include <vector>

#include "coopmac/mac_throughput.hpp"
#include "coopmac/model.hpp"
#include "coopmac/parallel.hpp"
#include "coopmac/sensing.hpp"

namespace coopmac {

struct OptimizerOptions {
  int max_window = 0;             // W_max; 0 = take it from the scenario
  int full_window_limit = 256;    // scan every integer W up to this W_max
  double window_ratio = 1.1;      // geometric W grid above the limit
  int window_refine = 2;          // +/- integer refinement around the best geometric W
  int grid_points = 64;           // log-spaced tau points per scalar search
  double refine_rel_width = 1e-4; // golden-section stopping width (relative)
  int coordinate_passes = 1;      // coordinate sweeps per balancing round
  int balance_rounds = 8;         // common-scale searches alternated with sweeps; 0 = plain sweeps
  double improvement_tol = 1e-9;  // absolute NT
  double tau_init_fraction = 0.01;  // initial tau as a fraction of T
  double tau_min_us = 1.0;
  unsigned threads = 0;           // 0 = worker_count()

  /// Cheaper settings used inside exhaustive assignment search.
  static OptimizerOptions coarse() {
    OptimizerOptions o;
    o.grid_points = 16;
    o.full_window_limit = 0;
    o.window_ratio = 1.25;
    o.window_refine = 1;
    o.refine_rel_width = 1e-3;
    o.balance_rounds = 2;
    return o;
  }
};

/// Contention statistics per W for fixed (N, m0, frames); shared between
/// optimizer runs on the same scenario.
class ContentionCache {
 public:
  ContentionCache(int n_su, int m0, FrameTimings frames) : n_(n_su), m0_(m0), frames_(frames) {}

  const ContentionStats& get(int window) const {
    std::lock_guard lock(mutex_);
    auto it = table_.find(window);
    if (it == table_.end()) it = table_.emplace(window, contention_stats(n_, window, m0_, frames_)).first;
    return it->second;
  }

  bool compatible(const Scenario& sc) const {
    return static_cast<std::size_t>(n_) == sc.num_su && m0_ == sc.max_backoff_stage && frames_ == sc.frames;
  }

 private:
  int n_;
  int m0_;
  FrameTimings frames_;
  mutable std::mutex mutex_;
  mutable std::unordered_map<int, ContentionStats> table_;
};

/// Precomputed per-assignment constants for fast NT evaluation. Values are
/// bit-identical to normalized_throughput() on the same design.
class DesignEvaluator {
 public:
  DesignEvaluator(const Scenario& sc, const ChannelAssignment& assign)
      : sc_(&sc), assign_(assign), offset_(sc.num_su, sc.num_channels, 0.0), snr_(sc.num_su, sc.num_channels, 0.0) {
    const std::size_t m = sc.num_channels;
    sensors_.resize(m);
    threshold_.assign(m, 0);
    for (std::size_t j = 0; j < m; ++j) {
      sensors_[j] = assign.sensors_of(j);
      const int b = static_cast<int>(sensors_[j].size());
      if (b == 0) continue;
      threshold_[j] = sc.fusion[j].resolve(b);
      const double p_star = invert_equal_fused(threshold_[j], b, sc.target_pd[j]);
      for (std::size_t i : sensors_[j]) {
        snr_(i, j) = sc.snr(i, j);
        offset_(i, j) = false_alarm_offset(p_star, snr_(i, j));
      }
    }
  }

  const Scenario& scenario() const { return *sc_; }
  const ChannelAssignment& assignment() const { return assign_; }
  const std::vector<std::size_t>& sensors(std::size_t j) const { return sensors_[j]; }

  bool any_sensed() const {
    return std::any_of(sensors_.begin(), sensors_.end(), [](const auto& s) { return !s.empty(); });
  }

  double pair_pf(std::size_t i, std::size_t j, double tau_us) const {
    return false_alarm_with_offset(offset_(i, j), snr_(i, j), tau_us * 1e-6, sc_->sampling_hz);
  }

  /// Fused P_f of channel j from per-pair values indexed like sensors(j).
  double channel_pf(std::size_t j, std::span<const double> pf) const { return fused_probability(pf, threshold_[j]); }

  double idle_contribution(std::size_t j, double channel_pf) const { return sc_->p_idle[j] * (1.0 - channel_pf); }

  double combine(double tau_total, const ContentionStats& stats, std::span<const double> contrib) const {
    double e = 0.0;
    for (double c : contrib) e += c;
    const CycleThroughput ct = single_channel_throughput(tau_total, stats, sc_->num_su, sc_->frames, sc_->cycle);
    return ct.throughput * e / static_cast<double>(sc_->num_channels);
  }

  /// NT of a complete design (tau matrix + contention stats for its W).
  double evaluate(const Matrix<double>& tau, const ContentionStats& stats) const {
    const std::size_t m = sc_->num_channels;
    double contrib[64];
    std::vector<double> contrib_heap;
    double* cptr = contrib;
    if (m > 64) {
      contrib_heap.resize(m);
      cptr = contrib_heap.data();
    }
    std::vector<double> pf;
    double tau_total = 0.0;
    for (std::size_t i = 0; i < sc_->num_su; ++i) {
      double s = 0.0;
      for (std::size_t j = 0; j < m; ++j) s += tau(i, j);
      tau_total = std::max(tau_total, s);
    }
    for (std::size_t j = 0; j < m; ++j) {
      cptr[j] = 0.0;
      if (sensors_[j].empty()) continue;
      pf.clear();
      for (std::size_t i : sensors_[j]) pf.push_back(pair_pf(i, j, tau(i, j)));
      cptr[j] = idle_contribution(j, channel_pf(j, pf));
    }
    return combine(tau_total, stats, std::span<const double>(cptr, m));
  }

 private:
  const Scenario* sc_;
  ChannelAssignment assign_;
  Matrix<double> offset_;
  Matrix<double> snr_;
  std::vector<std::vector<std::size_t>> sensors_;
  std::vector<int> threshold_;
};

/// Best tau in [tau_min, tau_max] for a scalar objective: a log-spaced grid
/// scan (ties go to the smaller tau) refined by golden section between the
/// neighbours of the grid argmax. Never returns a point worse than the best
/// grid point.
template <typename Objective>
double scalar_tau_search(Objective&& objective, double tau_max, const OptimizerOptions& opts,
                         std::size_t* evaluations = nullptr) {
  const double tau_min = std::min(opts.tau_min_us, tau_max);
  const int g = std::max(1, opts.grid_points);
  std::size_t evals = 0;
  auto eval = [&](double t) {
    ++evals;
    return objective(t);
  };
  std::vector<double> grid(static_cast<std::size_t>(g));
  if (g == 1 || tau_max <= tau_min) {
    grid.assign(1, tau_max);
  } else {
    const double log_lo = std::log(tau_min), log_hi = std::log(tau_max);
    for (int k = 0; k < g; ++k) grid[static_cast<std::size_t>(k)] = std::exp(log_lo + (log_hi - log_lo) * k / (g - 1));
    grid.back() = tau_max;
  }
  std::size_t best_k = 0;
  double best_val = -std::numeric_limits<double>::infinity();
  for (std::size_t k = 0; k < grid.size(); ++k) {
    const double v = eval(grid[k]);
    if (v > best_val) {
      best_val = v;
      best_k = k;
    }
  }
  double best_tau = grid[best_k];
  if (grid.size() >= 2) {
    // golden section on log(tau), maximizing
    double a = std::log(grid[best_k == 0 ? 0 : best_k - 1]);
    double b = std::log(grid[std::min(best_k + 1, grid.size() - 1)]);
    const double inv_phi = (std::sqrt(5.0) - 1.0) / 2.0;
    const double width = std::log1p(opts.refine_rel_width);
    double c = b - inv_phi * (b - a);
    double d = a + inv_phi * (b - a);
    double fc = eval(std::exp(c));
    double fd = eval(std::exp(d));
    double gs_best_val = -std::numeric_limits<double>::infinity(), gs_best_tau = best_tau;
    auto note = [&](double x, double fx) {
      if (fx > gs_best_val || (fx == gs_best_val && std::exp(x) < gs_best_tau)) {
        gs_best_val = fx;
        gs_best_tau = std::exp(x);
      }
    };
    note(c, fc);
    note(d, fd);
    for (int it = 0; it < 200 && (b - a) > width; ++it) {
      if (fc >= fd) {
        b = d;
        d = c;
        fd = fc;
        c = b - inv_phi * (b - a);
        fc = eval(std::exp(c));
        note(c, fc);
      } else {
        a = c;
        c = d;
        fc = fd;
        d = a + inv_phi * (b - a);
        fd = eval(std::exp(d));
        note(d, fd);
      }
    }
    if (gs_best_val > best_val) best_tau = std::min(gs_best_tau, tau_max);
  }
  if (evaluations) *evaluations += evals;
  return best_tau;
}

/// Candidate W values: every integer up to full_window_limit, otherwise a
/// geometric grid that always contains 1 and W_max.
inline std::vector<int> window_candidates(int w_max, const OptimizerOptions& opts) {
  std::vector<int> out;
  if (w_max <= opts.full_window_limit || opts.window_ratio <= 1.0) {
    for (int w = 1; w <= w_max; ++w) out.push_back(w);
    return out;
  }
  double w = 1.0;
  int last = 0;
  while (true) {
    const int iw = std::max(last + 1, static_cast<int>(std::lround(w)));
    if (iw >= w_max) break;
    out.push_back(iw);
    last = iw;
    w = std::max(w * opts.window_ratio, static_cast<double>(iw + 1));
  }
  out.push_back(w_max);
  return out;
}

struct OptimizedDesign {
  SensingDesign design;
  ThroughputReport report;
  std::size_t evaluations = 0;
};

namespace detail {

struct WindowResult {
  int window = 0;
  double nt = -1.0;
  Matrix<double> tau;
  std::size_t evaluations = 0;
};

/// Coordinate ascent over tau for one W.
inline WindowResult optimize_for_window(const DesignEvaluator& ev, const ContentionStats& stats, int window,
                                        const OptimizerOptions& opts) {
  const Scenario& sc = ev.scenario();
  const ChannelAssignment& asg = ev.assignment();
  const std::size_t n = sc.num_su, m = sc.num_channels;
  const double t_cycle = sc.cycle.cycle_us;

  WindowResult res;
  res.window = window;
  res.tau = Matrix<double>(n, m, 0.0);
  std::vector<double> su_sum(n, 0.0);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < m; ++j)
      if (asg.assigned(i, j)) {
        res.tau(i, j) = opts.tau_init_fraction * t_cycle;
        su_sum[i] += res.tau(i, j);
      }

  // per-channel pair P_f (indexed like ev.sensors(j)) and idle contributions
  std::vector<std::vector<double>> pair_pf(m);
  std::vector<double> contrib(m, 0.0);
  for (std::size_t j = 0; j < m; ++j) {
    for (std::size_t i : ev.sensors(j)) pair_pf[j].push_back(ev.pair_pf(i, j, res.tau(i, j)));
    if (!pair_pf[j].empty()) contrib[j] = ev.idle_contribution(j, ev.channel_pf(j, pair_pf[j]));
  }
  auto total_of = [&](const std::vector<double>& sums) { return *std::max_element(sums.begin(), sums.end()); };
  double current = ev.combine(total_of(su_sum), stats, contrib);
  ++res.evaluations;

  std::vector<double> scratch_pf;
  std::vector<double> scratch_contrib(m);
  auto coordinate_sweep = [&] {
    for (std::size_t i = 0; i < n; ++i) {
      double others_max = 0.0;
      for (std::size_t k = 0; k < n; ++k)
        if (k != i) others_max = std::max(others_max, su_sum[k]);
      for (std::size_t j = 0; j < m; ++j) {
        if (!asg.assigned(i, j)) continue;
        const auto& sensors = ev.sensors(j);
        const std::size_t slot =
            static_cast<std::size_t>(std::find(sensors.begin(), sensors.end(), i) - sensors.begin());
        const double base_sum = su_sum[i] - res.tau(i, j);
        auto objective = [&](double t) {
          scratch_pf = pair_pf[j];
          scratch_pf[slot] = ev.pair_pf(i, j, t);
          std::copy(contrib.begin(), contrib.end(), scratch_contrib.begin());
          scratch_contrib[j] = ev.idle_contribution(j, ev.channel_pf(j, scratch_pf));
          return ev.combine(std::max(base_sum + t, others_max), stats, scratch_contrib);
        };
        const double t_best = scalar_tau_search(objective, t_cycle, opts, &res.evaluations);
        const double v = objective(t_best);
        ++res.evaluations;
        if (v > current + opts.improvement_tol) {
          current = v;
          res.tau(i, j) = t_best;
          su_sum[i] = base_sum + t_best;
          pair_pf[j][slot] = scratch_pf[slot];
          contrib[j] = scratch_contrib[j];
        }
      }
    }
  };

  // Replaces the whole tau matrix and resynchronizes the cached state.
  auto adopt = [&](const Matrix<double>& tau, double value) {
    current = value;
    res.tau = tau;
    for (std::size_t i = 0; i < n; ++i) {
      su_sum[i] = 0.0;
      for (std::size_t j = 0; j < m; ++j) su_sum[i] += res.tau(i, j);
    }
    for (std::size_t j = 0; j < m; ++j) {
      const auto& sensors = ev.sensors(j);
      for (std::size_t s = 0; s < sensors.size(); ++s) pair_pf[j][s] = ev.pair_pf(sensors[s], j, res.tau(sensors[s], j));
      if (!sensors.empty()) contrib[j] = ev.idle_contribution(j, ev.channel_pf(j, pair_pf[j]));
    }
  };

  // Moves every sensing time by a common factor. SUs tied at the sensing
  // phase length cannot shorten or lengthen it one coordinate at a time.
  Matrix<double> trial = res.tau;
  auto scale_search = [&] {
    const double total = total_of(su_sum);
    double smallest = t_cycle;
    for (double t : res.tau.data())
      if (t > 0.0) smallest = std::min(smallest, t);
    const double lo = opts.tau_min_us / smallest;
    const double hi = t_cycle / total;
    if (!(hi > lo)) return;
    auto objective = [&](double f) {
      for (std::size_t k = 0; k < n * m; ++k) trial(k / m, k % m) = res.tau(k / m, k % m) * f;
      return ev.evaluate(trial, stats);
    };
    OptimizerOptions o = opts;
    o.tau_min_us = lo;
    const double f = scalar_tau_search(objective, hi, o, &res.evaluations);
    const double v = objective(f);
    ++res.evaluations;
    if (v > current + opts.improvement_tol) adopt(trial, v);
  };

  // Shifts sensing time between the channels of one SU at a fixed total, for
  // the same reason: a binding SU cannot rebalance one coordinate at a time.
  auto transfer_search = [&] {
    for (std::size_t i = 0; i < n; ++i) {
      const auto channels = asg.channels_of(i);
      if (channels.size() < 2) continue;
      for (std::size_t j : channels) {
        const double budget = su_sum[i];
        const double rest = budget - res.tau(i, j);
        const double t_max = budget - opts.tau_min_us;
        if (!(rest > 0.0) || !(t_max > opts.tau_min_us)) continue;
        auto objective = [&](double t) {
          trial = res.tau;
          const double f = (budget - t) / rest;
          for (std::size_t k : channels) trial(i, k) = (k == j) ? t : res.tau(i, k) * f;
          return ev.evaluate(trial, stats);
        };
        const double t_best = scalar_tau_search(objective, t_max, opts, &res.evaluations);
        const double v = objective(t_best);
        ++res.evaluations;
        if (v > current + opts.improvement_tol) adopt(trial, v);
      }
    }
  };

  for (int pass = 0; pass < std::max(1, opts.coordinate_passes); ++pass) {
    const double before = current;
    coordinate_sweep();
    if (current - before <= opts.improvement_tol) break;
  }
  for (int round = 0; round < opts.balance_rounds; ++round) {
    const double before = current;
    scale_search();
    transfer_search();
    for (int pass = 0; pass < std::max(1, opts.coordinate_passes); ++pass) coordinate_sweep();
    if (current - before <= opts.improvement_tol) break;
  }
  res.nt = ev.evaluate(res.tau, stats);
  return res;
}

inline bool better(const WindowResult& a, const WindowResult& b) {
  if (a.nt != b.nt) return a.nt > b.nt;
  if (a.window != b.window) return a.window < b.window;
  return a.tau.data() < b.tau.data();
}

}  // namespace detail

/// Sensing-time and contention-window optimization for a fixed assignment.
inline OptimizedDesign optimize_design(const Scenario& sc, const ChannelAssignment& assign,
                                       const OptimizerOptions& opts = {}, const ContentionCache* cache = nullptr) {
  if (assign.num_su() != sc.num_su || assign.num_channels() != sc.num_channels)
    throw std::invalid_argument("optimize_design: assignment dimensions do not match the scenario");
  const DesignEvaluator ev(sc, assign);
  if (!ev.any_sensed()) throw std::invalid_argument("optimize_design: no sensed channels");
  const int w_max = opts.max_window > 0 ? opts.max_window : sc.max_window;
  if (w_max < 1) throw std::invalid_argument("optimize_design: W_max must be >= 1");

  std::unique_ptr<ContentionCache> own;
  if (!cache || !cache->compatible(sc)) {
    own = std::make_unique<ContentionCache>(static_cast<int>(sc.num_su), sc.max_backoff_stage, sc.frames);
    cache = own.get();
  }

  auto run = [&](const std::vector<int>& windows) {
    return parallel_map<detail::WindowResult>(
        windows.size(),
        [&](std::size_t k) { return detail::optimize_for_window(ev, cache->get(windows[k]), windows[k], opts); },
        opts.threads);
  };

  std::vector<int> windows = window_candidates(w_max, opts);
  std::vector<detail::WindowResult> results = run(windows);
  auto best_of = [](const std::vector<detail::WindowResult>& rs) {
    std::size_t b = 0;
    for (std::size_t k = 1; k < rs.size(); ++k)
      if (detail::better(rs[k], rs[b])) b = k;
    return b;
  };
  detail::WindowResult best = results[best_of(results)];
  std::size_t evaluations = 0;
  for (const auto& r : results) evaluations += r.evaluations;

  const bool geometric = windows.size() < static_cast<std::size_t>(w_max);
  if (geometric && opts.window_refine > 0) {
    std::vector<int> extra;
    for (int w = best.window - opts.window_refine; w <= best.window + opts.window_refine; ++w)
      if (w >= 1 && w <= w_max && !std::binary_search(windows.begin(), windows.end(), w)) extra.push_back(w);
    if (!extra.empty()) {
      std::vector<detail::WindowResult> more = run(extra);
      for (const auto& r : more) evaluations += r.evaluations;
      const detail::WindowResult& cand = more[best_of(more)];
      if (detail::better(cand, best)) best = cand;
    }
  }

  OptimizedDesign out;
  out.design.tau_us = best.tau;
  out.design.window = best.window;
  out.report = normalized_throughput(sc, assign, out.design);
  out.evaluations = evaluations;
  return out;
}

/// Exhaustive grid over per-pair tau values and W values.
struct GridSpec {
  std::vector<double> tau_values_us;  // shared by every assigned pair
  std::vector<int> windows;
  std::uint64_t max_cells = 10'000'000;
};

/// Exact argmax of NT on a Cartesian grid; intended as a reference for
/// optimize_design on small instances. Ties go to the smaller W, then the
/// lexicographically smaller tau vector.
inline OptimizedDesign grid_reference_optimum(const Scenario& sc, const ChannelAssignment& assign,
                                              const GridSpec& spec) {
  std::vector<double> taus = spec.tau_values_us;
  std::vector<int> windows = spec.windows;
  std::sort(taus.begin(), taus.end());
  std::sort(windows.begin(), windows.end());
  if (taus.empty() || windows.empty()) throw std::invalid_argument("grid_reference_optimum: empty grid");
  if (taus.front() <= 0.0 || windows.front() < 1) throw std::invalid_argument("grid_reference_optimum: bad grid values");
  const DesignEvaluator ev(sc, assign);
  if (!ev.any_sensed()) throw std::invalid_argument("grid_reference_optimum: no sensed channels");

  std::vector<std::pair<std::size_t, std::size_t>> coords;
  for (std::size_t i = 0; i < sc.num_su; ++i)
    for (std::size_t j = 0; j < sc.num_channels; ++j)
      if (assign.assigned(i, j)) coords.emplace_back(i, j);
  long double cells = static_cast<long double>(windows.size());
  for (std::size_t k = 0; k < coords.size(); ++k) cells *= static_cast<long double>(taus.size());
  if (cells > static_cast<long double>(spec.max_cells))
    throw std::length_error("grid_reference_optimum: grid has more than " + std::to_string(spec.max_cells) + " cells");

  ContentionCache cache(static_cast<int>(sc.num_su), sc.max_backoff_stage, sc.frames);
  Matrix<double> tau(sc.num_su, sc.num_channels, 0.0);
  Matrix<double> best_tau;
  int best_w = 0;
  double best_nt = -1.0;
  std::size_t evaluations = 0;
  std::vector<std::size_t> idx(coords.size(), 0);
  for (int w : windows) {
    const ContentionStats& stats = cache.get(w);
    std::fill(idx.begin(), idx.end(), 0);
    while (true) {
      for (std::size_t k = 0; k < coords.size(); ++k) tau(coords[k].first, coords[k].second) = taus[idx[k]];
      const double nt = ev.evaluate(tau, stats);
      ++evaluations;
      if (nt > best_nt) {
        best_nt = nt;
        best_w = w;
        best_tau = tau;
      }
      // odometer, last coordinate fastest
      std::size_t k = coords.size();
      while (k > 0 && ++idx[k - 1] == taus.size()) idx[--k] = 0;
      if (k == 0) break;
    }
  }
  OptimizedDesign out;
  out.design.tau_us = best_tau;
  out.design.window = best_w;
  out.report = normalized_throughput(sc, assign, out.design);
  out.evaluations = evaluations;
  return out;
}

}  // namespace coopmac
