#pragma once

// Channel-assignment search: Hungarian seeding, greedy growth, exhaustive
// enumeration and round-robin baselines.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <limits>
#include <map>
#include <memory>
#include <stdexcept>
#include <string>
#include <vector>

#include "coopmac/mac_throughput.hpp"
#include "coopmac/model.hpp"
#include "coopmac/optimizer.hpp"
#include "coopmac/parallel.hpp"

namespace coopmac {

// ---------------------------------------------------------------------------
// Hungarian method

/// Minimum-cost assignment of every row to a distinct column (rows <= cols).
/// Returns the column chosen for each row. O(rows^2 * cols).
inline std::vector<std::size_t> hungarian_rows_to_cols(const Matrix<double>& cost) {
  const std::size_t n = cost.rows(), m = cost.cols();
  if (n == 0 || m == 0) throw std::invalid_argument("hungarian: empty cost matrix");
  if (n > m) throw std::invalid_argument("hungarian: more rows than columns");
  const double inf = std::numeric_limits<double>::infinity();
  // potentials and matching, 1-based with column 0 as the virtual root
  std::vector<double> u(n + 1, 0.0), v(m + 1, 0.0);
  std::vector<std::size_t> match(m + 1, 0), way(m + 1, 0);
  for (std::size_t row = 1; row <= n; ++row) {
    match[0] = row;
    std::size_t col0 = 0;
    std::vector<double> minv(m + 1, inf);
    std::vector<char> used(m + 1, 0);
    do {
      used[col0] = 1;
      const std::size_t r0 = match[col0];
      double delta = inf;
      std::size_t col1 = 0;
      for (std::size_t c = 1; c <= m; ++c) {
        if (used[c]) continue;
        const double cur = cost(r0 - 1, c - 1) - u[r0] - v[c];
        if (cur < minv[c]) {
          minv[c] = cur;
          way[c] = col0;
        }
        if (minv[c] < delta) {
          delta = minv[c];
          col1 = c;
        }
      }
      for (std::size_t c = 0; c <= m; ++c) {
        if (used[c]) {
          u[match[c]] += delta;
          v[c] -= delta;
        } else {
          minv[c] -= delta;
        }
      }
      col0 = col1;
    } while (match[col0] != 0);
    do {
      const std::size_t col1 = way[col0];
      match[col0] = match[col1];
      col0 = col1;
    } while (col0 != 0);
  }
  std::vector<std::size_t> out(n, 0);
  for (std::size_t c = 1; c <= m; ++c)
    if (match[c] != 0) out[match[c] - 1] = c - 1;
  return out;
}

/// Assigns every channel to exactly one SU at minimum total cost, where
/// cost(i, j) is the cost of SU i sensing channel j. With more channels than
/// SUs the matching is repeated on the leftover channels until all are
/// covered; with more SUs than channels some SUs get nothing.
/// Returns the SU index chosen for each channel.
inline std::vector<std::size_t> hungarian_min_cost(const Matrix<double>& cost) {
  const std::size_t n = cost.rows(), m = cost.cols();
  if (n == 0 || m == 0) throw std::invalid_argument("hungarian_min_cost: empty cost matrix");
  for (double c : cost.data())
    if (!std::isfinite(c)) throw std::invalid_argument("hungarian_min_cost: costs must be finite");
  std::vector<std::size_t> su_of(m, 0);
  if (m <= n) {
    Matrix<double> t(m, n);
    for (std::size_t j = 0; j < m; ++j)
      for (std::size_t i = 0; i < n; ++i) t(j, i) = cost(i, j);
    return hungarian_rows_to_cols(t);
  }
  std::vector<std::size_t> left(m);
  for (std::size_t j = 0; j < m; ++j) left[j] = j;
  while (!left.empty()) {
    if (left.size() <= n) {
      Matrix<double> t(left.size(), n);
      for (std::size_t r = 0; r < left.size(); ++r)
        for (std::size_t i = 0; i < n; ++i) t(r, i) = cost(i, left[r]);
      const auto pick = hungarian_rows_to_cols(t);
      for (std::size_t r = 0; r < left.size(); ++r) su_of[left[r]] = pick[r];
      left.clear();
    } else {
      // each SU takes one of the remaining channels
      Matrix<double> t(n, left.size());
      for (std::size_t i = 0; i < n; ++i)
        for (std::size_t r = 0; r < left.size(); ++r) t(i, r) = cost(i, left[r]);
      const auto pick = hungarian_rows_to_cols(t);
      std::vector<char> taken(left.size(), 0);
      for (std::size_t i = 0; i < n; ++i) {
        su_of[left[pick[i]]] = i;
        taken[pick[i]] = 1;
      }
      std::vector<std::size_t> rest;
      for (std::size_t r = 0; r < left.size(); ++r)
        if (!taken[r]) rest.push_back(left[r]);
      left = std::move(rest);
    }
  }
  return su_of;
}

// ---------------------------------------------------------------------------
// Evaluation of a candidate assignment

/// How sensing/access parameters are chosen for a candidate assignment.
struct DesignPolicy {
  enum class Kind { Optimize, FixedTau } kind = Kind::Optimize;
  OptimizerOptions options;
  double tau_fraction = 0.01;  // FixedTau: tau on every assigned pair, as a fraction of T
  int window = 32;             // FixedTau: contention window

  static DesignPolicy optimized(OptimizerOptions o = {}) { return {Kind::Optimize, o, 0.01, 32}; }
  static DesignPolicy fixed_tau(double fraction, int w = 32) { return {Kind::FixedTau, {}, fraction, w}; }
};

/// Design and report for `assign` under `policy`. The empty assignment (or
/// one with no sensed channel) yields NT = 0.
inline OptimizedDesign evaluate_assignment(const Scenario& sc, const ChannelAssignment& assign,
                                           const DesignPolicy& policy, const ContentionCache* cache = nullptr) {
  if (assign.empty()) {
    OptimizedDesign out;
    out.design = SensingDesign(sc.num_su, sc.num_channels, 1);
    out.report = normalized_throughput(sc, assign, out.design);
    return out;
  }
  if (policy.kind == DesignPolicy::Kind::FixedTau) {
    OptimizedDesign out;
    out.design = SensingDesign::uniform(assign, policy.tau_fraction * sc.cycle.cycle_us, policy.window);
    out.report = normalized_throughput(sc, assign, out.design);
    out.evaluations = 1;
    return out;
  }
  return optimize_design(sc, assign, policy.options, cache);
}

struct AssignmentOutcome {
  ChannelAssignment assignment;
  SensingDesign design;
  ThroughputReport report;
  std::size_t evaluations = 0;  // candidate assignments evaluated
  double wall_ms = 0.0;
  std::string algorithm;
  std::size_t rounds = 0;     // greedy only
  std::size_t additions = 0;  // greedy only
};

namespace detail {

inline double elapsed_ms(std::chrono::steady_clock::time_point start) {
  return std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start).count();
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Greedy growth

/// Initial assignment: optimize with every SU sensing every channel, then
/// match channels to SUs by Hungarian on the optimized tau^{ij}.
inline ChannelAssignment hungarian_seed(const Scenario& sc, const DesignPolicy& policy,
                                        const ContentionCache* cache = nullptr) {
  const ChannelAssignment full = ChannelAssignment::full(sc.num_su, sc.num_channels);
  const OptimizedDesign base = evaluate_assignment(sc, full, policy, cache);
  const auto su_of = hungarian_min_cost(base.design.tau_us);
  ChannelAssignment seed(sc.num_su, sc.num_channels);
  for (std::size_t j = 0; j < sc.num_channels; ++j) seed.set(su_of[j], j, true);
  return seed;
}

/// Greedy channel assignment: starting from the Hungarian seed, repeatedly
/// add the (SU, channel) pair with the largest NT gain while that gain
/// exceeds delta. Every probe re-runs the design policy on the grown
/// assignment; results are cached per assignment matrix.
inline AssignmentOutcome greedy_channel_assignment(const Scenario& sc, double delta,
                                                   const DesignPolicy& policy = {}) {
  if (!(delta >= 0.0)) throw std::invalid_argument("greedy_channel_assignment: delta must be >= 0");
  const auto start = std::chrono::steady_clock::now();
  const ContentionCache cache(static_cast<int>(sc.num_su), sc.max_backoff_stage, sc.frames);
  std::map<ChannelAssignment, std::shared_ptr<const OptimizedDesign>> memo;
  std::size_t evaluations = 0;
  auto eval = [&](const ChannelAssignment& a) {
    auto it = memo.find(a);
    if (it != memo.end()) return it->second;
    ++evaluations;
    auto r = std::make_shared<const OptimizedDesign>(evaluate_assignment(sc, a, policy, &cache));
    memo.emplace(a, r);
    return r;
  };

  AssignmentOutcome out;
  ChannelAssignment current = hungarian_seed(sc, policy, &cache);
  ++evaluations;
  std::size_t rounds = 0, additions = 0;
  for (;;) {
    ++rounds;
    std::size_t k = 1;
    for (;;) {
      const double incumbent = eval(current)->report.normalized;
      std::vector<ChannelAssignment> probes;
      for (std::size_t i = 0; i < sc.num_su; ++i)
        for (std::size_t j = 0; j < sc.num_channels; ++j)
          if (!current.assigned(i, j)) {
            ChannelAssignment grown = current;
            grown.set(i, j, true);
            probes.push_back(std::move(grown));
          }
      if (probes.empty()) break;
      // evaluate uncached probes (possibly in parallel), then reduce in order
      std::vector<std::size_t> todo;
      for (std::size_t p = 0; p < probes.size(); ++p)
        if (!memo.count(probes[p])) todo.push_back(p);
      OptimizerOptions inner = policy.options;
      inner.threads = 1;
      DesignPolicy inner_policy = policy;
      inner_policy.options = inner;
      auto fresh = parallel_map<std::shared_ptr<const OptimizedDesign>>(
          todo.size(),
          [&](std::size_t t) {
            return std::make_shared<const OptimizedDesign>(
                evaluate_assignment(sc, probes[todo[t]], inner_policy, &cache));
          },
          policy.options.threads);
      for (std::size_t t = 0; t < todo.size(); ++t) memo.emplace(probes[todo[t]], fresh[t]);
      evaluations += todo.size();

      std::size_t best = 0;
      double best_gain = -std::numeric_limits<double>::infinity();
      for (std::size_t p = 0; p < probes.size(); ++p) {
        const double gain = memo.at(probes[p])->report.normalized - incumbent;
        if (gain > best_gain) {
          best_gain = gain;
          best = p;
        }
      }
      if (!(best_gain > delta)) break;
      current = probes[best];
      ++additions;
      ++k;
    }
    if (k == 1) break;  // the round added nothing
  }

  const auto final_design = eval(current);
  out.assignment = current;
  out.design = final_design->design;
  out.report = final_design->report;
  out.evaluations = evaluations;
  out.rounds = rounds;
  out.additions = additions;
  out.algorithm = "greedy";
  out.wall_ms = detail::elapsed_ms(start);
  return out;
}

/// Hungarian seed alone, with its optimized design.
inline AssignmentOutcome hungarian_seed_assignment(const Scenario& sc, const DesignPolicy& policy = {}) {
  const auto start = std::chrono::steady_clock::now();
  const ContentionCache cache(static_cast<int>(sc.num_su), sc.max_backoff_stage, sc.frames);
  AssignmentOutcome out;
  out.assignment = hungarian_seed(sc, policy, &cache);
  const OptimizedDesign d = evaluate_assignment(sc, out.assignment, policy, &cache);
  out.design = d.design;
  out.report = d.report;
  out.evaluations = 2;
  out.algorithm = "hungarian";
  out.wall_ms = detail::elapsed_ms(start);
  return out;
}

// ---------------------------------------------------------------------------
// Exhaustive search

struct BruteForceLimits {
  std::uint64_t max_candidates = std::uint64_t{1} << 20;
};

/// Evaluates all 2^(N*M) assignment matrices and returns the best one. Ties
/// go to the lexicographically smallest matrix.
inline AssignmentOutcome brute_force_channel_assignment(const Scenario& sc, const BruteForceLimits& limits = {},
                                                        const DesignPolicy& policy =
                                                            DesignPolicy::optimized(OptimizerOptions::coarse())) {
  const std::size_t cells = sc.num_su * sc.num_channels;
  if (cells >= 63 || (std::uint64_t{1} << cells) > limits.max_candidates)
    throw std::length_error("brute_force_channel_assignment: 2^(N*M) = 2^" + std::to_string(cells) +
                            " candidates exceeds the limit of " + std::to_string(limits.max_candidates));
  const auto start = std::chrono::steady_clock::now();
  const std::uint64_t count = std::uint64_t{1} << cells;
  const ContentionCache cache(static_cast<int>(sc.num_su), sc.max_backoff_stage, sc.frames);
  DesignPolicy inner = policy;
  inner.options.threads = 1;

  struct Best {
    double nt = -1.0;
    std::uint64_t mask = 0;
  };
  // chunked so the parallel map does not hold every design in memory
  const std::uint64_t chunk = 256;
  const std::uint64_t chunks = (count + chunk - 1) / chunk;
  auto partial = parallel_map<Best>(
      static_cast<std::size_t>(chunks),
      [&](std::size_t c) {
        Best b;
        const std::uint64_t lo = c * chunk, hi = std::min(count, lo + chunk);
        for (std::uint64_t mask = lo; mask < hi; ++mask) {
          const auto a = ChannelAssignment::from_mask(sc.num_su, sc.num_channels, mask);
          const double nt = evaluate_assignment(sc, a, inner, &cache).report.normalized;
          if (nt > b.nt) b = {nt, mask};
        }
        return b;
      },
      policy.options.threads);
  Best best;
  for (const Best& b : partial)
    if (b.nt > best.nt) best = b;

  AssignmentOutcome out;
  out.assignment = ChannelAssignment::from_mask(sc.num_su, sc.num_channels, best.mask);
  const OptimizedDesign d = evaluate_assignment(sc, out.assignment, inner, &cache);
  out.design = d.design;
  out.report = d.report;
  out.evaluations = static_cast<std::size_t>(count);
  out.algorithm = "brute";
  out.wall_ms = detail::elapsed_ms(start);
  return out;
}

// ---------------------------------------------------------------------------
// Round robin

enum class RoundRobinMode {
  Truncate,  // runs stop at the last channel (SU4 of N=10, M=4, width 2 gets {4})
  Wrap,      // runs wrap around to channel 1
};

/// SU i (0-based) starts at channel i mod M and takes `width` consecutive
/// channels.
inline ChannelAssignment round_robin_assignment(std::size_t n_su, std::size_t n_ch, std::size_t width,
                                                RoundRobinMode mode = RoundRobinMode::Truncate) {
  if (n_su < 1 || n_ch < 1) throw std::invalid_argument("round_robin_assignment: N and M must be >= 1");
  if (width < 1 || width > n_ch)
    throw std::invalid_argument("round_robin_assignment: width must lie in [1, M]");
  ChannelAssignment a(n_su, n_ch);
  for (std::size_t i = 0; i < n_su; ++i) {
    const std::size_t first = i % n_ch;
    for (std::size_t k = 0; k < width; ++k) {
      const std::size_t j = first + k;
      if (j < n_ch) a.set(i, j, true);
      else if (mode == RoundRobinMode::Wrap) a.set(i, j % n_ch, true);
    }
  }
  return a;
}

/// Fixed assignment with its design chosen by `policy`.
inline AssignmentOutcome fixed_assignment_outcome(const Scenario& sc, const ChannelAssignment& assign,
                                                  const DesignPolicy& policy, std::string tag) {
  const auto start = std::chrono::steady_clock::now();
  AssignmentOutcome out;
  out.assignment = assign;
  const OptimizedDesign d = evaluate_assignment(sc, assign, policy);
  out.design = d.design;
  out.report = d.report;
  out.evaluations = 1;
  out.algorithm = std::move(tag);
  out.wall_ms = detail::elapsed_ms(start);
  return out;
}

}  // namespace coopmac
