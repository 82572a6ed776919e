#pragma once

// Monte Carlo replay of the sensing / reporting / contention cycle.
//
// Contention is slotted: every generic slot each station with a zero counter
// transmits and every other station decrements. Busy slots therefore behave
// like a frozen counter followed by one decrement, which is the usual slotted
// reading of carrier-sense freezing.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <random>
#include <stdexcept>
#include <vector>

#include "coopmac/mac_throughput.hpp"
#include "coopmac/model.hpp"
#include "coopmac/parallel.hpp"
#include "coopmac/random.hpp"
#include "coopmac/sensing.hpp"

namespace coopmac {

struct SimConfig {
  std::uint64_t n_cycles = 10'000;
  std::uint64_t seed = 1;
  std::uint64_t batch_cycles = 1'000;  // cycles per replication batch
  unsigned threads = 0;                // 0: worker_count()

  void check() const {
    if (n_cycles < 1) throw std::invalid_argument("simulation: n_cycles must be >= 1");
    if (batch_cycles < 1) throw std::invalid_argument("simulation: batch size must be >= 1");
  }
};

struct ContentionTally {
  std::uint64_t successes = 0;
  std::uint64_t collisions = 0;
  std::uint64_t empty_slots = 0;
  std::uint64_t transmissions = 0;  // station-slot transmissions
  double consumed_us = 0.0;

  std::uint64_t slots() const { return successes + collisions + empty_slots; }

  ContentionTally& operator+=(const ContentionTally& o) {
    successes += o.successes;
    collisions += o.collisions;
    empty_slots += o.empty_slots;
    transmissions += o.transmissions;
    consumed_us += o.consumed_us;
    return *this;
  }
};

/// Backoff state of n saturated stations with binary exponential backoff.
class BackoffStations {
 public:
  template <Rng64 G>
  BackoffStations(int n, int window, int m0, G& rng) : window_(window), m0_(m0), stage_(n, 0), counter_(n, 0) {
    if (n < 1 || window < 1 || m0 < 0) throw std::invalid_argument("contention: need n>=1, W>=1, m0>=0");
    for (std::size_t s = 0; s < counter_.size(); ++s) counter_[s] = draw(0, rng);
  }

  std::size_t size() const { return counter_.size(); }

  /// Runs whole generic slots until the next one would overrun budget_us.
  template <Rng64 G>
  ContentionTally run(double budget_us, const SlotDurations& busy, double slot_us, G& rng) {
    ContentionTally t;
    double left = budget_us;
    std::vector<std::size_t> ready;
    for (;;) {
      std::uint64_t idle_run = counter_[0];
      for (std::uint64_t c : counter_) idle_run = std::min(idle_run, c);
      if (idle_run > 0) {
        // Every counter is positive: the next idle_run slots are empty.
        const auto fit = static_cast<std::uint64_t>(std::floor(left / slot_us));
        const std::uint64_t k = std::min(idle_run, fit);
        for (auto& c : counter_) c -= k;
        t.empty_slots += k;
        t.consumed_us += static_cast<double>(k) * slot_us;
        left -= static_cast<double>(k) * slot_us;
        if (k < idle_run) break;
      }
      ready.clear();
      for (std::size_t s = 0; s < counter_.size(); ++s)
        if (counter_[s] == 0) ready.push_back(s);
      const bool success = ready.size() == 1;
      const double len = success ? busy.success_us : busy.collision_us;
      if (len > left) break;
      left -= len;
      t.consumed_us += len;
      t.transmissions += ready.size();
      for (std::size_t s = 0; s < counter_.size(); ++s)
        if (counter_[s] > 0) --counter_[s];
      if (success) {
        ++t.successes;
        stage_[ready[0]] = 0;
      } else {
        ++t.collisions;
        for (std::size_t s : ready) stage_[s] = std::min(stage_[s] + 1, m0_);
      }
      for (std::size_t s : ready) counter_[s] = draw(stage_[s], rng);
    }
    return t;
  }

 private:
  template <Rng64 G>
  std::uint64_t draw(int stage, G& rng) const {
    return uniform_below(rng, (std::uint64_t{1} << stage) * static_cast<std::uint64_t>(window_));
  }

  int window_;
  int m0_;
  std::vector<int> stage_;
  std::vector<std::uint64_t> counter_;
};

/// One contention phase from a fresh backoff state.
template <Rng64 G>
ContentionTally simulate_contention_phase(int n, int window, int m0, double budget_us, const FrameTimings& frames,
                                          G& rng) {
  if (!(budget_us >= 0.0)) throw std::invalid_argument("contention: budget must be >= 0");
  BackoffStations st(n, window, m0, rng);
  return st.run(budget_us, slot_durations(frames), frames.slot_us, rng);
}

struct ChannelCounters {
  std::uint64_t idle = 0;           // cycles the channel was truly idle
  std::uint64_t declared_idle = 0;  // cycles the AP declared it idle
  std::uint64_t correct_idle = 0;   // declared idle and truly idle

  ChannelCounters& operator+=(const ChannelCounters& o) {
    idle += o.idle;
    declared_idle += o.declared_idle;
    correct_idle += o.correct_idle;
    return *this;
  }
};

struct EmpiricalReport {
  std::uint64_t cycles = 0;
  std::uint64_t batches = 0;
  double normalized = 0.0;           // empirical NT
  double normalized_stderr = 0.0;    // batch-means standard error
  double phi = 0.0;                  // transmissions per station per slot
  double phi_stderr = 0.0;
  double credited_us = 0.0;          // payload time delivered on correct-idle channels
  ContentionTally contention;
  std::vector<ChannelCounters> channels;
};

namespace detail {

struct BatchResult {
  std::uint64_t cycles = 0;
  double credited_us = 0.0;
  ContentionTally contention;
  std::vector<ChannelCounters> channels;
};

inline void mean_and_stderr(const std::vector<double>& xs, double& mean, double& se) {
  mean = 0.0;
  for (double x : xs) mean += x;
  mean /= static_cast<double>(xs.size());
  se = 0.0;
  if (xs.size() < 2) return;
  double ss = 0.0;
  for (double x : xs) ss += (x - mean) * (x - mean);
  se = std::sqrt(ss / static_cast<double>(xs.size() - 1) / static_cast<double>(xs.size()));
}

}  // namespace detail

/// Simulates cfg.n_cycles cycles of the protocol for a fixed assignment and
/// design. Batches use independent streams and keep backoff state across
/// their cycles.
inline EmpiricalReport simulate_cycles(const Scenario& sc, const ChannelAssignment& assign,
                                       const SensingDesign& design, const SimConfig& cfg) {
  cfg.check();
  if (!design_matches(design, assign))
    throw std::invalid_argument("simulation: design must have tau > 0 exactly on assigned pairs");
  const std::size_t n = sc.num_su, m = sc.num_channels;
  const SensingPerformance perf = sensing_performance(sc, assign, design.tau_us);
  const SlotDurations busy = slot_durations(sc.frames);
  const double budget = sc.cycle.cycle_us - design.total() - sc.reporting_us();
  const double payload = sc.frames.packet_us();

  std::vector<std::vector<std::size_t>> sensors(m);
  for (std::size_t j = 0; j < m; ++j) sensors[j] = assign.sensors_of(j);

  const std::uint64_t n_batches = (cfg.n_cycles + cfg.batch_cycles - 1) / cfg.batch_cycles;
  auto run_batch = [&](std::size_t b) {
    detail::BatchResult r;
    r.cycles = std::min(cfg.batch_cycles, cfg.n_cycles - b * cfg.batch_cycles);
    r.channels.assign(m, {});
    std::mt19937_64 rng(mix_seed(cfg.seed, b));
    BackoffStations stations(static_cast<int>(n), design.window, sc.max_backoff_stage, rng);
    for (std::uint64_t c = 0; c < r.cycles; ++c) {
      std::size_t good = 0;
      for (std::size_t j = 0; j < m; ++j) {
        const bool idle = bernoulli(rng, sc.p_idle[j]);
        int busy_reports = 0;
        for (std::size_t i : sensors[j])
          busy_reports += bernoulli(rng, idle ? perf.link_pf(i, j) : perf.link_pd(i, j)) ? 1 : 0;
        const bool declared = !sensors[j].empty() && busy_reports < perf.threshold_a[j];
        r.channels[j].idle += idle;
        r.channels[j].declared_idle += declared;
        r.channels[j].correct_idle += idle && declared;
        good += idle && declared;
      }
      if (budget <= 0.0) continue;
      const ContentionTally t = stations.run(budget, busy, sc.frames.slot_us, rng);
      r.contention += t;
      r.credited_us += static_cast<double>(t.successes) * payload * static_cast<double>(good);
    }
    return r;
  };
  const auto batches = parallel_map<detail::BatchResult>(static_cast<std::size_t>(n_batches), run_batch, cfg.threads);

  EmpiricalReport rep;
  rep.batches = n_batches;
  rep.channels.assign(m, {});
  const double denom_cycle = static_cast<double>(m) * sc.cycle.cycle_us;
  std::vector<double> nt_batch, phi_batch;
  for (const auto& b : batches) {
    rep.cycles += b.cycles;
    rep.credited_us += b.credited_us;
    rep.contention += b.contention;
    for (std::size_t j = 0; j < m; ++j) rep.channels[j] += b.channels[j];
    nt_batch.push_back(b.credited_us / (denom_cycle * static_cast<double>(b.cycles)));
    if (b.contention.slots() > 0)
      phi_batch.push_back(static_cast<double>(b.contention.transmissions) /
                          (static_cast<double>(n) * static_cast<double>(b.contention.slots())));
  }
  double unused = 0.0;
  detail::mean_and_stderr(nt_batch, unused, rep.normalized_stderr);
  rep.normalized = rep.credited_us / (denom_cycle * static_cast<double>(rep.cycles));
  if (rep.contention.slots() > 0) {
    rep.phi = static_cast<double>(rep.contention.transmissions) /
              (static_cast<double>(n) * static_cast<double>(rep.contention.slots()));
    detail::mean_and_stderr(phi_batch, unused, rep.phi_stderr);
  }
  return rep;
}

}  // namespace coopmac
