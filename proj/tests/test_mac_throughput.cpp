#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "coopmac/mac_throughput.hpp"
#include "oracles.hpp"

using namespace coopmac;

TEST(Bianchi, SingleStationClosedForm) {
  const auto fp = bianchi_fixed_point(1, 15, 3);
  EXPECT_EQ(fp.p, 0.0);
  EXPECT_DOUBLE_EQ(fp.phi, 0.125);
  for (int w : {1, 2, 7, 64, 1024}) EXPECT_NEAR(bianchi_fixed_point(1, w, 5).phi, 2.0 / (w + 1.0), 1e-12);
}

TEST(Bianchi, AgreesWithDampedIteration) {
  for (int n : {2, 5, 10, 30}) {
    for (int w : {4, 32, 256}) {
      for (int m0 : {0, 3, 6}) {
        const auto fp = bianchi_fixed_point(n, w, m0);
        const auto ref = oracle::bianchi_iterate(n, w, m0);
        EXPECT_NEAR(fp.phi, static_cast<double>(ref.phi), 1e-10) << n << " " << w << " " << m0;
        EXPECT_NEAR(fp.p, static_cast<double>(ref.p), 1e-10);
      }
    }
  }
}

TEST(Bianchi, ResidualsSmallOverAcceptanceRange) {
  for (int n = 1; n <= 50; n += 7)
    for (int w = 1; w <= 1024; w *= 4)
      for (int m0 = 0; m0 <= 6; m0 += 2) {
        const auto fp = bianchi_fixed_point(n, w, m0);
        EXPECT_LT(bianchi_p_residual(fp, n), 1e-10);
        EXPECT_LT(bianchi_phi_residual(fp, w, m0), 1e-10);
      }
}

TEST(Bianchi, AlwaysTransmitDegenerateCase) {
  const auto fp = bianchi_fixed_point(5, 1, 0);
  EXPECT_DOUBLE_EQ(fp.phi, 1.0);
  EXPECT_DOUBLE_EQ(fp.p, 1.0);
}

TEST(Bianchi, RejectsBadArguments) {
  EXPECT_THROW(bianchi_fixed_point(0, 8, 3), std::invalid_argument);
  EXPECT_THROW(bianchi_fixed_point(3, 0, 3), std::invalid_argument);
  EXPECT_THROW(bianchi_fixed_point(3, 8, -1), std::invalid_argument);
}

TEST(SlotDurations, DefaultFrameSpotValues) {
  const SlotDurations d = slot_durations(FrameTimings{});
  EXPECT_DOUBLE_EQ(d.success_us, 8982.0);
  EXPECT_DOUBLE_EQ(d.collision_us, 8713.0);
}

TEST(SlotDurations, DifferenceIdentity) {
  FrameTimings f;
  f.sifs_us = 10;
  f.prop_delay_us = 3;
  f.ack_bits = 50;
  f.bit_rate = 2;
  const SlotDurations d = slot_durations(f);
  EXPECT_DOUBLE_EQ(d.success_us - d.collision_us, f.sifs_us + f.prop_delay_us + f.ack_us());
}

TEST(SlotDurations, DegenerateOverheads) {
  FrameTimings f;
  f.sifs_us = f.difs_us = f.prop_delay_us = f.ack_bits = 1e-300;
  const SlotDurations d = slot_durations(f);
  EXPECT_NEAR(d.success_us, f.header_us() + f.packet_us(), 1e-9);
  EXPECT_NEAR(d.collision_us, f.header_us() + f.packet_us(), 1e-9);
}

TEST(ContentionStats, SingleStation) {
  const FrameTimings f;
  const auto s = contention_stats(1, 31, 3, f);
  EXPECT_DOUBLE_EQ(s.p_transmit, s.phi);
  EXPECT_DOUBLE_EQ(s.p_success, 1.0);
  EXPECT_NEAR(s.mean_slot_us, (1 - s.phi) * f.slot_us + s.phi * s.success_us, 1e-9);
}

TEST(ContentionStats, MeanSlotApproachesSigmaForHugeWindows) {
  const auto s = contention_stats(2, 1 << 20, 0, FrameTimings{});
  EXPECT_NEAR(s.mean_slot_us, 20.0, 0.05);
}

TEST(ContentionStats, InvariantRanges) {
  const FrameTimings f;
  for (int n : {1, 3, 10, 40})
    for (int w : {1, 8, 64, 1024}) {
      const auto s = contention_stats(n, w, 3, f);
      for (double v : {s.phi, s.p, s.p_transmit, s.p_success}) {
        EXPECT_GE(v, 0.0);
        EXPECT_LE(v, 1.0);
      }
      EXPECT_GE(s.mean_slot_us, std::min({f.slot_us, s.success_us, s.collision_us}));
      EXPECT_LE(s.mean_slot_us, std::max({f.slot_us, s.success_us, s.collision_us}));
    }
}

TEST(ContentionStats, SuccessProbabilityMatchesMonteCarlo) {
  const auto s = contention_stats(10, 32, 3, FrameTimings{});
  std::mt19937_64 rng(99);
  std::bernoulli_distribution tx(s.phi);
  long busy = 0, success = 0;
  for (int slot = 0; slot < 1'000'000; ++slot) {
    int k = 0;
    for (int st = 0; st < 10; ++st) k += tx(rng);
    if (k > 0) ++busy;
    if (k == 1) ++success;
  }
  const double ps = static_cast<double>(success) / static_cast<double>(busy);
  const double se = std::sqrt(s.p_success * (1 - s.p_success) / static_cast<double>(busy));
  EXPECT_LT(std::abs(ps - s.p_success), 3 * se);
}

TEST(SingleChannelThroughput, NoDataPhaseMeansZero) {
  const FrameTimings f;
  const CycleTimings c;
  const double tr = c.reporting_us(10);
  EXPECT_EQ(single_channel_throughput(c.cycle_us - tr, 64, 10, 3, f, c).throughput, 0.0);
  EXPECT_EQ(single_channel_throughput(c.cycle_us, 64, 10, 3, f, c).slots, 0.0);
}

TEST(SingleChannelThroughput, DoublingCycleAtLeastDoublesSlotsMinusOne) {
  const FrameTimings f;
  CycleTimings c;
  const auto a = single_channel_throughput(1000.0, 64, 10, 3, f, c);
  c.cycle_us *= 2;
  const auto b = single_channel_throughput(1000.0, 64, 10, 3, f, c);
  EXPECT_GE(b.slots, 2 * a.slots - 1);
}

TEST(SingleChannelThroughput, DefaultTimingsGiveFraction) {
  const auto t = single_channel_throughput(1000.0, 64, 10, 3, FrameTimings{}, CycleTimings{});
  EXPECT_GT(t.throughput, 0.0);
  EXPECT_LT(t.throughput, 1.0);
}

TEST(SingleChannelThroughput, NonIncreasingInSensingTime) {
  const auto stats = contention_stats(10, 64, 3, FrameTimings{});
  double prev = 2.0;
  for (double tau = 1.0; tau < 1e5; tau *= 1.7) {
    const double t = single_channel_throughput(tau, stats, 10, FrameTimings{}, CycleTimings{}).throughput;
    EXPECT_LE(t, prev);
    prev = t;
  }
}

namespace {

SensingPerformance perf_with(const std::vector<std::optional<double>>& pf) {
  SensingPerformance p;
  p.channel_pf = pf;
  p.channel_pd = pf;
  return p;
}

}  // namespace

TEST(ExpectedIdle, SpotValues) {
  EXPECT_NEAR(expected_correct_idle(perf_with({0.1}), {0.5}).expected, 0.45, 1e-15);
  EXPECT_DOUBLE_EQ(expected_correct_idle(perf_with({0.0, 0.0, 0.0}), {1.0, 1.0, 1.0}).expected, 3.0);
}

TEST(ExpectedIdle, UnsensedChannelsContributeNothing) {
  const auto e = expected_correct_idle(perf_with({std::nullopt, 0.2}), {1.0, 1.0});
  EXPECT_DOUBLE_EQ(e.per_channel[0], 0.0);
  EXPECT_DOUBLE_EQ(e.expected, 0.8);
}

TEST(ExpectedIdle, ClosedFormEqualsDoubleSum) {
  std::mt19937_64 rng(8);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int trial = 0; trial < 50; ++trial) {
    const std::size_t m = 1 + trial % 8;
    std::vector<double> idle(m), pf(m);
    std::vector<std::optional<double>> opt(m);
    for (std::size_t j = 0; j < m; ++j) {
      idle[j] = u(rng);
      pf[j] = u(rng);
      opt[j] = pf[j];
    }
    EXPECT_NEAR(expected_correct_idle(perf_with(opt), idle).expected, oracle::expected_idle_double_sum(idle, pf), 1e-10);
  }
}

namespace {

Scenario small_scenario() {
  Scenario sc = oracle::random_scenario(3, 2, 5);
  sc.validate();
  return sc;
}

}  // namespace

TEST(NormalizedThroughput, EmptyAssignmentIsZero) {
  const Scenario sc = small_scenario();
  const auto r = normalized_throughput(sc, ChannelAssignment(3, 2), SensingDesign(3, 2, 16));
  EXPECT_EQ(r.expected_idle, 0.0);
  EXPECT_EQ(r.normalized, 0.0);
}

TEST(NormalizedThroughput, ProductIdentityAndRanges) {
  const Scenario sc = small_scenario();
  const auto a = ChannelAssignment::full(3, 2);
  const auto r = normalized_throughput(sc, a, SensingDesign::uniform(a, 700.0, 40));
  EXPECT_DOUBLE_EQ(r.normalized, r.single_channel * r.expected_idle / 2.0);
  EXPECT_GE(r.expected_idle, 0.0);
  EXPECT_LE(r.expected_idle, 2.0);
  EXPECT_GE(r.normalized, 0.0);
  EXPECT_LE(r.normalized, 1.0);
  EXPECT_DOUBLE_EQ(r.tau_total_us, 1400.0);
}

TEST(NormalizedThroughput, NearPerfectSingleChannelLimit) {
  Scenario sc;
  sc.snr_db = Matrix<double>(1, 1, 10.0);
  sc.p_idle = {1.0};
  sc.target_pd = {0.5};
  sc.fusion = {FusionRule::or_rule()};
  const auto a = ChannelAssignment::full(1, 1);
  const auto r = normalized_throughput(sc, a, SensingDesign::uniform(a, 10.0, 32));
  EXPECT_NEAR(r.normalized, r.single_channel, 1e-9);
}

TEST(NormalizedThroughput, HomogeneousInIdleProbabilities) {
  Scenario sc = small_scenario();
  const auto a = ChannelAssignment::full(3, 2);
  const auto d = SensingDesign::uniform(a, 900.0, 50);
  const double base = normalized_throughput(sc, a, d).normalized;
  const auto p0 = sc.p_idle;
  for (double c : {0.0, 0.25, 0.6, 1.0}) {
    for (std::size_t j = 0; j < 2; ++j) sc.p_idle[j] = c * p0[j];
    EXPECT_NEAR(normalized_throughput(sc, a, d).normalized, c * base, 1e-14);
  }
}

TEST(NormalizedThroughput, MonotoneInIdleProbability) {
  Scenario sc = small_scenario();
  const auto a = ChannelAssignment::full(3, 2);
  const auto d = SensingDesign::uniform(a, 900.0, 50);
  double prev = -1.0;
  for (double p = 0.0; p <= 1.0; p += 0.125) {
    sc.p_idle[1] = p;
    const double nt = normalized_throughput(sc, a, d).normalized;
    EXPECT_GE(nt, prev);
    prev = nt;
  }
}

TEST(NormalizedThroughput, DesignMustMatchAssignment) {
  const Scenario sc = small_scenario();
  const auto a = ChannelAssignment::full(3, 2);
  EXPECT_THROW(normalized_throughput(sc, a, SensingDesign(3, 2, 8)), std::invalid_argument);
}
