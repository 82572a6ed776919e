#include <gtest/gtest.h>

#include <cmath>
#include <stdexcept>

#include "coopmac/optimizer.hpp"
#include "oracles.hpp"

using namespace coopmac;

TEST(ScalarSearch, ConstantObjectiveReturnsSmallestGridPoint) {
  OptimizerOptions o;
  const double t = scalar_tau_search([](double) { return 1.0; }, 1e5, o);
  EXPECT_DOUBLE_EQ(t, o.tau_min_us);
}

TEST(ScalarSearch, FindsUnimodalPeak) {
  OptimizerOptions o;
  for (double peak : {3.7, 250.0, 4321.0, 77777.0}) {
    auto f = [&](double t) {
      const double d = std::log(t / peak);
      return -d * d;
    };
    EXPECT_NEAR(scalar_tau_search(f, 1e5, o), peak, 1e-3 * peak);
  }
}

TEST(ScalarSearch, StaysInsideFeasibleKnee) {
  OptimizerOptions o;
  auto f = [](double t) { return t < 9e4 ? t / 9e4 * (1.0 - t / 9e4) + 0.1 : 0.0; };
  const double t = scalar_tau_search(f, 1e5, o);
  EXPECT_LT(t, 9e4);
  EXPECT_NEAR(t, 4.5e4, 45.0);
}

TEST(ScalarSearch, NeverWorseThanBestGridPoint) {
  OptimizerOptions o;
  o.grid_points = 9;
  auto f = [](double t) { return std::sin(std::log(t) * 3.0) + 0.01 * std::log(t); };
  double grid_best = -1e9;
  for (int k = 0; k < 9; ++k) grid_best = std::max(grid_best, f(std::exp(std::log(1e5) * k / 8.0)));
  EXPECT_GE(f(scalar_tau_search(f, 1e5, o)), grid_best);
}

TEST(WindowCandidates, AllIntegersUpToLimit) {
  OptimizerOptions o;
  const auto w = window_candidates(200, o);
  ASSERT_EQ(w.size(), 200U);
  EXPECT_EQ(w.front(), 1);
  EXPECT_EQ(w.back(), 200);
}

TEST(WindowCandidates, GeometricGridIsIncreasingAndBracketed) {
  OptimizerOptions o;
  const auto w = window_candidates(1024, o);
  EXPECT_LT(w.size(), 100U);
  EXPECT_EQ(w.front(), 1);
  EXPECT_EQ(w.back(), 1024);
  for (std::size_t k = 1; k < w.size(); ++k) {
    EXPECT_GT(w[k], w[k - 1]);
    EXPECT_LE(static_cast<double>(w[k]), std::max(w[k - 1] + 1.0, 1.1 * w[k - 1] + 1.0));
  }
}

namespace {

GridSpec log_grid(int points, int w_max) {
  GridSpec g;
  for (int k = 0; k < points; ++k) g.tau_values_us.push_back(std::exp(std::log(1e5) * k / (points - 1)));
  for (int w = 1; w <= w_max; ++w) g.windows.push_back(w);
  return g;
}

}  // namespace

TEST(OptimizeDesign, SinglePairMatchesGrid) {
  for (std::uint64_t seed : {3, 4, 5}) {
    Scenario sc = oracle::random_scenario(1, 1, seed);
    sc.max_window = 64;
    const auto a = ChannelAssignment::full(1, 1);
    const auto opt = optimize_design(sc, a);
    const auto ref = grid_reference_optimum(sc, a, log_grid(400, 64));
    EXPECT_GE(opt.report.normalized, 0.995 * ref.report.normalized);
  }
}

TEST(OptimizeDesign, ConstraintsHold) {
  Scenario sc = oracle::random_scenario(3, 3, 21);
  ChannelAssignment a = ChannelAssignment::parse("110|011|101");
  const auto opt = optimize_design(sc, a);
  EXPECT_TRUE(design_matches(opt.design, a));
  for (std::size_t j = 0; j < 3; ++j) EXPECT_NEAR(*opt.report.sensing.channel_pd[j], sc.target_pd[j], 1e-10);
  for (double t : opt.design.tau_us.data()) EXPECT_LE(t, sc.cycle.cycle_us);
  EXPECT_GE(opt.design.window, 1);
  EXPECT_LE(opt.design.window, sc.max_window);
}

TEST(OptimizeDesign, ReportRegeneratesFromDesign) {
  Scenario sc = oracle::random_scenario(2, 2, 8);
  const auto a = ChannelAssignment::full(2, 2);
  const auto opt = optimize_design(sc, a);
  EXPECT_EQ(normalized_throughput(sc, a, opt.design).normalized, opt.report.normalized);
}

TEST(OptimizeDesign, Deterministic) {
  Scenario sc = oracle::random_scenario(2, 3, 12);
  const auto a = ChannelAssignment::parse("101|010");
  const auto x = optimize_design(sc, a), y = optimize_design(sc, a);
  EXPECT_EQ(x.design, y.design);
  EXPECT_EQ(x.report.normalized, y.report.normalized);
}

TEST(OptimizeDesign, ThreadCountDoesNotChangeResult) {
  Scenario sc = oracle::random_scenario(2, 2, 13);
  const auto a = ChannelAssignment::full(2, 2);
  OptimizerOptions one, four;
  one.threads = 1;
  four.threads = 4;
  EXPECT_EQ(optimize_design(sc, a, one).design, optimize_design(sc, a, four).design);
}

TEST(OptimizeDesign, UnitWindowCapDegeneratesToTauSearch) {
  Scenario sc = oracle::random_scenario(2, 1, 2);
  sc.max_window = 1;
  const auto opt = optimize_design(sc, ChannelAssignment::full(2, 1));
  EXPECT_EQ(opt.design.window, 1);
}

TEST(OptimizeDesign, NoSensedChannelsIsAnError) {
  const Scenario sc = oracle::random_scenario(2, 2, 1);
  EXPECT_THROW(optimize_design(sc, ChannelAssignment(2, 2)), std::invalid_argument);
}

TEST(OptimizeDesign, ExtraPassesNeverHurt) {
  Scenario sc = oracle::random_scenario(3, 2, 31);
  const auto a = ChannelAssignment::full(3, 2);
  OptimizerOptions more;
  more.coordinate_passes = 4;
  EXPECT_GE(optimize_design(sc, a, more).report.normalized + 1e-9, optimize_design(sc, a).report.normalized);
}

TEST(GridReference, EmptyGridIsAnError) {
  const Scenario sc = oracle::random_scenario(1, 1, 1);
  EXPECT_THROW(grid_reference_optimum(sc, ChannelAssignment::full(1, 1), GridSpec{}), std::invalid_argument);
}

TEST(GridReference, RefusesOversizeGrid) {
  const Scenario sc = oracle::random_scenario(2, 2, 1);
  GridSpec g = log_grid(200, 64);
  EXPECT_THROW(grid_reference_optimum(sc, ChannelAssignment::full(2, 2), g), std::length_error);
}

TEST(GridReference, SymmetricScenarioGivesSymmetricOptimum) {
  Scenario sc;
  sc.num_su = 2;
  sc.snr_db = Matrix<double>(2, 1, -17.0);
  sc.p_idle = {0.9};
  sc.target_pd = {0.96};
  sc.fusion = {FusionRule::and_rule()};
  const auto ref = grid_reference_optimum(sc, ChannelAssignment::full(2, 1), log_grid(60, 16));
  EXPECT_EQ(ref.design.tau_us(0, 0), ref.design.tau_us(1, 0));
}

TEST(GridReference, AgreesWithOptimizerOnOneCoordinate) {
  Scenario sc = oracle::random_scenario(1, 2, 40);
  sc.max_window = 64;
  const auto a = ChannelAssignment::parse("10");
  const auto ref = grid_reference_optimum(sc, a, log_grid(100, 64));
  const auto opt = optimize_design(sc, a);
  EXPECT_GE(opt.report.normalized, ref.report.normalized * (1.0 - 1e-12));
  EXPECT_NEAR(opt.report.normalized, ref.report.normalized, 5e-3 * ref.report.normalized);
}
