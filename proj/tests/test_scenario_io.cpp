#include <gtest/gtest.h>

#include <string>

#include "coopmac/scenario_io.hpp"

using namespace coopmac;

namespace {

std::string error_of(const std::string& text) {
  try {
    parse_scenario(text);
  } catch (const std::invalid_argument& e) {
    return e.what();
  }
  return {};
}

}  // namespace

TEST(ScenarioJson, MinimalFileTakesDefaults) {
  const Scenario sc = parse_scenario(R"({"N": 3, "M": 2, "seed": 5})");
  EXPECT_EQ(sc.num_su, 3U);
  EXPECT_EQ(sc.num_channels, 2U);
  EXPECT_EQ(sc.p_idle, (std::vector<double>{1.0, 1.0}));
  EXPECT_EQ(sc.cycle.cycle_us, 100'000.0);
  EXPECT_EQ(sc.sampling_hz, 6e6);
  EXPECT_EQ(sc.max_backoff_stage, 3);
  EXPECT_EQ(sc.max_window, 1024);
  for (double s : sc.snr_db.data()) {
    EXPECT_GE(s, -20.0);
    EXPECT_LE(s, -15.0);
  }
  for (double t : sc.target_pd) {
    EXPECT_GE(t, 0.95);
    EXPECT_LE(t, 0.99);
  }
  EXPECT_EQ(sc.fusion[0], FusionRule::majority());
  EXPECT_FALSE(sc.assignment);
}

TEST(ScenarioJson, RandomDrawsDependOnlyOnSeed) {
  const auto a = parse_scenario(R"({"N": 2, "M": 2, "seed": 5})");
  const auto b = parse_scenario(R"({"M": 2, "seed": 5, "N": 2, "p_idle": [0.5, 0.5]})");
  const auto c = parse_scenario(R"({"N": 2, "M": 2, "seed": 6})");
  EXPECT_EQ(a.snr_db, b.snr_db);
  EXPECT_EQ(a.target_pd, b.target_pd);
  EXPECT_NE(a.snr_db, c.snr_db);
}

TEST(ScenarioJson, SeedOverrideReplacesRecordedSeed) {
  const std::string text = R"({"N": 2, "M": 2, "seed": 5})";
  const auto a = parse_scenario(text, 9);
  EXPECT_EQ(a.seed, 9U);
  EXPECT_EQ(a, parse_scenario(R"({"N": 2, "M": 2, "seed": 9})"));
}

TEST(ScenarioJson, ExplicitFieldsAndRanges) {
  const Scenario sc = parse_scenario(R"({
    "N": 2, "M": 2,
    "snr_db": [[-12, -13], [-14, -15]],
    "fusion": ["or", "fixed:2"],
    "cycle_ms": 50, "m0": 5, "W_max": 128, "delta": 0.001,
    "frames": {"packet_bits": 4000},
    "random": {"target_pd": [0.9, 0.91]},
    "assignment": "10|11"
  })");
  EXPECT_EQ(sc.snr_db(1, 0), -14.0);
  EXPECT_EQ(sc.fusion[0], FusionRule::or_rule());
  EXPECT_EQ(sc.fusion[1], FusionRule::fixed(2));
  EXPECT_EQ(sc.cycle.cycle_us, 50'000.0);
  EXPECT_EQ(sc.max_backoff_stage, 5);
  EXPECT_EQ(sc.max_window, 128);
  EXPECT_EQ(sc.frames.packet_bits, 4000.0);
  for (double t : sc.target_pd) {
    EXPECT_GE(t, 0.9);
    EXPECT_LE(t, 0.91);
  }
  ASSERT_TRUE(sc.assignment);
  EXPECT_EQ(sc.assignment->to_string(), "10|11");
}

TEST(ScenarioJson, MatrixAssignmentForm) {
  const Scenario sc = parse_scenario(R"({"N": 2, "M": 2, "seed": 1, "assignment": [[0, 1], [1, 1]]})");
  EXPECT_EQ(sc.assignment->to_string(), "01|11");
}

TEST(ScenarioJson, OutOfRangeIdleProbabilityNamesField) {
  const std::string e = error_of(R"({"N": 2, "M": 2, "seed": 1, "p_idle": [0.5, 1.2]})");
  EXPECT_NE(e.find("p_idle"), std::string::npos) << e;
}

TEST(ScenarioJson, StructuralErrorsNameField) {
  EXPECT_NE(error_of(R"({"N": 2, "seed": 1})").find("'M'"), std::string::npos);
  EXPECT_NE(error_of(R"({"N": 2, "M": 2, "bogus": 1})").find("bogus"), std::string::npos);
  EXPECT_NE(error_of(R"({"N": 2, "M": 2, "frames": {"slot": 9}})").find("frames.slot"), std::string::npos);
  EXPECT_NE(error_of(R"({"N": 2, "M": 2, "snr_db": [[1, 2]]})").find("snr_db"), std::string::npos);
  EXPECT_NE(error_of(R"({"N": 2, "M": 2, "fusion": "sometimes"})").find("fusion"), std::string::npos);
  EXPECT_NE(error_of(R"({"N": 2, "M": 2, "assignment": "1|11"})").find("assignment"), std::string::npos);
  EXPECT_NE(error_of(R"({"N": 2.5, "M": 2})").find("'N'"), std::string::npos);
}

TEST(ScenarioJson, SyntaxErrorReportsLineAndColumn) {
  const std::string e = error_of("{\n  \"N\": 2,\n  \"M\": ,\n}");
  EXPECT_NE(e.find("line 3"), std::string::npos) << e;
  EXPECT_NE(e.find("column"), std::string::npos) << e;
}

TEST(ScenarioJson, RoundTripIsExact) {
  for (const auto& name : preset_names()) {
    Scenario sc = preset_scenario(name);
    sc.p_idle[0] = 0.123456789012345;
    const Scenario back = parse_scenario(serialize_scenario(sc));
    EXPECT_EQ(back, sc) << name;
  }
  Scenario odd = parse_scenario(R"({"N": 1, "M": 1, "seed": 3, "cycle_ms": 87.6543219})");
  EXPECT_EQ(parse_scenario(serialize_scenario(odd)), odd);
}

TEST(ScenarioJson, DesignRoundTrip) {
  Scenario sc = parse_scenario(R"({"N": 2, "M": 1, "seed": 3, "assignment": "1|0", "design": {"W": 17, "tau_us": [[120.5], [0]]}})");
  ASSERT_TRUE(sc.design);
  EXPECT_EQ(sc.design->window, 17);
  EXPECT_EQ(sc.design->tau_us(0, 0), 120.5);
  EXPECT_EQ(parse_scenario(serialize_scenario(sc)), sc);
}

TEST(Presets, FourByFour) {
  const Scenario sc = preset_scenario("paper_4x4");
  EXPECT_EQ(sc.seed, kPaper4x4Seed);
  EXPECT_EQ(sc.num_su, 4U);
  EXPECT_EQ(sc.p_idle, std::vector<double>(4, 1.0));
  EXPECT_NE(preset_scenario("paper_4x4", 1).snr_db, sc.snr_db);
}

TEST(Presets, TenByFourLayout) {
  const Scenario sc = preset_scenario("paper_10x4");
  ASSERT_TRUE(sc.assignment);
  EXPECT_EQ(sc.assignment->pair_count(), 15U);
  int strong = 0;
  for (std::size_t i = 0; i < 10; ++i)
    for (std::size_t j = 0; j < 4; ++j) {
      const double s = sc.snr_db(i, j);
      EXPECT_TRUE(s == -10.0 || s == -15.0);
      EXPECT_EQ(s == -10.0, sc.assignment->assigned(i, j));
      strong += s == -10.0;
    }
  EXPECT_EQ(strong, 15);
  EXPECT_EQ(sc.p_idle, std::vector<double>(4, 0.9));
}

TEST(Presets, UnknownNameAndMissingFile) {
  EXPECT_THROW(preset_scenario("paper_5x5"), std::invalid_argument);
  EXPECT_THROW(load_scenario("/nonexistent/scenario.json"), std::invalid_argument);
}

TEST(Overrides, CommonIdleValidates) {
  const Scenario sc = preset_scenario("paper_4x4");
  EXPECT_EQ(with_common_idle(sc, 0.3).p_idle, std::vector<double>(4, 0.3));
  EXPECT_THROW(with_common_idle(sc, 1.5), std::invalid_argument);
  EXPECT_EQ(with_snr_shift(sc, -2.0).snr_db(1, 2), sc.snr_db(1, 2) - 2.0);
  EXPECT_EQ(with_fusion(sc, FusionRule::and_rule()).fusion[3], FusionRule::and_rule());
}
