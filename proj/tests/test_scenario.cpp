#include <filesystem>
#include <fstream>
#include <numbers>
#include <string>

#include <gtest/gtest.h>

#include "qdirsim/scenario.hpp"

using namespace qdirsim;
namespace fs = std::filesystem;

namespace {

const fs::path kScenarios = QDIRSIM_SCENARIO_DIR;

std::string error_of(const std::string& text) {
  try {
    parse_config_text(text);
  } catch (const ConfigError& e) {
    return e.what();
  }
  return "";
}

}  // namespace

TEST(ScenarioConfig, EmptyDocumentGivesDefaults) {
  const auto c = parse_config_text("{}");
  EXPECT_EQ(c.grid.n_points, 256u);
  EXPECT_NEAR(c.grid.q_max, 8.0 * std::numbers::pi, 1e-12);
  EXPECT_EQ(c.run.n_events, 10000u);
  EXPECT_EQ(c.run.seed, 42u);
  EXPECT_NEAR(c.system_geometry().opening_angle_full, 0.1, 1e-12);
  EXPECT_NEAR(c.relative_offset(), 0.1 * 2.0 * std::numbers::pi, 1e-12);
  EXPECT_NEAR(c.mask_width(), 0.1, 1e-12);
  const auto img = c.image();
  ASSERT_EQ(img.dot_positions.size(), 2u);
  EXPECT_DOUBLE_EQ(img.dot_positions[0], -2.0);
  EXPECT_DOUBLE_EQ(img.dot_positions[1], 2.0);
  EXPECT_EQ(c.tradeoff.cutoffs, (std::vector<double>{0.05, 0.1, 0.25, 0.5, 1.0, 2.0}));
}

TEST(ScenarioConfig, RoundTripIsStable) {
  for (const auto& entry : fs::directory_iterator(kScenarios)) {
    if (entry.path().extension() != ".json") continue;
    const auto a = load_config(entry.path().string());
    const auto ja = to_json(a);
    const auto b = parse_config_text(ja.dump());
    EXPECT_EQ(to_json(b).dump(), ja.dump()) << entry.path();
    EXPECT_EQ(config_hash(a), config_hash(b)) << entry.path();
  }
}

TEST(ScenarioConfig, HashChangesWithContent) {
  const auto a = parse_config_text("{}");
  const auto b = parse_config_text(R"({"run": {"seed": 43}})");
  EXPECT_NE(config_hash(a), config_hash(b));
}

TEST(ScenarioConfig, UnknownKeyIsNamed) {
  EXPECT_NE(error_of(R"({"run": {"seedd": 1}})").find("run.seedd"), std::string::npos);
  EXPECT_NE(error_of(R"({"bogus": 1})").find("bogus"), std::string::npos);
  EXPECT_NE(error_of(R"({"channel": {"chain": [{"kind": "hard_aperture", "arm": "signal", "cutoff": 1, "x": 2}]}})")
                .find("x"),
            std::string::npos);
}

TEST(ScenarioConfig, WrongTypesAndValues) {
  EXPECT_NE(error_of(R"({"run": {"seed": "abc"}})").find("run.seed"), std::string::npos);
  EXPECT_NE(error_of(R"({"grid": {"n_points": -4}})").find("grid.n_points"), std::string::npos);
  EXPECT_FALSE(error_of(R"({"state": {"kind": "laser"}})").empty());
  EXPECT_FALSE(error_of(R"({"channel": {"kind": "telepathy"}})").empty());
  EXPECT_FALSE(error_of(R"({"channel": {"chain": [{"kind": "lens"}]}})").empty());
  EXPECT_FALSE(error_of(R"({"noise": {"offset": "sometimes"}})").empty());
  EXPECT_FALSE(error_of("[1, 2]").empty());
}

TEST(ScenarioConfig, ParseErrorReportsLine) {
  const auto msg = error_of("{\n  \"run\": {\n    \"seed\": 1,,\n  }\n}");
  EXPECT_NE(msg.find("line 3"), std::string::npos) << msg;
}

TEST(ScenarioConfig, MissingFileNamesThePath) {
  try {
    load_config("/nonexistent/dir/scenario.json");
    FAIL() << "expected ConfigError";
  } catch (const ConfigError& e) {
    EXPECT_NE(std::string(e.what()).find("/nonexistent/dir/scenario.json"), std::string::npos);
  }
}

TEST(ScenarioConfig, TransferChainParses) {
  const auto c = parse_config_text(R"({"channel": {"kind": "single_photon", "acceptance_cutoff": 0.25, "chain": [
      {"kind": "free_propagation", "distance": 3.0, "model": "paraxial"},
      {"kind": "hard_aperture", "arm": "idler", "cutoff": 1.5},
      {"kind": "mask", "arm": "both", "angle_low": -0.01, "angle_high": 0.02}]}})");
  ASSERT_EQ(c.channel.chain.size(), 3u);
  const auto ch = c.measurement_channel();
  EXPECT_EQ(ch.kind, MeasurementChannel::Kind::single_photon);
  ASSERT_TRUE(ch.acceptance_cutoff.has_value());
  EXPECT_DOUBLE_EQ(*ch.acceptance_cutoff, 0.25);
  EXPECT_EQ(ch.effective_chain().size(), 4u);
}

TEST(ScenarioConfig, BundledScenariosLoadAndBuildStates) {
  std::size_t count = 0;
  for (const auto& entry : fs::directory_iterator(kScenarios)) {
    if (entry.path().extension() != ".json") continue;
    ++count;
    const auto c = load_config(entry.path().string());
    EXPECT_FALSE(c.name.empty());
    if (c.name == "infeasible_subwavelength") {
      EXPECT_FALSE(check_feasibility(c.system_geometry(), c.geometry.margin).feasible);
      continue;
    }
    const auto s = c.make_state();
    EXPECT_NEAR(s.norm(), 1.0, 1e-9) << c.name;
  }
  EXPECT_GE(count, 5u);
}

TEST(ScenarioConfig, DefaultProtocolIsFeasible) {
  const auto c = load_config((kScenarios / "default_protocol.json").string());
  const auto v = check_feasibility(c.system_geometry(), c.geometry.margin);
  EXPECT_TRUE(v.feasible);
  EXPECT_GT(c.noise.background_rate, 0.0);
  EXPECT_TRUE(c.noise.offset);
  EXPECT_EQ(c.alphabet().size(), 2u);
}

TEST(ScenarioConfig, NarrowBeamsControlHasSingleBias) {
  const auto c = load_config((kScenarios / "control_narrowbeams.json").string());
  const auto bias = compute_marginal_bias(c.make_state());
  double max_bias = 0.0;
  for (double v : bias) max_bias = std::max(max_bias, std::abs(v));
  EXPECT_GT(max_bias, 0.1);
}
