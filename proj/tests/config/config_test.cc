#include "onpalm/config/config.h"

#include <gtest/gtest.h>

namespace onpalm::config {
namespace {

std::string ConfigPath(const char* name) { return std::string(ONPALM_CONFIG_DIR) + "/" + name; }

void ExpectNoDiff(const ExperimentConfig& a, const ExperimentConfig& b) {
  const auto diff = Diff(a, b);
  for (const auto& d : diff) ADD_FAILURE() << d;
}

ConfigError ParseError(const std::string& text) {
  try {
    ParseConfig(text, "t.yaml");
  } catch (const ConfigError& e) {
    return e;
  }
  ADD_FAILURE() << "no error for:\n" << text;
  return ConfigError("", 0, "", "");
}

TEST(ConfigTest, ShippedTrayFileMatchesFactory) {
  const ExperimentConfig c = LoadConfig(ConfigPath("tray_retrieval.yaml"));
  EXPECT_EQ(c.task, TaskKind::kTray);
  ExpectNoDiff(c, ExperimentConfig::TrayRetrieval());
  // Scaled table entries land on the products.
  EXPECT_DOUBLE_EQ(c.c3.q_q(7), 750000.0);
  EXPECT_DOUBLE_EQ(c.c3.r(0), 7.5);
  EXPECT_EQ(c.scenario.num_contacts(), 7);
}

TEST(ConfigTest, ShippedWallFileMatchesFactory) {
  const ExperimentConfig c = LoadConfig(ConfigPath("wall_rotation.yaml"));
  EXPECT_EQ(c.task, TaskKind::kWall);
  ExpectNoDiff(c, ExperimentConfig::WallRotation());
  EXPECT_EQ(c.c3.N, 4);
  EXPECT_DOUBLE_EQ(c.c3.r(0), 75 * 1.9);
  ASSERT_TRUE(c.scenario.wall.has_value());
  EXPECT_EQ(c.scenario.num_contacts(), 4);
}

TEST(ConfigTest, EmitParseRoundTrip) {
  for (const ExperimentConfig& c :
       {ExperimentConfig::TrayRetrieval(), ExperimentConfig::WallRotation()}) {
    const std::string text = EmitConfig(c);
    const ExperimentConfig back = ParseConfig(text);
    ExpectNoDiff(c, back);
    EXPECT_EQ(EmitConfig(back), text);
  }
}

TEST(ConfigTest, RoundTripKeepsAwkwardDoubles) {
  ExperimentConfig c = ExperimentConfig::TrayRetrieval();
  c.c3.dt = 0.1 + 0.2;
  c.c3.r(1) = 1.0 / 3.0;
  c.osc.kp = 1e-300;
  const ExperimentConfig back = ParseConfig(EmitConfig(c));
  EXPECT_EQ(back.c3.dt, c.c3.dt);
  EXPECT_EQ(back.c3.r(1), c.c3.r(1));
  EXPECT_EQ(back.osc.kp, c.osc.kp);
}

TEST(ConfigTest, DiffNamesChangedFields) {
  ExperimentConfig a = ExperimentConfig::TrayRetrieval();
  ExperimentConfig b = a;
  b.c3.rho = 5.0;
  b.targets.targets.pop_back();
  const auto d = Diff(a, b);
  auto has = [&d](const std::string& prefix) {
    for (const auto& s : d) {
      if (s.rfind(prefix, 0) == 0) return true;
    }
    return false;
  };
  EXPECT_TRUE(has("c3.rho: 4.0 != 5.0"));
  EXPECT_TRUE(has("task.targets.size: 3 != 2"));
  EXPECT_TRUE(has("task.targets[2].tray"));
  EXPECT_FALSE(has("c3.N"));
}

TEST(ConfigTest, PartialFileKeepsTaskDefaults) {
  const ExperimentConfig c = ParseConfig("c3:\n  rho: 6.0\n");
  EXPECT_EQ(c.c3.rho, 6.0);
  const auto d = Diff(c, ExperimentConfig::TrayRetrieval());
  ASSERT_EQ(d.size(), 1u);

  const ExperimentConfig w = ParseConfig("task:\n  kind: wall\n");
  ExpectNoDiff(w, ExperimentConfig::WallRotation());
}

TEST(ConfigTest, UnknownFieldReportsLineAndPath) {
  const ConfigError e = ParseError("c3:\n  N: 5\n  rhoo: 4.0\n");
  EXPECT_EQ(e.line(), 3);
  EXPECT_EQ(e.field(), "c3.rhoo");
  EXPECT_EQ(e.source(), "t.yaml");
  EXPECT_NE(std::string(e.what()).find("t.yaml:3"), std::string::npos);
}

TEST(ConfigTest, UnknownNestedAndTopLevelKeys) {
  EXPECT_EQ(ParseError("physical:\n  tray:\n    mass: 1.0\n    colour: red\n").field(),
            "physical.tray.colour");
  const ConfigError e = ParseError("osc:\n  kp: 1.0\nextras: 1\n");
  EXPECT_EQ(e.field(), "extras");
  EXPECT_EQ(e.line(), 3);
  EXPECT_EQ(ParseError("task:\n  targets:\n    - {tray: [0.4, 0, 0.5], ee: [0.4, 0, 0.5], hold: 1}\n")
                .field(),
            "task.targets[0].hold");
}

TEST(ConfigTest, TypeErrors) {
  ConfigError e = ParseError("c3:\n  N: five\n");
  EXPECT_EQ(e.field(), "c3.N");
  EXPECT_EQ(e.line(), 2);
  EXPECT_EQ(ParseError("c3:\n  N: 4.5\n").field(), "c3.N");
  EXPECT_EQ(ParseError("c3:\n  rescale_duals: maybe\n").field(), "c3.rescale_duals");
  e = ParseError("task:\n  ee_start: [0.5, 0.0]\n");
  EXPECT_EQ(e.field(), "task.ee_start");
  e = ParseError("c3:\n  R: [1.0, x, 2.0]\n");
  EXPECT_EQ(e.field(), "c3.R[1]");
  EXPECT_EQ(ParseError("c3:\n  qp_backend: simplex\n").field(), "c3.qp_backend");
  EXPECT_EQ(ParseError("physical: 3\n").field(), "physical");
}

TEST(ConfigTest, SemanticValidation) {
  EXPECT_EQ(ParseError("c3:\n  R: [1.0, 2.0]\n").field(), "c3");
  EXPECT_EQ(ParseError("task:\n  fine_dt: 0.01\n").field(), "task.fine_dt");
  EXPECT_EQ(ParseError("physical:\n  tray: {mass: -1}\n").field(), "physical");
  EXPECT_EQ(ParseError("task:\n  kind: wall\nphysical:\n  wall: null\n").field(), "physical.wall");
}

TEST(ConfigTest, SyntaxErrorHasLine) {
  const ConfigError e = ParseError("c3:\n  N: [1, 2\n  dt: 3\n");
  EXPECT_GT(e.line(), 0);
}

TEST(ConfigTest, MissingFileThrows) {
  EXPECT_THROW(LoadConfig("/nonexistent/file.yaml"), ConfigError);
}

}  // namespace
}  // namespace onpalm::config
