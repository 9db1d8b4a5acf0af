#include <gtest/gtest.h>

#include <filesystem>

#include "eqhol/cli.hpp"

using namespace eqhol;

namespace {

std::string bundled(const std::string& name) { return std::string(EQHOL_SCENARIO_DIR) + "/" + name; }

const char* kHeader = R"(schema_version = 1
name = "t"

[space]
dimension = 1
topology = "euclidean"
lower = [-1.0]
upper = [1.0]

[assumptions]
A1 = true
A2 = true
A3 = true
)";

std::string with_generator(const std::string& map) {
  return std::string(kHeader) + "\n[group]\n\n[[group.generator]]\nlabel = \"g\"\nmap = \"" + map +
         "\"\ninverse = \"[x1]\"\nalpha = \"0\"\n";
}

Error parse_error(const std::string& text) {
  try {
    scenario::parse_scenario(text);
  } catch (const Error& e) {
    return e;
  }
  ADD_FAILURE() << "expected a parse error";
  return Error(ErrorKind::usage, "none");
}

cli::Report run(const std::string& command, const std::string& file, cli::RunOptions o = {}) {
  o.scenario_file = file;
  return cli::run(command, o);
}

}  // namespace

TEST(ScenarioParse, PaperExampleFields) {
  auto sc = scenario::load_scenario(bundled("paper_example_Z_on_R.scn"));
  EXPECT_EQ(sc.name, "paper_example_Z_on_R");
  ASSERT_EQ(sc.generators.size(), 1u);
  EXPECT_TRUE(sc.generators[0].family);
  auto b = scenario::build_bundle(sc);
  Vec x = make_vec({0.3});
  const auto& g = b.action().generators()[0];
  EXPECT_NEAR(g.power(1, x)[0], 1.3, 1e-15);
  EXPECT_NEAR(g.alpha(1, x), 0.5, 1e-15);
  EXPECT_NEAR(g.alpha(3, x), 1.5, 1e-15);
  EXPECT_EQ(scenario::build_connection(sc).rho_ref.at(x)[0], 0.0);
  EXPECT_TRUE(sc.assumptions.a1 && sc.assumptions.a2 && sc.assumptions.a3);
}

TEST(ScenarioParse, UnmatchedParenPointsAtTheParen) {
  auto e = parse_error(with_generator("[sin(x1]"));
  EXPECT_EQ(e.kind(), ErrorKind::syntax);
  // map = "[sin(x1]" sits on line 19; the '(' is column 12
  EXPECT_NE(std::string(e.what()).find("line 19, column 12"), std::string::npos) << e.what();
}

TEST(ScenarioParse, EmptyGroupNeedsAGenerator) {
  auto e = parse_error(std::string(kHeader) + "\n[group]\n");
  EXPECT_EQ(e.kind(), ErrorKind::semantic);
  EXPECT_NE(std::string(e.what()).find("at least one generator"), std::string::npos) << e.what();
}

TEST(ScenarioParse, UnknownKeysAreRejected) {
  auto e = parse_error(with_generator("[x1 + n]") + "colour = \"red\"\n");
  EXPECT_NE(std::string(e.what()).find("colour"), std::string::npos) << e.what();
  EXPECT_NE(std::string(e.what()).find("line 22"), std::string::npos) << e.what();
}

TEST(ScenarioParse, DimensionMismatch) {
  auto e = parse_error(with_generator("[x1, x1]"));
  EXPECT_EQ(e.kind(), ErrorKind::semantic);
}

TEST(ScenarioParse, UnknownNames) {
  EXPECT_THROW(scenario::parse_scenario(with_generator("[x2]")), Error);
  EXPECT_THROW(scenario::parse_scenario(with_generator("[sqrt(x1)]")), Error);
}

TEST(ScenarioParse, AssumptionsAreRequired) {
  std::string text = with_generator("[x1 + n]");
  text.replace(text.find("A3 = true\n"), 10, "");
  EXPECT_THROW(scenario::parse_scenario(text), Error);
}

TEST(ScenarioParse, SchemaVersionIsChecked) {
  std::string text = with_generator("[x1 + n]");
  text.replace(0, 18, "schema_version = 2");
  EXPECT_THROW(scenario::parse_scenario(text), Error);
}

TEST(ScenarioRoundTrip, AllBundledScenarios) {
  int count = 0;
  for (const auto& entry : std::filesystem::directory_iterator(EQHOL_SCENARIO_DIR)) {
    if (entry.path().extension() != ".scn") continue;
    ++count;
    auto sc = scenario::load_scenario(entry.path().string());
    std::string printed = scenario::print_document(sc.document);
    auto again = scenario::parse_scenario(printed);
    EXPECT_TRUE(again.document == sc.document) << entry.path();
    EXPECT_EQ(scenario::print_document(again.document), printed) << entry.path();
  }
  EXPECT_GE(count, 8);
}

TEST(Cli, PaperExampleCancelsWithHalfDt) {
  auto r = run("verdict", bundled("paper_example_Z_on_R.scn"));
  EXPECT_EQ(r.exit_code, 0);
  const auto& res = r.doc["result"];
  EXPECT_EQ(res["verdict"], "CANCELS");
  EXPECT_NE(res["beta"].get<std::string>().find("0.5 dx1"), std::string::npos) << res["beta"];
  EXPECT_NEAR(res["kappa"][0]["value"].get<double>(), 0.5, 1e-9);
  EXPECT_EQ(r.doc["schema"], cli::kReportSchema);
  EXPECT_EQ(r.doc["exit_code"], 0);
}

TEST(Cli, HolonomyAlongTheUnitPath) {
  cli::RunOptions o;
  o.word = "g^1";
  o.path = "unit";
  auto r = run("holonomy", bundled("paper_example_Z_on_R.scn"), o);
  ASSERT_EQ(r.exit_code, 0) << r.render("text");
  EXPECT_LT(circle_distance(r.doc["result"]["value"].get<double>(), 0.5), 1e-8);
}

TEST(Cli, CorruptedCocycleGivesAWitnessPoint) {
  auto r = run("check-cocycle", std::string(EQHOL_TEST_DATA) + "/corrupted_cocycle.scn");
  EXPECT_EQ(r.exit_code, 1);
  const auto& res = r.doc["result"];
  EXPECT_FALSE(res["ok"].get<bool>());
  EXPECT_EQ(res["witness"]["point"].size(), 1u);
  EXPECT_GT(res["max_residual"].get<double>(), 0.1);
}

TEST(Cli, ExitCodes) {
  EXPECT_EQ(run("verdict", bundled("paper_example_no_candidates.scn")).exit_code, 3);
  EXPECT_EQ(run("verdict", bundled("reflection_half.scn")).exit_code, 2);
  EXPECT_EQ(run("verdict", bundled("rotation_anomaly.scn")).exit_code, 2);
  EXPECT_EQ(run("verdict", bundled("rotation_invariant.scn")).exit_code, 0);
  EXPECT_EQ(run("verdict", bundled("sigma_repair.scn")).exit_code, 0);
  EXPECT_EQ(run("verdict", bundled("no_such_file.scn")).exit_code, 1);
  EXPECT_EQ(run("frobnicate", bundled("paper_example_Z_on_R.scn")).exit_code, 1);
}

TEST(Cli, LocalVerdicts) {
  cli::RunOptions local;
  local.local = true;
  EXPECT_EQ(run("verdict", bundled("lattice_half_shift.scn"), local).exit_code, 0);
  EXPECT_EQ(run("verdict", bundled("lattice_planted_local.scn"), local).exit_code, 0);
  EXPECT_EQ(run("verdict", bundled("lattice_translation.scn"), local).exit_code, 0);
  auto zero = run("verdict", bundled("lattice_zero_mode.scn"), local);
  EXPECT_EQ(zero.exit_code, 3);
  EXPECT_EQ(zero.doc["result"]["stage"], "local-section");
  // the two pipelines do not mix
  EXPECT_EQ(run("verdict", bundled("paper_example_Z_on_R.scn"), local).exit_code, 1);
  EXPECT_EQ(run("verdict", bundled("lattice_half_shift.scn")).exit_code, 1);
}

TEST(Cli, ErrorsCarryKindAndStage) {
  cli::RunOptions o;
  o.word = "q^1";
  o.path = "unit";
  auto r = run("holonomy", bundled("paper_example_Z_on_R.scn"), o);
  EXPECT_EQ(r.exit_code, 1);
  EXPECT_EQ(r.doc["error"]["kind"], "semantic-error");
  EXPECT_EQ(r.doc["scenario"]["name"], "paper_example_Z_on_R");
}

TEST(Cli, ReportsAreDeterministic) {
  auto a = run("verdict", bundled("sigma_repair.scn")).render("json-like");
  auto b = run("verdict", bundled("sigma_repair.scn")).render("json-like");
  EXPECT_EQ(a, b);
  cli::RunOptions o;
  o.seed = 5;
  auto c = run("check-cocycle", bundled("rotation_invariant.scn"), o);
  EXPECT_EQ(c.doc["config"]["seed"], 5);
}

TEST(Cli, AnomalyMatchesTheMoment) {
  auto r = run("anomaly", bundled("rotation_anomaly.scn"));
  ASSERT_EQ(r.exit_code, 0) << r.render("text");
  const auto& g = r.doc["result"]["generators"][0];
  EXPECT_NEAR(g["sup"].get<double>(), 0.25, 1e-6);
  EXPECT_LT(g["flow_vs_moment"].get<double>(), 1e-6);
}
