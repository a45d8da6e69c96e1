#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "bpd/commands.hpp"
#include "bpd/run_config.hpp"

using namespace bpd;
namespace fs = std::filesystem;

namespace {

Json load(const std::string& name) {
  std::ifstream in(std::string(BPD_SOURCE_DIR) + "/configs/" + name);
  Json doc = default_config();
  merge_config(doc, Json::parse(in));
  return doc;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

fs::path scratch(const std::string& name) {
  const auto dir = fs::temp_directory_path() / ("bpd_cli_test_" + name);
  fs::remove_all(dir);
  return dir;
}

}  // namespace

TEST(RunConfig, RejectsInvalidModelFields) {
  for (const char* bad : {"model.beta=0", "model.beta=-1", "model.alpha=0", "env.discount=1.0", "env.discount=-0.1"}) {
    Json doc = default_config();
    apply_override(doc, bad);
    EXPECT_THROW(parse_run_config("train-bpd", doc), ConfigError) << bad;
  }
}

TEST(RunConfig, FieldLevelMessages) {
  Json doc = default_config();
  apply_override(doc, "model.alpha=-2");
  try {
    parse_run_config("oracle", doc);
    FAIL() << "expected ConfigError";
  } catch (const ConfigError& e) {
    EXPECT_EQ(e.field(), "model.alpha");
  }
}

TEST(RunConfig, UnknownKeysAndSubcommands) {
  Json doc = default_config();
  EXPECT_THROW(merge_config(doc, Json{{"modle", {{"beta", 1}}}}), ConfigError);
  EXPECT_THROW(apply_override(doc, "train.nonexistent=3"), ConfigError);
  EXPECT_THROW(parse_run_config("fly", default_config()), ConfigError);
}

TEST(RunConfig, OverridesParseJsonValues) {
  Json doc = default_config();
  apply_override(doc, "model.beta=3.5");
  apply_override(doc, "env.kind=bandit");
  apply_override(doc, "env.bandit_rewards=[1,0.5,0]");
  const auto cfg = parse_run_config("oracle", doc);
  EXPECT_EQ(cfg.beta, 3.5);
  EXPECT_EQ(cfg.env.kind, EnvKind::kBandit);
  EXPECT_EQ(cfg.env.bandit_rewards.size(), 3u);
}

TEST(RunConfig, SubseedsDifferByStream) {
  const auto a = parse_run_config("train-bpd", default_config());
  Json doc = default_config();
  doc["seed"] = 5;
  const auto b = parse_run_config("train-bpd", doc);
  EXPECT_NE(a.train.seed, b.train.seed);
  EXPECT_NE(a.train.seed, a.collab.seed);
}

TEST(RunConfig, ShippedConfigsValidate) {
  for (const auto& [file, sub] : std::vector<std::pair<std::string, std::string>>{
           {"bandit.json", "oracle"}, {"gridworld.json", "eval-prediction"}, {"collab.json", "train-collab"},
           {"mutual_info.json", "mutual-info"}, {"smoke.json", "train-bpd"}}) {
    EXPECT_NO_THROW(parse_run_config(sub, load(file))) << file;
  }
  EXPECT_EQ(parse_run_config("eval-prediction", load("gridworld.json")).consistencies,
            (std::vector<double>{0.5, 0.625, 0.75, 0.875, 1.0}));
}

TEST(Commands, OracleOnBandit) {
  const auto dir = scratch("oracle");
  const auto cfg = parse_run_config("oracle", load("bandit.json"));
  const auto out = run_subcommand(cfg, dir);
  write_manifest(cfg, out, 1, dir);
  EXPECT_NEAR(out.metrics["marginals"][0].get<double>(), 0.657, 0.001);
  const Json oracle = Json::parse(slurp(dir / "oracle.json"));
  for (const char* key : {"method", "params", "marginals", "ess"}) EXPECT_TRUE(oracle.contains(key));
  const Json manifest = Json::parse(slurp(dir / "manifest.json"));
  EXPECT_EQ(manifest["subcommand"], "oracle");
  EXPECT_EQ(manifest["config"], cfg.resolved);
  fs::remove_all(dir);
}

TEST(Commands, ReproducibleMetrics) {
  const auto cfg = parse_run_config("train-bpd", load("smoke.json"));
  const auto a = scratch("repro_a"), b = scratch("repro_b");
  run_subcommand(cfg, a);
  run_subcommand(cfg, b);
  EXPECT_EQ(slurp(a / "metrics.json"), slurp(b / "metrics.json"));
  EXPECT_EQ(slurp(a / "model.json"), slurp(b / "model.json"));
  fs::remove_all(a);
  fs::remove_all(b);
}

TEST(Commands, EvalPredictionRows) {
  const auto dir = scratch("eval");
  const auto cfg = parse_run_config("eval-prediction", load("smoke.json"));
  run_subcommand(cfg, dir);
  std::ifstream in(dir / "prediction.csv");
  std::string line;
  std::getline(in, line);
  EXPECT_EQ(line, "consistency,predictor,mean_ce,std,n_steps");
  int rows = 0;
  while (std::getline(in, line)) rows += !line.empty();
  EXPECT_EQ(rows, static_cast<int>(cfg.consistencies.size() * cfg.predictors.size()));
  fs::remove_all(dir);
}
