#pragma once

#include <array>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include "bpd/collab.hpp"
#include "bpd/gridworld.hpp"
#include "bpd/mdp.hpp"
#include "bpd/mfvi.hpp"
#include "bpd/mutual_info.hpp"
#include "bpd/oracle.hpp"
#include "bpd/seq_predictor.hpp"
#include "bpd/serialization.hpp"
#include "bpd/trainer.hpp"

namespace bpd {

/// Invalid configuration. `field` is the dotted key path at fault.
class ConfigError : public std::invalid_argument {
 public:
  ConfigError(std::string field, const std::string& message)
      : std::invalid_argument(field + ": " + message), field_(std::move(field)) {}
  const std::string& field() const noexcept { return field_; }

 private:
  std::string field_;
};

inline const std::vector<std::string>& subcommands() {
  static const std::vector<std::string> names{"train-bpd", "oracle", "eval-prediction", "simulate-humans",
                                              "mutual-info", "train-collab", "eval-collab", "maxent"};
  return names;
}

enum class EnvKind { kGridworld, kBandit };

struct EnvSpec {
  EnvKind kind = EnvKind::kGridworld;
  GridworldConfig grid;
  std::array<Cell, 2> start_cells{Cell{0, 0}, Cell{0, 1}};
  std::int64_t max_states = 100000;
  std::vector<double> bandit_rewards{1.0, 0.0};
};

TabularMDP build_env_mdp(const EnvSpec& env);
TwoPlayerConfig two_player_config(const EnvSpec& env);

struct RunConfig {
  std::string subcommand;
  std::uint64_t seed = 0;
  EnvSpec env;
  double beta = 10.0;
  double alpha = 0.2;
  TrainConfig train;

  OracleConfig oracle;
  Trajectory oracle_history;
  int oracle_query_state = 0;

  int particles = 1024;
  MfviConfig mfvi;
  int mfvi_predict_samples = 64;
  int marginal_samples = 20000;
  int seq_num_policies = 5000;
  int seq_horizon = 200;
  SeqTrainConfig seq;

  std::vector<double> consistencies{0.5, 0.625, 0.75, 0.875, 1.0};
  int humans_per_level = 20;
  int episodes_per_human = 5;
  int prediction_horizon = 100;
  std::vector<std::string> predictors{"maxent", "bpd-sequence", "bpd-particles"};
  bool traces = false;

  MutualInfoConfig mutual_info;
  std::vector<std::string> mi_sources{"maxent", "bpd"};
  std::vector<double> mi_alphas{0.2, 1.0};

  CollabTrainConfig collab;
  std::vector<std::string> human_models{"maxent", "bpd-sample-per-episode"};
  double eval_consistency = 0.9;
  int eval_episodes = 2000;
  int eval_horizon = 60;

  std::string input_model;
  std::string input_robots;

  /// Fully resolved document (defaults, file, overrides, seed).
  Json resolved;
};

/// Complete configuration document with every key at its default.
Json default_config();

/// Recursively overlays `patch` onto `base`. Keys absent from `base` are
/// rejected so typos fail loudly.
void merge_config(Json& base, const Json& patch, const std::string& prefix = "");

/// Applies one `key.path=value` override. The value is parsed as JSON when
/// possible, otherwise taken as a string.
void apply_override(Json& doc, const std::string& assignment);

/// Validates every field of `doc` and derives the per-module seeds from the
/// global seed. Throws ConfigError.
RunConfig parse_run_config(const std::string& subcommand, const Json& doc);

}  // namespace bpd
