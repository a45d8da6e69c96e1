#include "bpd/run_config.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <set>

#include "bpd/simulated_human.hpp"

namespace bpd {
namespace {

Json cell_json(Cell c) { return Json::array({c.x, c.y}); }

class Reader {
 public:
  explicit Reader(const Json& doc) : doc_(doc) {}

  const Json& node(const std::string& path) const {
    const Json* cur = &doc_;
    std::size_t start = 0;
    while (start <= path.size()) {
      const std::size_t dot = path.find('.', start);
      const std::string key = path.substr(start, dot == std::string::npos ? std::string::npos : dot - start);
      if (cur->is_array()) {
        const std::size_t index = std::stoul(key);
        if (index >= cur->size()) throw ConfigError(path, "missing");
        cur = &(*cur)[index];
      } else {
        if (!cur->is_object() || !cur->contains(key)) throw ConfigError(path, "missing");
        cur = &cur->at(key);
      }
      if (dot == std::string::npos) break;
      start = dot + 1;
    }
    return *cur;
  }

  double number(const std::string& path) const {
    const Json& v = node(path);
    if (!v.is_number()) throw ConfigError(path, "expected a number, got " + v.dump());
    const double d = v.get<double>();
    if (!std::isfinite(d)) throw ConfigError(path, "must be finite");
    return d;
  }

  int integer(const std::string& path) const {
    const Json& v = node(path);
    if (!v.is_number_integer()) throw ConfigError(path, "expected an integer, got " + v.dump());
    const auto i = v.get<std::int64_t>();
    if (i < std::numeric_limits<int>::min() || i > std::numeric_limits<int>::max()) throw ConfigError(path, "out of range");
    return static_cast<int>(i);
  }

  std::int64_t integer64(const std::string& path) const {
    const Json& v = node(path);
    if (!v.is_number_integer()) throw ConfigError(path, "expected an integer, got " + v.dump());
    return v.get<std::int64_t>();
  }

  bool boolean(const std::string& path) const {
    const Json& v = node(path);
    if (!v.is_boolean()) throw ConfigError(path, "expected true or false, got " + v.dump());
    return v.get<bool>();
  }

  std::string string(const std::string& path) const {
    const Json& v = node(path);
    if (!v.is_string()) throw ConfigError(path, "expected a string, got " + v.dump());
    return v.get<std::string>();
  }

  std::vector<double> numbers(const std::string& path) const {
    const Json& v = node(path);
    if (!v.is_array()) throw ConfigError(path, "expected an array of numbers");
    std::vector<double> out;
    for (const Json& e : v) {
      if (!e.is_number()) throw ConfigError(path, "expected an array of numbers");
      out.push_back(e.get<double>());
    }
    return out;
  }

  std::vector<std::string> strings(const std::string& path) const {
    const Json& v = node(path);
    if (!v.is_array()) throw ConfigError(path, "expected an array of strings");
    std::vector<std::string> out;
    for (const Json& e : v) {
      if (!e.is_string()) throw ConfigError(path, "expected an array of strings");
      out.push_back(e.get<std::string>());
    }
    return out;
  }

  Cell cell(const std::string& path) const {
    const Json& v = node(path);
    if (!v.is_array() || v.size() != 2 || !v[0].is_number_integer() || !v[1].is_number_integer()) {
      throw ConfigError(path, "expected [x, y]");
    }
    return Cell{v[0].get<int>(), v[1].get<int>()};
  }

 private:
  const Json& doc_;
};

template <class F>
void checked(const std::string& field, F&& f) {
  try {
    f();
  } catch (const ConfigError&) {
    throw;
  } catch (const std::invalid_argument& e) {
    throw ConfigError(field, e.what());
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(field, e.what());
  }
}

void require(bool ok, const std::string& field, const std::string& message) {
  if (!ok) throw ConfigError(field, message);
}

EnvSpec parse_env(const Reader& r) {
  EnvSpec env;
  const std::string kind = r.string("env.kind");
  if (kind == "gridworld") {
    env.kind = EnvKind::kGridworld;
  } else if (kind == "bandit") {
    env.kind = EnvKind::kBandit;
  } else {
    throw ConfigError("env.kind", "expected gridworld or bandit, got '" + kind + "'");
  }
  env.grid.width = r.integer("env.width");
  env.grid.height = r.integer("env.height");
  const Json& obstacle = r.node("env.obstacle");
  if (obstacle.is_string()) {
    require(obstacle.get<std::string>() == "default", "env.obstacle", "expected \"default\" or a list of [x, y]");
  } else {
    require(obstacle.is_array(), "env.obstacle", "expected \"default\" or a list of [x, y]");
    env.grid.obstacle.clear();
    for (std::size_t i = 0; i < obstacle.size(); ++i) env.grid.obstacle.insert(r.cell("env.obstacle." + std::to_string(i)));
  }
  env.grid.tree_cell = r.cell("env.tree");
  env.grid.basket_cell = r.cell("env.basket");
  env.grid.discount = r.number("env.discount");
  require(env.grid.discount >= 0.0 && env.grid.discount < 1.0, "env.discount", "must lie in [0, 1)");
  env.grid.apple_reward = r.number("env.apple_reward");
  env.start_cells = {r.cell("env.start_cells.0"), r.cell("env.start_cells.1")};
  env.max_states = r.integer64("env.max_states");
  require(env.max_states > 0, "env.max_states", "must be > 0");
  env.bandit_rewards = r.numbers("env.bandit_rewards");
  require(env.bandit_rewards.size() >= 2, "env.bandit_rewards", "need at least 2 actions");
  checked("env", [&] { build_env_mdp(env); });
  return env;
}

std::vector<Step> parse_history(const Reader& r, const std::string& path) {
  const Json& v = r.node(path);
  require(v.is_array(), path, "expected a list of [state, action]");
  std::vector<Step> steps;
  for (const Json& e : v) {
    require(e.is_array() && e.size() == 2 && e[0].is_number_integer() && e[1].is_number_integer(), path,
            "expected a list of [state, action]");
    steps.push_back(Step{e[0].get<int>(), e[1].get<int>()});
  }
  return steps;
}

}  // namespace

TabularMDP build_env_mdp(const EnvSpec& env) {
  if (env.kind == EnvKind::kGridworld) return build_apple_gridworld(env.grid);
  const int na = static_cast<int>(env.bandit_rewards.size());
  std::vector<double> p(static_cast<std::size_t>(na), 1.0);
  return TabularMDP(1, na, std::move(p), env.bandit_rewards, env.grid.discount, {1.0});
}

TwoPlayerConfig two_player_config(const EnvSpec& env) {
  TwoPlayerConfig cfg;
  cfg.grid = env.grid;
  cfg.start_cells = env.start_cells;
  cfg.max_states = env.max_states;
  return cfg;
}

Json default_config() {
  const GridworldConfig grid;
  Json obstacle = Json::array();
  for (Cell c : grid.obstacle) obstacle.push_back(cell_json(c));
  const TrainConfig train;
  Json train_json = train_config_to_json(train);
  train_json.erase("beta");
  train_json.erase("latent_dim");
  train_json.erase("seed");
  const OracleConfig oracle;
  const MfviConfig mfvi;
  const SeqTrainConfig seq;
  const MutualInfoConfig mi;
  Json collab = collab_config_to_json(CollabTrainConfig{});
  collab.erase("seed");
  const RunConfig rc;
  collab["human_models"] = rc.human_models;
  collab["eval_consistency"] = rc.eval_consistency;
  collab["eval_episodes"] = rc.eval_episodes;
  collab["eval_horizon"] = rc.eval_horizon;
  return Json{
      {"seed", 0},
      {"env",
       {{"kind", "gridworld"},
        {"width", grid.width},
        {"height", grid.height},
        {"obstacle", "default"},
        {"tree", cell_json(grid.tree_cell)},
        {"basket", cell_json(grid.basket_cell)},
        {"discount", grid.discount},
        {"apple_reward", grid.apple_reward},
        {"start_cells", Json::array({cell_json(rc.env.start_cells[0]), cell_json(rc.env.start_cells[1])})},
        {"max_states", rc.env.max_states},
        {"bandit_rewards", rc.env.bandit_rewards}}},
      {"model", {{"beta", train.beta}, {"alpha", BaseMeasureConfig{}.alpha}, {"latent_dim", train.latent_dim}}},
      {"train", train_json},
      {"oracle",
       {{"method", to_string(oracle.method)},
        {"resolution", oracle.resolution},
        {"samples", oracle.samples},
        {"history", Json::array()},
        {"query_state", 0}}},
      {"inference",
       {{"particles", rc.particles},
        {"marginal_samples", rc.marginal_samples},
        {"mfvi",
         {{"sgd_steps", mfvi.sgd_steps},
          {"learning_rate", mfvi.learning_rate},
          {"mc_samples", mfvi.mc_samples},
          {"predict_samples", rc.mfvi_predict_samples}}},
        {"sequence",
         {{"num_policies", rc.seq_num_policies},
          {"horizon", rc.seq_horizon},
          {"hidden", seq.hidden},
          {"epochs", seq.epochs},
          {"batch_episodes", seq.batch_episodes},
          {"learning_rate", seq.learning_rate},
          {"grad_clip", seq.grad_clip},
          {"held_out_fraction", seq.held_out_fraction}}}}},
      {"prediction",
       {{"consistencies", rc.consistencies},
        {"humans_per_level", rc.humans_per_level},
        {"episodes_per_human", rc.episodes_per_human},
        {"horizon", rc.prediction_horizon},
        {"predictors", rc.predictors},
        {"traces", rc.traces}}},
      {"mutual_info",
       {{"horizon", mi.horizon},
        {"num_policies", mi.num_policies},
        {"rollouts_per_policy", mi.rollouts_per_policy},
        {"min_group_size", mi.min_group_size},
        {"sources", rc.mi_sources},
        {"alphas", rc.mi_alphas}}},
      {"collab", collab},
      {"inputs", {{"model", ""}, {"robots", ""}}}};
}

void merge_config(Json& base, const Json& patch, const std::string& prefix) {
  if (!patch.is_object()) throw ConfigError(prefix.empty() ? "<root>" : prefix, "expected an object");
  for (auto it = patch.begin(); it != patch.end(); ++it) {
    const std::string path = prefix.empty() ? it.key() : prefix + "." + it.key();
    if (!base.contains(it.key())) throw ConfigError(path, "unknown key");
    Json& target = base[it.key()];
    if (target.is_object() && it.value().is_object()) {
      merge_config(target, it.value(), path);
    } else {
      target = it.value();
    }
  }
}

void apply_override(Json& doc, const std::string& assignment) {
  const std::size_t eq = assignment.find('=');
  if (eq == std::string::npos || eq == 0) throw ConfigError(assignment, "override must look like key.path=value");
  const std::string path = assignment.substr(0, eq);
  const std::string text = assignment.substr(eq + 1);
  Json value = Json::parse(text, nullptr, false);
  if (value.is_discarded()) value = text;
  Json patch = value;
  std::size_t end = path.size();
  while (true) {
    const std::size_t dot = path.rfind('.', end - 1);
    const std::string key = path.substr(dot == std::string::npos ? 0 : dot + 1,
                                        dot == std::string::npos ? end : end - dot - 1);
    if (key.empty()) throw ConfigError(path, "empty key in override");
    patch = Json{{key, patch}};
    if (dot == std::string::npos) break;
    end = dot;
  }
  merge_config(doc, patch);
}

RunConfig parse_run_config(const std::string& subcommand, const Json& doc) {
  const auto& names = subcommands();
  if (std::find(names.begin(), names.end(), subcommand) == names.end()) {
    throw ConfigError("subcommand", "unknown subcommand '" + subcommand + "'");
  }
  Json full = default_config();
  merge_config(full, doc);
  const Reader r(full);
  RunConfig rc;
  rc.subcommand = subcommand;
  rc.resolved = full;
  const Json& seed = r.node("seed");
  require(seed.is_number_unsigned() || (seed.is_number_integer() && seed.get<std::int64_t>() >= 0), "seed",
          "expected a non-negative integer");
  rc.seed = seed.get<std::uint64_t>();

  rc.env = parse_env(r);
  const TabularMDP mdp = build_env_mdp(rc.env);

  rc.beta = r.number("model.beta");
  require(rc.beta > 0.0, "model.beta", "must be > 0");
  rc.alpha = r.number("model.alpha");
  require(rc.alpha > 0.0, "model.alpha", "must be > 0");

  checked("train", [&] {
    Json t = full.at("train");
    t["beta"] = rc.beta;
    t["latent_dim"] = r.integer("model.latent_dim");
    t["seed"] = derive_seed(rc.seed, "train-bpd");
    rc.train = train_config_from_json(t);
    rc.train.validate();
  });

  checked("oracle", [&] {
    rc.oracle.method = parse_oracle_method(r.string("oracle.method"));
    rc.oracle.resolution = r.integer("oracle.resolution");
    rc.oracle.samples = r.integer64("oracle.samples");
    rc.oracle.seed = derive_seed(rc.seed, "oracle");
    rc.oracle.validate();
  });
  rc.oracle_history.steps = parse_history(r, "oracle.history");
  checked("oracle.history", [&] { check_trajectory(mdp, rc.oracle_history); });
  rc.oracle_query_state = r.integer("oracle.query_state");
  require(rc.oracle_query_state >= 0 && rc.oracle_query_state < mdp.num_states(), "oracle.query_state",
          "out of range");

  rc.particles = r.integer("inference.particles");
  require(rc.particles >= 1, "inference.particles", "must be >= 1");
  rc.marginal_samples = r.integer("inference.marginal_samples");
  require(rc.marginal_samples >= 1, "inference.marginal_samples", "must be >= 1");
  checked("inference.mfvi", [&] {
    rc.mfvi.sgd_steps = r.integer("inference.mfvi.sgd_steps");
    rc.mfvi.learning_rate = r.number("inference.mfvi.learning_rate");
    rc.mfvi.mc_samples = r.integer("inference.mfvi.mc_samples");
    rc.mfvi.validate();
  });
  rc.mfvi_predict_samples = r.integer("inference.mfvi.predict_samples");
  require(rc.mfvi_predict_samples >= 1, "inference.mfvi.predict_samples", "must be >= 1");
  rc.seq_num_policies = r.integer("inference.sequence.num_policies");
  require(rc.seq_num_policies >= 100, "inference.sequence.num_policies", "must be >= 100");
  rc.seq_horizon = r.integer("inference.sequence.horizon");
  require(rc.seq_horizon >= 1, "inference.sequence.horizon", "must be >= 1");
  checked("inference.sequence", [&] {
    rc.seq.hidden = r.integer("inference.sequence.hidden");
    rc.seq.epochs = r.integer("inference.sequence.epochs");
    rc.seq.batch_episodes = r.integer("inference.sequence.batch_episodes");
    rc.seq.learning_rate = r.number("inference.sequence.learning_rate");
    rc.seq.grad_clip = r.number("inference.sequence.grad_clip");
    rc.seq.held_out_fraction = r.number("inference.sequence.held_out_fraction");
    rc.seq.seed = derive_seed(rc.seed, "sequence-predictor");
    rc.seq.validate();
  });

  rc.consistencies = r.numbers("prediction.consistencies");
  require(!rc.consistencies.empty(), "prediction.consistencies", "must not be empty");
  for (double c : rc.consistencies) require(c >= 0.5 && c <= 1.0, "prediction.consistencies", "each c must lie in [0.5, 1]");
  rc.humans_per_level = r.integer("prediction.humans_per_level");
  require(rc.humans_per_level >= 1, "prediction.humans_per_level", "must be >= 1");
  rc.episodes_per_human = r.integer("prediction.episodes_per_human");
  require(rc.episodes_per_human >= 1, "prediction.episodes_per_human", "must be >= 1");
  rc.prediction_horizon = r.integer("prediction.horizon");
  require(rc.prediction_horizon >= 1, "prediction.horizon", "must be >= 1");
  rc.predictors = r.strings("prediction.predictors");
  const std::set<std::string> known_predictors{"maxent", "bpd-sequence", "bpd-particles", "bpd-mfvi", "bpd-marginal"};
  require(!rc.predictors.empty(), "prediction.predictors", "must not be empty");
  for (const auto& p : rc.predictors) {
    require(known_predictors.count(p) == 1, "prediction.predictors",
            "unknown predictor '" + p + "' (expected maxent, bpd-sequence, bpd-particles, bpd-mfvi or bpd-marginal)");
  }
  rc.traces = r.boolean("prediction.traces");

  checked("mutual_info", [&] {
    rc.mutual_info.horizon = r.integer("mutual_info.horizon");
    rc.mutual_info.num_policies = r.integer("mutual_info.num_policies");
    rc.mutual_info.rollouts_per_policy = r.integer("mutual_info.rollouts_per_policy");
    rc.mutual_info.min_group_size = r.integer("mutual_info.min_group_size");
    rc.mutual_info.seed = derive_seed(rc.seed, "mutual-info");
    rc.mutual_info.validate();
  });
  rc.mi_sources = r.strings("mutual_info.sources");
  require(!rc.mi_sources.empty(), "mutual_info.sources", "must not be empty");
  for (const auto& s : rc.mi_sources) {
    require(s == "maxent" || s == "bpd", "mutual_info.sources", "unknown source '" + s + "' (expected maxent or bpd)");
  }
  rc.mi_alphas = r.numbers("mutual_info.alphas");
  for (double a : rc.mi_alphas) require(a > 0.0, "mutual_info.alphas", "each alpha must be > 0");

  checked("collab", [&] {
    Json c = full.at("collab");
    c["seed"] = derive_seed(rc.seed, "collab");
    rc.collab = collab_config_from_json(c);
    rc.collab.validate();
  });
  rc.human_models = r.strings("collab.human_models");
  require(!rc.human_models.empty(), "collab.human_models", "must not be empty");
  for (const auto& h : rc.human_models) checked("collab.human_models", [&] { parse_human_model_kind(h); });
  rc.eval_consistency = r.number("collab.eval_consistency");
  require(rc.eval_consistency >= 0.5 && rc.eval_consistency <= 1.0, "collab.eval_consistency", "must lie in [0.5, 1]");
  rc.eval_episodes = r.integer("collab.eval_episodes");
  require(rc.eval_episodes >= 2, "collab.eval_episodes", "must be >= 2");
  rc.eval_horizon = r.integer("collab.eval_horizon");
  require(rc.eval_horizon >= 1, "collab.eval_horizon", "must be >= 1");

  rc.input_model = r.string("inputs.model");
  rc.input_robots = r.string("inputs.robots");

  const bool needs_grid = subcommand == "eval-prediction" || subcommand == "simulate-humans" ||
                          subcommand == "train-collab" || subcommand == "eval-collab";
  require(!needs_grid || rc.env.kind == EnvKind::kGridworld, "env.kind", subcommand + " needs the gridworld");
  if (subcommand == "oracle") {
    checked("oracle", [&] {
      if (rc.oracle.method == OracleMethod::kGridQuadrature &&
          mdp.num_states() * (mdp.num_actions() - 1) > kQuadratureDimensionCap) {
        throw std::invalid_argument("grid quadrature needs |S|(|A|-1) <= " + std::to_string(kQuadratureDimensionCap));
      }
    });
  }
  if (subcommand == "train-collab" || subcommand == "eval-collab") {
    checked("env", [&] {
      JointGridworld joint(two_player_config(rc.env));
      RingRoutes routes(joint.single());
    });
  }
  return rc;
}

}  // namespace bpd
