#include "bpd/commands.hpp"

#include <cmath>
#include <fstream>
#include <memory>
#include <sstream>
#include <stdexcept>

#include "bpd/collab.hpp"
#include "bpd/dirichlet.hpp"
#include "bpd/maxent.hpp"
#include "bpd/mutual_info.hpp"
#include "bpd/oracle.hpp"
#include "bpd/prediction_eval.hpp"
#include "bpd/predictors.hpp"
#include "bpd/scoring.hpp"
#include "bpd/seq_predictor.hpp"
#include "bpd/simulated_human.hpp"
#include "bpd/trainer.hpp"
#include "bpd/version.hpp"

namespace bpd {
namespace {

namespace fs = std::filesystem;

class Artifacts {
 public:
  Artifacts(fs::path dir, RunOutputs& outputs) : dir_(std::move(dir)), outputs_(outputs) {}

  std::ofstream open(const std::string& name) {
    std::ofstream out(dir_ / name, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write " + (dir_ / name).string());
    outputs_.files.push_back(name);
    return out;
  }

  void json(const std::string& name, const Json& doc) { open(name) << doc.dump(2) << '\n'; }

 private:
  fs::path dir_;
  RunOutputs& outputs_;
};

Json read_json(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot read " + path);
  try {
    return Json::parse(in);
  } catch (const Json::exception& e) {
    throw std::runtime_error(path + ": " + e.what());
  }
}

std::string tag(double v) {
  std::ostringstream s;
  s << v;
  return s.str();
}

double mean_row_entropy(const TabularPolicy& p) {
  double total = 0.0;
  for (int s = 0; s < p.num_states(); ++s) {
    for (double x : p.row(s)) {
      if (x > 0.0) total -= x * std::log(x);
    }
  }
  return total / p.num_states();
}

/// Loads inputs.model when given, otherwise trains with the run's settings
/// and records the checkpoint and log as artifacts.
LatentPolicyModel obtain_model(const RunConfig& cfg, const TabularMDP& mdp, double alpha, Artifacts& art,
                               const std::string& suffix = "") {
  if (!cfg.input_model.empty()) {
    LatentPolicyModel m = model_from_json(read_json(cfg.input_model));
    if (m.num_states() != mdp.num_states() || m.num_actions() != mdp.num_actions()) {
      throw std::runtime_error("inputs.model does not match the environment");
    }
    return m;
  }
  TrainConfig tc = cfg.train;
  if (!suffix.empty()) tc.seed = derive_seed(tc.seed, suffix);
  TrainResult r = train_bpd(mdp, BaseMeasureConfig{alpha}, tc);
  art.json("model" + suffix + ".json", model_to_json(r.model));
  auto log = art.open("train_log" + suffix + ".csv");
  write_train_log_csv(log, r.log);
  return std::move(r.model);
}

void run_maxent(const RunConfig& cfg, Artifacts& art, RunOutputs& out) {
  const TabularMDP mdp = build_env_mdp(cfg.env);
  const SoftSolution sol = soft_value_iteration(mdp, cfg.beta);
  art.json("maxent.json", Json{{"beta", sol.beta},
                               {"residual", sol.residual},
                               {"iterations", sol.iterations},
                               {"v_soft", sol.v_soft},
                               {"q_soft", sol.q_soft},
                               {"policy", policy_to_json(sol.policy)}});
  out.metrics = Json{{"J", policy_return(mdp, sol.policy)},
                     {"mean_entropy", mean_row_entropy(sol.policy)},
                     {"residual", sol.residual}};
}

void run_train_bpd(const RunConfig& cfg, Artifacts& art, RunOutputs& out) {
  const TabularMDP mdp = build_env_mdp(cfg.env);
  TrainResult r = train_bpd(mdp, BaseMeasureConfig{cfg.alpha}, cfg.train);
  art.json("model.json", model_to_json(r.model));
  art.json("discriminator.json", discriminator_to_json(r.discriminator));
  {
    auto log = art.open("train_log.csv");
    write_train_log_csv(log, r.log);
  }
  const SoftSolution sol = soft_value_iteration(mdp, cfg.beta);
  Rng rng = make_rng(cfg.seed, "train-bpd-eval");
  double mean_j = 0.0;
  constexpr int kEvalPolicies = 2000;
  for (int i = 0; i < kEvalPolicies; ++i) mean_j += policy_return(mdp, sample_policy(r.model, rng).policy);
  mean_j /= kEvalPolicies;
  const TabularPolicy marginal = marginal_policy(r.model, cfg.marginal_samples, rng);
  out.metrics = Json{{"mean_J", mean_j},
                     {"J_maxent", policy_return(mdp, sol.policy)},
                     {"marginal_entropy", mean_row_entropy(marginal)},
                     {"maxent_entropy", mean_row_entropy(sol.policy)},
                     {"kl_estimate", kl_estimate(r.discriminator, r.model, mdp, 1000, rng)},
                     {"iterations", static_cast<int>(r.log.size())}};
}

void run_oracle(const RunConfig& cfg, Artifacts& art, RunOutputs& out) {
  const TabularMDP mdp = build_env_mdp(cfg.env);
  const OracleResult res = cfg.oracle_history.steps.empty()
                               ? oracle_marginals(mdp, cfg.beta, cfg.alpha, cfg.oracle)
                               : oracle_posterior(mdp, cfg.beta, cfg.alpha, cfg.oracle_history, cfg.oracle);
  Json doc = oracle_to_json(res, cfg.beta, cfg.alpha, cfg.oracle);
  if (!cfg.oracle_history.steps.empty()) {
    Json hist = Json::array();
    for (const Step& st : cfg.oracle_history.steps) hist.push_back(Json::array({st.state, st.action}));
    doc["history"] = hist;
    doc["query_state"] = cfg.oracle_query_state;
    doc["posterior_predictive"] = res.row(cfg.oracle_query_state);
  }
  art.json("oracle.json", doc);
  out.metrics = Json{{"marginals", res.marginals}, {"ess", res.ess}};
  if (res.ess < 100.0) out.metrics["warning"] = "effective sample size below 100";
}

std::vector<PredictionDataset> human_datasets(const RunConfig& cfg, const AppleGridworld& world) {
  return build_human_datasets(world, cfg.consistencies, cfg.humans_per_level, cfg.episodes_per_human,
                              cfg.prediction_horizon, derive_seed(cfg.seed, "simulated-humans"));
}

void run_simulate_humans(const RunConfig& cfg, Artifacts& art, RunOutputs& out) {
  const AppleGridworld world(cfg.env.grid);
  const RingRoutes routes(world);
  const auto datasets = human_datasets(cfg, world);
  auto summary = art.open("humans.csv");
  summary << "consistency,trajectories,steps,legs,left_around_fraction\n";
  Json levels = Json::array();
  for (const auto& ds : datasets) {
    auto f = art.open("humans_c" + tag(ds.consistency) + ".jsonl");
    write_trajectories_jsonl(f, ds.trajectories);
    std::size_t steps = 0;
    std::size_t legs = 0;
    std::size_t left = 0;
    for (const auto& t : ds.trajectories) {
      steps += t.length();
      for (Side s : leg_sides(world, routes, t)) {
        ++legs;
        left += s == Side::kLeftAround ? 1 : 0;
      }
    }
    const double frac = legs ? static_cast<double>(left) / static_cast<double>(legs) : 0.0;
    summary << format_double(ds.consistency) << ',' << ds.trajectories.size() << ',' << steps << ',' << legs << ','
            << format_double(frac) << '\n';
    levels.push_back(Json{{"consistency", ds.consistency}, {"trajectories", ds.trajectories.size()}, {"legs", legs}});
  }
  out.metrics = Json{{"levels", levels}};
}

void run_eval_prediction(const RunConfig& cfg, Artifacts& art, RunOutputs& out) {
  const AppleGridworld world(cfg.env.grid);
  const TabularMDP& mdp = world.mdp();
  const LatentPolicyModel model = obtain_model(cfg, mdp, cfg.alpha, art);
  const SoftSolution sol = soft_value_iteration(mdp, cfg.beta);

  std::vector<std::unique_ptr<OnlinePredictor>> owned;
  SeqTrainResult seq;
  for (const auto& name : cfg.predictors) {
    if (name == "maxent") {
      owned.push_back(std::make_unique<MaxEntPredictor>(sol));
    } else if (name == "bpd-sequence") {
      seq = train_sequence_predictor(model, mdp, cfg.seq_num_policies, cfg.seq_horizon, cfg.seq);
      art.json("seq_predictor.json", seq_predictor_to_json(seq.predictor));
      auto f = art.open("seq_train.csv");
      f << "epoch,train_ce\n";
      for (std::size_t e = 0; e < seq.epoch_train_ce.size(); ++e) f << e + 1 << ',' << format_double(seq.epoch_train_ce[e]) << '\n';
      out.metrics["seq_held_out_ce"] = seq.held_out_ce;
      out.metrics["seq_underfit"] = seq.underfit;
      owned.push_back(std::make_unique<SeqOnlinePredictor>(seq.predictor));
    } else if (name == "bpd-particles") {
      owned.push_back(std::make_unique<ParticlePredictor>(model, cfg.particles));
    } else if (name == "bpd-mfvi") {
      owned.push_back(std::make_unique<MfviPredictor>(model, cfg.mfvi, cfg.mfvi_predict_samples));
    } else if (name == "bpd-marginal") {
      owned.push_back(std::make_unique<MarginalPredictor>(model, cfg.marginal_samples, derive_seed(cfg.seed, "marginal")));
    }
  }
  std::vector<OnlinePredictor*> predictors;
  for (auto& p : owned) predictors.push_back(p.get());

  const auto datasets = human_datasets(cfg, world);
  const std::uint64_t eval_seed = derive_seed(cfg.seed, "eval-prediction");
  std::vector<CeRow> rows;
  for (const auto& ds : datasets) {
    for (OnlinePredictor* p : predictors) {
      std::vector<PredictionTrace> traces;
      rows.push_back({ds.consistency, p->name(),
                      cross_entropy(*p, ds.trajectories, eval_seed, cfg.traces ? &traces : nullptr)});
      if (cfg.traces) {
        auto f = art.open("traces_" + p->name() + "_c" + tag(ds.consistency) + ".jsonl");
        write_prediction_traces(f, traces);
      }
    }
  }
  {
    auto f = art.open("prediction.csv");
    write_prediction_csv(f, rows);
  }
  Json table = Json::array();
  for (const auto& r : rows) {
    table.push_back(Json{{"consistency", r.consistency}, {"predictor", r.predictor}, {"mean_ce", r.report.mean},
                         {"std", r.report.std}});
  }
  out.metrics["prediction"] = table;
}

void run_mutual_info(const RunConfig& cfg, Artifacts& art, RunOutputs& out) {
  const TabularMDP mdp = build_env_mdp(cfg.env);
  Json results = Json::array();
  auto record = [&](const std::string& name, const MutualInfoResult& r) {
    auto f = art.open("mi_" + name + ".csv");
    write_mutual_info_csv(f, r);
    results.push_back(Json{{"source", name},
                           {"mean_off_diagonal", r.mean_off_diagonal()},
                           {"missing_off_diagonal", r.missing_off_diagonal()}});
  };
  for (const auto& source : cfg.mi_sources) {
    if (source == "maxent") {
      record("maxent", mutual_information(soft_value_iteration(mdp, cfg.beta), mdp, cfg.mutual_info));
      continue;
    }
    if (!cfg.input_model.empty()) {
      record("bpd", mutual_information(obtain_model(cfg, mdp, cfg.alpha, art), mdp, cfg.mutual_info));
      continue;
    }
    for (double a : cfg.mi_alphas) {
      const std::string suffix = "_alpha" + tag(a);
      record("bpd" + suffix, mutual_information(obtain_model(cfg, mdp, a, art, suffix), mdp, cfg.mutual_info));
    }
  }
  out.metrics["sources"] = results;
}

struct HumanModels {
  SoftSolution maxent;
  LatentPolicyModel bpd;
  bool has_bpd = false;
};

HumanModels human_models(const RunConfig& cfg, const AppleGridworld& world, Artifacts& art) {
  HumanModels h;
  h.maxent = soft_value_iteration(world.mdp(), cfg.beta);
  for (const auto& name : cfg.human_models) {
    if (parse_human_model_kind(name) == HumanModelKind::kBpd) h.has_bpd = true;
  }
  if (h.has_bpd || cfg.collab.memory) {
    h.bpd = obtain_model(cfg, world.mdp(), cfg.alpha, art);
    h.has_bpd = true;
  }
  return h;
}

HumanModelSpec spec_for(const std::string& name, const RunConfig& cfg, const HumanModels& h) {
  switch (parse_human_model_kind(name)) {
    case HumanModelKind::kMaxEnt: return HumanModelSpec::maxent_human(h.maxent);
    case HumanModelKind::kBpd: return HumanModelSpec::bpd_human(h.bpd);
    case HumanModelKind::kScripted: {
      SimulatedHuman s;
      s.consistency = cfg.eval_consistency;
      return HumanModelSpec::scripted_human(s, true);
    }
  }
  throw std::logic_error("unknown human model");
}

std::vector<std::pair<std::string, RobotPolicy>> train_robots(const RunConfig& cfg, const JointGridworld& joint,
                                                              const HumanModels& h, Artifacts& art) {
  std::vector<std::pair<std::string, RobotPolicy>> robots;
  for (const auto& name : cfg.human_models) {
    const HumanModelSpec spec = spec_for(name, cfg, h);
    CollabTrainConfig c = cfg.collab;
    c.seed = derive_seed(c.seed, name);
    BestResponseResult r = train_best_response(joint, spec, h.has_bpd ? &h.bpd : nullptr, c);
    const std::string label = spec.label();
    art.json("robot_" + label + ".json", robot_policy_to_json(r.policy));
    auto f = art.open("curve_" + label + ".csv");
    f << "iter,mean_return\n";
    for (std::size_t i = 0; i < r.curve.size(); ++i) f << i << ',' << format_double(r.curve[i]) << '\n';
    robots.emplace_back(label, std::move(r.policy));
  }
  return robots;
}

void run_train_collab(const RunConfig& cfg, Artifacts& art, RunOutputs& out) {
  const JointGridworld joint(two_player_config(cfg.env));
  const HumanModels h = human_models(cfg, joint.single(), art);
  const auto robots = train_robots(cfg, joint, h, art);
  Json trained = Json::array();
  for (const auto& [label, policy] : robots) trained.push_back(label);
  out.metrics["robots"] = trained;
}

void run_eval_collab(const RunConfig& cfg, Artifacts& art, RunOutputs& out) {
  const JointGridworld joint(two_player_config(cfg.env));
  const HumanModels h = human_models(cfg, joint.single(), art);
  std::vector<std::pair<std::string, RobotPolicy>> robots;
  if (cfg.input_robots.empty()) {
    robots = train_robots(cfg, joint, h, art);
  } else {
    for (const auto& name : cfg.human_models) {
      const std::string label = spec_for(name, cfg, h).label();
      robots.emplace_back(label, robot_policy_from_json(read_json(cfg.input_robots + "/robot_" + label + ".json")));
    }
  }
  SimulatedHuman proxy;
  proxy.consistency = cfg.eval_consistency;
  const HumanModelSpec human = HumanModelSpec::scripted_human(proxy, true);
  auto f = art.open("team.csv");
  write_team_csv_header(f);
  Json table = Json::array();
  for (const auto& [label, policy] : robots) {
    const TeamEvalResult r = eval_team(joint, policy, human, h.has_bpd ? &h.bpd : nullptr, cfg.collab.memory_cfg,
                                       cfg.eval_episodes, cfg.eval_horizon, derive_seed(cfg.seed, "eval-collab"));
    write_team_csv_row(f, label, human.label(), r);
    table.push_back(Json{{"robot", label}, {"human", human.label()}, {"mean_return", r.mean},
                         {"ci_low", r.ci_low}, {"ci_high", r.ci_high}});
  }
  out.metrics["team"] = table;
}

}  // namespace

RunOutputs run_subcommand(const RunConfig& cfg, const std::filesystem::path& out_dir) {
  fs::create_directories(out_dir);
  RunOutputs out;
  Artifacts art(out_dir, out);
  const std::string& cmd = cfg.subcommand;
  if (cmd == "maxent") {
    run_maxent(cfg, art, out);
  } else if (cmd == "train-bpd") {
    run_train_bpd(cfg, art, out);
  } else if (cmd == "oracle") {
    run_oracle(cfg, art, out);
  } else if (cmd == "simulate-humans") {
    run_simulate_humans(cfg, art, out);
  } else if (cmd == "eval-prediction") {
    run_eval_prediction(cfg, art, out);
  } else if (cmd == "mutual-info") {
    run_mutual_info(cfg, art, out);
  } else if (cmd == "train-collab") {
    run_train_collab(cfg, art, out);
  } else if (cmd == "eval-collab") {
    run_eval_collab(cfg, art, out);
  } else {
    throw std::invalid_argument("unknown subcommand '" + cmd + "'");
  }
  art.json("metrics.json", out.metrics);
  return out;
}

void write_manifest(const RunConfig& cfg, const RunOutputs& outputs, int threads, const std::filesystem::path& out_dir) {
  const Json manifest{{"subcommand", cfg.subcommand},
                      {"seed", cfg.seed},
                      {"version", kVersion},
                      {"git_revision", kGitRevision},
                      {"threads", threads},
                      {"config", cfg.resolved},
                      {"files", outputs.files}};
  std::ofstream f(out_dir / "manifest.json", std::ios::binary);
  if (!f) throw std::runtime_error("cannot write " + (out_dir / "manifest.json").string());
  f << manifest.dump(2) << '\n';
}

}  // namespace bpd
