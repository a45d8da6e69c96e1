#include "bpd/collab.hpp"

#include <boost/math/distributions/normal.hpp>
#include <algorithm>
#include <cmath>
#include <limits>
#include <ostream>
#include <stdexcept>

#include "bpd/optim.hpp"
#include "bpd/parallel.hpp"

namespace bpd {

namespace {

class MaxEntAgent final : public HumanAgent {
 public:
  explicit MaxEntAgent(const SoftSolution& s) : solution_(&s) {}
  int act(int human_state, Rng& rng) override { return sample_categorical(solution_->policy.row(human_state), rng); }

 private:
  const SoftSolution* solution_;
};

class BpdAgent final : public HumanAgent {
 public:
  BpdAgent(const LatentPolicyModel& model, Rng& rng)
      : model_(&model), z_(sample_latent(model.latent_dim(), rng)), probs_(static_cast<std::size_t>(model.num_actions())) {}
  int act(int human_state, Rng& rng) override {
    model_->action_probs(human_state, z_, probs_);
    return sample_categorical(probs_, rng);
  }

 private:
  const LatentPolicyModel* model_;
  std::vector<double> z_;
  std::vector<double> probs_;
};

class ScriptedAgent final : public HumanAgent {
 public:
  ScriptedAgent(const AppleGridworld& world, const SimulatedHuman& human, Rng rng)
      : routes_(world), walker_(world, routes_, human, std::move(rng)) {}
  int act(int human_state, Rng&) override { return walker_.act(human_state); }

 private:
  RingRoutes routes_;
  HumanWalker walker_;
};

}  // namespace

HumanModelKind parse_human_model_kind(const std::string& name) {
  if (name == "maxent") return HumanModelKind::kMaxEnt;
  if (name == "bpd-sample-per-episode" || name == "bpd") return HumanModelKind::kBpd;
  if (name == "fixed-scripted" || name == "scripted") return HumanModelKind::kScripted;
  throw std::invalid_argument("unknown human model '" + name +
                              "' (expected maxent, bpd-sample-per-episode or fixed-scripted)");
}

std::string to_string(HumanModelKind kind) {
  switch (kind) {
    case HumanModelKind::kMaxEnt: return "maxent";
    case HumanModelKind::kBpd: return "bpd-sample-per-episode";
    case HumanModelKind::kScripted: return "fixed-scripted";
  }
  return "unknown";
}

HumanModelSpec HumanModelSpec::maxent_human(const SoftSolution& solution) {
  HumanModelSpec s;
  s.kind = HumanModelKind::kMaxEnt;
  s.maxent = &solution;
  return s;
}

HumanModelSpec HumanModelSpec::bpd_human(const LatentPolicyModel& model) {
  HumanModelSpec s;
  s.kind = HumanModelKind::kBpd;
  s.bpd = &model;
  return s;
}

HumanModelSpec HumanModelSpec::scripted_human(const SimulatedHuman& human, bool random_habits) {
  HumanModelSpec s;
  s.kind = HumanModelKind::kScripted;
  s.scripted = human;
  s.random_habits = random_habits;
  return s;
}

std::string HumanModelSpec::label() const {
  if (kind != HumanModelKind::kScripted) return to_string(kind);
  return "simulated-c" + format_double(scripted.consistency);
}

void HumanModelSpec::validate(const AppleGridworld& world) const {
  const int ns = world.num_states();
  switch (kind) {
    case HumanModelKind::kMaxEnt:
      if (maxent == nullptr) throw std::invalid_argument("human model: maxent solution missing");
      if (maxent->policy.num_states() != ns || maxent->policy.num_actions() != kNumMoves) {
        throw std::invalid_argument("human model: maxent policy does not match the gridworld");
      }
      break;
    case HumanModelKind::kBpd:
      if (bpd == nullptr) throw std::invalid_argument("human model: bpd model missing");
      if (bpd->num_states() != ns || bpd->num_actions() != kNumMoves) {
        throw std::invalid_argument("human model: bpd model does not match the gridworld");
      }
      break;
    case HumanModelKind::kScripted:
      scripted.validate();
      RingRoutes{world};
      break;
  }
}

std::unique_ptr<HumanAgent> make_human_agent(const HumanModelSpec& spec, const AppleGridworld& world,
                                             std::uint64_t episode_seed) {
  Rng rng = make_rng(episode_seed, "human-agent");
  switch (spec.kind) {
    case HumanModelKind::kMaxEnt: return std::make_unique<MaxEntAgent>(*spec.maxent);
    case HumanModelKind::kBpd: return std::make_unique<BpdAgent>(*spec.bpd, rng);
    case HumanModelKind::kScripted: {
      const SimulatedHuman h = spec.random_habits
                                   ? random_simulated_human(spec.scripted.consistency, derive_seed(episode_seed, "habits"))
                                   : spec.scripted;
      return std::make_unique<ScriptedAgent>(world, h, std::move(rng));
    }
  }
  throw std::logic_error("make_human_agent: unknown kind");
}

void MemoryConfig::validate() const {
  if (buckets_per_dim < 2) throw std::invalid_argument("memory.buckets_per_dim must be >= 2");
  if (particles < 1) throw std::invalid_argument("memory.particles must be >= 1");
}

std::vector<double> memory_bucket_edges(int buckets_per_dim) {
  if (buckets_per_dim < 2) throw std::invalid_argument("memory_bucket_edges: need at least 2 buckets");
  const boost::math::normal_distribution<double> normal;
  std::vector<double> edges;
  for (int i = 1; i < buckets_per_dim; ++i) {
    edges.push_back(boost::math::quantile(normal, static_cast<double>(i) / buckets_per_dim));
  }
  return edges;
}

MemoryTracker::MemoryTracker(const LatentPolicyModel* model, const MemoryConfig& cfg, std::uint64_t seed)
    : model_(model), edges_(memory_bucket_edges(cfg.buckets_per_dim)) {
  if (model_ != nullptr) {
    Rng rng = make_rng(seed, "memory");
    posterior_ = make_particle_posterior(model_->latent_dim(), cfg.particles, rng);
  }
}

int MemoryTracker::num_buckets(int latent_dim, int buckets_per_dim) {
  int n = 1;
  for (int i = 0; i < latent_dim; ++i) {
    if (n > std::numeric_limits<int>::max() / buckets_per_dim) throw std::invalid_argument("memory: too many buckets");
    n *= buckets_per_dim;
  }
  return n;
}

int MemoryTracker::bucket() const {
  if (model_ == nullptr) return 0;
  const auto mean = posterior_mean(posterior_);
  const int k = static_cast<int>(edges_.size()) + 1;
  int index = 0;
  for (std::size_t i = mean.size(); i-- > 0;) {
    const int b = static_cast<int>(std::upper_bound(edges_.begin(), edges_.end(), mean[i]) - edges_.begin());
    index = index * k + b;
  }
  return index;
}

void MemoryTracker::observe(int human_state, int human_action) {
  if (model_ != nullptr) particle_update(*model_, posterior_, human_state, human_action);
}

RobotPolicy::RobotPolicy(int num_states, int num_actions, int num_buckets)
    : num_states_(num_states), num_actions_(num_actions), num_buckets_(num_buckets) {
  if (num_states < 1 || num_actions < 1 || num_buckets < 1) throw std::invalid_argument("RobotPolicy: dimensions must be >= 1");
  std::size_t size = mem_offset();
  if (num_buckets > 1) size += mem_offset() * static_cast<std::size_t>(num_buckets);
  params_.assign(size, 0.0);
}

RobotPolicy RobotPolicy::deterministic(int num_actions, std::span<const int> actions) {
  RobotPolicy p(static_cast<int>(actions.size()), num_actions, 1);
  for (std::size_t s = 0; s < actions.size(); ++s) {
    if (actions[s] < 0 || actions[s] >= num_actions) throw std::invalid_argument("RobotPolicy: action out of range");
    for (int a = 0; a < num_actions; ++a) {
      p.params_[s * static_cast<std::size_t>(num_actions) + static_cast<std::size_t>(a)] =
          a == actions[s] ? 0.0 : -std::numeric_limits<double>::infinity();
    }
  }
  return p;
}

void RobotPolicy::probs(int state, int bucket, std::span<double> out) const {
  if (state < 0 || state >= num_states_ || bucket < 0 || bucket >= num_buckets_) {
    throw std::out_of_range("RobotPolicy: state or bucket out of range");
  }
  const std::size_t na = static_cast<std::size_t>(num_actions_);
  const double* base = params_.data() + static_cast<std::size_t>(state) * na;
  const double* mem = memory() ? params_.data() + mem_offset() +
                                     (static_cast<std::size_t>(state) * static_cast<std::size_t>(num_buckets_) +
                                      static_cast<std::size_t>(bucket)) * na
                               : nullptr;
  double m = -std::numeric_limits<double>::infinity();
  for (std::size_t a = 0; a < na; ++a) {
    out[a] = base[a] + (mem ? mem[a] : 0.0);
    m = std::max(m, out[a]);
  }
  double total = 0.0;
  for (std::size_t a = 0; a < na; ++a) {
    out[a] = std::exp(out[a] - m);
    total += out[a];
  }
  for (std::size_t a = 0; a < na; ++a) out[a] /= total;
}

void RobotPolicy::accumulate_logit_grad(int state, int bucket, std::span<const double> dlogits,
                                        std::span<double> grad) const {
  const std::size_t na = static_cast<std::size_t>(num_actions_);
  double* base = grad.data() + static_cast<std::size_t>(state) * na;
  for (std::size_t a = 0; a < na; ++a) base[a] += dlogits[a];
  if (!memory()) return;
  double* mem = grad.data() + mem_offset() +
                (static_cast<std::size_t>(state) * static_cast<std::size_t>(num_buckets_) + static_cast<std::size_t>(bucket)) * na;
  for (std::size_t a = 0; a < na; ++a) mem[a] += dlogits[a];
}

Json robot_policy_to_json(const RobotPolicy& p) {
  Json params = Json::array();
  for (double v : p.params_) {
    if (std::isinf(v)) {
      params.push_back(v < 0 ? "-inf" : "inf");
    } else {
      params.push_back(v);
    }
  }
  return Json{{"type", "robot_policy"},
              {"num_states", p.num_states_},
              {"num_actions", p.num_actions_},
              {"num_buckets", p.num_buckets_},
              {"params", params}};
}

RobotPolicy robot_policy_from_json(const Json& doc) {
  if (doc.value("type", std::string{}) != "robot_policy") throw std::invalid_argument("robot policy json: wrong type");
  RobotPolicy p(doc.at("num_states").get<int>(), doc.at("num_actions").get<int>(), doc.at("num_buckets").get<int>());
  const Json& params = doc.at("params");
  if (params.size() != p.params_.size()) throw std::invalid_argument("robot policy json: wrong parameter count");
  for (std::size_t i = 0; i < params.size(); ++i) {
    if (params[i].is_string()) {
      p.params_[i] = params[i].get<std::string>() == "-inf" ? -std::numeric_limits<double>::infinity()
                                                            : std::numeric_limits<double>::infinity();
    } else {
      p.params_[i] = params[i].get<double>();
    }
  }
  return p;
}

void CollabTrainConfig::validate() const {
  if (iterations < 0) throw std::invalid_argument("collab.iterations must be >= 0");
  if (episodes_per_iter < 1) throw std::invalid_argument("collab.episodes_per_iter must be >= 1");
  if (horizon < 1) throw std::invalid_argument("collab.horizon must be >= 1");
  if (!(learning_rate > 0.0)) throw std::invalid_argument("collab.learning_rate must be > 0");
  if (!(critic_learning_rate > 0.0 && critic_learning_rate <= 1.0)) {
    throw std::invalid_argument("collab.critic_learning_rate must lie in (0, 1]");
  }
  if (!(gae_lambda >= 0.0 && gae_lambda <= 1.0)) throw std::invalid_argument("collab.gae_lambda must lie in [0, 1]");
  if (!(clip_epsilon > 0.0)) throw std::invalid_argument("collab.clip_epsilon must be > 0");
  if (surrogate_epochs < 1) throw std::invalid_argument("collab.surrogate_epochs must be >= 1");
  if (memory) memory_cfg.validate();
}

Json collab_config_to_json(const CollabTrainConfig& cfg) {
  return Json{{"iterations", cfg.iterations},
              {"episodes_per_iter", cfg.episodes_per_iter},
              {"horizon", cfg.horizon},
              {"learning_rate", cfg.learning_rate},
              {"critic_learning_rate", cfg.critic_learning_rate},
              {"grad_clip", cfg.grad_clip},
              {"variant", to_string(cfg.variant)},
              {"gae_lambda", cfg.gae_lambda},
              {"clip_epsilon", cfg.clip_epsilon},
              {"surrogate_epochs", cfg.surrogate_epochs},
              {"memory", cfg.memory},
              {"buckets_per_dim", cfg.memory_cfg.buckets_per_dim},
              {"memory_particles", cfg.memory_cfg.particles},
              {"seed", cfg.seed}};
}

CollabTrainConfig collab_config_from_json(const Json& doc) {
  CollabTrainConfig cfg;
  cfg.iterations = doc.value("iterations", cfg.iterations);
  cfg.episodes_per_iter = doc.value("episodes_per_iter", cfg.episodes_per_iter);
  cfg.horizon = doc.value("horizon", cfg.horizon);
  cfg.learning_rate = doc.value("learning_rate", cfg.learning_rate);
  cfg.critic_learning_rate = doc.value("critic_learning_rate", cfg.critic_learning_rate);
  cfg.grad_clip = doc.value("grad_clip", cfg.grad_clip);
  if (doc.contains("variant")) cfg.variant = parse_pg_variant(doc.at("variant").get<std::string>());
  cfg.gae_lambda = doc.value("gae_lambda", cfg.gae_lambda);
  cfg.clip_epsilon = doc.value("clip_epsilon", cfg.clip_epsilon);
  cfg.surrogate_epochs = doc.value("surrogate_epochs", cfg.surrogate_epochs);
  cfg.memory = doc.value("memory", cfg.memory);
  cfg.memory_cfg.buckets_per_dim = doc.value("buckets_per_dim", cfg.memory_cfg.buckets_per_dim);
  cfg.memory_cfg.particles = doc.value("memory_particles", cfg.memory_cfg.particles);
  cfg.seed = doc.value("seed", cfg.seed);
  return cfg;
}

TeamEpisode play_team_episode(const JointGridworld& joint, const RobotPolicy& robot, const HumanModelSpec& human,
                              const LatentPolicyModel* memory_model, const MemoryConfig& memory_cfg, int start_state,
                              int horizon, std::uint64_t episode_seed) {
  if (robot.num_states() != joint.num_states() || robot.num_actions() != joint.num_agent_actions()) {
    throw std::invalid_argument("play_team_episode: robot policy does not match the joint game");
  }
  const AppleGridworld& world = joint.single();
  auto agent = make_human_agent(human, world, episode_seed);
  Rng rng = make_rng(episode_seed, "team-episode");
  std::unique_ptr<MemoryTracker> memory;
  if (robot.memory()) memory = std::make_unique<MemoryTracker>(memory_model, memory_cfg, episode_seed);
  const double gamma = joint.mdp().discount();
  std::vector<double> probs(static_cast<std::size_t>(robot.num_actions()));
  TeamEpisode ep;
  ep.robot.steps.reserve(static_cast<std::size_t>(horizon));
  int s = start_state;
  double w = gamma;
  for (int t = 0; t < horizon; ++t) {
    const int bucket = memory ? memory->bucket() : 0;
    robot.probs(s, bucket, probs);
    const int a_robot = sample_categorical(probs, rng);
    const int h_state = joint.agent_states(s).second;
    const int a_human = agent->act(h_state, rng);
    const auto [next, reward] = joint.step(s, a_robot, a_human);
    ep.robot.steps.push_back({s, a_robot, reward, std::log(probs[static_cast<std::size_t>(a_robot)])});
    ep.buckets.push_back(bucket);
    ep.discounted_return += w * reward;
    w *= gamma;
    if (memory) memory->observe(h_state, a_human);
    s = next;
  }
  return ep;
}

BestResponseResult train_best_response(const JointGridworld& joint, const HumanModelSpec& human,
                                       const LatentPolicyModel* memory_model, const CollabTrainConfig& cfg) {
  cfg.validate();
  human.validate(joint.single());
  const int ns = joint.num_states();
  const int na = joint.num_agent_actions();
  int buckets = 1;
  if (cfg.memory) {
    if (memory_model == nullptr) throw std::invalid_argument("train_best_response: memory needs a latent model");
    buckets = MemoryTracker::num_buckets(memory_model->latent_dim(), cfg.memory_cfg.buckets_per_dim);
  }
  BestResponseResult out;
  out.policy = RobotPolicy(ns, na, buckets);
  RobotPolicy& pi = out.policy;
  Adam opt(pi.num_params(), AdamConfig{cfg.learning_rate, 0.9, 0.999, 1e-8});
  TabularCritic critic(ns, cfg.critic_learning_rate);
  const double gamma = joint.mdp().discount();
  const auto& starts = joint.start_states();
  const std::uint64_t stream = derive_seed(cfg.seed, "best-response");
  const bool surrogate = cfg.variant == PgVariant::kClippedSurrogate;
  std::vector<double> grad(pi.num_params());
  std::vector<double> probs(static_cast<std::size_t>(na));
  std::vector<double> dlogits(static_cast<std::size_t>(na));
  std::vector<TeamEpisode> episodes(static_cast<std::size_t>(cfg.episodes_per_iter));
  std::vector<PgEpisode> pg(episodes.size());
  for (int it = 0; it < cfg.iterations; ++it) {
    const std::uint64_t iter_seed = derive_seed(stream, static_cast<std::uint64_t>(it));
    double mean_ret = 0.0;
    for (std::size_t e = 0; e < episodes.size(); ++e) {
      episodes[e] = play_team_episode(joint, pi, human, memory_model, cfg.memory_cfg, starts[e % starts.size()],
                                      cfg.horizon, derive_seed(iter_seed, static_cast<std::uint64_t>(e)));
      mean_ret += episodes[e].discounted_return;
      pg[e] = episodes[e].robot;
    }
    out.curve.push_back(mean_ret / static_cast<double>(episodes.size()));
    std::vector<std::vector<double>> adv(episodes.size());
    for (std::size_t e = 0; e < episodes.size(); ++e) {
      adv[e] = step_advantages(pg[e], critic.values(), gamma, cfg.gae_lambda, cfg.variant);
    }
    const double scale = 1.0 / static_cast<double>(episodes.size());
    for (int epoch = 0; epoch < (surrogate ? cfg.surrogate_epochs : 1); ++epoch) {
      std::fill(grad.begin(), grad.end(), 0.0);
      for (std::size_t e = 0; e < episodes.size(); ++e) {
        for (std::size_t t = 0; t < pg[e].steps.size(); ++t) {
          const PgStep& st = pg[e].steps[t];
          const int bucket = episodes[e].buckets[t];
          pi.probs(st.state, bucket, probs);
          if (surrogate) {
            clipped_surrogate_logit_grad(probs, st.action, st.log_prob, adv[e][t] * scale, cfg.clip_epsilon, dlogits);
          } else {
            reinforce_logit_grad(probs, st.action, adv[e][t] * scale, dlogits);
          }
          pi.accumulate_logit_grad(st.state, bucket, dlogits, grad);
        }
      }
      for (double g : grad) {
        if (!std::isfinite(g)) throw std::runtime_error("train_best_response: non-finite gradient");
      }
      clip_global_norm(grad, cfg.grad_clip);
      for (double& g : grad) g = -g;
      opt.step(pi.params(), grad);
    }
    critic.fit(pg, gamma);
  }
  return out;
}

TeamEvalResult eval_team(const JointGridworld& joint, const RobotPolicy& robot, const HumanModelSpec& human,
                         const LatentPolicyModel* memory_model, const MemoryConfig& memory_cfg, int episodes,
                         int horizon, std::uint64_t seed) {
  if (episodes < 2) throw std::invalid_argument("eval_team: need at least 2 episodes");
  human.validate(joint.single());
  const auto& starts = joint.start_states();
  const std::uint64_t stream = derive_seed(seed, "eval-team");
  std::vector<double> returns(static_cast<std::size_t>(episodes));
  parallel_for(returns.size(), [&](std::size_t e) {
    returns[e] = play_team_episode(joint, robot, human, memory_model, memory_cfg, starts[e % starts.size()], horizon,
                                   derive_seed(stream, static_cast<std::uint64_t>(e)))
                     .discounted_return;
  });
  TeamEvalResult r;
  r.episodes = episodes;
  for (double v : returns) r.mean += v;
  r.mean /= episodes;
  double var = 0.0;
  for (double v : returns) var += (v - r.mean) * (v - r.mean);
  r.std = std::sqrt(var / (episodes - 1));
  const double half = 1.96 * r.std / std::sqrt(static_cast<double>(episodes));
  r.ci_low = r.mean - half;
  r.ci_high = r.mean + half;
  return r;
}

TabularPolicy scripted_policy(const AppleGridworld& world, Side to_tree, Side back) {
  const RingRoutes routes(world);
  std::vector<int> actions(static_cast<std::size_t>(world.num_states()));
  for (int s = 0; s < world.num_states(); ++s) {
    actions[static_cast<std::size_t>(s)] = routes.move_towards(world.cell_of(s), world.carrying(s) ? back : to_tree);
  }
  return TabularPolicy::deterministic(kNumMoves, actions);
}

TabularMDP induced_robot_mdp(const JointGridworld& joint, const TabularPolicy& human_policy) {
  const int ns = joint.num_states();
  const int na = joint.num_agent_actions();
  if (human_policy.num_states() != joint.single().num_states() || human_policy.num_actions() != na) {
    throw std::invalid_argument("induced_robot_mdp: human policy does not match the gridworld");
  }
  std::vector<double> p(static_cast<std::size_t>(ns) * static_cast<std::size_t>(na) * static_cast<std::size_t>(ns), 0.0);
  std::vector<double> r(static_cast<std::size_t>(ns) * static_cast<std::size_t>(na), 0.0);
  for (int s = 0; s < ns; ++s) {
    const int h = joint.agent_states(s).second;
    for (int a = 0; a < na; ++a) {
      const std::size_t sa = static_cast<std::size_t>(s) * static_cast<std::size_t>(na) + static_cast<std::size_t>(a);
      for (int b = 0; b < na; ++b) {
        const double ph = human_policy.prob(h, b);
        if (ph == 0.0) continue;
        const auto [next, reward] = joint.step(s, a, b);
        p[sa * static_cast<std::size_t>(ns) + static_cast<std::size_t>(next)] += ph;
        r[sa] += ph * reward;
      }
    }
  }
  const auto rho = joint.mdp().start_dist();
  return TabularMDP(ns, na, std::move(p), std::move(r), joint.mdp().discount(), {rho.begin(), rho.end()});
}

void write_team_csv_header(std::ostream& out) { out << "robot,human,mean_return,ci_low,ci_high\n"; }

void write_team_csv_row(std::ostream& out, const std::string& robot, const std::string& human,
                        const TeamEvalResult& result) {
  out << robot << ',' << human << ',' << format_double(result.mean) << ',' << format_double(result.ci_low) << ','
      << format_double(result.ci_high) << '\n';
}

}  // namespace bpd
