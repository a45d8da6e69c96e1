#pragma once

#include <cstdint>
#include <iosfwd>
#include <memory>
#include <string>
#include <vector>

#include "bpd/gridworld.hpp"
#include "bpd/latent_model.hpp"
#include "bpd/maxent.hpp"
#include "bpd/particles.hpp"
#include "bpd/policy_gradient.hpp"
#include "bpd/serialization.hpp"
#include "bpd/simulated_human.hpp"

namespace bpd {

// In the joint game agent 0 is the robot and agent 1 the human.

enum class HumanModelKind { kMaxEnt, kBpd, kScripted };

HumanModelKind parse_human_model_kind(const std::string& name);
std::string to_string(HumanModelKind kind);

/// Model of the human partner. The referenced solution or model must outlive
/// the spec.
struct HumanModelSpec {
  HumanModelKind kind = HumanModelKind::kMaxEnt;
  const SoftSolution* maxent = nullptr;
  /// kBpd draws a fresh z from this model every episode.
  const LatentPolicyModel* bpd = nullptr;
  SimulatedHuman scripted;
  /// kScripted: draw new habits for every episode, keeping the consistency.
  bool random_habits = false;

  static HumanModelSpec maxent_human(const SoftSolution& solution);
  static HumanModelSpec bpd_human(const LatentPolicyModel& model);
  static HumanModelSpec scripted_human(const SimulatedHuman& human, bool random_habits = false);
  std::string label() const;
  void validate(const AppleGridworld& world) const;
};

/// One episode's instance of a human model acting on its own single-agent state.
class HumanAgent {
 public:
  virtual ~HumanAgent() = default;
  virtual int act(int human_state, Rng& rng) = 0;
};

std::unique_ptr<HumanAgent> make_human_agent(const HumanModelSpec& spec, const AppleGridworld& world,
                                             std::uint64_t episode_seed);

struct MemoryConfig {
  int buckets_per_dim = 5;
  int particles = 256;
  void validate() const;
};

/// Bucket edges at the standard-normal quantiles i / k, i = 1..k-1.
std::vector<double> memory_bucket_edges(int buckets_per_dim);

/// Robot-side summary of the human: a particle posterior over the human's
/// latent under a BPD model, reduced to its mean and bucketed per dimension.
/// Without a model the bucket is always 0.
class MemoryTracker {
 public:
  MemoryTracker(const LatentPolicyModel* model, const MemoryConfig& cfg, std::uint64_t seed);
  int bucket() const;
  void observe(int human_state, int human_action);
  static int num_buckets(int latent_dim, int buckets_per_dim);

 private:
  const LatentPolicyModel* model_;
  std::vector<double> edges_;
  ParticlePosterior posterior_;
};

/// Tabular softmax robot policy over (joint state, memory bucket) with logits
/// base[s] + mem[s][bucket]; num_buckets = 1 means no memory.
class RobotPolicy {
 public:
  RobotPolicy() = default;
  RobotPolicy(int num_states, int num_actions, int num_buckets);
  /// Deterministic memoryless policy.
  static RobotPolicy deterministic(int num_actions, std::span<const int> actions);

  int num_states() const noexcept { return num_states_; }
  int num_actions() const noexcept { return num_actions_; }
  int num_buckets() const noexcept { return num_buckets_; }
  bool memory() const noexcept { return num_buckets_ > 1; }
  std::size_t num_params() const noexcept { return params_.size(); }
  std::span<double> params() noexcept { return params_; }
  std::span<const double> params() const noexcept { return params_; }

  void probs(int state, int bucket, std::span<double> out) const;
  void accumulate_logit_grad(int state, int bucket, std::span<const double> dlogits, std::span<double> grad) const;

  friend Json robot_policy_to_json(const RobotPolicy& p);
  friend RobotPolicy robot_policy_from_json(const Json& doc);

 private:
  std::size_t mem_offset() const {
    return static_cast<std::size_t>(num_states_) * static_cast<std::size_t>(num_actions_);
  }
  int num_states_ = 0;
  int num_actions_ = 0;
  int num_buckets_ = 1;
  std::vector<double> params_;
};

Json robot_policy_to_json(const RobotPolicy& p);
RobotPolicy robot_policy_from_json(const Json& doc);

struct CollabTrainConfig {
  int iterations = 600;
  int episodes_per_iter = 32;
  int horizon = 60;
  double learning_rate = 0.05;
  double critic_learning_rate = 0.2;
  double grad_clip = 0.0;
  PgVariant variant = PgVariant::kReinforceBaseline;
  double gae_lambda = 0.98;
  double clip_epsilon = 0.05;
  int surrogate_epochs = 4;
  bool memory = false;
  MemoryConfig memory_cfg;
  std::uint64_t seed = 0;
  void validate() const;
};

Json collab_config_to_json(const CollabTrainConfig& cfg);
CollabTrainConfig collab_config_from_json(const Json& doc);

struct TeamEpisode {
  PgEpisode robot;           // joint states, robot actions, team rewards
  std::vector<int> buckets;  // memory bucket per step
  double discounted_return = 0.0;
};

/// Plays one episode from `start_state`. The return is sum_{t>=1} gamma^t r_t.
TeamEpisode play_team_episode(const JointGridworld& joint, const RobotPolicy& robot, const HumanModelSpec& human,
                              const LatentPolicyModel* memory_model, const MemoryConfig& memory_cfg, int start_state,
                              int horizon, std::uint64_t episode_seed);

struct BestResponseResult {
  RobotPolicy policy;
  std::vector<double> curve;  // mean discounted return per iteration
};

/// Policy-gradient best response to `human`, treated as part of the dynamics.
/// With cfg.memory the robot also sees the bucketed posterior mean under
/// `memory_model` (required when memory is on).
BestResponseResult train_best_response(const JointGridworld& joint, const HumanModelSpec& human,
                                       const LatentPolicyModel* memory_model, const CollabTrainConfig& cfg);

struct TeamEvalResult {
  double mean = 0.0;
  double std = 0.0;
  double ci_low = 0.0;
  double ci_high = 0.0;
  int episodes = 0;
};

/// Mean discounted team return with a normal-approximation 95% interval.
/// Episodes cycle through every start permutation.
TeamEvalResult eval_team(const JointGridworld& joint, const RobotPolicy& robot, const HumanModelSpec& human,
                         const LatentPolicyModel* memory_model, const MemoryConfig& memory_cfg, int episodes,
                         int horizon, std::uint64_t seed);

/// Deterministic table for a consistency-1 human with the given habits.
TabularPolicy scripted_policy(const AppleGridworld& world, Side to_tree, Side back);

/// Single-agent robot MDP obtained by folding a Markov human policy into the
/// joint dynamics.
TabularMDP induced_robot_mdp(const JointGridworld& joint, const TabularPolicy& human_policy);

/// CSV "robot,human,mean_return,ci_low,ci_high".
void write_team_csv_header(std::ostream& out);
void write_team_csv_row(std::ostream& out, const std::string& robot, const std::string& human,
                        const TeamEvalResult& result);

}  // namespace bpd
