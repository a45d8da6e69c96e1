#pragma once

#include <cstdint>
#include <iosfwd>
#include <span>
#include <stdexcept>
#include <vector>

#include "bpd/dirichlet.hpp"
#include "bpd/discriminator.hpp"
#include "bpd/latent_model.hpp"
#include "bpd/mdp.hpp"
#include "bpd/policy_gradient.hpp"
#include "bpd/serialization.hpp"

namespace bpd {

struct TrainConfig {
  double beta = 10.0;
  int latent_dim = 2;
  /// Initial weights W ~ N(0, init_weight_scale^2 / sqrt(n)).
  double init_weight_scale = 0.1;
  /// Start the biases at the log-probabilities of the soft-optimal policy
  /// at beta instead of zero.
  bool init_bias_from_maxent = false;
  int iterations = 2000;
  /// Policies sampled per batch (M); one episode each.
  int policies_per_batch = 32;
  int horizon = 100;
  PgVariant variant = PgVariant::kReinforceBaseline;
  double learning_rate = 0.003;
  double critic_learning_rate = 0.2;
  /// Global-norm gradient clip; <= 0 disables.
  double grad_clip = 10.0;
  double gae_lambda = 0.98;
  double clip_epsilon = 0.05;
  int surrogate_epochs = 4;
  int disc_steps_per_update = 2;
  /// Policies drawn from each of q and the base per discriminator step.
  int disc_batch = 256;
  /// Discriminator steps taken before the first policy update.
  int disc_warmup_steps = 300;
  /// Iterations over which the return weight ramps linearly from 0 to beta.
  int beta_warmup_iters = 0;
  /// Adam beta1 for both players of the adversarial game.
  double adam_beta1 = 0.5;
  DiscriminatorConfig discriminator{};
  std::uint64_t seed = 0;

  void validate() const;
};

Json train_config_to_json(const TrainConfig& cfg);
/// Missing keys keep their defaults; unknown values throw std::invalid_argument.
TrainConfig train_config_from_json(const Json& doc);

struct TrainLogRow {
  int iter = 0;
  double mean_j = 0.0;
  double kl_estimate = 0.0;
  double disc_loss = 0.0;
  double objective = 0.0;
};

class TrainingDiverged : public std::runtime_error {
 public:
  TrainingDiverged(const std::string& what, std::vector<TrainLogRow> log)
      : std::runtime_error(what), log_(std::move(log)) {}
  const std::vector<TrainLogRow>& log() const noexcept { return log_; }

 private:
  std::vector<TrainLogRow> log_;
};

struct TrainResult {
  LatentPolicyModel model;
  Discriminator discriminator;
  std::vector<TrainLogRow> log;
};

/// One latent draw of a batch together with the seed of its rollout.
struct LatentSample {
  std::vector<double> z;
  std::uint64_t episode_seed = 0;
};

/// Ascent direction for beta J(pi) - d(pi) averaged over the batch, using
/// the policy-gradient estimator for the return term and the derivative of d
/// through the softmax at the episode's view states for the KL term. Samples
/// are processed in a canonical order so any permutation of `samples` yields a
/// bitwise-identical gradient.
std::vector<double> batch_gradient(const LatentPolicyModel& model, const Discriminator& disc, const TabularMDP& mdp,
                                   std::span<const LatentSample> samples, std::span<const double> critic_values,
                                   const TrainConfig& cfg);

/// Alternating optimization of the latent policy model against the
/// discriminator. Throws TrainingDiverged on a non-finite objective or a KL
/// estimate above 1e3.
TrainResult train_bpd(const TabularMDP& mdp, const BaseMeasureConfig& base, const TrainConfig& cfg);

/// CSV: iter,mean_J,kl_estimate,disc_loss
void write_train_log_csv(std::ostream& out, std::span<const TrainLogRow> log);

}  // namespace bpd
