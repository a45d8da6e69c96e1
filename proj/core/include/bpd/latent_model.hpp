#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "bpd/mdp.hpp"
#include "bpd/rng.hpp"
#include "bpd/serialization.hpp"

namespace bpd {

/// Latent-conditioned policy f_theta(a | s, z) = softmax(W[s] z + b[s])_a with
/// z ~ N(0, I_n). Parameters are stored flat: W (S x A x n) then b (S x A).
class LatentPolicyModel {
 public:
  LatentPolicyModel() = default;
  LatentPolicyModel(int num_states, int num_actions, int latent_dim);

  /// W entries ~ N(0, scale^2 / sqrt(n)), b = 0.
  static LatentPolicyModel initialized(int num_states, int num_actions, int latent_dim, Rng& rng,
                                       double scale = 0.1);

  int num_states() const noexcept { return num_states_; }
  int num_actions() const noexcept { return num_actions_; }
  int latent_dim() const noexcept { return latent_dim_; }
  std::size_t num_params() const noexcept { return params_.size(); }

  std::span<double> params() noexcept { return params_; }
  std::span<const double> params() const noexcept { return params_; }

  std::size_t weight_index(int s, int a, int i) const {
    return (static_cast<std::size_t>(s) * static_cast<std::size_t>(num_actions_) + static_cast<std::size_t>(a)) *
               static_cast<std::size_t>(latent_dim_) +
           static_cast<std::size_t>(i);
  }
  std::size_t bias_index(int s, int a) const {
    return bias_offset() + static_cast<std::size_t>(s) * static_cast<std::size_t>(num_actions_) + static_cast<std::size_t>(a);
  }
  double weight(int s, int a, int i) const { return params_[weight_index(s, a, i)]; }
  double bias(int s, int a) const { return params_[bias_index(s, a)]; }

  void logits(int s, std::span<const double> z, std::span<double> out) const;
  void action_probs(int s, std::span<const double> z, std::span<double> out) const;
  std::vector<double> action_probs(int s, std::span<const double> z) const;
  double log_prob(int s, int a, std::span<const double> z) const;
  TabularPolicy policy(std::span<const double> z) const;

  /// grad += d/dtheta sum_a dlogits[a] * logit_a(s, z).
  void accumulate_logit_grad(int s, std::span<const double> z, std::span<const double> dlogits,
                             std::span<double> grad) const;
  /// grad += scale * d/dtheta log f(a | s, z).
  void accumulate_log_prob_grad(int s, int a, std::span<const double> z, double scale, std::span<double> grad) const;
  /// out = d/dz log f(a | s, z).
  void log_prob_latent_grad(int s, int a, std::span<const double> z, std::span<double> out) const;

 private:
  std::size_t bias_offset() const {
    return static_cast<std::size_t>(num_states_) * static_cast<std::size_t>(num_actions_) *
           static_cast<std::size_t>(latent_dim_);
  }

  int num_states_ = 0;
  int num_actions_ = 0;
  int latent_dim_ = 0;
  std::vector<double> params_;
};

struct PolicySample {
  std::vector<double> z;
  TabularPolicy policy;
};

std::vector<double> sample_latent(int latent_dim, Rng& rng);

/// z ~ N(0, I_n) and the policy with rows softmax(W[s] z + b[s]).
PolicySample sample_policy(const LatentPolicyModel& model, Rng& rng);
PolicySample sample_policy(const LatentPolicyModel& model, std::uint64_t seed);

/// Per-state action marginals E_z[f_theta(. | s, z)] by Monte Carlo.
TabularPolicy marginal_policy(const LatentPolicyModel& model, int num_samples, Rng& rng);

/// {"type": "latent_policy_model", "num_states", "num_actions", "latent_dim", "weights", "biases"}
Json model_to_json(const LatentPolicyModel& model);
LatentPolicyModel model_from_json(const Json& doc);

}  // namespace bpd
