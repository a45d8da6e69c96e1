#pragma once

#include <functional>
#include <span>
#include <string>
#include <vector>

#include "bpd/latent_model.hpp"
#include "bpd/mdp.hpp"
#include "bpd/optim.hpp"
#include "bpd/rng.hpp"
#include "bpd/serialization.hpp"

namespace bpd {

enum class DiscriminatorMode { kFullTable, kWindow };

DiscriminatorMode parse_discriminator_mode(const std::string& name);
std::string to_string(DiscriminatorMode mode);

struct DiscriminatorConfig {
  DiscriminatorMode mode = DiscriminatorMode::kFullTable;
  int hidden = 32;
  /// Window length k (window mode only).
  int window = 10;
  /// Windows start at a uniform offset in [0, window_horizon - k] of a rollout.
  int window_horizon = 50;
  /// Probabilities are clamped here before taking logs.
  double prob_floor = 1e-6;
  AdamConfig adam{3e-3, 0.5, 0.999, 1e-8};
  void validate() const;
};

/// A policy as seen by the discriminator: its action distributions at a list
/// of states (all states in full-table mode, k visited states in window mode).
struct PolicyView {
  std::vector<int> states;
  std::vector<double> probs;  // states.size() x |A|, row-major
};

PolicyView table_view(const TabularPolicy& policy);
PolicyView window_view(const TabularPolicy& policy, std::span<const int> states);

/// Set scorer over the elements of a PolicyView. Each element (s, pi(.|s)) is
/// encoded as [onehot(s), log(max(pi, floor)) / -log(floor)], embedded by a
/// tanh layer and mean-pooled; a second tanh layer and a linear readout give
/// the score, plus a linear term in the pooled log-probabilities.
/// Trained so that d(pi) approximates log q(pi) / p_base(pi).
class Discriminator {
 public:
  Discriminator() = default;
  Discriminator(int num_states, int num_actions, DiscriminatorConfig cfg, Rng& rng);

  const DiscriminatorConfig& config() const noexcept { return cfg_; }
  int num_states() const noexcept { return num_states_; }
  int num_actions() const noexcept { return num_actions_; }
  std::size_t num_params() const noexcept { return params_.size(); }
  std::span<double> params() noexcept { return params_; }
  std::span<const double> params() const noexcept { return params_; }
  void set_learning_rate(double lr);

  /// States at which a policy is inspected: every state in full-table mode,
  /// otherwise a random k-step window of a rollout of `policy` from rho.
  std::vector<int> view_states(const TabularPolicy& policy, const TabularMDP& mdp, Rng& rng) const;
  /// k consecutive states at a uniform offset within the first
  /// min(window_horizon, length) steps of `trajectory`.
  std::vector<int> window_states(const Trajectory& trajectory, Rng& rng) const;
  PolicyView view(const TabularPolicy& policy, const TabularMDP& mdp, Rng& rng) const;

  double score(const PolicyView& view) const;
  /// Returns d and writes dd/dlogits for every element row of the view
  /// (softmax rows, size states x |A|).
  double score_logit_grad(const PolicyView& view, std::span<double> dlogits) const;
  /// grad += scale * dd/dparams.
  void accumulate_param_grad(const PolicyView& view, double scale, std::span<double> grad) const;

  /// One Adam step on mean_q log(1 + e^-d) + mean_base log(1 + e^d).
  /// Returns the pre-step loss. Throws std::runtime_error on non-finite values.
  double update(std::span<const PolicyView> q_views, std::span<const PolicyView> base_views);

  friend Json discriminator_to_json(const Discriminator& disc);
  friend Discriminator discriminator_from_json(const Json& doc);

 private:
  struct Forward {
    std::vector<double> phi;     // n x A encoded log-probabilities
    std::vector<double> h1;      // n x H
    std::vector<double> pooled;  // H
    std::vector<double> h2;      // H
    std::vector<double> mean_phi;  // A
    double out = 0.0;
  };
  void forward(const PolicyView& view, Forward& f) const;
  // Backpropagates dd = 1 from the output; fills dphi (n x A) and/or grad.
  void backward(const PolicyView& view, const Forward& f, double scale, std::span<double> dphi,
                std::span<double> grad) const;

  std::size_t in_dim() const { return static_cast<std::size_t>(num_states_ + num_actions_); }
  std::size_t a1_offset() const { return 0; }
  std::size_t c1_offset() const { return a1_offset() + hidden() * in_dim(); }
  std::size_t b_offset() const { return c1_offset() + hidden(); }
  std::size_t c2_offset() const { return b_offset() + hidden() * hidden(); }
  std::size_t w2_offset() const { return c2_offset() + hidden(); }
  std::size_t b2_offset() const { return w2_offset() + hidden(); }
  std::size_t u_offset() const { return b2_offset() + 1; }
  std::size_t total_params() const { return u_offset() + static_cast<std::size_t>(num_actions_); }
  std::size_t hidden() const { return static_cast<std::size_t>(cfg_.hidden); }

  DiscriminatorConfig cfg_;
  int num_states_ = 0;
  int num_actions_ = 0;
  std::vector<double> params_;
  Adam adam_;
};

/// Logistic discriminator loss without taking a step.
double discriminator_loss(const Discriminator& disc, std::span<const PolicyView> q_views,
                          std::span<const PolicyView> base_views);

/// Draws one policy from some distribution.
using PolicySampler = std::function<TabularPolicy(Rng&)>;

/// Monte Carlo mean of d(pi) over pi drawn from `sampler`; estimates KL(q || p_base).
double kl_estimate(const Discriminator& disc, const PolicySampler& sampler, const TabularMDP& mdp, int num_samples,
                   Rng& rng);
double kl_estimate(const Discriminator& disc, const LatentPolicyModel& model, const TabularMDP& mdp, int num_samples,
                   Rng& rng);

Json discriminator_to_json(const Discriminator& disc);
Discriminator discriminator_from_json(const Json& doc);

}  // namespace bpd
