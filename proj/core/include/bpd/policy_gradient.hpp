#pragma once

#include <span>
#include <string>
#include <vector>

namespace bpd {

enum class PgVariant { kReinforceBaseline, kClippedSurrogate };

PgVariant parse_pg_variant(const std::string& name);
std::string to_string(PgVariant variant);

/// One sampled transition. `log_prob` is the behaviour log-probability.
struct PgStep {
  int state = 0;
  int action = 0;
  double reward = 0.0;
  double log_prob = 0.0;
};

struct PgEpisode {
  std::vector<PgStep> steps;
};

/// G_t = sum_{k >= t} gamma^{k-t} r_k (rewards only).
std::vector<double> returns_to_go(const PgEpisode& episode, double gamma);

/// Generalized advantage estimates from per-state values; the value after the
/// last step is treated as zero (truncated episode).
std::vector<double> gae_advantages(const PgEpisode& episode, std::span<const double> state_values, double gamma,
                                   double lambda);

/// Per-step weights multiplying d/dtheta log pi(a_t | s_t):
///   w_t = gamma^t * A_t, t starting at 1, so that the sum estimates the
/// gradient of E[sum_{t>=1} gamma^t r_t]. A_t is G_t - V(s_t)
/// for REINFORCE and GAE(lambda) for the clipped surrogate.
std::vector<double> step_advantages(const PgEpisode& episode, std::span<const double> state_values, double gamma,
                                    double lambda, PgVariant variant);

/// d/dlogits of min(r A, clip(r, 1 - eps, 1 + eps) A) with r = pi(a|s) / exp(old_log_prob),
/// for a softmax row `probs`. Writes into dlogits (size |A|).
void clipped_surrogate_logit_grad(std::span<const double> probs, int action, double old_log_prob, double advantage,
                                  double epsilon, std::span<double> dlogits);

/// d/dlogits of A * log pi(a|s).
void reinforce_logit_grad(std::span<const double> probs, int action, double advantage, std::span<double> dlogits);

/// Tabular state-value baseline fitted by stochastic regression toward returns.
class TabularCritic {
 public:
  TabularCritic() = default;
  TabularCritic(int num_states, double learning_rate);

  std::span<const double> values() const noexcept { return values_; }
  double value(int s) const { return values_[static_cast<std::size_t>(s)]; }
  /// Moves V(s_t) toward the returns-to-go of every step of every episode.
  void fit(std::span<const PgEpisode> episodes, double gamma);

 private:
  std::vector<double> values_;
  double learning_rate_ = 0.1;
};

}  // namespace bpd
