#include "bpd/policy_gradient.hpp"

#include <cmath>
#include <stdexcept>

namespace bpd {

PgVariant parse_pg_variant(const std::string& name) {
  if (name == "reinforce-with-baseline" || name == "reinforce") return PgVariant::kReinforceBaseline;
  if (name == "clipped-surrogate" || name == "ppo") return PgVariant::kClippedSurrogate;
  throw std::invalid_argument("unknown policy-gradient variant '" + name +
                              "' (expected reinforce-with-baseline or clipped-surrogate)");
}

std::string to_string(PgVariant variant) {
  return variant == PgVariant::kReinforceBaseline ? "reinforce-with-baseline" : "clipped-surrogate";
}

std::vector<double> returns_to_go(const PgEpisode& episode, double gamma) {
  const std::size_t n = episode.steps.size();
  std::vector<double> g(n, 0.0);
  double acc = 0.0;
  for (std::size_t i = n; i-- > 0;) {
    acc = episode.steps[i].reward + gamma * acc;
    g[i] = acc;
  }
  return g;
}

std::vector<double> gae_advantages(const PgEpisode& episode, std::span<const double> state_values, double gamma,
                                   double lambda) {
  const std::size_t n = episode.steps.size();
  std::vector<double> adv(n, 0.0);
  double acc = 0.0;
  for (std::size_t i = n; i-- > 0;) {
    const PgStep& st = episode.steps[i];
    const double next_v = i + 1 == n ? 0.0 : state_values[static_cast<std::size_t>(episode.steps[i + 1].state)];
    const double delta = st.reward + gamma * next_v - state_values[static_cast<std::size_t>(st.state)];
    acc = delta + gamma * lambda * acc;
    adv[i] = acc;
  }
  return adv;
}

std::vector<double> step_advantages(const PgEpisode& episode, std::span<const double> state_values, double gamma,
                                    double lambda, PgVariant variant) {
  std::vector<double> adv;
  if (variant == PgVariant::kReinforceBaseline) {
    adv = returns_to_go(episode, gamma);
    for (std::size_t i = 0; i < adv.size(); ++i) adv[i] -= state_values[static_cast<std::size_t>(episode.steps[i].state)];
  } else {
    adv = gae_advantages(episode, state_values, gamma, lambda);
  }
  double w = gamma;
  for (std::size_t i = 0; i < adv.size(); ++i) {
    adv[i] *= w;
    w *= gamma;
  }
  return adv;
}

void reinforce_logit_grad(std::span<const double> probs, int action, double advantage, std::span<double> dlogits) {
  for (std::size_t b = 0; b < probs.size(); ++b) {
    dlogits[b] = advantage * ((static_cast<int>(b) == action ? 1.0 : 0.0) - probs[b]);
  }
}

void clipped_surrogate_logit_grad(std::span<const double> probs, int action, double old_log_prob, double advantage,
                                  double epsilon, std::span<double> dlogits) {
  const double ratio = std::exp(std::log(probs[static_cast<std::size_t>(action)]) - old_log_prob);
  const bool clipped = (advantage > 0.0 && ratio > 1.0 + epsilon) || (advantage < 0.0 && ratio < 1.0 - epsilon);
  if (clipped) {
    for (double& d : dlogits) d = 0.0;
    return;
  }
  reinforce_logit_grad(probs, action, advantage * ratio, dlogits);
}

TabularCritic::TabularCritic(int num_states, double learning_rate)
    : values_(static_cast<std::size_t>(num_states), 0.0), learning_rate_(learning_rate) {
  if (num_states <= 0) throw std::invalid_argument("TabularCritic: num_states must be positive");
  if (!(learning_rate > 0.0 && learning_rate <= 1.0)) throw std::invalid_argument("TabularCritic: learning rate must lie in (0, 1]");
}

void TabularCritic::fit(std::span<const PgEpisode> episodes, double gamma) {
  std::vector<double> sum(values_.size(), 0.0);
  std::vector<double> count(values_.size(), 0.0);
  for (const PgEpisode& ep : episodes) {
    const auto g = returns_to_go(ep, gamma);
    for (std::size_t i = 0; i < g.size(); ++i) {
      const auto s = static_cast<std::size_t>(ep.steps[i].state);
      sum[s] += g[i];
      count[s] += 1.0;
    }
  }
  for (std::size_t s = 0; s < values_.size(); ++s) {
    if (count[s] > 0.0) values_[s] += learning_rate_ * (sum[s] / count[s] - values_[s]);
  }
}

}  // namespace bpd
