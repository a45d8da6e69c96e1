#include "bpd/dirichlet.hpp"

#include <boost/math/special_functions/digamma.hpp>
#include <cmath>
#include <stdexcept>

namespace bpd {

void BaseMeasureConfig::validate() const {
  if (!(alpha > 0.0) || !std::isfinite(alpha)) throw std::invalid_argument("base measure: alpha must be > 0");
}

std::vector<double> sample_dirichlet(std::span<const double> alphas, Rng& rng) {
  std::vector<double> x(alphas.size());
  for (;;) {
    double total = 0.0;
    for (std::size_t i = 0; i < alphas.size(); ++i) {
      std::gamma_distribution<double> g(alphas[i], 1.0);
      x[i] = g(rng);
      total += x[i];
    }
    if (total > 0.0 && std::isfinite(total)) {
      for (double& v : x) v /= total;
      return x;
    }
  }
}

std::vector<double> sample_dirichlet(double alpha, int k, Rng& rng) {
  const std::vector<double> alphas(static_cast<std::size_t>(k), alpha);
  return sample_dirichlet(alphas, rng);
}

TabularPolicy sample_base_policy(int num_states, int num_actions, const BaseMeasureConfig& cfg, Rng& rng) {
  cfg.validate();
  std::vector<double> probs;
  probs.reserve(static_cast<std::size_t>(num_states) * static_cast<std::size_t>(num_actions));
  for (int s = 0; s < num_states; ++s) {
    const auto row = sample_dirichlet(cfg.alpha, num_actions, rng);
    probs.insert(probs.end(), row.begin(), row.end());
  }
  return TabularPolicy(num_states, num_actions, std::move(probs));
}

TabularPolicy sample_base_policy(const TabularMDP& mdp, const BaseMeasureConfig& cfg, std::uint64_t seed) {
  Rng rng(seed);
  return sample_base_policy(mdp.num_states(), mdp.num_actions(), cfg, rng);
}

double dirichlet_log_density(std::span<const double> x, std::span<const double> alphas) {
  if (x.size() != alphas.size()) throw std::invalid_argument("dirichlet_log_density: size mismatch");
  double a0 = 0.0;
  double out = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    a0 += alphas[i];
    out += (alphas[i] - 1.0) * std::log(x[i]) - std::lgamma(alphas[i]);
  }
  return out + std::lgamma(a0);
}

double product_dirichlet_log_density(const TabularPolicy& policy, double alpha) {
  const std::vector<double> alphas(static_cast<std::size_t>(policy.num_actions()), alpha);
  double out = 0.0;
  for (int s = 0; s < policy.num_states(); ++s) out += dirichlet_log_density(policy.row(s), alphas);
  return out;
}

double dirichlet_kl(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) throw std::invalid_argument("dirichlet_kl: size mismatch");
  double a0 = 0.0;
  double b0 = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    a0 += a[i];
    b0 += b[i];
  }
  double out = std::lgamma(a0) - std::lgamma(b0);
  const double psi_a0 = boost::math::digamma(a0);
  for (std::size_t i = 0; i < a.size(); ++i) {
    out += std::lgamma(b[i]) - std::lgamma(a[i]) + (a[i] - b[i]) * (boost::math::digamma(a[i]) - psi_a0);
  }
  return out;
}

double product_dirichlet_kl(int num_states, int num_actions, double alpha_q, double alpha_p) {
  const std::vector<double> a(static_cast<std::size_t>(num_actions), alpha_q);
  const std::vector<double> b(static_cast<std::size_t>(num_actions), alpha_p);
  return num_states * dirichlet_kl(a, b);
}

}  // namespace bpd
