#include "bpd/particles.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace bpd {

ParticlePosterior make_particle_posterior(int latent_dim, int count, Rng& rng) {
  if (latent_dim < 1 || count < 1) throw std::invalid_argument("make_particle_posterior: latent_dim and count must be >= 1");
  std::vector<double> points(static_cast<std::size_t>(latent_dim) * static_cast<std::size_t>(count));
  for (double& v : points) v = standard_normal(rng);
  return particle_posterior_from_points(latent_dim, std::move(points));
}

ParticlePosterior particle_posterior_from_points(int latent_dim, std::vector<double> points) {
  if (latent_dim < 1 || points.empty() || points.size() % static_cast<std::size_t>(latent_dim) != 0) {
    throw std::invalid_argument("particle_posterior_from_points: points must be count x latent_dim");
  }
  ParticlePosterior p;
  p.latent_dim = latent_dim;
  p.log_weights.assign(points.size() / static_cast<std::size_t>(latent_dim), 0.0);
  p.particles = std::move(points);
  return p;
}

void particle_update(const LatentPolicyModel& model, ParticlePosterior& posterior, int s, int a) {
  if (s < 0 || s >= model.num_states() || a < 0 || a >= model.num_actions()) {
    throw std::out_of_range("particle_update: state or action out of range");
  }
  if (posterior.latent_dim != model.latent_dim()) throw std::invalid_argument("particle_update: latent_dim mismatch");
  bool any = false;
  for (std::size_t i = 0; i < posterior.count(); ++i) {
    posterior.log_weights[i] += model.log_prob(s, a, posterior.particle(i));
    any = any || posterior.log_weights[i] > -std::numeric_limits<double>::infinity();
  }
  if (!any) throw std::runtime_error("particle_update: every particle weight is zero");
}

std::vector<double> normalized_weights(const ParticlePosterior& posterior) {
  const double m = *std::max_element(posterior.log_weights.begin(), posterior.log_weights.end());
  std::vector<double> w(posterior.count());
  double total = 0.0;
  for (std::size_t i = 0; i < w.size(); ++i) {
    w[i] = std::exp(posterior.log_weights[i] - m);
    total += w[i];
  }
  for (double& v : w) v /= total;
  return w;
}

double effective_sample_size(const ParticlePosterior& posterior) {
  double sq = 0.0;
  for (double v : normalized_weights(posterior)) sq += v * v;
  return 1.0 / sq;
}

std::vector<double> posterior_mean(const ParticlePosterior& posterior) {
  const auto w = normalized_weights(posterior);
  std::vector<double> mean(static_cast<std::size_t>(posterior.latent_dim), 0.0);
  for (std::size_t i = 0; i < w.size(); ++i) {
    const auto z = posterior.particle(i);
    for (std::size_t k = 0; k < mean.size(); ++k) mean[k] += w[i] * z[k];
  }
  return mean;
}

std::vector<double> posterior_predict(const LatentPolicyModel& model, const ParticlePosterior& posterior,
                                      int query_state) {
  const auto w = normalized_weights(posterior);
  std::vector<double> p(static_cast<std::size_t>(model.num_actions()));
  std::vector<double> out(p.size(), 0.0);
  for (std::size_t i = 0; i < w.size(); ++i) {
    if (w[i] == 0.0) continue;
    model.action_probs(query_state, posterior.particle(i), p);
    for (std::size_t a = 0; a < p.size(); ++a) out[a] += w[i] * p[a];
  }
  return out;
}

}  // namespace bpd
