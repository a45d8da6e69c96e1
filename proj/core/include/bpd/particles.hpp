#pragma once

#include <span>
#include <vector>

#include "bpd/latent_model.hpp"
#include "bpd/rng.hpp"

namespace bpd {

/// Weighted particle approximation of the posterior over z. The latent is
/// fixed for a whole episode, so particles never move and are never resampled.
struct ParticlePosterior {
  int latent_dim = 0;
  std::vector<double> particles;    // count x n, row-major
  std::vector<double> log_weights;  // unnormalized

  std::size_t count() const noexcept { return log_weights.size(); }
  std::span<const double> particle(std::size_t i) const {
    return {particles.data() + i * static_cast<std::size_t>(latent_dim), static_cast<std::size_t>(latent_dim)};
  }
};

/// `count` prior draws z ~ N(0, I_n) with equal weights.
ParticlePosterior make_particle_posterior(int latent_dim, int count, Rng& rng);
/// Equal-weight posterior over the given points (count x n, row-major).
ParticlePosterior particle_posterior_from_points(int latent_dim, std::vector<double> points);

/// log_weight_i += log f(a | s, z_i). Throws std::runtime_error if every
/// weight becomes -inf.
void particle_update(const LatentPolicyModel& model, ParticlePosterior& posterior, int s, int a);

std::vector<double> normalized_weights(const ParticlePosterior& posterior);
/// (sum w)^2 / sum w^2.
double effective_sample_size(const ParticlePosterior& posterior);
/// Posterior-weighted mean of z.
std::vector<double> posterior_mean(const ParticlePosterior& posterior);

/// Weight-averaged f(. | s, z_i).
std::vector<double> posterior_predict(const LatentPolicyModel& model, const ParticlePosterior& posterior,
                                      int query_state);

}  // namespace bpd
