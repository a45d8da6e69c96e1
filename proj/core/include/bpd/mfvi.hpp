#pragma once

#include <span>
#include <vector>

#include "bpd/latent_model.hpp"
#include "bpd/mdp.hpp"
#include "bpd/rng.hpp"

namespace bpd {

inline constexpr double kMfviSigmaFloor = 1e-4;

/// Diagonal Gaussian q(z) = prod_i N(mu_i, sigma_i^2).
struct MFVIState {
  std::vector<double> mu;
  std::vector<double> sigma;
  long steps = 0;

  /// The prior N(0, I_n).
  static MFVIState prior(int latent_dim);
  void validate() const;
};

struct MfviConfig {
  int sgd_steps = 1;
  double learning_rate = 0.01;
  int mc_samples = 8;
  void validate() const;
};

/// sum_i KL(N(mu_i, sigma_i^2) || N(0, 1)).
double gaussian_kl(const MFVIState& state);

/// ELBO evaluated with fixed standard-normal draws `noise` (mc x n, row-major):
/// mean over draws of sum_t log f(a_t | s_t, mu + sigma * eps) minus the KL.
double elbo(const LatentPolicyModel& model, const MFVIState& state, const Trajectory& prefix,
            std::span<const double> noise);

/// Reparameterization gradient of the same ELBO with respect to mu and
/// log sigma (each of size n).
void elbo_gradient(const LatentPolicyModel& model, const MFVIState& state, const Trajectory& prefix,
                   std::span<const double> noise, std::span<double> grad_mu, std::span<double> grad_log_sigma);

/// cfg.sgd_steps steps of gradient ascent on the ELBO in (mu, log sigma), each
/// with cfg.mc_samples fresh draws; sigma is floored at kMfviSigmaFloor.
/// Throws std::runtime_error on a non-finite gradient.
MFVIState mfvi_update(const LatentPolicyModel& model, MFVIState state, const Trajectory& prefix,
                      const MfviConfig& cfg, Rng& rng);

/// Monte Carlo average of f(. | s, z) over z ~ q.
std::vector<double> posterior_predict(const LatentPolicyModel& model, const MFVIState& state, int query_state,
                                      int mc_samples, Rng& rng);

}  // namespace bpd
