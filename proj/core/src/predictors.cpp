#include "bpd/predictors.hpp"

#include <stdexcept>

namespace bpd {

void ParticlePredictor::reset(std::uint64_t episode_seed) {
  Rng rng = make_rng(episode_seed, "particles");
  posterior_ = make_particle_posterior(model_->latent_dim(), num_particles_, rng);
}

std::vector<double> ParticlePredictor::predict(int state) { return posterior_predict(*model_, posterior_, state); }

void ParticlePredictor::observe(int state, int action) { particle_update(*model_, posterior_, state, action); }

void MfviPredictor::reset(std::uint64_t episode_seed) {
  state_ = MFVIState::prior(model_->latent_dim());
  prefix_.steps.clear();
  rng_ = make_rng(episode_seed, "mfvi");
}

std::vector<double> MfviPredictor::predict(int state) {
  return posterior_predict(*model_, state_, state, predict_samples_, rng_);
}

void MfviPredictor::observe(int state, int action) {
  prefix_.steps.push_back({state, action});
  state_ = mfvi_update(*model_, std::move(state_), prefix_, cfg_, rng_);
}

MarginalPredictor::MarginalPredictor(const LatentPolicyModel& model, int num_samples, std::uint64_t seed,
                                     std::string name)
    : name_(std::move(name)) {
  Rng rng = make_rng(seed, "marginal");
  marginal_ = marginal_policy(model, num_samples, rng);
}

std::vector<double> MarginalPredictor::predict(int state) {
  const auto row = marginal_.row(state);
  return {row.begin(), row.end()};
}

void SeqOnlinePredictor::reset(std::uint64_t) {
  hidden_ = predictor_->initial_state();
  pending_.assign(hidden_.size(), 0.0);
  pending_state_ = -1;
  prev_state_ = -1;
  prev_action_ = -1;
}

void SeqOnlinePredictor::ensure_advanced(int state) {
  if (pending_state_ == state) return;
  predictor_->advance(hidden_, prev_state_, prev_action_, state, pending_);
  pending_state_ = state;
}

std::vector<double> SeqOnlinePredictor::predict(int state) {
  ensure_advanced(state);
  std::vector<double> probs(static_cast<std::size_t>(predictor_->num_actions()));
  predictor_->readout(pending_, probs);
  return probs;
}

void SeqOnlinePredictor::observe(int state, int action) {
  ensure_advanced(state);
  hidden_.swap(pending_);
  pending_state_ = -1;
  prev_state_ = state;
  prev_action_ = action;
}

}  // namespace bpd
