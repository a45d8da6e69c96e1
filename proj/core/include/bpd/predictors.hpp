#pragma once

#include <string>
#include <vector>

#include "bpd/latent_model.hpp"
#include "bpd/mfvi.hpp"
#include "bpd/particles.hpp"
#include "bpd/scoring.hpp"
#include "bpd/seq_predictor.hpp"

namespace bpd {

/// Online prediction with a particle posterior over z; the particle cloud is
/// redrawn from the prior at every reset.
class ParticlePredictor final : public OnlinePredictor {
 public:
  ParticlePredictor(const LatentPolicyModel& model, int num_particles, std::string name = "bpd-particles")
      : model_(&model), num_particles_(num_particles), name_(std::move(name)) {}
  std::string name() const override { return name_; }
  void reset(std::uint64_t episode_seed) override;
  std::vector<double> predict(int state) override;
  void observe(int state, int action) override;
  const ParticlePosterior& posterior() const noexcept { return posterior_; }

 private:
  const LatentPolicyModel* model_;
  int num_particles_;
  std::string name_;
  ParticlePosterior posterior_;
};

/// Online MFVI: one warm-started ELBO step over the whole prefix per observation.
class MfviPredictor final : public OnlinePredictor {
 public:
  MfviPredictor(const LatentPolicyModel& model, MfviConfig cfg, int predict_samples = 64, std::string name = "bpd-mfvi")
      : model_(&model), cfg_(cfg), predict_samples_(predict_samples), name_(std::move(name)) {}
  std::string name() const override { return name_; }
  void reset(std::uint64_t episode_seed) override;
  std::vector<double> predict(int state) override;
  void observe(int state, int action) override;
  const MFVIState& state() const noexcept { return state_; }

 private:
  const LatentPolicyModel* model_;
  MfviConfig cfg_;
  int predict_samples_;
  std::string name_;
  MFVIState state_;
  Trajectory prefix_;
  Rng rng_;
};

/// History-free marginal E_z[f(. | s, z)], estimated once at construction.
class MarginalPredictor final : public OnlinePredictor {
 public:
  MarginalPredictor(const LatentPolicyModel& model, int num_samples, std::uint64_t seed,
                    std::string name = "bpd-marginal");
  std::string name() const override { return name_; }
  void reset(std::uint64_t) override {}
  std::vector<double> predict(int state) override;
  void observe(int, int) override {}

 private:
  TabularPolicy marginal_;
  std::string name_;
};

/// Recurrent predictor run step by step.
class SeqOnlinePredictor final : public OnlinePredictor {
 public:
  explicit SeqOnlinePredictor(const SeqPredictor& predictor, std::string name = "bpd-sequence")
      : predictor_(&predictor), name_(std::move(name)) {}
  std::string name() const override { return name_; }
  void reset(std::uint64_t episode_seed) override;
  std::vector<double> predict(int state) override;
  void observe(int state, int action) override;
  const std::vector<double>& hidden() const noexcept { return hidden_; }

 private:
  void ensure_advanced(int state);

  const SeqPredictor* predictor_;
  std::string name_;
  std::vector<double> hidden_;
  std::vector<double> pending_;
  int pending_state_ = -1;
  int prev_state_ = -1;
  int prev_action_ = -1;
};

}  // namespace bpd
