#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <vector>

#include "bpd/latent_model.hpp"
#include "bpd/mdp.hpp"
#include "bpd/rng.hpp"
#include "bpd/serialization.hpp"

namespace bpd {

/// Single-layer GRU next-action model. At step t it consumes the one-hot tuple
/// (s_{t-1}, a_{t-1}, s_t), with a dedicated "none" slot for the missing
/// previous step at t = 1, and outputs softmax(Wo h_t + bo).
class SeqPredictor {
 public:
  SeqPredictor() = default;
  SeqPredictor(int num_states, int num_actions, int hidden, Rng& rng);

  int num_states() const noexcept { return num_states_; }
  int num_actions() const noexcept { return num_actions_; }
  int hidden() const noexcept { return hidden_; }
  std::size_t num_params() const noexcept { return params_.size(); }
  std::span<double> params() noexcept { return params_; }
  std::span<const double> params() const noexcept { return params_; }

  std::vector<double> initial_state() const { return std::vector<double>(static_cast<std::size_t>(hidden_), 0.0); }
  /// h_out = GRU(h, x(prev_state, prev_action, state)); prev_* = -1 at t = 1.
  void advance(std::span<const double> h, int prev_state, int prev_action, int state, std::span<double> h_out) const;
  /// Action distribution read out from a hidden state.
  void readout(std::span<const double> h, std::span<double> probs) const;

  /// Mean next-action cross-entropy over all steps of `episodes`; when `grad`
  /// is non-empty it receives d(sum of per-step CE)/dparams (not averaged).
  /// Returns the summed CE and writes the step count.
  double sequence_loss(std::span<const Trajectory> episodes, std::span<double> grad, std::size_t& steps) const;

  friend Json seq_predictor_to_json(const SeqPredictor& p);
  friend SeqPredictor seq_predictor_from_json(const Json& doc);

 private:
  struct Layout {
    std::size_t in = 0;  // input width
    std::size_t wx = 0;  // 3 gates x in x H, column blocks of length H
    std::size_t u = 0;   // 3 gates x H x H, row-major
    std::size_t b = 0;   // 3 gates x H
    std::size_t bu = 0;  // H, hidden bias inside the reset product
    std::size_t wo = 0;  // A x H
    std::size_t bo = 0;  // A
    std::size_t total = 0;
  };
  Layout layout() const;
  std::array<std::size_t, 3> input_columns(int prev_state, int prev_action, int state) const;

  int num_states_ = 0;
  int num_actions_ = 0;
  int hidden_ = 0;
  std::vector<double> params_;
};

Json seq_predictor_to_json(const SeqPredictor& p);
SeqPredictor seq_predictor_from_json(const Json& doc);

struct SeqTrainConfig {
  int hidden = 64;
  int epochs = 6;
  int batch_episodes = 16;
  double learning_rate = 3e-3;
  double grad_clip = 5.0;
  double held_out_fraction = 0.1;
  std::uint64_t seed = 0;
  void validate() const;
};

struct SeqTrainResult {
  SeqPredictor predictor;
  double held_out_ce = 0.0;
  std::vector<double> epoch_train_ce;
  /// Held-out CE exceeds the uniform baseline ln |A|.
  bool underfit = false;
};

/// Fits the predictor to `episodes` by Adam on the next-action cross-entropy;
/// the last held_out_fraction of the episodes is kept for evaluation.
SeqTrainResult fit_sequence_predictor(int num_states, int num_actions, std::span<const Trajectory> episodes,
                                      const SeqTrainConfig& cfg);

/// Samples one z and one rollout of length `horizon` per policy, then fits the
/// predictor on those rollouts. Requires num_policies >= 100.
SeqTrainResult train_sequence_predictor(const LatentPolicyModel& model, const TabularMDP& mdp, int num_policies,
                                        int horizon, const SeqTrainConfig& cfg);

/// Runs the model over `prefix` and returns the distribution of the next
/// action at `current_state`. When `hidden` is non-null it receives the final
/// hidden state.
std::vector<double> seq_predict(const SeqPredictor& predictor, const Trajectory& prefix, int current_state,
                                std::vector<double>* hidden = nullptr);

}  // namespace bpd
