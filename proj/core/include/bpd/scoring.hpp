#pragma once

#include <cstdint>
#include <iosfwd>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "bpd/maxent.hpp"
#include "bpd/mdp.hpp"

namespace bpd {

/// Online next-action predictor. For each episode: reset(), then for every
/// timestep predict(s_t) followed by observe(s_t, a_t).
class OnlinePredictor {
 public:
  virtual ~OnlinePredictor() = default;
  virtual std::string name() const = 0;
  virtual void reset(std::uint64_t episode_seed) = 0;
  virtual std::vector<double> predict(int state) = 0;
  virtual void observe(int state, int action) = 0;
};

/// History-independent predictor backed by the MaxEnt policy.
class MaxEntPredictor final : public OnlinePredictor {
 public:
  explicit MaxEntPredictor(const SoftSolution& solution, std::string name = "maxent")
      : solution_(&solution), name_(std::move(name)) {}
  std::string name() const override { return name_; }
  void reset(std::uint64_t) override {}
  std::vector<double> predict(int state) override;
  void observe(int, int) override {}

 private:
  const SoftSolution* solution_;
  std::string name_;
};

/// Predictor that returns a fixed table row for every state (for example the
/// data-generating policy or a uniform baseline).
class TablePredictor final : public OnlinePredictor {
 public:
  TablePredictor(TabularPolicy policy, std::string name) : policy_(std::move(policy)), name_(std::move(name)) {}
  std::string name() const override { return name_; }
  void reset(std::uint64_t) override {}
  std::vector<double> predict(int state) override;
  void observe(int, int) override {}

 private:
  TabularPolicy policy_;
  std::string name_;
};

inline constexpr double kPredictionFloor = 1e-8;

/// Floors every entry at kPredictionFloor and renormalizes.
std::vector<double> floor_and_normalize(std::span<const double> dist);

struct CrossEntropyReport {
  double mean = 0.0;                   // mean over all timesteps, nats
  double std = 0.0;                    // standard deviation of per-trajectory means
  std::vector<double> per_trajectory;  // mean per trajectory
  std::size_t n_steps = 0;
};

struct PredictionTrace {
  std::size_t episode = 0;
  std::size_t t = 0;  // 1-based
  int state = 0;
  std::vector<double> predicted;
  int realized_action = 0;
  double nll = 0.0;
};

/// Mean of -log p(a_t | history) over all timesteps of `dataset`. Throws on an
/// empty dataset. Episode seeds are derived from `seed` and the episode index.
/// When `traces` is non-null every step is recorded.
CrossEntropyReport cross_entropy(OnlinePredictor& predictor, std::span<const Trajectory> dataset,
                                 std::uint64_t seed = 0, std::vector<PredictionTrace>* traces = nullptr);

/// CSV header and row: predictor,dataset,mean_ce,std,n_steps
void write_ce_csv_header(std::ostream& out);
void write_ce_csv_row(std::ostream& out, const std::string& predictor, const std::string& dataset,
                      const CrossEntropyReport& report);

/// JSON lines {"t", "state", "predicted_dist", "realized_action", "nll"} (plus "episode").
void write_prediction_traces(std::ostream& out, std::span<const PredictionTrace> traces);

}  // namespace bpd
