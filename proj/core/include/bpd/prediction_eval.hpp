#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "bpd/gridworld.hpp"
#include "bpd/scoring.hpp"

namespace bpd {

struct PredictionDataset {
  double consistency = 1.0;
  std::vector<Trajectory> trajectories;
};

/// One dataset per consistency level, each pooling `humans_per_level` random
/// simulated humans (habits drawn from their seeds) with `episodes_per_human`
/// episodes of length `horizon`.
std::vector<PredictionDataset> build_human_datasets(const AppleGridworld& world, std::span<const double> consistencies,
                                                    int humans_per_level, int episodes_per_human, int horizon,
                                                    std::uint64_t seed);

struct CeRow {
  double consistency = 0.0;
  std::string predictor;
  CrossEntropyReport report;
};

/// Cross-entropy of every predictor on every dataset (predictor order within
/// each consistency level follows `predictors`).
std::vector<CeRow> eval_prediction(std::span<const PredictionDataset> datasets,
                                   std::span<OnlinePredictor* const> predictors, std::uint64_t seed);

/// CSV "consistency,predictor,mean_ce,std,n_steps".
void write_prediction_csv(std::ostream& out, std::span<const CeRow> rows);

}  // namespace bpd
