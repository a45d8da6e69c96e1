#include "bpd/prediction_eval.hpp"

#include <ostream>
#include <stdexcept>

#include "bpd/serialization.hpp"
#include "bpd/simulated_human.hpp"

namespace bpd {

std::vector<PredictionDataset> build_human_datasets(const AppleGridworld& world, std::span<const double> consistencies,
                                                    int humans_per_level, int episodes_per_human, int horizon,
                                                    std::uint64_t seed) {
  if (humans_per_level < 1 || episodes_per_human < 1) {
    throw std::invalid_argument("build_human_datasets: humans_per_level and episodes_per_human must be >= 1");
  }
  std::vector<PredictionDataset> out;
  const std::uint64_t stream = derive_seed(seed, "humans");
  for (std::size_t level = 0; level < consistencies.size(); ++level) {
    PredictionDataset ds;
    ds.consistency = consistencies[level];
    for (int h = 0; h < humans_per_level; ++h) {
      // Habits depend on the human index only, so every level sees the same people.
      const SimulatedHuman human = random_simulated_human(ds.consistency, derive_seed(stream, static_cast<std::uint64_t>(h)));
      auto episodes = simulate_humans(world, human, episodes_per_human, horizon, seed);
      for (auto& e : episodes) ds.trajectories.push_back(std::move(e));
    }
    out.push_back(std::move(ds));
  }
  return out;
}

std::vector<CeRow> eval_prediction(std::span<const PredictionDataset> datasets,
                                   std::span<OnlinePredictor* const> predictors, std::uint64_t seed) {
  if (datasets.empty()) throw std::invalid_argument("eval_prediction: no datasets");
  std::vector<CeRow> rows;
  for (const auto& ds : datasets) {
    if (ds.trajectories.empty()) throw std::invalid_argument("eval_prediction: empty dataset");
    for (OnlinePredictor* p : predictors) {
      rows.push_back({ds.consistency, p->name(), cross_entropy(*p, ds.trajectories, seed)});
    }
  }
  return rows;
}

void write_prediction_csv(std::ostream& out, std::span<const CeRow> rows) {
  out << "consistency,predictor,mean_ce,std,n_steps\n";
  for (const auto& r : rows) {
    out << format_double(r.consistency) << ',' << r.predictor << ',' << format_double(r.report.mean) << ','
        << format_double(r.report.std) << ',' << r.report.n_steps << '\n';
  }
}

}  // namespace bpd
