#include "bpd/scoring.hpp"

#include <cmath>
#include <ostream>
#include <stdexcept>

#include "bpd/rng.hpp"
#include "bpd/serialization.hpp"

namespace bpd {

std::vector<double> MaxEntPredictor::predict(int state) {
  const auto row = solution_->policy.row(state);
  return {row.begin(), row.end()};
}

std::vector<double> TablePredictor::predict(int state) {
  const auto row = policy_.row(state);
  return {row.begin(), row.end()};
}

std::vector<double> floor_and_normalize(std::span<const double> dist) {
  std::vector<double> out(dist.begin(), dist.end());
  double total = 0.0;
  for (double& p : out) {
    if (!(p >= kPredictionFloor)) p = kPredictionFloor;
    total += p;
  }
  for (double& p : out) p /= total;
  return out;
}

CrossEntropyReport cross_entropy(OnlinePredictor& predictor, std::span<const Trajectory> dataset, std::uint64_t seed,
                                 std::vector<PredictionTrace>* traces) {
  if (dataset.empty()) throw std::invalid_argument("cross_entropy: dataset is empty");
  CrossEntropyReport report;
  double total = 0.0;
  for (std::size_t e = 0; e < dataset.size(); ++e) {
    const auto& steps = dataset[e].steps;
    predictor.reset(derive_seed(seed, e));
    double episode_total = 0.0;
    for (std::size_t t = 0; t < steps.size(); ++t) {
      const auto dist = floor_and_normalize(predictor.predict(steps[t].state));
      if (steps[t].action < 0 || static_cast<std::size_t>(steps[t].action) >= dist.size()) {
        throw std::out_of_range("cross_entropy: action out of range for predictor output");
      }
      const double nll = -std::log(dist[static_cast<std::size_t>(steps[t].action)]);
      episode_total += nll;
      if (traces) traces->push_back({e, t + 1, steps[t].state, dist, steps[t].action, nll});
      predictor.observe(steps[t].state, steps[t].action);
    }
    total += episode_total;
    report.n_steps += steps.size();
    report.per_trajectory.push_back(steps.empty() ? 0.0 : episode_total / static_cast<double>(steps.size()));
  }
  if (report.n_steps == 0) throw std::invalid_argument("cross_entropy: dataset has no timesteps");
  report.mean = total / static_cast<double>(report.n_steps);
  double mu = 0.0;
  for (double v : report.per_trajectory) mu += v;
  mu /= static_cast<double>(report.per_trajectory.size());
  double var = 0.0;
  for (double v : report.per_trajectory) var += (v - mu) * (v - mu);
  report.std = report.per_trajectory.size() > 1 ? std::sqrt(var / static_cast<double>(report.per_trajectory.size() - 1)) : 0.0;
  return report;
}

void write_ce_csv_header(std::ostream& out) { out << "predictor,dataset,mean_ce,std,n_steps\n"; }

void write_ce_csv_row(std::ostream& out, const std::string& predictor, const std::string& dataset,
                      const CrossEntropyReport& report) {
  out << predictor << ',' << dataset << ',' << format_double(report.mean) << ',' << format_double(report.std) << ','
      << report.n_steps << '\n';
}

void write_prediction_traces(std::ostream& out, std::span<const PredictionTrace> traces) {
  for (const auto& tr : traces) {
    out << Json{{"episode", tr.episode},
                {"t", tr.t},
                {"state", tr.state},
                {"predicted_dist", tr.predicted},
                {"realized_action", tr.realized_action},
                {"nll", tr.nll}}
               .dump()
        << '\n';
  }
}

}  // namespace bpd
