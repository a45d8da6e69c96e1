#pragma once

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <vector>

#include "bpd/latent_model.hpp"
#include "bpd/maxent.hpp"
#include "bpd/mdp.hpp"
#include "bpd/rng.hpp"

namespace bpd {

struct MutualInfoConfig {
  int horizon = 40;
  int num_policies = 10000;
  int rollouts_per_policy = 10;
  /// State pairs seen fewer times than this are left out of an entry.
  int min_group_size = 50;
  std::uint64_t seed = 0;
  void validate() const;
};

/// horizon x horizon matrix of I(a_t; a_t' | s_t, s_t'); t is 1-based in the
/// text, 0-based in the storage. Entries with no qualifying state pair are NaN.
struct MutualInfoResult {
  int horizon = 0;
  std::vector<double> mi;       // row-major
  std::vector<std::int64_t> n;  // samples behind each entry

  double at(int t, int u) const { return mi[static_cast<std::size_t>(t * horizon + u)]; }
  /// Mean over finite off-diagonal entries.
  double mean_off_diagonal() const;
  int missing_off_diagonal() const;
};

/// Plug-in mutual information of a contingency table of counts (rows x cols).
double plugin_mutual_information(std::span<const std::int64_t> counts, int rows, int cols);
/// Plug-in entropy of a count vector.
double plugin_entropy(std::span<const std::int64_t> counts);

using PolicyDraw = std::function<TabularPolicy(Rng&)>;

/// Samples cfg.num_policies policies, rolls each out cfg.rollouts_per_policy
/// times from rho, groups the timestep pairs (t, t') by their state pair and
/// averages the plug-in MI of each group's empirical joint action table,
/// weighted by group size. The diagonal holds the plug-in H(a_t | s_t).
MutualInfoResult mutual_information(const PolicyDraw& draw, const TabularMDP& mdp, const MutualInfoConfig& cfg);
MutualInfoResult mutual_information(const LatentPolicyModel& model, const TabularMDP& mdp, const MutualInfoConfig& cfg);
MutualInfoResult mutual_information(const SoftSolution& solution, const TabularMDP& mdp, const MutualInfoConfig& cfg);

/// CSV "t,t_prime,mi,n" with 1-based times; missing entries are written as nan.
void write_mutual_info_csv(std::ostream& out, const MutualInfoResult& result);

}  // namespace bpd
