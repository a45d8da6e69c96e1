#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "bpd/mdp.hpp"
#include "bpd/rng.hpp"

namespace bpd {

/// Base measure over policies: an independent symmetric Dir(alpha) per state.
struct BaseMeasureConfig {
  double alpha = 0.2;
  void validate() const;
};

/// One draw from Dir(alpha, ..., alpha) over `k` categories.
std::vector<double> sample_dirichlet(double alpha, int k, Rng& rng);
std::vector<double> sample_dirichlet(std::span<const double> alphas, Rng& rng);

TabularPolicy sample_base_policy(int num_states, int num_actions, const BaseMeasureConfig& cfg, Rng& rng);
TabularPolicy sample_base_policy(const TabularMDP& mdp, const BaseMeasureConfig& cfg, std::uint64_t seed);

/// log Dir(x; alphas) for x on the simplex.
double dirichlet_log_density(std::span<const double> x, std::span<const double> alphas);
/// Sum over states of the symmetric Dir(alpha) log density of each row.
double product_dirichlet_log_density(const TabularPolicy& policy, double alpha);

/// KL(Dir(a) || Dir(b)) in closed form.
double dirichlet_kl(std::span<const double> a, std::span<const double> b);
/// KL between two products of `num_states` symmetric Dirichlets over `num_actions`.
double product_dirichlet_kl(int num_states, int num_actions, double alpha_q, double alpha_p);

}  // namespace bpd
