#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "bpd/latent_model.hpp"
#include "bpd/mdp.hpp"
#include "bpd/serialization.hpp"

namespace bpd {

enum class OracleMethod { kGridQuadrature, kImportanceSampling };

OracleMethod parse_oracle_method(const std::string& name);
std::string to_string(OracleMethod method);

inline constexpr int kQuadratureDimensionCap = 4;

struct OracleConfig {
  OracleMethod method = OracleMethod::kGridQuadrature;
  /// Nodes per simplex coordinate (quadrature).
  int resolution = 200;
  /// Base-measure draws (importance sampling).
  std::int64_t samples = 1000000;
  std::uint64_t seed = 0;
  void validate() const;
};

struct OracleResult {
  OracleMethod method = OracleMethod::kGridQuadrature;
  std::vector<double> marginals;  // S x A, row-major
  double ess = 0.0;
  std::int64_t points = 0;
  int num_states = 0;
  int num_actions = 0;

  double marginal(int s, int a) const {
    return marginals[static_cast<std::size_t>(s) * static_cast<std::size_t>(num_actions) + static_cast<std::size_t>(a)];
  }
  std::vector<double> row(int s) const;
};

/// E[pi(a|s)] under the density proportional to exp(beta J(pi)) times the
/// product-Dirichlet(alpha) base. Quadrature maps each Dirichlet row to the
/// unit cube by stick-breaking with inverse Beta CDFs and uses midpoint nodes,
/// so every node carries equal base mass. Throws std::invalid_argument above
/// the dimension cap |S|(|A|-1) <= 4 for quadrature.
OracleResult oracle_marginals(const TabularMDP& mdp, double beta, double alpha, const OracleConfig& cfg);

/// Same weighting multiplied by the likelihood prod_t pi(a_t|s_t) of `history`;
/// returns E[pi(.|query_state) | history] with the ESS and point count.
/// The likelihood is accumulated from (s, a) counts, so the answer does not
/// depend on the order of the history.
OracleResult oracle_posterior(const TabularMDP& mdp, double beta, double alpha, const Trajectory& history,
                              const OracleConfig& cfg);
std::vector<double> oracle_posterior_predictive(const TabularMDP& mdp, double beta, double alpha,
                                                const Trajectory& history, int query_state, const OracleConfig& cfg);

/// {"method", "params": {...}, "marginals", "ess"}
Json oracle_to_json(const OracleResult& result, double beta, double alpha, const OracleConfig& cfg);

/// Both sides of H_base(q) = -KL(q || p_base) for a one-state, two-action
/// model with n = 1, where q is the distribution of pi(a_1) = sigmoid(w z + c).
/// `entropy` integrates -q log(q / p_base) over pi(a_1) in (0, 1);
/// `negative_kl` integrates -log(q / p_base) against N(0, 1) over z.
struct EntropyIdentity {
  double entropy = 0.0;
  double negative_kl = 0.0;
};
EntropyIdentity bandit_entropy_identity(const LatentPolicyModel& model, double alpha, int resolution = 20000);

}  // namespace bpd
