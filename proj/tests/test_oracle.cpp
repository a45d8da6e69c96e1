#include <gtest/gtest.h>

#include "bpd/latent_model.hpp"
#include "bpd/oracle.hpp"
#include "support.hpp"

using namespace bpd;
using bpd::testing::bandit;
using bpd::testing::random_mdp;

namespace {

OracleConfig quadrature(int resolution = 200) {
  OracleConfig cfg;
  cfg.resolution = resolution;
  return cfg;
}

OracleConfig sampling(std::int64_t samples = 1000000, std::uint64_t seed = 0) {
  OracleConfig cfg;
  cfg.method = OracleMethod::kImportanceSampling;
  cfg.samples = samples;
  cfg.seed = seed;
  return cfg;
}

double total_variation(const OracleResult& a, const OracleResult& b, int s) {
  double tv = 0.0;
  for (int k = 0; k < a.num_actions; ++k) tv += 0.5 * std::abs(a.marginal(s, k) - b.marginal(s, k));
  return tv;
}

// Two states, two actions: action 0 stays, action 1 moves; reward for staying in state 1.
TabularMDP two_state_chain() {
  return TabularMDP(2, 2, {1, 0, 0, 1, 0, 1, 1, 0}, {0.0, 0.0, 1.0, 0.0}, 0.7, {1.0, 0.0});
}

}  // namespace

TEST(Oracle, ZeroBetaIsUniform) {
  for (const auto& cfg : {quadrature(), sampling(20000)}) {
    const auto r = oracle_marginals(two_state_chain(), 0.0, 0.3, cfg);
    for (double m : r.marginals) EXPECT_NEAR(m, 0.5, cfg.method == OracleMethod::kGridQuadrature ? 1e-12 : 1e-2);
  }
  const auto r3 = oracle_marginals(bandit({1.0, 0.5, 0.0}, 0.5), 0.0, 0.2, quadrature());
  for (double m : r3.marginals) EXPECT_NEAR(m, 1.0 / 3.0, 1e-8);
}

TEST(Oracle, BanditClosedForm) {
  // With J = p for gamma = 0.5 and a flat base, E[p] under e^{2p} on (0, 1).
  const double e2 = std::exp(2.0);
  const double expected = (e2 + 1.0) / (2.0 * (e2 - 1.0));
  const auto r = oracle_marginals(bandit({1.0, 0.0}, 0.5), 2.0, 1.0, quadrature(2000));
  EXPECT_NEAR(r.marginal(0, 0), expected, 1e-5);
  EXPECT_NEAR(expected, 0.6565, 1e-4);
}

TEST(Oracle, SymmetricRoutesHaveEqualMarginals) {
  const auto r = oracle_marginals(bandit({1.0, 1.0, 0.0}, 0.6), 3.0, 0.5, quadrature());
  EXPECT_NEAR(r.marginal(0, 0), r.marginal(0, 1), 1e-3);
  EXPECT_GT(r.marginal(0, 0), r.marginal(0, 2));
}

TEST(Oracle, QuadratureMatchesImportanceSampling) {
  const std::vector<std::pair<TabularMDP, double>> cases = {
      {bandit({1.0, 0.0}, 0.5), 1.0}, {bandit({1.0, 0.3, 0.0}, 0.5), 0.5}, {two_state_chain(), 0.7}};
  for (const auto& [mdp, alpha] : cases) {
    const auto q = oracle_marginals(mdp, 2.0, alpha, quadrature());
    const auto is = oracle_marginals(mdp, 2.0, alpha, sampling(1000000, 4));
    for (int s = 0; s < mdp.num_states(); ++s) EXPECT_LT(total_variation(q, is, s), 0.01);
    EXPECT_GT(is.ess, 100.0);
  }
}

TEST(Oracle, ResolutionConverged) {
  for (const auto& [mdp, alpha] : std::vector<std::pair<TabularMDP, double>>{{bandit({1.0, 0.0}, 0.5), 1.0},
                                                                             {two_state_chain(), 0.7}}) {
    const auto a = oracle_marginals(mdp, 2.0, alpha, quadrature(200));
    const auto b = oracle_marginals(mdp, 2.0, alpha, quadrature(400));
    for (std::size_t i = 0; i < a.marginals.size(); ++i) EXPECT_LT(std::abs(a.marginals[i] - b.marginals[i]), 1e-4);
  }
}

TEST(Oracle, DimensionCap) {
  const auto mdp = random_mdp(1, 3, 3, 0.9);
  EXPECT_THROW(oracle_marginals(mdp, 1.0, 1.0, quadrature()), std::invalid_argument);
  EXPECT_NO_THROW(oracle_marginals(mdp, 1.0, 1.0, sampling(5000)));
}

TEST(Oracle, ConfigValidation) {
  EXPECT_THROW(quadrature(5).validate(), std::invalid_argument);
  EXPECT_THROW(sampling(10).validate(), std::invalid_argument);
  EXPECT_EQ(parse_oracle_method("importance-sampling"), OracleMethod::kImportanceSampling);
  EXPECT_THROW(parse_oracle_method("mcmc"), std::invalid_argument);
}

TEST(OraclePosterior, EmptyHistoryIsMarginal) {
  const auto mdp = two_state_chain();
  const auto m = oracle_marginals(mdp, 2.0, 0.7, quadrature());
  for (int s = 0; s < 2; ++s) {
    const auto p = oracle_posterior_predictive(mdp, 2.0, 0.7, Trajectory{}, s, quadrature());
    for (int a = 0; a < 2; ++a) EXPECT_NEAR(p[static_cast<std::size_t>(a)], m.marginal(s, a), 1e-12);
  }
}

TEST(OraclePosterior, ConjugateBetaUpdate) {
  const auto p = oracle_posterior_predictive(bandit({1.0, 0.0}, 0.5), 0.0, 1.0, Trajectory{{{0, 0}}}, 0, quadrature(2000));
  EXPECT_NEAR(p[0], 2.0 / 3.0, 1e-6);
}

TEST(OraclePosterior, RepeatedEvidenceSharpens) {
  const auto mdp = bandit({1.0, 0.0}, 0.5);
  double prev = 0.0;
  for (int k = 1; k <= 5; ++k) {
    Trajectory h;
    for (int i = 0; i < k; ++i) h.steps.push_back({0, 1});
    const double p = oracle_posterior_predictive(mdp, 2.0, 0.2, h, 0, quadrature())[1];
    EXPECT_GT(p, prev) << "count " << k;
    prev = p;
  }
}

TEST(OraclePosterior, OrderInvariantBitwise) {
  const auto mdp = two_state_chain();
  const Trajectory a{{{0, 0}, {0, 1}, {1, 0}, {1, 1}, {0, 0}}};
  const Trajectory b{{{1, 1}, {0, 0}, {0, 0}, {1, 0}, {0, 1}}};
  for (int s = 0; s < 2; ++s) {
    const auto pa = oracle_posterior_predictive(mdp, 2.0, 0.5, a, s, quadrature());
    const auto pb = oracle_posterior_predictive(mdp, 2.0, 0.5, b, s, quadrature());
    EXPECT_EQ(pa, pb);
  }
}

TEST(OraclePosterior, QueryStateChecked) {
  EXPECT_THROW(oracle_posterior_predictive(two_state_chain(), 1.0, 1.0, Trajectory{}, 2, quadrature()), std::out_of_range);
}

TEST(OracleJson, Fields) {
  const auto cfg = quadrature();
  const auto r = oracle_marginals(bandit({1.0, 0.0}, 0.5), 2.0, 1.0, cfg);
  const auto j = oracle_to_json(r, 2.0, 1.0, cfg);
  for (const char* key : {"method", "params", "marginals", "ess"}) EXPECT_TRUE(j.contains(key)) << key;
}

TEST(EntropyIdentity, MatchesIndependentMonteCarlo) {
  LatentPolicyModel model(1, 2, 1);
  auto p = model.params();
  p[model.weight_index(0, 0, 0)] = 0.8;
  p[model.weight_index(0, 1, 0)] = -0.4;
  p[model.bias_index(0, 0)] = 0.5;
  const double alpha = 0.7;
  const auto identity = bandit_entropy_identity(model, alpha);
  EXPECT_NEAR(identity.entropy, identity.negative_kl, 0.02);

  // pi(a_1) = sigmoid(w z + c) with w = 1.2, c = 0.5; change of variables to pi.
  const double w = 1.2, c = 0.5;
  Rng rng(3);
  double acc = 0.0;
  const int n = 400000;
  const double log_beta_norm = std::lgamma(2 * alpha) - 2 * std::lgamma(alpha);
  for (int i = 0; i < n; ++i) {
    const double z = standard_normal(rng);
    const double x = 1.0 / (1.0 + std::exp(-(w * z + c)));
    const double log_q = -0.5 * z * z - 0.5 * std::log(2 * M_PI) - std::log(w * x * (1 - x));
    const double log_base = log_beta_norm + (alpha - 1) * (std::log(x) + std::log(1 - x));
    acc += (log_base - log_q) / n;
  }
  EXPECT_NEAR(identity.negative_kl, acc, 0.02);
  EXPECT_NEAR(identity.entropy, acc, 0.02);
}
