#include <gtest/gtest.h>

#include <algorithm>
#include <boost/math/special_functions/digamma.hpp>
#include <random>

#include "bpd/dirichlet.hpp"
#include "bpd/discriminator.hpp"
#include "bpd/gridworld.hpp"
#include "bpd/latent_model.hpp"
#include "bpd/maxent.hpp"
#include "bpd/oracle.hpp"
#include "bpd/trainer.hpp"
#include "support.hpp"

using namespace bpd;
using bpd::testing::bandit;
using bpd::testing::random_mdp;

namespace {

// Closed-form pieces computed here, independently of the library.
double log_dirichlet(std::span<const double> x, double alpha) {
  const double k = static_cast<double>(x.size());
  double v = std::lgamma(alpha * k) - k * std::lgamma(alpha);
  for (double xi : x) v += (alpha - 1.0) * std::log(xi);
  return v;
}

double symmetric_dirichlet_kl(int k, double aq, double ap) {
  using boost::math::digamma;
  const double kk = static_cast<double>(k);
  return std::lgamma(kk * aq) - kk * std::lgamma(aq) - std::lgamma(kk * ap) + kk * std::lgamma(ap) +
         kk * (aq - ap) * (digamma(aq) - digamma(kk * aq));
}

// Self-loop MDP whose only role is to give the discriminator a state space.
TabularMDP identity_mdp(int ns, int na) {
  std::vector<double> p(static_cast<std::size_t>(ns * na * ns), 0.0);
  for (int s = 0; s < ns; ++s)
    for (int a = 0; a < na; ++a) p[static_cast<std::size_t>((s * na + a) * ns + s)] = 1.0;
  return TabularMDP(ns, na, p, std::vector<double>(static_cast<std::size_t>(ns * na), 0.0), 0.9,
                    std::vector<double>(static_cast<std::size_t>(ns), 1.0 / ns));
}

// Fits a full-table discriminator to separate Dir(aq) from Dir(ap) product policies.
Discriminator fit_dirichlet_pair(int ns, int na, double aq, double ap, std::uint64_t seed, int steps, int fine_steps) {
  Rng rng(seed);
  DiscriminatorConfig dc;
  dc.adam.beta1 = 0.9;
  Discriminator d(ns, na, dc, rng);
  auto run = [&](int n) {
    for (int it = 0; it < n; ++it) {
      std::vector<PolicyView> q, b;
      for (int i = 0; i < 256; ++i) {
        q.push_back(table_view(sample_base_policy(ns, na, {aq}, rng)));
        b.push_back(table_view(sample_base_policy(ns, na, {ap}, rng)));
      }
      d.update(q, b);
    }
  };
  run(steps);
  d.set_learning_rate(3e-4);
  run(fine_steps);
  return d;
}

TrainConfig bandit_config(double beta, std::uint64_t seed, int iterations) {
  TrainConfig cfg;
  cfg.beta = beta;
  cfg.latent_dim = 1;
  cfg.iterations = iterations;
  cfg.policies_per_batch = 64;
  cfg.horizon = 20;
  cfg.learning_rate = 0.01;
  cfg.disc_batch = 256;
  cfg.seed = seed;
  return cfg;
}

}  // namespace

TEST(BaseMeasure, UniformMeanAtAlphaOne) {
  Rng rng(1);
  const int n = 100000;
  std::vector<double> mean(4, 0.0);
  for (int i = 0; i < n; ++i) {
    const auto x = sample_dirichlet(1.0, 4, rng);
    for (int a = 0; a < 4; ++a) mean[static_cast<std::size_t>(a)] += x[static_cast<std::size_t>(a)] / n;
  }
  // Var of a Dir(1,1,1,1) coordinate is 3/80.
  const double sd = std::sqrt(3.0 / 80.0 / n);
  for (double m : mean) EXPECT_LT(std::abs(m - 0.25), 3 * sd);
}

TEST(BaseMeasure, RowsOnSimplex) {
  const auto mdp = random_mdp(2, 7, 4, 0.9);
  for (std::uint64_t seed = 0; seed < 50; ++seed) {
    const auto pi = sample_base_policy(mdp, BaseMeasureConfig{0.2}, seed);
    for (int s = 0; s < 7; ++s) {
      double total = 0.0;
      for (double p : pi.row(s)) total += p;
      EXPECT_NEAR(total, 1.0, 1e-12);
    }
  }
}

TEST(BaseMeasure, MaxCoordinateMatchesReference) {
  // Reference from normalized Gamma draws with a separate generator.
  std::mt19937_64 ref_rng(77);
  std::gamma_distribution<double> g(0.2, 1.0);
  double ref = 0.0;
  const int n_ref = 1000000;
  for (int i = 0; i < n_ref; ++i) {
    double x[4], t = 0.0;
    for (double& v : x) t += (v = g(ref_rng));
    ref += *std::max_element(x, x + 4) / t / n_ref;
  }
  Rng rng(5);
  double mean = 0.0;
  const int n = 200000;
  for (int i = 0; i < n; ++i) {
    const auto x = sample_dirichlet(0.2, 4, rng);
    mean += *std::max_element(x.begin(), x.end()) / n;
  }
  EXPECT_LT(std::abs(mean - ref) / ref, 0.01);
}

TEST(BaseMeasure, DensityAndKlAgreeWithClosedForm) {
  Rng rng(8);
  const auto x = sample_dirichlet(0.7, 4, rng);
  const std::vector<double> alphas(4, 0.7);
  EXPECT_NEAR(dirichlet_log_density(x, alphas), log_dirichlet(x, 0.7), 1e-10);
  EXPECT_NEAR(product_dirichlet_kl(3, 4, 1.0, 0.5), 3 * symmetric_dirichlet_kl(4, 1.0, 0.5), 1e-10);
  EXPECT_THROW(BaseMeasureConfig{0.0}.validate(), std::invalid_argument);
}

TEST(LatentModel, ZeroLatentGivesSoftmaxOfBias) {
  Rng rng(3);
  auto model = LatentPolicyModel::initialized(4, 3, 2, rng, 0.5);
  auto params = model.params();
  for (int s = 0; s < 4; ++s)
    for (int a = 0; a < 3; ++a) params[model.bias_index(s, a)] = 0.3 * s - 0.7 * a;
  const auto pi = model.policy(std::vector<double>{0.0, 0.0});
  for (int s = 0; s < 4; ++s) {
    double z = 0.0;
    for (int a = 0; a < 3; ++a) z += std::exp(model.bias(s, a));
    for (int a = 0; a < 3; ++a) EXPECT_NEAR(pi.prob(s, a), std::exp(model.bias(s, a)) / z, 1e-12);
  }
}

TEST(LatentModel, ZeroWeightsIgnoreLatent) {
  LatentPolicyModel model(3, 4, 2);
  auto params = model.params();
  for (int s = 0; s < 3; ++s)
    for (int a = 0; a < 4; ++a) params[model.bias_index(s, a)] = 0.1 * (s + a);
  const auto a = sample_policy(model, 1);
  const auto b = sample_policy(model, 2);
  EXPECT_NE(a.z, b.z);
  for (std::size_t i = 0; i < a.policy.probs().size(); ++i) EXPECT_EQ(a.policy.probs()[i], b.policy.probs()[i]);
}

TEST(LatentModel, RowsSumToOne) {
  Rng rng(4);
  const auto model = LatentPolicyModel::initialized(5, 4, 3, rng, 2.0);
  for (int i = 0; i < 100; ++i) {
    const auto sample = sample_policy(model, rng);
    for (int s = 0; s < 5; ++s) {
      double total = 0.0;
      for (double p : sample.policy.row(s)) total += p;
      EXPECT_NEAR(total, 1.0, 1e-9);
    }
  }
}

TEST(LatentModel, LogProbGradientMatchesFiniteDifferences) {
  Rng rng(6);
  auto model = LatentPolicyModel::initialized(3, 4, 2, rng, 1.0);
  for (double& p : model.params()) p += 0.3 * standard_normal(rng);
  const std::vector<double> z{0.4, -1.1};
  std::vector<double> grad(model.num_params(), 0.0);
  model.accumulate_log_prob_grad(1, 2, z, 1.0, grad);
  for (std::size_t i = 0; i < model.num_params(); ++i) {
    const double keep = model.params()[i];
    model.params()[i] = keep + 1e-6;
    const double up = model.log_prob(1, 2, z);
    model.params()[i] = keep - 1e-6;
    const double dn = model.log_prob(1, 2, z);
    model.params()[i] = keep;
    const double fd = (up - dn) / 2e-6;
    EXPECT_LE(std::abs(grad[i] - fd), 1e-5 * std::max(1.0, std::abs(fd))) << "param " << i;
  }
}

TEST(LatentModel, JsonRoundTrip) {
  Rng rng(7);
  const auto model = LatentPolicyModel::initialized(3, 2, 2, rng, 1.0);
  const auto back = model_from_json(Json::parse(model_to_json(model).dump()));
  ASSERT_EQ(back.num_params(), model.num_params());
  for (std::size_t i = 0; i < model.num_params(); ++i) EXPECT_EQ(back.params()[i], model.params()[i]);
}

TEST(Discriminator, ZeroScoreLoss) {
  Rng rng(1);
  Discriminator d(2, 3, DiscriminatorConfig{}, rng);
  for (double& p : d.params()) p = 0.0;
  std::vector<PolicyView> q{table_view(TabularPolicy::uniform(2, 3))};
  std::vector<PolicyView> b{table_view(sample_base_policy(2, 3, {1.0}, rng))};
  EXPECT_NEAR(discriminator_loss(d, q, b), 2.0 * std::log(2.0), 1e-12);
  EXPECT_NEAR(d.update(q, b), 2.0 * std::log(2.0), 1e-12);
}

TEST(Discriminator, SeparatesPointMasses) {
  Rng rng(2);
  DiscriminatorConfig dc;
  dc.adam.learning_rate = 1e-3;
  Discriminator d(2, 3, dc, rng);
  std::vector<PolicyView> q(8, table_view(TabularPolicy(2, 3, {0.8, 0.1, 0.1, 0.1, 0.8, 0.1})));
  std::vector<PolicyView> b(8, table_view(TabularPolicy(2, 3, {0.1, 0.1, 0.8, 0.1, 0.1, 0.8})));
  double prev = d.update(q, b);
  for (int i = 0; i < 100; ++i) {
    const double loss = d.update(q, b);
    EXPECT_LT(loss, prev) << "step " << i;
    prev = loss;
  }
}

TEST(Discriminator, RejectsEmptyBatches) {
  Rng rng(3);
  Discriminator d(2, 2, DiscriminatorConfig{}, rng);
  std::vector<PolicyView> none;
  std::vector<PolicyView> one{table_view(TabularPolicy::uniform(2, 2))};
  EXPECT_THROW(d.update(none, one), std::invalid_argument);
}

TEST(Discriminator, LogitGradientMatchesFiniteDifferences) {
  Rng rng(4);
  Discriminator d(3, 3, DiscriminatorConfig{}, rng);
  std::vector<double> logits(9);
  for (auto& l : logits) l = standard_normal(rng);
  auto view_of = [](const std::vector<double>& th) {
    std::vector<double> p(9);
    for (int s = 0; s < 3; ++s) {
      double z = 0.0;
      for (int a = 0; a < 3; ++a) z += (p[static_cast<std::size_t>(s * 3 + a)] = std::exp(th[static_cast<std::size_t>(s * 3 + a)]));
      for (int a = 0; a < 3; ++a) p[static_cast<std::size_t>(s * 3 + a)] /= z;
    }
    return table_view(TabularPolicy(3, 3, p));
  };
  std::vector<double> grad(9);
  d.score_logit_grad(view_of(logits), grad);
  for (std::size_t i = 0; i < 9; ++i) {
    auto up = logits, dn = logits;
    up[i] += 1e-6;
    dn[i] -= 1e-6;
    const double fd = (d.score(view_of(up)) - d.score(view_of(dn))) / 2e-6;
    EXPECT_LE(std::abs(grad[i] - fd), 1e-5 * std::max(1.0, std::abs(fd)));
  }
}

TEST(Discriminator, DensityRatioAndKl) {
  const int ns = 5, na = 4;
  const auto d = fit_dirichlet_pair(ns, na, 1.0, 0.5, 1, 1500, 1000);
  Rng rng(99);
  std::vector<double> rel;
  for (int i = 0; i < 2000; ++i) {
    const auto pi = sample_base_policy(ns, na, {1.0}, rng);
    double log_ratio = 0.0;
    for (int s = 0; s < ns; ++s) log_ratio += log_dirichlet(pi.row(s), 1.0) - log_dirichlet(pi.row(s), 0.5);
    rel.push_back(std::abs(d.score(table_view(pi)) - log_ratio) / std::abs(log_ratio));
  }
  std::nth_element(rel.begin(), rel.begin() + 1000, rel.end());
  EXPECT_LT(rel[1000], 0.10);

  const auto mdp = identity_mdp(ns, na);
  const PolicySampler q = [&](Rng& r) { return sample_base_policy(ns, na, {1.0}, r); };
  const double truth = ns * symmetric_dirichlet_kl(na, 1.0, 0.5);
  Rng r1(5), r2(6);
  const double small = kl_estimate(d, q, mdp, 10000, r1);
  const double large = kl_estimate(d, q, mdp, 20000, r2);
  EXPECT_LT(std::abs(small - truth) / truth, 0.10);
  // Monte Carlo sd of the mean from the score spread.
  Rng r3(7);
  double s1 = 0.0, s2 = 0.0;
  for (int i = 0; i < 5000; ++i) {
    const double v = d.score(table_view(q(r3)));
    s1 += v;
    s2 += v * v;
  }
  const double sd = std::sqrt(s2 / 5000 - (s1 / 5000) * (s1 / 5000));
  EXPECT_LT(std::abs(small - large), 2.0 * sd * std::sqrt(1.0 / 10000 + 1.0 / 20000));
}

TEST(Discriminator, ZeroKlWhenDistributionsMatch) {
  const auto d = fit_dirichlet_pair(5, 4, 0.5, 0.5, 2, 800, 400);
  const auto mdp = identity_mdp(5, 4);
  Rng rng(9);
  const double est = kl_estimate(d, [](Rng& r) { return sample_base_policy(5, 4, {0.5}, r); }, mdp, 10000, rng);
  EXPECT_LT(std::abs(est), 0.05);
}

TEST(Discriminator, WindowViewsFollowRollouts) {
  const AppleGridworld world(GridworldConfig{});
  DiscriminatorConfig dc;
  dc.mode = DiscriminatorMode::kWindow;
  Rng rng(10);
  Discriminator d(32, 4, dc, rng);
  const auto view = d.view(TabularPolicy::uniform(32, 4), world.mdp(), rng);
  ASSERT_EQ(view.states.size(), 10u);
  for (std::size_t i = 1; i < view.states.size(); ++i) {
    bool adjacent = false;
    for (int a = 0; a < 4; ++a) adjacent |= world.mdp().transition(view.states[i - 1], a, view.states[i]) > 0.0;
    EXPECT_TRUE(adjacent);
  }
}

TEST(Discriminator, JsonRoundTrip) {
  Rng rng(11);
  const Discriminator d(3, 2, DiscriminatorConfig{}, rng);
  const auto back = discriminator_from_json(Json::parse(discriminator_to_json(d).dump()));
  const auto view = table_view(TabularPolicy(3, 2, {0.2, 0.8, 0.5, 0.5, 0.9, 0.1}));
  EXPECT_EQ(back.score(view), d.score(view));
}

TEST(TrainConfig, Validation) {
  TrainConfig cfg;
  cfg.policies_per_batch = 1;
  EXPECT_THROW(cfg.validate(), std::invalid_argument);
  cfg = TrainConfig{};
  cfg.learning_rate = 0.0;
  EXPECT_THROW(cfg.validate(), std::invalid_argument);
  cfg = TrainConfig{};
  cfg.variant = PgVariant::kClippedSurrogate;
  const auto back = train_config_from_json(train_config_to_json(cfg));
  EXPECT_EQ(back.variant, PgVariant::kClippedSurrogate);
  EXPECT_EQ(back.clip_epsilon, 0.05);
  EXPECT_EQ(back.gae_lambda, 0.98);
  EXPECT_EQ(back.adam_beta1, 0.5);
  EXPECT_THROW(train_config_from_json(Json{{"variant", "sarsa"}}), std::invalid_argument);
}

TEST(TrainBpd, GradientIsPermutationInvariant) {
  const auto mdp = random_mdp(12, 4, 3, 0.9);
  Rng rng(13);
  const auto model = LatentPolicyModel::initialized(4, 3, 2, rng, 1.0);
  const Discriminator disc(4, 3, DiscriminatorConfig{}, rng);
  std::vector<LatentSample> batch;
  for (int i = 0; i < 16; ++i) batch.push_back({sample_latent(2, rng), rng()});
  const std::vector<double> values(4, 0.1);
  TrainConfig cfg;
  cfg.horizon = 30;
  const auto g1 = batch_gradient(model, disc, mdp, batch, values, cfg);
  std::shuffle(batch.begin(), batch.end(), rng);
  const auto g2 = batch_gradient(model, disc, mdp, batch, values, cfg);
  ASSERT_EQ(g1.size(), g2.size());
  for (std::size_t i = 0; i < g1.size(); ++i) EXPECT_EQ(g1[i], g2[i]);
}

TEST(TrainBpd, ZeroBetaKeepsMarginalsUniform) {
  const auto mdp = random_mdp(14, 3, 3, 0.9);
  TrainConfig cfg;
  cfg.beta = 0.0;
  // Fewer latent dimensions than free simplex coordinates admit asymmetric optima.
  cfg.latent_dim = 16;
  cfg.iterations = 2000;
  cfg.horizon = 20;
  cfg.disc_batch = 128;
  cfg.seed = 3;
  const auto result = train_bpd(mdp, BaseMeasureConfig{0.2}, cfg);
  Rng rng(1);
  const auto marginal = marginal_policy(result.model, 20000, rng);
  for (int s = 0; s < 3; ++s) {
    double tv = 0.0;
    for (double p : marginal.row(s)) tv += 0.5 * std::abs(p - 1.0 / 3.0);
    EXPECT_LT(tv, 0.05) << "state " << s;
  }
  EXPECT_EQ(result.log.size(), 2000u);
}

TEST(TrainBpd, ReturnIncreasesWithBeta) {
  const auto mdp = bandit({1.0, 0.0}, 0.5);
  for (std::uint64_t seed = 0; seed < 3; ++seed) {
    const auto low = train_bpd(mdp, BaseMeasureConfig{1.0}, bandit_config(0.5, seed, 600));
    const auto high = train_bpd(mdp, BaseMeasureConfig{1.0}, bandit_config(2.0, seed, 600));
    Rng r1(seed), r2(seed);
    double jl = 0.0, jh = 0.0;
    for (int i = 0; i < 4000; ++i) {
      jl += policy_return(mdp, sample_policy(low.model, r1).policy) / 4000;
      jh += policy_return(mdp, sample_policy(high.model, r2).policy) / 4000;
    }
    EXPECT_GE(jh, jl - 0.02) << "seed " << seed;
  }
}

TEST(TrainBpd, GridworldLearnsDiverseRewardSeekingPolicies) {
  GridworldConfig gc;
  gc.apple_reward = 3.0;
  const auto mdp = build_apple_gridworld(gc);
  TrainConfig cfg;
  cfg.latent_dim = 2;
  cfg.iterations = 3000;
  cfg.init_weight_scale = 0.5;
  cfg.disc_batch = 64;
  cfg.discriminator.mode = DiscriminatorMode::kWindow;
  cfg.seed = 1;
  const auto result = train_bpd(mdp, BaseMeasureConfig{0.2}, cfg);
  const auto maxent = soft_value_iteration(mdp, 10.0);
  Rng rng(5);
  double j = 0.0;
  for (int i = 0; i < 2000; ++i) j += policy_return(mdp, sample_policy(result.model, rng).policy) / 2000;
  EXPECT_GE(j, 0.5 * policy_return(mdp, maxent.policy));
  auto entropy = [](std::span<const double> row) {
    double h = 0.0;
    for (double p : row)
      if (p > 0) h -= p * std::log(p);
    return h;
  };
  const auto marginal = marginal_policy(result.model, 20000, rng);
  double hm = 0.0, hs = 0.0;
  for (int s = 0; s < mdp.num_states(); ++s) {
    hm += entropy(marginal.row(s)) / mdp.num_states();
    hs += entropy(maxent.policy.row(s)) / mdp.num_states();
  }
  EXPECT_GT(hm, hs);
}
