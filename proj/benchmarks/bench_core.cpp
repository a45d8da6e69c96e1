#include <benchmark/benchmark.h>

#include "bpd/gridworld.hpp"
#include "bpd/latent_model.hpp"
#include "bpd/maxent.hpp"
#include "bpd/mfvi.hpp"
#include "bpd/oracle.hpp"
#include "bpd/particles.hpp"
#include "bpd/rollout.hpp"
#include "bpd/seq_predictor.hpp"

using namespace bpd;

namespace {

const AppleGridworld& world() {
  static const AppleGridworld w{GridworldConfig{}};
  return w;
}

LatentPolicyModel model(int n) {
  Rng rng(0);
  return LatentPolicyModel::initialized(world().num_states(), 4, n, rng, 0.5);
}

}  // namespace

static void BM_SoftValueIteration(benchmark::State& state) {
  const double beta = static_cast<double>(state.range(0));
  for (auto _ : state) benchmark::DoNotOptimize(soft_value_iteration(world().mdp(), beta));
}
BENCHMARK(BM_SoftValueIteration)->Arg(1)->Arg(10);

static void BM_SoftValueIterationJoint(benchmark::State& state) {
  TwoPlayerConfig cfg;
  const JointGridworld joint(cfg);
  for (auto _ : state) benchmark::DoNotOptimize(soft_value_iteration(joint.mdp(), 10.0));
}
BENCHMARK(BM_SoftValueIterationJoint)->Unit(benchmark::kMillisecond);

static void BM_PolicyReturn(benchmark::State& state) {
  const auto m = model(2);
  Rng rng(1);
  const auto pi = sample_policy(m, rng).policy;
  for (auto _ : state) benchmark::DoNotOptimize(policy_return(world().mdp(), pi));
}
BENCHMARK(BM_PolicyReturn);

static void BM_PolicyGradient(benchmark::State& state) {
  const auto m = model(2);
  Rng rng(1);
  const auto pi = sample_policy(m, rng).policy;
  for (auto _ : state) benchmark::DoNotOptimize(policy_return_logit_gradient(world().mdp(), pi));
}
BENCHMARK(BM_PolicyGradient);

static void BM_ParticleUpdate(benchmark::State& state) {
  const auto m = model(2);
  Rng rng(2);
  auto post = make_particle_posterior(2, static_cast<int>(state.range(0)), rng);
  for (auto _ : state) {
    particle_update(m, post, 0, 1);
    benchmark::DoNotOptimize(posterior_predict(m, post, 0));
  }
  state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_ParticleUpdate)->Arg(256)->Arg(1024)->Arg(4096);

static void BM_MfviStep(benchmark::State& state) {
  const auto m = model(2);
  Rng rng(3);
  const auto prefix = rollout(world().mdp(), sample_policy(m, rng).policy, static_cast<int>(state.range(0)), 4);
  MFVIState q = MFVIState::prior(2);
  for (auto _ : state) q = mfvi_update(m, q, prefix, MfviConfig{}, rng);
}
BENCHMARK(BM_MfviStep)->Arg(10)->Arg(100);

static void BM_SeqPredictorStep(benchmark::State& state) {
  Rng rng(4);
  const SeqPredictor p(world().num_states(), 4, static_cast<int>(state.range(0)), rng);
  auto h = p.initial_state();
  std::vector<double> next(h.size()), probs(4);
  for (auto _ : state) {
    p.advance(h, 3, 1, 4, next);
    p.readout(next, probs);
    benchmark::DoNotOptimize(probs.data());
  }
}
BENCHMARK(BM_SeqPredictorStep)->Arg(32)->Arg(64);

static void BM_OracleQuadrature(benchmark::State& state) {
  const TabularMDP bandit(1, 2, {1.0, 1.0}, {1.0, 0.0}, 0.5, {1.0});
  OracleConfig cfg;
  cfg.resolution = static_cast<int>(state.range(0));
  for (auto _ : state) benchmark::DoNotOptimize(oracle_marginals(bandit, 2.0, 1.0, cfg));
}
BENCHMARK(BM_OracleQuadrature)->Arg(200)->Arg(2000);

BENCHMARK_MAIN();
