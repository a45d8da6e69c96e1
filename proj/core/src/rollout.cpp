#include "bpd/rollout.hpp"

#include <stdexcept>

namespace bpd {

PolicyFn as_policy_fn(const TabularPolicy& policy) {
  return [&policy](int state, std::span<double> out) {
    const auto row = policy.row(state);
    std::copy(row.begin(), row.end(), out.begin());
  };
}

namespace {

template <typename ActionSampler>
Trajectory run(const TabularMDP& mdp, int horizon, Rng& rng, ActionSampler&& sample_action) {
  if (horizon < 1) throw std::invalid_argument("rollout: horizon must be >= 1");
  Trajectory traj;
  traj.steps.reserve(static_cast<std::size_t>(horizon));
  int state = sample_categorical(mdp.start_dist(), rng);
  for (int t = 0; t < horizon; ++t) {
    const int action = sample_action(state);
    traj.steps.push_back({state, action});
    if (t + 1 < horizon) state = sample_categorical(mdp.next_state_dist(state, action), rng);
  }
  return traj;
}

}  // namespace

Trajectory rollout(const TabularMDP& mdp, const PolicyFn& policy, int horizon, std::uint64_t seed) {
  Rng rng(seed);
  std::vector<double> dist(static_cast<std::size_t>(mdp.num_actions()));
  return run(mdp, horizon, rng, [&](int s) {
    policy(s, dist);
    return sample_categorical(dist, rng);
  });
}

Trajectory rollout(const TabularMDP& mdp, const TabularPolicy& policy, int horizon, Rng& rng) {
  check_policy_shape(mdp, policy);
  return run(mdp, horizon, rng, [&](int s) { return sample_categorical(policy.row(s), rng); });
}

Trajectory rollout(const TabularMDP& mdp, const TabularPolicy& policy, int horizon, std::uint64_t seed) {
  Rng rng(seed);
  return rollout(mdp, policy, horizon, rng);
}

std::vector<double> trajectory_rewards(const TabularMDP& mdp, const Trajectory& trajectory) {
  std::vector<double> r;
  r.reserve(trajectory.steps.size());
  for (const Step& s : trajectory.steps) r.push_back(mdp.reward(s.state, s.action));
  return r;
}

}  // namespace bpd
