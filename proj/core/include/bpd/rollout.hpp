#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <vector>

#include "bpd/mdp.hpp"
#include "bpd/rng.hpp"

namespace bpd {

/// Writes the action distribution for `state` into `out` (size |A|).
using PolicyFn = std::function<void(int state, std::span<double> out)>;

PolicyFn as_policy_fn(const TabularPolicy& policy);

/// Samples s_1 ~ rho, then alternates a_t ~ policy(s_t) and s_{t+1} ~ P.
/// Fully determined by `seed`.
Trajectory rollout(const TabularMDP& mdp, const PolicyFn& policy, int horizon, std::uint64_t seed);
Trajectory rollout(const TabularMDP& mdp, const TabularPolicy& policy, int horizon, std::uint64_t seed);

/// Same as above but continues an existing random stream.
Trajectory rollout(const TabularMDP& mdp, const TabularPolicy& policy, int horizon, Rng& rng);

/// Rewards R(s_t, a_t) along a trajectory.
std::vector<double> trajectory_rewards(const TabularMDP& mdp, const Trajectory& trajectory);

}  // namespace bpd
