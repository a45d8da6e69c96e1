#include <gtest/gtest.h>

#include <queue>
#include <sstream>

#include "bpd/gridworld.hpp"
#include "bpd/mdp.hpp"
#include "bpd/rollout.hpp"
#include "bpd/serialization.hpp"
#include "support.hpp"

using namespace bpd;
using bpd::testing::bandit;
using bpd::testing::random_mdp;
using bpd::testing::random_policy;

namespace {

// Iterative policy evaluation, independent of the dense solve.
double iterative_return(const TabularMDP& mdp, const TabularPolicy& pi) {
  const int n = mdp.num_states();
  std::vector<double> v(static_cast<std::size_t>(n), 0.0), next(v.size());
  for (int it = 0; it < 100000; ++it) {
    double delta = 0.0;
    for (int s = 0; s < n; ++s) {
      double acc = 0.0;
      for (int a = 0; a < mdp.num_actions(); ++a) {
        double q = mdp.reward(s, a);
        for (int t = 0; t < n; ++t) q += mdp.discount() * mdp.transition(s, a, t) * v[static_cast<std::size_t>(t)];
        acc += pi.prob(s, a) * q;
      }
      next[static_cast<std::size_t>(s)] = acc;
      delta = std::max(delta, std::abs(acc - v[static_cast<std::size_t>(s)]));
    }
    v.swap(next);
    if (delta < 1e-14) break;
  }
  double j = 0.0;
  for (int s = 0; s < n; ++s) j += mdp.start_dist()[static_cast<std::size_t>(s)] * v[static_cast<std::size_t>(s)];
  return mdp.discount() * j;
}

}  // namespace

TEST(TabularMDP, RejectsMalformedTables) {
  EXPECT_THROW(TabularMDP(1, 2, {1.0, 0.9}, {0.0, 0.0}, 0.5, {1.0}), std::invalid_argument);
  EXPECT_THROW(TabularMDP(1, 2, {1.0, 1.0}, {0.0, 0.0}, 1.0, {1.0}), std::invalid_argument);
  EXPECT_THROW(TabularMDP(1, 2, {1.0, 1.0}, {0.0, 0.0}, 0.5, {0.5}), std::invalid_argument);
  EXPECT_THROW(TabularMDP(1, 2, {1.0, 1.0}, {0.0}, 0.5, {1.0}), std::invalid_argument);
  EXPECT_THROW(TabularMDP(2, 1, {1.5, -0.5, 0.0, 1.0}, {0.0, 0.0}, 0.5, {1.0, 0.0}), std::invalid_argument);
  EXPECT_NO_THROW(bandit({1.0, 0.0}, 0.0));
}

TEST(TabularPolicy, RowsMustSumToOne) {
  EXPECT_THROW(TabularPolicy(1, 2, {0.5, 0.6}), std::invalid_argument);
  EXPECT_THROW(TabularPolicy(1, 2, {1.5, -0.5}), std::invalid_argument);
  const auto pi = TabularPolicy::uniform(3, 4);
  EXPECT_DOUBLE_EQ(pi.prob(2, 3), 0.25);
}

TEST(PolicyReturn, BanditExamples) {
  const auto mdp = bandit({1.0, 0.0}, 0.5);
  EXPECT_NEAR(policy_return(mdp, TabularPolicy(1, 2, {1.0, 0.0})), 1.0, 1e-12);
  EXPECT_NEAR(policy_return(mdp, TabularPolicy::uniform(1, 2)), 0.5, 1e-12);
}

TEST(PolicyReturn, RejectsShapeMismatch) {
  const auto mdp = bandit({1.0, 0.0}, 0.5);
  EXPECT_THROW(policy_return(mdp, TabularPolicy::uniform(2, 2)), std::invalid_argument);
}

TEST(PolicyReturn, MatchesMonteCarlo) {
  const auto mdp = random_mdp(11, 3, 2, 0.7);
  const auto pi = random_policy(12, 3, 2);
  const double exact = policy_return(mdp, pi);
  const int n = 100000;
  const int horizon = 80;  // 0.7^80 ~ 4e-13
  Rng rng(13);
  double sum = 0.0, sq = 0.0;
  for (int i = 0; i < n; ++i) {
    const auto traj = rollout(mdp, pi, horizon, rng);
    double g = 0.0, w = mdp.discount();
    for (const auto& st : traj.steps) {
      g += w * mdp.reward(st.state, st.action);
      w *= mdp.discount();
    }
    sum += g;
    sq += g * g;
  }
  const double mean = sum / n;
  const double se = std::sqrt((sq / n - mean * mean) / n);
  EXPECT_LT(std::abs(mean - exact), 3.0 * se) << "exact " << exact << " mc " << mean;
}

TEST(PolicyReturn, LinearInRewards) {
  const auto mdp = random_mdp(21, 5, 3, 0.9);
  const auto pi = random_policy(22, 5, 3);
  EXPECT_NEAR(policy_return(mdp.with_scaled_rewards(2.0), pi), 2.0 * policy_return(mdp, pi), 1e-10);
}

TEST(PolicyReturn, LinearSolveAgreesWithIteration) {
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    const auto mdp = random_mdp(100 + seed, 6, 3, 0.9);
    const auto pi = random_policy(200 + seed, 6, 3);
    EXPECT_NEAR(policy_return(mdp, pi), iterative_return(mdp, pi), 1e-8);
  }
}

TEST(PolicyReturn, LogitGradientMatchesFiniteDifferences) {
  const auto mdp = random_mdp(31, 4, 3, 0.8);
  std::vector<double> logits(12);
  Rng rng(32);
  for (auto& l : logits) l = standard_normal(rng);
  auto policy_of = [&](const std::vector<double>& th) {
    std::vector<double> p(th.size());
    for (int s = 0; s < 4; ++s) {
      double m = -1e300, z = 0.0;
      for (int a = 0; a < 3; ++a) m = std::max(m, th[static_cast<std::size_t>(s * 3 + a)]);
      for (int a = 0; a < 3; ++a) z += (p[static_cast<std::size_t>(s * 3 + a)] = std::exp(th[static_cast<std::size_t>(s * 3 + a)] - m));
      for (int a = 0; a < 3; ++a) p[static_cast<std::size_t>(s * 3 + a)] /= z;
    }
    return TabularPolicy(4, 3, p);
  };
  const auto grad = policy_return_logit_gradient(mdp, policy_of(logits));
  for (std::size_t i = 0; i < logits.size(); ++i) {
    auto up = logits, dn = logits;
    up[i] += 1e-5;
    dn[i] -= 1e-5;
    const double fd = (policy_return(mdp, policy_of(up)) - policy_return(mdp, policy_of(dn))) / 2e-5;
    EXPECT_NEAR(grad[i], fd, 1e-7);
  }
}

TEST(Gridworld, DefaultLayout) {
  const AppleGridworld world(GridworldConfig{});
  EXPECT_EQ(world.num_cells(), 16);
  EXPECT_EQ(world.mdp().num_states(), 32);
  EXPECT_EQ(world.mdp().num_actions(), 4);
  EXPECT_DOUBLE_EQ(world.mdp().discount(), 0.9);
  EXPECT_EQ(world.mdp().start_dist()[static_cast<std::size_t>(world.start_state())], 1.0);
}

TEST(Gridworld, BlockedMoveIsNoOp) {
  const AppleGridworld world(GridworldConfig{});
  const int below = *world.cell_index({2, 0});
  EXPECT_EQ(world.move_cell(below, Move::kUp), below);
  EXPECT_EQ(world.move_cell(below, Move::kDown), below);
  EXPECT_EQ(world.move_cell(below, Move::kLeft), *world.cell_index({1, 0}));
}

TEST(Gridworld, PickAndDeliver) {
  const AppleGridworld world(GridworldConfig{});
  const int next_to_tree = world.state_index(*world.cell_index({3, 4}), false);
  const auto [at_tree, r0] = world.step(next_to_tree, static_cast<int>(Move::kRight));
  EXPECT_TRUE(world.carrying(at_tree));
  EXPECT_EQ(r0, 0.0);
  const int above_basket = world.state_index(*world.cell_index({0, 1}), true);
  const auto [home, r1] = world.step(above_basket, static_cast<int>(Move::kDown));
  EXPECT_FALSE(world.carrying(home));
  EXPECT_EQ(world.cell_of(home), *world.cell_index({0, 0}));
  EXPECT_EQ(r1, 1.0);
  // Entering the basket without an apple pays nothing.
  const auto [home2, r2] = world.step(world.state_index(*world.cell_index({0, 1}), false), static_cast<int>(Move::kDown));
  EXPECT_EQ(r2, 0.0);
  EXPECT_FALSE(world.carrying(home2));
}

TEST(Gridworld, RewardScale) {
  GridworldConfig cfg;
  cfg.apple_reward = 3.0;
  const AppleGridworld world(cfg);
  const auto [s, r] = world.step(world.state_index(*world.cell_index({1, 0}), true), static_cast<int>(Move::kLeft));
  EXPECT_EQ(r, 3.0);
  EXPECT_FALSE(world.carrying(s));
}

TEST(Gridworld, RejectsBadConfigs) {
  GridworldConfig blocked_tree;
  blocked_tree.obstacle.insert({4, 4});
  EXPECT_THROW(build_apple_gridworld(blocked_tree), std::invalid_argument);
  GridworldConfig split;
  split.obstacle = {{2, 0}, {2, 1}, {2, 2}, {2, 3}, {2, 4}};
  EXPECT_THROW(build_apple_gridworld(split), std::invalid_argument);
}

TEST(Gridworld, EveryCellReachableUnderUniformPolicy) {
  const AppleGridworld world(GridworldConfig{});
  const auto& mdp = world.mdp();
  std::vector<bool> seen(static_cast<std::size_t>(mdp.num_states()), false);
  std::queue<int> frontier;
  frontier.push(world.start_state());
  seen[static_cast<std::size_t>(world.start_state())] = true;
  while (!frontier.empty()) {
    const int s = frontier.front();
    frontier.pop();
    for (int a = 0; a < mdp.num_actions(); ++a)
      for (int t = 0; t < mdp.num_states(); ++t)
        if (mdp.transition(s, a, t) > 0.0 && !seen[static_cast<std::size_t>(t)]) {
          seen[static_cast<std::size_t>(t)] = true;
          frontier.push(t);
        }
  }
  for (int c = 0; c < world.num_cells(); ++c) {
    EXPECT_TRUE(seen[static_cast<std::size_t>(world.state_index(c, false))] ||
                seen[static_cast<std::size_t>(world.state_index(c, true))])
        << "cell " << c;
  }
}

TEST(Rollout, DeterministicPolicyInDeterministicMdp) {
  const AppleGridworld world(GridworldConfig{});
  std::vector<int> actions(32, static_cast<int>(Move::kUp));
  const auto pi = TabularPolicy::deterministic(4, actions);
  const auto traj = rollout(world.mdp(), pi, 6, 1);
  const std::vector<Cell> expected = {{0, 0}, {0, 1}, {0, 2}, {0, 3}, {0, 4}, {0, 4}};
  for (std::size_t t = 0; t < expected.size(); ++t) {
    EXPECT_EQ(world.cells()[static_cast<std::size_t>(world.cell_of(traj.steps[t].state))], expected[t]);
  }
}

TEST(Rollout, SameSeedSameTrajectory) {
  const auto mdp = random_mdp(41, 5, 3, 0.9);
  const auto pi = random_policy(42, 5, 3);
  EXPECT_EQ(rollout(mdp, pi, 50, 7), rollout(mdp, pi, 50, 7));
  EXPECT_NE(rollout(mdp, pi, 50, 7), rollout(mdp, pi, 50, 8));
}

TEST(Rollout, ActionFrequenciesMatchPolicy) {
  const auto mdp = bandit({0.0, 0.0, 0.0}, 0.5);
  const TabularPolicy pi(1, 3, {0.2, 0.5, 0.3});
  const auto traj = rollout(mdp, pi, 10000, 3);
  std::vector<int> counts(3, 0);
  for (const auto& st : traj.steps) ++counts[static_cast<std::size_t>(st.action)];
  for (int a = 0; a < 3; ++a) {
    const double p = pi.prob(0, a);
    const double sd = std::sqrt(10000 * p * (1 - p));
    EXPECT_LT(std::abs(counts[static_cast<std::size_t>(a)] - 10000 * p), 3 * sd);
  }
}

TEST(TwoPlayer, JointActionsAndStates) {
  TwoPlayerConfig cfg;
  const JointGridworld joint(cfg);
  EXPECT_EQ(joint.num_joint_actions(), 16);
  EXPECT_EQ(joint.mdp().num_actions(), 16);
  // Ordered pairs of distinct free cells times both carrying flags.
  EXPECT_EQ(joint.num_states(), 16 * 15 * 4);
  EXPECT_EQ(two_player_state_count(cfg.grid), 16 * 15 * 4);
  EXPECT_EQ(joint.start_states().size(), 2u);
}

TEST(TwoPlayer, RewardIsTeamReward) {
  const JointGridworld joint(TwoPlayerConfig{});
  const auto& mdp = joint.mdp();
  for (int s = 0; s < joint.num_states(); s += 7) {
    for (int a0 = 0; a0 < 4; ++a0) {
      for (int a1 = 0; a1 < 4; ++a1) {
        const auto [next, r] = joint.step(s, a0, a1);
        EXPECT_EQ(mdp.reward(s, joint.joint_action(a0, a1)), r);
        EXPECT_EQ(mdp.transition(s, joint.joint_action(a0, a1), next), 1.0);
      }
    }
  }
}

TEST(TwoPlayer, AgentsNeverShareACell) {
  const JointGridworld joint(TwoPlayerConfig{});
  for (int s = 0; s < joint.num_states(); ++s) {
    const auto [s0, s1] = joint.agent_states(s);
    EXPECT_NE(joint.single().cell_of(s0), joint.single().cell_of(s1));
  }
  // Head-on: (0,1) moving down into (0,0) while (0,0) moves up swaps, which is blocked.
  const auto& w = joint.single();
  const int s = *joint.joint_state(w.state_index(*w.cell_index({0, 1}), false), w.state_index(*w.cell_index({0, 0}), false));
  const auto [next, r] = joint.step(s, static_cast<int>(Move::kDown), static_cast<int>(Move::kUp));
  EXPECT_EQ(next, s);
}

TEST(TwoPlayer, StateCap) {
  TwoPlayerConfig cfg;
  cfg.max_states = 100;
  EXPECT_THROW(compose_two_player(cfg), std::invalid_argument);
}

TEST(Serialization, MdpRoundTrip) {
  const auto mdp = random_mdp(51, 4, 2, 0.9);
  const auto back = mdp_from_json(Json::parse(mdp_to_json(mdp).dump()));
  EXPECT_EQ(back.num_states(), 4);
  for (std::size_t i = 0; i < mdp.transitions().size(); ++i) EXPECT_EQ(back.transitions()[i], mdp.transitions()[i]);
  for (std::size_t i = 0; i < mdp.rewards().size(); ++i) EXPECT_EQ(back.rewards()[i], mdp.rewards()[i]);
  EXPECT_EQ(back.discount(), mdp.discount());
}

TEST(Serialization, TrajectoryJsonLines) {
  const auto mdp = random_mdp(52, 4, 2, 0.9);
  const auto pi = random_policy(53, 4, 2);
  std::vector<Trajectory> eps{rollout(mdp, pi, 5, 1), rollout(mdp, pi, 3, 2)};
  std::stringstream ss;
  write_trajectories_jsonl(ss, eps);
  const auto first = Json::parse(ss.str().substr(0, ss.str().find('\n')));
  EXPECT_EQ(first.at("episode"), 0);
  EXPECT_EQ(first.at("t"), 1);
  EXPECT_EQ(read_trajectories_jsonl(ss), eps);
}
