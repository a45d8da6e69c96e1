#include <gtest/gtest.h>

#include <cmath>
#include <sstream>

#include "bpd/collab.hpp"
#include "bpd/maxent.hpp"
#include "bpd/mutual_info.hpp"
#include "bpd/prediction_eval.hpp"
#include "bpd/simulated_human.hpp"
#include "support.hpp"

using namespace bpd;

namespace {

AppleGridworld ring_world(double reward = 3.0) {
  GridworldConfig cfg;
  cfg.apple_reward = reward;
  return AppleGridworld(cfg);
}

JointGridworld joint_world() {
  TwoPlayerConfig cfg;
  cfg.grid.apple_reward = 3.0;
  return JointGridworld(cfg);
}

// Side of every leg, indexed by step: legs change whenever the carrying flag flips.
std::vector<int> leg_index(const AppleGridworld& world, const Trajectory& tr) {
  std::vector<int> out;
  int leg = 0;
  for (std::size_t t = 0; t < tr.steps.size(); ++t) {
    if (t > 0 && world.carrying(tr.steps[t].state) != world.carrying(tr.steps[t - 1].state)) ++leg;
    out.push_back(leg);
  }
  return out;
}

double greedy_team_return(const JointGridworld& joint, const RobotPolicy& robot, const TabularPolicy& human,
                          int start, int horizon) {
  int s = start;
  double ret = 0.0, disc = 1.0;
  std::vector<double> p(static_cast<std::size_t>(robot.num_actions()));
  for (int t = 0; t < horizon; ++t) {
    robot.probs(s, 0, p);
    const int a0 = static_cast<int>(std::max_element(p.begin(), p.end()) - p.begin());
    const auto hrow = human.row(joint.agent_states(s).second);
    const int a1 = static_cast<int>(std::max_element(hrow.begin(), hrow.end()) - hrow.begin());
    const auto [next, r] = joint.step(s, a0, a1);
    disc *= joint.mdp().discount();
    ret += disc * r;
    s = next;
  }
  return ret;
}

}  // namespace

TEST(SimulatedHuman, FullyConsistentAlwaysUsual) {
  const auto world = ring_world();
  const RingRoutes routes(world);
  const SimulatedHuman human{1.0, Side::kLeftAround, Side::kRightAround, 3};
  const auto data = simulate_humans(world, human, 100, 60, 4);
  int legs = 0;
  for (const auto& tr : data) {
    const auto sides = leg_sides(world, routes, tr);
    for (std::size_t k = 0; k < sides.size(); ++k) {
      EXPECT_EQ(sides[k], k % 2 == 0 ? Side::kLeftAround : Side::kRightAround);
      ++legs;
    }
  }
  EXPECT_GT(legs, 300);
}

TEST(SimulatedHuman, HalfConsistencyIsFair) {
  const auto world = ring_world();
  const RingRoutes routes(world);
  const SimulatedHuman human{0.5, Side::kLeftAround, Side::kLeftAround, 0};
  const auto data = simulate_humans(world, human, 1500, 60, 9);
  long usual = 0, legs = 0;
  for (const auto& tr : data)
    for (Side s : leg_sides(world, routes, tr)) {
      usual += s == Side::kLeftAround;
      ++legs;
    }
  ASSERT_GE(legs, 10000);
  const double f = static_cast<double>(usual) / legs;
  EXPECT_GE(f, 0.45);
  EXPECT_LE(f, 0.55);
}

TEST(SimulatedHuman, LegsFollowTheirSide) {
  const auto world = ring_world();
  const RingRoutes routes(world);
  const auto data = simulate_humans(world, random_simulated_human(0.7, 5), 50, 80, 6);
  for (const auto& tr : data) {
    const auto sides = leg_sides(world, routes, tr);
    const auto legs = leg_index(world, tr);
    for (std::size_t t = 0; t + 1 < tr.steps.size(); ++t) {
      const int cell = world.cell_of(tr.steps[t].state);
      const int next = world.cell_of(tr.steps[t + 1].state);
      ASSERT_LT(static_cast<std::size_t>(legs[t]), sides.size());
      EXPECT_EQ(next, routes.next_cell(cell, sides[static_cast<std::size_t>(legs[t])]));
    }
  }
}

TEST(SimulatedHuman, Reproducible) {
  const auto world = ring_world();
  const auto h = random_simulated_human(0.8, 11);
  EXPECT_EQ(simulate_humans(world, h, 20, 50, 3), simulate_humans(world, h, 20, 50, 3));
  EXPECT_NE(simulate_humans(world, h, 20, 50, 3), simulate_humans(world, h, 20, 50, 4));
}

TEST(SimulatedHuman, Validation) {
  GridworldConfig open;
  open.obstacle.clear();
  EXPECT_THROW(RingRoutes(AppleGridworld(open)), std::invalid_argument);
  EXPECT_THROW((SimulatedHuman{0.4}.validate()), std::invalid_argument);
  EXPECT_THROW(parse_side("diagonal"), std::invalid_argument);
}

TEST(PredictionEval, TableShapeAndUniformBaseline) {
  const auto world = ring_world();
  const std::vector<double> levels{0.5, 0.75, 1.0};
  const auto datasets = build_human_datasets(world, levels, 3, 2, 40, 1);
  ASSERT_EQ(datasets.size(), 3u);
  TablePredictor uniform(TabularPolicy::uniform(world.num_states(), 4), "uniform");
  const auto sol = soft_value_iteration(world.mdp(), 10.0);
  MaxEntPredictor maxent(sol);
  std::vector<OnlinePredictor*> preds{&maxent, &uniform};
  const auto rows = eval_prediction(datasets, preds, 0);
  ASSERT_EQ(rows.size(), 6u);
  for (std::size_t i = 0; i < rows.size(); ++i) {
    EXPECT_EQ(rows[i].consistency, levels[i / 2]);
    EXPECT_EQ(rows[i].predictor, i % 2 == 0 ? "maxent" : "uniform");
    EXPECT_EQ(rows[i].report.n_steps, 240u);
  }
  EXPECT_NEAR(rows[1].report.mean, std::log(4.0), 1e-12);
  std::ostringstream csv;
  write_prediction_csv(csv, rows);
  EXPECT_EQ(csv.str().substr(0, csv.str().find('\n')), "consistency,predictor,mean_ce,std,n_steps");
}

TEST(PredictionEval, MaxEntInsensitiveToConsistency) {
  const auto world = ring_world();
  const std::vector<double> levels{0.5, 0.625, 0.75, 0.875, 1.0};
  const auto datasets = build_human_datasets(world, levels, 20, 5, 100, 0);
  const auto sol = soft_value_iteration(world.mdp(), 10.0);
  MaxEntPredictor maxent(sol);
  std::vector<OnlinePredictor*> preds{&maxent};
  const auto rows = eval_prediction(datasets, preds, 0);
  double lo = 1e9, hi = -1e9, mean = 0.0;
  for (const auto& r : rows) {
    lo = std::min(lo, r.report.mean);
    hi = std::max(hi, r.report.mean);
    mean += r.report.mean / rows.size();
  }
  EXPECT_LT(hi - lo, 0.25 * mean);
}

TEST(MutualInfo, PluginEstimates) {
  const std::vector<std::int64_t> independent{25, 25, 25, 25};
  EXPECT_NEAR(plugin_mutual_information(independent, 2, 2), 0.0, 1e-15);
  const std::vector<std::int64_t> copy{50, 0, 0, 50};
  EXPECT_NEAR(plugin_mutual_information(copy, 2, 2), std::log(2.0), 1e-12);
  const std::vector<std::int64_t> h{10, 10, 10, 10};
  EXPECT_NEAR(plugin_entropy(h), std::log(4.0), 1e-12);
}

TEST(MutualInfo, DeterministicDrawsRepeatActions) {
  // Every draw is a deterministic bandit policy, so a_t = a_t' given the draw.
  const auto mdp = bpd::testing::bandit({1.0, 0.0}, 0.5);
  MutualInfoConfig cfg;
  cfg.horizon = 4;
  cfg.num_policies = 4000;
  cfg.rollouts_per_policy = 1;
  const PolicyDraw draw = [](Rng& rng) {
    const std::vector<int> a{uniform01(rng) < 0.5 ? 0 : 1};
    return TabularPolicy::deterministic(2, a);
  };
  const auto r = mutual_information(draw, mdp, cfg);
  EXPECT_NEAR(r.mean_off_diagonal(), std::log(2.0), 1e-3);
  EXPECT_EQ(r.missing_off_diagonal(), 0);
}

TEST(MutualInfo, FixedPolicyHasNoOffDiagonal) {
  const auto world = ring_world(1.0);
  const auto sol = soft_value_iteration(world.mdp(), 10.0);
  MutualInfoConfig cfg;
  cfg.horizon = 10;
  cfg.num_policies = 2000;
  cfg.rollouts_per_policy = 10;
  const auto r = mutual_information(sol, world.mdp(), cfg);
  EXPECT_LT(r.mean_off_diagonal(), 0.02);
  std::ostringstream csv;
  write_mutual_info_csv(csv, r);
  EXPECT_EQ(csv.str().substr(0, csv.str().find('\n')), "t,t_prime,mi,n");
  cfg.num_policies = 0;
  EXPECT_THROW(cfg.validate(), std::invalid_argument);
}

TEST(Collab, MemoryBucketEdges) {
  const auto e = memory_bucket_edges(5);
  ASSERT_EQ(e.size(), 4u);
  EXPECT_NEAR(e[0], -0.8416212335729143, 1e-9);
  EXPECT_NEAR(e[1], -0.2533471031357997, 1e-9);
  EXPECT_NEAR(e[2], 0.2533471031357997, 1e-9);
  EXPECT_NEAR(e[3], 0.8416212335729143, 1e-9);
  EXPECT_EQ(MemoryTracker::num_buckets(2, 5), 25);
  MemoryTracker none(nullptr, MemoryConfig{}, 0);
  none.observe(0, 1);
  EXPECT_EQ(none.bucket(), 0);
}

TEST(Collab, DeterministicPairMatchesRollout) {
  const auto joint = joint_world();
  const auto& world = joint.single();
  const auto human = scripted_policy(world, Side::kLeftAround, Side::kRightAround);
  const auto opt = value_iteration(induced_robot_mdp(joint, human));
  const RobotPolicy robot = RobotPolicy::deterministic(4, opt.greedy);
  const auto spec = HumanModelSpec::scripted_human(SimulatedHuman{1.0, Side::kLeftAround, Side::kRightAround, 0});
  const auto res = eval_team(joint, robot, spec, nullptr, MemoryConfig{}, 8, 60, 3);
  double expected = 0.0;
  for (int s : joint.start_states()) expected += greedy_team_return(joint, robot, human, s, 60);
  expected /= joint.start_states().size();
  EXPECT_NEAR(res.mean, expected, 1e-12);
  EXPECT_NEAR(res.std, 0.0, 1e-12);
  EXPECT_GT(res.mean, 0.0);
}

TEST(Collab, BestResponseToScriptedHumanNearOptimal) {
  const auto joint = joint_world();
  const auto human = scripted_policy(joint.single(), Side::kRightAround, Side::kRightAround);
  const auto induced = induced_robot_mdp(joint, human);
  const auto opt = value_iteration(induced);
  double optimum = 0.0;
  for (int s = 0; s < induced.num_states(); ++s) optimum += induced.start_dist()[s] * opt.values[s];
  optimum *= induced.discount();

  CollabTrainConfig cfg;
  cfg.iterations = 6000;
  cfg.episodes_per_iter = 64;
  cfg.seed = 1;
  const auto spec = HumanModelSpec::scripted_human(SimulatedHuman{1.0, Side::kRightAround, Side::kRightAround, 0});
  const auto trained = train_best_response(joint, spec, nullptr, cfg);
  const auto res = eval_team(joint, trained.policy, spec, nullptr, MemoryConfig{}, 400, 60, 2);
  EXPECT_GE(res.mean, 0.95 * optimum) << "optimum " << optimum;
}

TEST(Collab, TrainingImprovesOnEverySeed) {
  const auto joint = joint_world();
  const auto sol = soft_value_iteration(joint.single().mdp(), 10.0);
  const auto spec = HumanModelSpec::maxent_human(sol);
  for (std::uint64_t seed = 0; seed < 3; ++seed) {
    CollabTrainConfig cfg;
    cfg.iterations = 300;
    cfg.episodes_per_iter = 16;
    cfg.seed = seed;
    const auto r = train_best_response(joint, spec, nullptr, cfg);
    ASSERT_EQ(r.curve.size(), 300u);
    double first = 0.0, last = 0.0;
    for (int k = 0; k < 20; ++k) {
      first += r.curve[k] / 20;
      last += r.curve[r.curve.size() - 1 - k] / 20;
    }
    EXPECT_GE(last, first) << "seed " << seed;
  }
}

TEST(Collab, EvaluationStatistics) {
  const auto joint = joint_world();
  const auto sol = soft_value_iteration(joint.single().mdp(), 10.0);
  const auto spec = HumanModelSpec::maxent_human(sol);
  const RobotPolicy robot(joint.num_states(), 4, 1);
  const auto a = eval_team(joint, robot, spec, nullptr, MemoryConfig{}, 1000, 60, 7);
  const auto b = eval_team(joint, robot, spec, nullptr, MemoryConfig{}, 2000, 60, 7);
  const double ratio = (b.ci_high - b.ci_low) / (a.ci_high - a.ci_low);
  EXPECT_NEAR(ratio, 1.0 / std::sqrt(2.0), 0.2 / std::sqrt(2.0));
  const auto again = eval_team(joint, robot, spec, nullptr, MemoryConfig{}, 1000, 60, 7);
  EXPECT_EQ(a.mean, again.mean);
  EXPECT_EQ(a.ci_low, again.ci_low);
  EXPECT_LE(a.ci_low, a.mean);
  EXPECT_GE(a.ci_high, a.mean);
}

TEST(Collab, RobotPolicyJson) {
  RobotPolicy p(10, 4, 3);
  for (std::size_t i = 0; i < p.num_params(); ++i) p.params()[i] = 0.01 * static_cast<double>(i);
  const auto q = robot_policy_from_json(robot_policy_to_json(p));
  EXPECT_EQ(q.num_buckets(), 3);
  EXPECT_TRUE(std::equal(p.params().begin(), p.params().end(), q.params().begin(), q.params().end()));
  EXPECT_THROW(parse_human_model_kind("oracle"), std::invalid_argument);
}
