#pragma once

#include <cstddef>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace bpd {

/// Thrown when an iterative solver fails to reach its tolerance.
class ConvergenceError : public std::runtime_error {
 public:
  ConvergenceError(const std::string& what, double residual)
      : std::runtime_error(what), residual_(residual) {}
  double residual() const noexcept { return residual_; }

 private:
  double residual_;
};

/// Finite MDP with dense transition tensor P[s][a][s'], reward table R[s][a],
/// discount and start distribution. Immutable after construction.
class TabularMDP {
 public:
  TabularMDP(int num_states, int num_actions, std::vector<double> transitions,
             std::vector<double> rewards, double discount, std::vector<double> start_dist);

  int num_states() const noexcept { return num_states_; }
  int num_actions() const noexcept { return num_actions_; }
  double discount() const noexcept { return discount_; }

  double transition(int s, int a, int next) const {
    return transitions_[index(s, a) * static_cast<std::size_t>(num_states_) + next];
  }
  std::span<const double> next_state_dist(int s, int a) const {
    return {transitions_.data() + index(s, a) * static_cast<std::size_t>(num_states_),
            static_cast<std::size_t>(num_states_)};
  }
  double reward(int s, int a) const { return rewards_[index(s, a)]; }
  std::span<const double> start_dist() const noexcept { return start_dist_; }
  std::span<const double> transitions() const noexcept { return transitions_; }
  std::span<const double> rewards() const noexcept { return rewards_; }

  /// Copy with every reward multiplied by `scale`.
  TabularMDP with_scaled_rewards(double scale) const;

 private:
  std::size_t index(int s, int a) const {
    return static_cast<std::size_t>(s) * static_cast<std::size_t>(num_actions_) +
           static_cast<std::size_t>(a);
  }

  int num_states_;
  int num_actions_;
  std::vector<double> transitions_;
  std::vector<double> rewards_;
  double discount_;
  std::vector<double> start_dist_;
};

/// Stationary stochastic policy, row-major pi[s][a].
class TabularPolicy {
 public:
  TabularPolicy() = default;
  TabularPolicy(int num_states, int num_actions, std::vector<double> probs);

  static TabularPolicy uniform(int num_states, int num_actions);
  /// Deterministic policy from one action per state.
  static TabularPolicy deterministic(int num_actions, std::span<const int> actions);

  int num_states() const noexcept { return num_states_; }
  int num_actions() const noexcept { return num_actions_; }
  double prob(int s, int a) const { return probs_[row_offset(s) + static_cast<std::size_t>(a)]; }
  std::span<const double> row(int s) const {
    return {probs_.data() + row_offset(s), static_cast<std::size_t>(num_actions_)};
  }
  std::span<const double> probs() const noexcept { return probs_; }

 private:
  std::size_t row_offset(int s) const {
    return static_cast<std::size_t>(s) * static_cast<std::size_t>(num_actions_);
  }

  int num_states_ = 0;
  int num_actions_ = 0;
  std::vector<double> probs_;
};

struct Step {
  int state = 0;
  int action = 0;
  friend bool operator==(const Step&, const Step&) = default;
};

/// Time-indexed (state, action) sequence. steps[0] is timestep t = 1.
struct Trajectory {
  std::vector<Step> steps;

  std::size_t length() const noexcept { return steps.size(); }
  friend bool operator==(const Trajectory&, const Trajectory&) = default;
};

void check_policy_shape(const TabularMDP& mdp, const TabularPolicy& policy);
void check_trajectory(const TabularMDP& mdp, const Trajectory& trajectory);

/// State values V(s) = E[sum_{k>=0} gamma^k R(s_k, a_k) | s_0 = s] by a dense linear solve.
std::vector<double> policy_state_values(const TabularMDP& mdp, const TabularPolicy& policy);

/// Expected return J(pi) = E[sum_{t>=1} gamma^t R(s_t, a_t)], s_1 ~ rho.
/// The first reward is discounted by gamma^1, so J = gamma * rho . V.
double policy_return(const TabularMDP& mdp, const TabularPolicy& policy);

/// Exact gradient of J with respect to the per-state action logits of a
/// softmax policy (policy gradient theorem evaluated in closed form).
std::vector<double> policy_return_logit_gradient(const TabularMDP& mdp, const TabularPolicy& policy);

struct ValueIterationResult {
  std::vector<double> values;   // V*(s)
  std::vector<double> q_values; // Q*(s, a), row-major
  std::vector<int> greedy;      // argmax_a Q*(s, a)
  double residual = 0.0;
  int iterations = 0;
};

/// Hard (max) Bellman value iteration with gamma^0 on the first reward.
ValueIterationResult value_iteration(const TabularMDP& mdp, double tol = 1e-10, int max_iters = 100000);

/// Joint distribution of the policy-induced chain: P_pi[s][s'] row-major.
std::vector<double> policy_transition_matrix(const TabularMDP& mdp, const TabularPolicy& policy);

}  // namespace bpd
