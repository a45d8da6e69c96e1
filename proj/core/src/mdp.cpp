#include "bpd/mdp.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

namespace bpd {
namespace {

constexpr double kRowTolerance = 1e-12;

void check_distribution(std::span<const double> p, double tol, const std::string& what) {
  double total = 0.0;
  for (double v : p) {
    if (!(v >= 0.0) || !std::isfinite(v)) throw std::invalid_argument(what + ": entries must be finite and >= 0");
    total += v;
  }
  if (std::abs(total - 1.0) > tol) {
    throw std::invalid_argument(what + ": must sum to 1 (got " + std::to_string(total) + ")");
  }
}

Eigen::MatrixXd chain_matrix(const TabularMDP& mdp, const TabularPolicy& policy) {
  const int n = mdp.num_states();
  Eigen::MatrixXd p = Eigen::MatrixXd::Zero(n, n);
  for (int s = 0; s < n; ++s) {
    for (int a = 0; a < mdp.num_actions(); ++a) {
      const double pa = policy.prob(s, a);
      if (pa == 0.0) continue;
      const auto row = mdp.next_state_dist(s, a);
      for (int t = 0; t < n; ++t) p(s, t) += pa * row[static_cast<std::size_t>(t)];
    }
  }
  return p;
}

Eigen::VectorXd expected_rewards(const TabularMDP& mdp, const TabularPolicy& policy) {
  Eigen::VectorXd r(mdp.num_states());
  for (int s = 0; s < mdp.num_states(); ++s) {
    double v = 0.0;
    for (int a = 0; a < mdp.num_actions(); ++a) v += policy.prob(s, a) * mdp.reward(s, a);
    r(s) = v;
  }
  return r;
}

}  // namespace

TabularMDP::TabularMDP(int num_states, int num_actions, std::vector<double> transitions,
                       std::vector<double> rewards, double discount, std::vector<double> start_dist)
    : num_states_(num_states),
      num_actions_(num_actions),
      transitions_(std::move(transitions)),
      rewards_(std::move(rewards)),
      discount_(discount),
      start_dist_(std::move(start_dist)) {
  if (num_states <= 0 || num_actions <= 0) throw std::invalid_argument("TabularMDP: dimensions must be positive");
  const auto ns = static_cast<std::size_t>(num_states);
  const auto na = static_cast<std::size_t>(num_actions);
  if (transitions_.size() != ns * na * ns) throw std::invalid_argument("TabularMDP: transition tensor has wrong size");
  if (rewards_.size() != ns * na) throw std::invalid_argument("TabularMDP: reward table has wrong size");
  if (start_dist_.size() != ns) throw std::invalid_argument("TabularMDP: start distribution has wrong size");
  if (!(discount >= 0.0 && discount < 1.0)) throw std::invalid_argument("TabularMDP: discount must lie in [0, 1)");
  for (double r : rewards_) {
    if (!std::isfinite(r)) throw std::invalid_argument("TabularMDP: rewards must be finite");
  }
  for (int s = 0; s < num_states; ++s) {
    for (int a = 0; a < num_actions; ++a) {
      check_distribution(next_state_dist(s, a), kRowTolerance,
                         "TabularMDP: P[" + std::to_string(s) + "][" + std::to_string(a) + "]");
    }
  }
  check_distribution(start_dist_, kRowTolerance, "TabularMDP: start distribution");
}

TabularMDP TabularMDP::with_scaled_rewards(double scale) const {
  std::vector<double> r = rewards_;
  for (double& v : r) v *= scale;
  return TabularMDP(num_states_, num_actions_, transitions_, std::move(r), discount_, start_dist_);
}

TabularPolicy::TabularPolicy(int num_states, int num_actions, std::vector<double> probs)
    : num_states_(num_states), num_actions_(num_actions), probs_(std::move(probs)) {
  if (num_states <= 0 || num_actions <= 0) throw std::invalid_argument("TabularPolicy: dimensions must be positive");
  if (probs_.size() != static_cast<std::size_t>(num_states) * static_cast<std::size_t>(num_actions)) {
    throw std::invalid_argument("TabularPolicy: probability table has wrong size");
  }
  for (int s = 0; s < num_states; ++s) {
    check_distribution(row(s), 1e-9, "TabularPolicy: row " + std::to_string(s));
  }
}

TabularPolicy TabularPolicy::uniform(int num_states, int num_actions) {
  std::vector<double> p(static_cast<std::size_t>(num_states) * static_cast<std::size_t>(num_actions),
                        1.0 / num_actions);
  return TabularPolicy(num_states, num_actions, std::move(p));
}

TabularPolicy TabularPolicy::deterministic(int num_actions, std::span<const int> actions) {
  const int n = static_cast<int>(actions.size());
  std::vector<double> p(static_cast<std::size_t>(n) * static_cast<std::size_t>(num_actions), 0.0);
  for (int s = 0; s < n; ++s) {
    const int a = actions[static_cast<std::size_t>(s)];
    if (a < 0 || a >= num_actions) throw std::invalid_argument("TabularPolicy::deterministic: action out of range");
    p[static_cast<std::size_t>(s * num_actions + a)] = 1.0;
  }
  return TabularPolicy(n, num_actions, std::move(p));
}

void check_policy_shape(const TabularMDP& mdp, const TabularPolicy& policy) {
  if (policy.num_states() != mdp.num_states() || policy.num_actions() != mdp.num_actions()) {
    throw std::invalid_argument("policy shape " + std::to_string(policy.num_states()) + "x" +
                                std::to_string(policy.num_actions()) + " does not match MDP " +
                                std::to_string(mdp.num_states()) + "x" + std::to_string(mdp.num_actions()));
  }
}

void check_trajectory(const TabularMDP& mdp, const Trajectory& trajectory) {
  for (const Step& step : trajectory.steps) {
    if (step.state < 0 || step.state >= mdp.num_states() || step.action < 0 || step.action >= mdp.num_actions()) {
      throw std::out_of_range("trajectory step out of range for MDP");
    }
  }
}

std::vector<double> policy_state_values(const TabularMDP& mdp, const TabularPolicy& policy) {
  check_policy_shape(mdp, policy);
  const int n = mdp.num_states();
  const Eigen::MatrixXd a = Eigen::MatrixXd::Identity(n, n) - mdp.discount() * chain_matrix(mdp, policy);
  const Eigen::VectorXd v = a.partialPivLu().solve(expected_rewards(mdp, policy));
  return {v.data(), v.data() + n};
}

double policy_return(const TabularMDP& mdp, const TabularPolicy& policy) {
  const auto v = policy_state_values(mdp, policy);
  double j = 0.0;
  const auto rho = mdp.start_dist();
  for (std::size_t s = 0; s < v.size(); ++s) j += rho[s] * v[s];
  return mdp.discount() * j;
}

std::vector<double> policy_return_logit_gradient(const TabularMDP& mdp, const TabularPolicy& policy) {
  check_policy_shape(mdp, policy);
  const int n = mdp.num_states();
  const int na = mdp.num_actions();
  const double gamma = mdp.discount();
  const Eigen::MatrixXd p = chain_matrix(mdp, policy);
  const Eigen::MatrixXd a = Eigen::MatrixXd::Identity(n, n) - gamma * p;
  const auto lu = a.partialPivLu();
  const Eigen::VectorXd v = lu.solve(expected_rewards(mdp, policy));
  Eigen::VectorXd rho(n);
  for (int s = 0; s < n; ++s) rho(s) = mdp.start_dist()[static_cast<std::size_t>(s)];
  // Discounted occupancy d^T = rho^T (I - gamma P)^{-1}.
  const Eigen::VectorXd occupancy = a.transpose().partialPivLu().solve(rho);

  std::vector<double> grad(static_cast<std::size_t>(n) * static_cast<std::size_t>(na), 0.0);
  for (int s = 0; s < n; ++s) {
    for (int b = 0; b < na; ++b) {
      double q = mdp.reward(s, b);
      const auto row = mdp.next_state_dist(s, b);
      for (int t = 0; t < n; ++t) q += gamma * row[static_cast<std::size_t>(t)] * v(t);
      grad[static_cast<std::size_t>(s * na + b)] = gamma * occupancy(s) * policy.prob(s, b) * (q - v(s));
    }
  }
  return grad;
}

ValueIterationResult value_iteration(const TabularMDP& mdp, double tol, int max_iters) {
  const int n = mdp.num_states();
  const int na = mdp.num_actions();
  ValueIterationResult out;
  out.values.assign(static_cast<std::size_t>(n), 0.0);
  out.q_values.assign(static_cast<std::size_t>(n) * static_cast<std::size_t>(na), 0.0);
  out.greedy.assign(static_cast<std::size_t>(n), 0);
  std::vector<double> next(static_cast<std::size_t>(n));
  for (int it = 1; it <= max_iters; ++it) {
    double residual = 0.0;
    for (int s = 0; s < n; ++s) {
      double best = -std::numeric_limits<double>::infinity();
      for (int a = 0; a < na; ++a) {
        double q = mdp.reward(s, a);
        const auto row = mdp.next_state_dist(s, a);
        for (int t = 0; t < n; ++t) {
          const double pt = row[static_cast<std::size_t>(t)];
          if (pt != 0.0) q += mdp.discount() * pt * out.values[static_cast<std::size_t>(t)];
        }
        out.q_values[static_cast<std::size_t>(s * na + a)] = q;
        best = std::max(best, q);
      }
      next[static_cast<std::size_t>(s)] = best;
      residual = std::max(residual, std::abs(best - out.values[static_cast<std::size_t>(s)]));
    }
    out.values.swap(next);
    out.iterations = it;
    out.residual = residual;
    if (residual <= tol) break;
  }
  if (out.residual > tol) throw ConvergenceError("value_iteration did not converge", out.residual);
  for (int s = 0; s < n; ++s) {
    const auto first = out.q_values.begin() + s * na;
    out.greedy[static_cast<std::size_t>(s)] = static_cast<int>(std::max_element(first, first + na) - first);
  }
  return out;
}

std::vector<double> policy_transition_matrix(const TabularMDP& mdp, const TabularPolicy& policy) {
  check_policy_shape(mdp, policy);
  const Eigen::MatrixXd p = chain_matrix(mdp, policy);
  std::vector<double> out(static_cast<std::size_t>(p.size()));
  for (int s = 0; s < p.rows(); ++s)
    for (int t = 0; t < p.cols(); ++t) out[static_cast<std::size_t>(s * p.cols() + t)] = p(s, t);
  return out;
}

}  // namespace bpd
