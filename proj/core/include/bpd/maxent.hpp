#pragma once

#include <vector>

#include "bpd/mdp.hpp"

namespace bpd {

/// Result of soft value iteration at rationality coefficient beta.
struct SoftSolution {
  double beta = 10.0;
  std::vector<double> q_soft;  // Q[s][a], row-major
  std::vector<double> v_soft;  // V[s] = (1/beta) log sum_a exp(beta Q[s][a])
  TabularPolicy policy;        // pi(a|s) proportional to exp(beta Q[s][a])
  double residual = 0.0;
  int iterations = 0;
};

/// Numerically stable (1/beta) log sum exp(beta x).
double soft_max(std::span<const double> x, double beta);

/// Iterates Q <- R + gamma P V with the log-sum-exp V until the sup-norm change
/// of Q is <= tol. Throws ConvergenceError after max_iters.
SoftSolution soft_value_iteration(const TabularMDP& mdp, double beta = 10.0, double tol = 1e-10,
                                  int max_iters = 100000);

/// Boltzmann-rational prediction of a_t given the history up to s_t.
/// `t` is 1-based; the output depends on s_t only.
std::vector<double> br_predict(const SoftSolution& solution, const Trajectory& history, int t);

}  // namespace bpd
