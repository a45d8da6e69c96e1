#include "bpd/maxent.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace bpd {

double soft_max(std::span<const double> x, double beta) {
  const double m = *std::max_element(x.begin(), x.end());
  double acc = 0.0;
  for (double v : x) acc += std::exp(beta * (v - m));
  return m + std::log(acc) / beta;
}

SoftSolution soft_value_iteration(const TabularMDP& mdp, double beta, double tol, int max_iters) {
  if (!(beta > 0.0)) throw std::invalid_argument("soft_value_iteration: beta must be > 0");
  if (!(tol > 0.0)) throw std::invalid_argument("soft_value_iteration: tol must be > 0");
  const int ns = mdp.num_states();
  const int na = mdp.num_actions();
  const double gamma = mdp.discount();
  std::vector<double> q(static_cast<std::size_t>(ns) * static_cast<std::size_t>(na), 0.0);
  std::vector<double> v(static_cast<std::size_t>(ns), 0.0);
  std::vector<double> next_q(q.size());

  double residual = std::numeric_limits<double>::infinity();
  int it = 0;
  while (it < max_iters) {
    ++it;
    residual = 0.0;
    for (int s = 0; s < ns; ++s) {
      for (int a = 0; a < na; ++a) {
        double acc = mdp.reward(s, a);
        const auto row = mdp.next_state_dist(s, a);
        for (int t = 0; t < ns; ++t) {
          const double p = row[static_cast<std::size_t>(t)];
          if (p != 0.0) acc += gamma * p * v[static_cast<std::size_t>(t)];
        }
        const std::size_t k = static_cast<std::size_t>(s * na + a);
        residual = std::max(residual, std::abs(acc - q[k]));
        next_q[k] = acc;
      }
    }
    q.swap(next_q);
    for (int s = 0; s < ns; ++s) {
      v[static_cast<std::size_t>(s)] = soft_max(std::span<const double>(q).subspan(static_cast<std::size_t>(s * na), static_cast<std::size_t>(na)), beta);
    }
    if (residual <= tol) break;
  }
  if (residual > tol) {
    throw ConvergenceError("soft_value_iteration: residual " + std::to_string(residual) + " > tol after " +
                               std::to_string(max_iters) + " iterations",
                           residual);
  }

  std::vector<double> probs(q.size());
  for (int s = 0; s < ns; ++s) {
    const std::size_t off = static_cast<std::size_t>(s * na);
    const double m = *std::max_element(q.begin() + static_cast<std::ptrdiff_t>(off), q.begin() + static_cast<std::ptrdiff_t>(off + na));
    double z = 0.0;
    for (int a = 0; a < na; ++a) {
      probs[off + static_cast<std::size_t>(a)] = std::exp(beta * (q[off + static_cast<std::size_t>(a)] - m));
      z += probs[off + static_cast<std::size_t>(a)];
    }
    for (int a = 0; a < na; ++a) probs[off + static_cast<std::size_t>(a)] /= z;
  }

  SoftSolution out;
  out.beta = beta;
  out.q_soft = std::move(q);
  out.v_soft = std::move(v);
  out.policy = TabularPolicy(ns, na, std::move(probs));
  out.residual = residual;
  out.iterations = it;
  return out;
}

std::vector<double> br_predict(const SoftSolution& solution, const Trajectory& history, int t) {
  if (t < 1 || static_cast<std::size_t>(t) > history.steps.size()) {
    throw std::out_of_range("br_predict: timestep " + std::to_string(t) + " outside history of length " +
                            std::to_string(history.steps.size()));
  }
  const int s = history.steps[static_cast<std::size_t>(t - 1)].state;
  if (s < 0 || s >= solution.policy.num_states()) throw std::out_of_range("br_predict: state out of range");
  const auto row = solution.policy.row(s);
  return {row.begin(), row.end()};
}

}  // namespace bpd
