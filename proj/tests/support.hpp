#pragma once

#include <cmath>
#include <cstdint>
#include <vector>

#include "bpd/mdp.hpp"
#include "bpd/rng.hpp"

namespace bpd::testing {

// One state, |rewards| actions, self loop.
inline TabularMDP bandit(std::vector<double> rewards, double gamma) {
  const int na = static_cast<int>(rewards.size());
  return TabularMDP(1, na, std::vector<double>(static_cast<std::size_t>(na), 1.0), std::move(rewards), gamma, {1.0});
}

// Dense random MDP with Dirichlet(1)-like rows and uniform rewards in [0, 1).
inline TabularMDP random_mdp(std::uint64_t seed, int ns, int na, double gamma) {
  Rng rng(seed);
  std::vector<double> p(static_cast<std::size_t>(ns * na * ns));
  std::vector<double> r(static_cast<std::size_t>(ns * na));
  for (int s = 0; s < ns; ++s) {
    for (int a = 0; a < na; ++a) {
      double total = 0.0;
      for (int t = 0; t < ns; ++t) {
        const double e = -std::log(1.0 - uniform01(rng));
        p[static_cast<std::size_t>((s * na + a) * ns + t)] = e;
        total += e;
      }
      for (int t = 0; t < ns; ++t) p[static_cast<std::size_t>((s * na + a) * ns + t)] /= total;
      r[static_cast<std::size_t>(s * na + a)] = uniform01(rng);
    }
  }
  std::vector<double> rho(static_cast<std::size_t>(ns), 0.0);
  double total = 0.0;
  for (auto& v : rho) total += (v = 0.1 + uniform01(rng));
  for (auto& v : rho) v /= total;
  return TabularMDP(ns, na, std::move(p), std::move(r), gamma, std::move(rho));
}

inline TabularPolicy random_policy(std::uint64_t seed, int ns, int na) {
  Rng rng(seed);
  std::vector<double> p(static_cast<std::size_t>(ns * na));
  for (int s = 0; s < ns; ++s) {
    double total = 0.0;
    for (int a = 0; a < na; ++a) total += (p[static_cast<std::size_t>(s * na + a)] = 0.05 + uniform01(rng));
    for (int a = 0; a < na; ++a) p[static_cast<std::size_t>(s * na + a)] /= total;
  }
  return TabularPolicy(ns, na, std::move(p));
}

inline double relative_error(double a, double b) {
  return std::abs(a - b) / std::max({std::abs(a), std::abs(b), 1e-8});
}

}  // namespace bpd::testing
