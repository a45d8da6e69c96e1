#include "bpd/mutual_info.hpp"

#include <cmath>
#include <limits>
#include <ostream>
#include <stdexcept>
#include <unordered_map>

#include "bpd/rollout.hpp"
#include "bpd/serialization.hpp"

namespace bpd {

namespace {

// Joint action counts per state pair for one (t, t') entry.
struct PairTable {
  std::unordered_map<std::uint64_t, std::size_t> index;
  std::vector<std::int64_t> counts;

  std::int64_t* slot(std::uint64_t key, std::size_t cells) {
    auto [it, inserted] = index.try_emplace(key, counts.size());
    if (inserted) counts.resize(counts.size() + cells, 0);
    return counts.data() + it->second;
  }
};

}  // namespace

void MutualInfoConfig::validate() const {
  if (horizon < 1) throw std::invalid_argument("mutual_info.horizon must be >= 1");
  if (num_policies < 1) throw std::invalid_argument("mutual_info.num_policies must be >= 1");
  if (rollouts_per_policy < 1) throw std::invalid_argument("mutual_info.rollouts_per_policy must be >= 1");
  if (min_group_size < 1) throw std::invalid_argument("mutual_info.min_group_size must be >= 1");
}

double MutualInfoResult::mean_off_diagonal() const {
  double total = 0.0;
  int count = 0;
  for (int t = 0; t < horizon; ++t) {
    for (int u = 0; u < horizon; ++u) {
      if (t == u || !std::isfinite(at(t, u))) continue;
      total += at(t, u);
      ++count;
    }
  }
  return count > 0 ? total / count : std::numeric_limits<double>::quiet_NaN();
}

int MutualInfoResult::missing_off_diagonal() const {
  int missing = 0;
  for (int t = 0; t < horizon; ++t)
    for (int u = 0; u < horizon; ++u)
      if (t != u && !std::isfinite(at(t, u))) ++missing;
  return missing;
}

double plugin_entropy(std::span<const std::int64_t> counts) {
  std::int64_t total = 0;
  for (auto c : counts) total += c;
  if (total == 0) return 0.0;
  double h = 0.0;
  for (auto c : counts) {
    if (c == 0) continue;
    const double p = static_cast<double>(c) / static_cast<double>(total);
    h -= p * std::log(p);
  }
  return h;
}

double plugin_mutual_information(std::span<const std::int64_t> counts, int rows, int cols) {
  if (counts.size() != static_cast<std::size_t>(rows) * static_cast<std::size_t>(cols)) {
    throw std::invalid_argument("plugin_mutual_information: table size mismatch");
  }
  std::vector<std::int64_t> r(static_cast<std::size_t>(rows), 0);
  std::vector<std::int64_t> c(static_cast<std::size_t>(cols), 0);
  for (int i = 0; i < rows; ++i) {
    for (int j = 0; j < cols; ++j) {
      r[static_cast<std::size_t>(i)] += counts[static_cast<std::size_t>(i * cols + j)];
      c[static_cast<std::size_t>(j)] += counts[static_cast<std::size_t>(i * cols + j)];
    }
  }
  // I = H(X) + H(Y) - H(X, Y), clamped against rounding.
  return std::max(0.0, plugin_entropy(r) + plugin_entropy(c) - plugin_entropy(counts));
}

MutualInfoResult mutual_information(const PolicyDraw& draw, const TabularMDP& mdp, const MutualInfoConfig& cfg) {
  cfg.validate();
  const int h = cfg.horizon;
  const auto na = static_cast<std::size_t>(mdp.num_actions());
  const auto ns = static_cast<std::uint64_t>(mdp.num_states());
  std::vector<PairTable> pairs(static_cast<std::size_t>(h) * static_cast<std::size_t>(h));
  const std::uint64_t stream = derive_seed(cfg.seed, "mutual-info");
  for (int i = 0; i < cfg.num_policies; ++i) {
    Rng rng(derive_seed(stream, static_cast<std::uint64_t>(i)));
    const TabularPolicy pi = draw(rng);
    for (int k = 0; k < cfg.rollouts_per_policy; ++k) {
      const Trajectory traj = rollout(mdp, pi, h, rng);
      for (int t = 0; t < h; ++t) {
        const Step& a = traj.steps[static_cast<std::size_t>(t)];
        for (int u = t; u < h; ++u) {
          const Step& b = traj.steps[static_cast<std::size_t>(u)];
          auto& table = pairs[static_cast<std::size_t>(t * h + u)];
          if (t == u) {
            table.slot(static_cast<std::uint64_t>(a.state), na)[a.action] += 1;
          } else {
            const std::uint64_t key = static_cast<std::uint64_t>(a.state) * ns + static_cast<std::uint64_t>(b.state);
            table.slot(key, na * na)[static_cast<std::size_t>(a.action) * na + static_cast<std::size_t>(b.action)] += 1;
          }
        }
      }
    }
  }

  MutualInfoResult out;
  out.horizon = h;
  out.mi.assign(static_cast<std::size_t>(h * h), std::numeric_limits<double>::quiet_NaN());
  out.n.assign(static_cast<std::size_t>(h * h), 0);
  for (int t = 0; t < h; ++t) {
    for (int u = t; u < h; ++u) {
      const auto& table = pairs[static_cast<std::size_t>(t * h + u)];
      const std::size_t cells = t == u ? na : na * na;
      double weighted = 0.0;
      std::int64_t used = 0;
      for (std::size_t off = 0; off < table.counts.size(); off += cells) {
        const std::span<const std::int64_t> group(table.counts.data() + off, cells);
        std::int64_t total = 0;
        for (auto c : group) total += c;
        if (total < cfg.min_group_size) continue;
        const double v = t == u ? plugin_entropy(group)
                                : plugin_mutual_information(group, static_cast<int>(na), static_cast<int>(na));
        weighted += static_cast<double>(total) * v;
        used += total;
      }
      if (used == 0) continue;
      const double v = weighted / static_cast<double>(used);
      out.mi[static_cast<std::size_t>(t * h + u)] = v;
      out.mi[static_cast<std::size_t>(u * h + t)] = v;
      out.n[static_cast<std::size_t>(t * h + u)] = used;
      out.n[static_cast<std::size_t>(u * h + t)] = used;
    }
  }
  return out;
}

MutualInfoResult mutual_information(const LatentPolicyModel& model, const TabularMDP& mdp, const MutualInfoConfig& cfg) {
  return mutual_information([&model](Rng& rng) { return sample_policy(model, rng).policy; }, mdp, cfg);
}

MutualInfoResult mutual_information(const SoftSolution& solution, const TabularMDP& mdp, const MutualInfoConfig& cfg) {
  return mutual_information([&solution](Rng&) { return solution.policy; }, mdp, cfg);
}

void write_mutual_info_csv(std::ostream& out, const MutualInfoResult& result) {
  out << "t,t_prime,mi,n\n";
  for (int t = 0; t < result.horizon; ++t) {
    for (int u = 0; u < result.horizon; ++u) {
      const double v = result.at(t, u);
      out << t + 1 << ',' << u + 1 << ',' << (std::isfinite(v) ? format_double(v) : std::string("nan")) << ','
          << result.n[static_cast<std::size_t>(t * result.horizon + u)] << '\n';
    }
  }
}

}  // namespace bpd
