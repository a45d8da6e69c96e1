#include "bpd/oracle.hpp"

#include <boost/math/special_functions/beta.hpp>
#include <cmath>
#include <limits>
#include <numbers>
#include <stdexcept>

#include "bpd/dirichlet.hpp"

namespace bpd {

namespace {

// Self-normalized weighted average of policy tables in log space.
class WeightedMean {
 public:
  explicit WeightedMean(std::size_t size) : sum_(size, 0.0) {}

  void add(double log_weight, std::span<const double> probs) {
    if (log_weight == -std::numeric_limits<double>::infinity()) return;
    if (log_weight > max_) {
      const double r = std::exp(max_ - log_weight);
      total_ *= r;
      total_sq_ *= r * r;
      for (double& v : sum_) v *= r;
      max_ = log_weight;
    }
    const double w = std::exp(log_weight - max_);
    total_ += w;
    total_sq_ += w * w;
    for (std::size_t i = 0; i < sum_.size(); ++i) sum_[i] += w * probs[i];
  }

  bool empty() const { return total_ == 0.0; }
  double ess() const { return total_ * total_ / total_sq_; }
  std::vector<double> mean() const {
    std::vector<double> out(sum_.size());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = sum_[i] / total_;
    return out;
  }

 private:
  std::vector<double> sum_;
  double max_ = -std::numeric_limits<double>::infinity();
  double total_ = 0.0;
  double total_sq_ = 0.0;
};

std::vector<int> history_counts(const TabularMDP& mdp, const Trajectory& history) {
  check_trajectory(mdp, history);
  std::vector<int> counts(static_cast<std::size_t>(mdp.num_states() * mdp.num_actions()), 0);
  for (const Step& st : history.steps) ++counts[static_cast<std::size_t>(st.state * mdp.num_actions() + st.action)];
  return counts;
}

double log_weight(const TabularMDP& mdp, const TabularPolicy& policy, double beta, std::span<const int> counts) {
  double lw = beta * policy_return(mdp, policy);
  const auto p = policy.probs();
  for (std::size_t i = 0; i < counts.size(); ++i) {
    if (counts[i] == 0) continue;
    if (p[i] <= 0.0) return -std::numeric_limits<double>::infinity();
    lw += counts[i] * std::log(p[i]);
  }
  return lw;
}

OracleResult run_quadrature(const TabularMDP& mdp, double beta, double alpha, std::span<const int> counts,
                            const OracleConfig& cfg) {
  const int ns = mdp.num_states();
  const int na = mdp.num_actions();
  const int sticks = na - 1;
  const int dim = ns * sticks;
  if (dim > kQuadratureDimensionCap) {
    throw std::invalid_argument("oracle quadrature: |S|(|A|-1) = " + std::to_string(dim) + " exceeds the cap of " +
                                std::to_string(kQuadratureDimensionCap));
  }
  const int res = cfg.resolution;
  // nodes[k][i]: stick fraction k at midpoint i.
  std::vector<std::vector<double>> nodes(static_cast<std::size_t>(std::max(sticks, 0)));
  for (int k = 0; k < sticks; ++k) {
    const double b = alpha * (sticks - k);
    auto& col = nodes[static_cast<std::size_t>(k)];
    col.resize(static_cast<std::size_t>(res));
    for (int i = 0; i < res; ++i) col[static_cast<std::size_t>(i)] = boost::math::ibeta_inv(alpha, b, (i + 0.5) / res);
  }
  std::vector<int> digit(static_cast<std::size_t>(dim), 0);
  std::vector<double> probs(static_cast<std::size_t>(ns * na));
  WeightedMean acc(probs.size());
  std::int64_t points = 0;
  while (true) {
    for (int s = 0; s < ns; ++s) {
      double rest = 1.0;
      for (int k = 0; k < sticks; ++k) {
        const double v = nodes[static_cast<std::size_t>(k)][static_cast<std::size_t>(digit[static_cast<std::size_t>(s * sticks + k)])];
        probs[static_cast<std::size_t>(s * na + k)] = rest * v;
        rest *= 1.0 - v;
      }
      probs[static_cast<std::size_t>(s * na + na - 1)] = rest;
    }
    const TabularPolicy pi(ns, na, probs);
    acc.add(log_weight(mdp, pi, beta, counts), probs);
    ++points;
    int d = 0;
    while (d < dim && ++digit[static_cast<std::size_t>(d)] == res) digit[static_cast<std::size_t>(d++)] = 0;
    if (d == dim) break;
  }
  if (acc.empty()) throw std::invalid_argument("oracle: history has zero probability under every grid policy");
  OracleResult out;
  out.method = OracleMethod::kGridQuadrature;
  out.marginals = acc.mean();
  out.ess = acc.ess();
  out.points = points;
  out.num_states = ns;
  out.num_actions = na;
  return out;
}

OracleResult run_importance(const TabularMDP& mdp, double beta, double alpha, std::span<const int> counts,
                            const OracleConfig& cfg) {
  const int ns = mdp.num_states();
  const int na = mdp.num_actions();
  Rng rng = make_rng(cfg.seed, "oracle");
  const BaseMeasureConfig base{alpha};
  WeightedMean acc(static_cast<std::size_t>(ns * na));
  for (std::int64_t i = 0; i < cfg.samples; ++i) {
    const TabularPolicy pi = sample_base_policy(ns, na, base, rng);
    acc.add(log_weight(mdp, pi, beta, counts), pi.probs());
  }
  if (acc.empty()) throw std::invalid_argument("oracle: history has zero probability under every sampled policy");
  OracleResult out;
  out.method = OracleMethod::kImportanceSampling;
  out.marginals = acc.mean();
  out.ess = acc.ess();
  out.points = cfg.samples;
  out.num_states = ns;
  out.num_actions = na;
  return out;
}

void check_model_params(double beta, double alpha) {
  if (!(beta >= 0.0) || !std::isfinite(beta)) throw std::invalid_argument("oracle: beta must be finite and >= 0");
  if (!(alpha > 0.0) || !std::isfinite(alpha)) throw std::invalid_argument("oracle: alpha must be finite and > 0");
}

}  // namespace

OracleMethod parse_oracle_method(const std::string& name) {
  if (name == "grid-quadrature") return OracleMethod::kGridQuadrature;
  if (name == "importance-sampling") return OracleMethod::kImportanceSampling;
  throw std::invalid_argument("unknown oracle method '" + name + "' (expected grid-quadrature or importance-sampling)");
}

std::string to_string(OracleMethod method) {
  return method == OracleMethod::kGridQuadrature ? "grid-quadrature" : "importance-sampling";
}

void OracleConfig::validate() const {
  if (resolution < 10) throw std::invalid_argument("oracle.resolution must be >= 10");
  if (samples < 1000) throw std::invalid_argument("oracle.samples must be >= 1000");
}

std::vector<double> OracleResult::row(int s) const {
  const auto first = marginals.begin() + static_cast<std::ptrdiff_t>(s) * num_actions;
  return {first, first + num_actions};
}

OracleResult oracle_posterior(const TabularMDP& mdp, double beta, double alpha, const Trajectory& history,
                              const OracleConfig& cfg) {
  cfg.validate();
  check_model_params(beta, alpha);
  const auto counts = history_counts(mdp, history);
  return cfg.method == OracleMethod::kGridQuadrature ? run_quadrature(mdp, beta, alpha, counts, cfg)
                                                     : run_importance(mdp, beta, alpha, counts, cfg);
}

OracleResult oracle_marginals(const TabularMDP& mdp, double beta, double alpha, const OracleConfig& cfg) {
  return oracle_posterior(mdp, beta, alpha, Trajectory{}, cfg);
}

std::vector<double> oracle_posterior_predictive(const TabularMDP& mdp, double beta, double alpha,
                                                const Trajectory& history, int query_state, const OracleConfig& cfg) {
  if (query_state < 0 || query_state >= mdp.num_states()) throw std::out_of_range("oracle: query state out of range");
  return oracle_posterior(mdp, beta, alpha, history, cfg).row(query_state);
}

Json oracle_to_json(const OracleResult& result, double beta, double alpha, const OracleConfig& cfg) {
  Json marginals = Json::array();
  for (int s = 0; s < result.num_states; ++s) marginals.push_back(result.row(s));
  Json params{{"beta", beta}, {"alpha", alpha}, {"points", result.points}};
  if (result.method == OracleMethod::kGridQuadrature) {
    params["resolution"] = cfg.resolution;
  } else {
    params["samples"] = cfg.samples;
    params["seed"] = cfg.seed;
  }
  return Json{{"method", to_string(result.method)}, {"params", params}, {"marginals", marginals}, {"ess", result.ess}};
}

EntropyIdentity bandit_entropy_identity(const LatentPolicyModel& model, double alpha, int resolution) {
  if (model.num_states() != 1 || model.num_actions() != 2 || model.latent_dim() != 1) {
    throw std::invalid_argument("bandit_entropy_identity: needs a 1-state, 2-action model with n = 1");
  }
  if (resolution < 100) throw std::invalid_argument("bandit_entropy_identity: resolution must be >= 100");
  const double w = model.weight(0, 0, 0) - model.weight(0, 1, 0);
  const double c = model.bias(0, 0) - model.bias(0, 1);
  if (w == 0.0) throw std::invalid_argument("bandit_entropy_identity: q is a point mass when the weights are equal");
  const double log_beta_fn = 2.0 * std::lgamma(alpha) - std::lgamma(2.0 * alpha);
  const double log_norm = -0.5 * std::log(2.0 * std::numbers::pi);
  const auto log_base = [&](double log_x, double log_1mx) {
    return (alpha - 1.0) * (log_x + log_1mx) - log_beta_fn;
  };
  // log density of pi(a_1) at logit y.
  const auto log_q = [&](double y, double log_x, double log_1mx) {
    const double u = (y - c) / w;
    return log_norm - 0.5 * u * u - std::log(std::abs(w)) - log_x - log_1mx;
  };
  const auto log_sig = [](double y) { return y >= 0.0 ? -std::log1p(std::exp(-y)) : y - std::log1p(std::exp(y)); };
  constexpr double kTail = 10.0;

  EntropyIdentity out;
  // Over x = pi(a_1) in (0, 1), with nodes x = (1 - cos(pi u)) / 2 clustered at both ends.
  const double du = 1.0 / resolution;
  for (int i = 0; i < resolution; ++i) {
    const double u = (i + 0.5) * du;
    const double x = 0.5 * (1.0 - std::cos(std::numbers::pi * u));
    const double dx = 0.5 * std::numbers::pi * std::sin(std::numbers::pi * u) * du;
    const double lx = std::log(x);
    const double l1 = std::log1p(-x);
    const double lq = log_q(lx - l1, lx, l1);
    out.entropy -= std::exp(lq) * (lq - log_base(lx, l1)) * dx;
  }
  // Over the latent.
  const double dz = 2.0 * kTail / resolution;
  for (int i = 0; i < resolution; ++i) {
    const double z = -kTail + (i + 0.5) * dz;
    const double y = w * z + c;
    const double lx = log_sig(y);
    const double l1 = log_sig(-y);
    out.negative_kl -= std::exp(log_norm - 0.5 * z * z) * (log_q(y, lx, l1) - log_base(lx, l1)) * dz;
  }
  return out;
}

}  // namespace bpd
