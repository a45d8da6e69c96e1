#include "bpd/latent_model.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace bpd {

namespace {

void softmax_inplace(std::span<double> x) {
  const double m = *std::max_element(x.begin(), x.end());
  double z = 0.0;
  for (double& v : x) {
    v = std::exp(v - m);
    z += v;
  }
  for (double& v : x) v /= z;
}

}  // namespace

LatentPolicyModel::LatentPolicyModel(int num_states, int num_actions, int latent_dim)
    : num_states_(num_states), num_actions_(num_actions), latent_dim_(latent_dim) {
  if (num_states <= 0 || num_actions <= 0 || latent_dim <= 0) {
    throw std::invalid_argument("LatentPolicyModel: dimensions must be positive");
  }
  params_.assign(bias_offset() + static_cast<std::size_t>(num_states) * static_cast<std::size_t>(num_actions), 0.0);
}

LatentPolicyModel LatentPolicyModel::initialized(int num_states, int num_actions, int latent_dim, Rng& rng,
                                                 double scale) {
  LatentPolicyModel m(num_states, num_actions, latent_dim);
  const double stddev = scale / std::pow(static_cast<double>(latent_dim), 0.25);
  std::normal_distribution<double> normal(0.0, stddev);
  for (std::size_t i = 0; i < m.bias_offset(); ++i) m.params_[i] = normal(rng);
  return m;
}

void LatentPolicyModel::logits(int s, std::span<const double> z, std::span<double> out) const {
  if (z.size() != static_cast<std::size_t>(latent_dim_)) throw std::invalid_argument("LatentPolicyModel: latent size mismatch");
  for (int a = 0; a < num_actions_; ++a) {
    const double* w = params_.data() + weight_index(s, a, 0);
    double acc = params_[bias_index(s, a)];
    for (int i = 0; i < latent_dim_; ++i) acc += w[i] * z[static_cast<std::size_t>(i)];
    out[static_cast<std::size_t>(a)] = acc;
  }
}

void LatentPolicyModel::action_probs(int s, std::span<const double> z, std::span<double> out) const {
  logits(s, z, out);
  softmax_inplace(out.first(static_cast<std::size_t>(num_actions_)));
}

std::vector<double> LatentPolicyModel::action_probs(int s, std::span<const double> z) const {
  std::vector<double> out(static_cast<std::size_t>(num_actions_));
  action_probs(s, z, out);
  return out;
}

double LatentPolicyModel::log_prob(int s, int a, std::span<const double> z) const {
  std::vector<double> l(static_cast<std::size_t>(num_actions_));
  logits(s, z, l);
  const double m = *std::max_element(l.begin(), l.end());
  double acc = 0.0;
  for (double v : l) acc += std::exp(v - m);
  return l[static_cast<std::size_t>(a)] - m - std::log(acc);
}

TabularPolicy LatentPolicyModel::policy(std::span<const double> z) const {
  std::vector<double> probs(static_cast<std::size_t>(num_states_) * static_cast<std::size_t>(num_actions_));
  for (int s = 0; s < num_states_; ++s) {
    action_probs(s, z, std::span<double>(probs).subspan(static_cast<std::size_t>(s * num_actions_),
                                                         static_cast<std::size_t>(num_actions_)));
  }
  return TabularPolicy(num_states_, num_actions_, std::move(probs));
}

void LatentPolicyModel::accumulate_logit_grad(int s, std::span<const double> z, std::span<const double> dlogits,
                                              std::span<double> grad) const {
  for (int a = 0; a < num_actions_; ++a) {
    const double g = dlogits[static_cast<std::size_t>(a)];
    if (g == 0.0) continue;
    double* w = grad.data() + weight_index(s, a, 0);
    for (int i = 0; i < latent_dim_; ++i) w[i] += g * z[static_cast<std::size_t>(i)];
    grad[bias_index(s, a)] += g;
  }
}

void LatentPolicyModel::accumulate_log_prob_grad(int s, int a, std::span<const double> z, double scale,
                                                 std::span<double> grad) const {
  std::vector<double> d(static_cast<std::size_t>(num_actions_));
  action_probs(s, z, d);
  for (int b = 0; b < num_actions_; ++b) {
    d[static_cast<std::size_t>(b)] = scale * ((b == a ? 1.0 : 0.0) - d[static_cast<std::size_t>(b)]);
  }
  accumulate_logit_grad(s, z, d, grad);
}

void LatentPolicyModel::log_prob_latent_grad(int s, int a, std::span<const double> z, std::span<double> out) const {
  std::vector<double> p(static_cast<std::size_t>(num_actions_));
  action_probs(s, z, p);
  std::fill(out.begin(), out.end(), 0.0);
  for (int b = 0; b < num_actions_; ++b) {
    const double g = (b == a ? 1.0 : 0.0) - p[static_cast<std::size_t>(b)];
    const double* w = params_.data() + weight_index(s, b, 0);
    for (int i = 0; i < latent_dim_; ++i) out[static_cast<std::size_t>(i)] += g * w[i];
  }
}

std::vector<double> sample_latent(int latent_dim, Rng& rng) {
  std::vector<double> z(static_cast<std::size_t>(latent_dim));
  for (double& v : z) v = standard_normal(rng);
  return z;
}

PolicySample sample_policy(const LatentPolicyModel& model, Rng& rng) {
  auto z = sample_latent(model.latent_dim(), rng);
  auto pi = model.policy(z);
  return {std::move(z), std::move(pi)};
}

PolicySample sample_policy(const LatentPolicyModel& model, std::uint64_t seed) {
  Rng rng(seed);
  return sample_policy(model, rng);
}

TabularPolicy marginal_policy(const LatentPolicyModel& model, int num_samples, Rng& rng) {
  if (num_samples < 1) throw std::invalid_argument("marginal_policy: num_samples must be >= 1");
  const int ns = model.num_states();
  const int na = model.num_actions();
  std::vector<double> acc(static_cast<std::size_t>(ns) * static_cast<std::size_t>(na), 0.0);
  std::vector<double> row(static_cast<std::size_t>(na));
  for (int k = 0; k < num_samples; ++k) {
    const auto z = sample_latent(model.latent_dim(), rng);
    for (int s = 0; s < ns; ++s) {
      model.action_probs(s, z, row);
      for (int a = 0; a < na; ++a) acc[static_cast<std::size_t>(s * na + a)] += row[static_cast<std::size_t>(a)];
    }
  }
  for (double& v : acc) v /= num_samples;
  // Renormalize rows to absorb rounding.
  for (int s = 0; s < ns; ++s) {
    double t = 0.0;
    for (int a = 0; a < na; ++a) t += acc[static_cast<std::size_t>(s * na + a)];
    for (int a = 0; a < na; ++a) acc[static_cast<std::size_t>(s * na + a)] /= t;
  }
  return TabularPolicy(ns, na, std::move(acc));
}

Json model_to_json(const LatentPolicyModel& model) {
  const auto p = model.params();
  const std::size_t nw = model.bias_index(0, 0);
  return Json{{"type", "latent_policy_model"},
              {"num_states", model.num_states()},
              {"num_actions", model.num_actions()},
              {"latent_dim", model.latent_dim()},
              {"weights", std::vector<double>(p.begin(), p.begin() + static_cast<std::ptrdiff_t>(nw))},
              {"biases", std::vector<double>(p.begin() + static_cast<std::ptrdiff_t>(nw), p.end())}};
}

LatentPolicyModel model_from_json(const Json& doc) {
  if (doc.value("type", std::string("latent_policy_model")) != "latent_policy_model") {
    throw std::invalid_argument("model json: unexpected type");
  }
  LatentPolicyModel m(doc.at("num_states").get<int>(), doc.at("num_actions").get<int>(), doc.at("latent_dim").get<int>());
  const auto w = doc.at("weights").get<std::vector<double>>();
  const auto b = doc.at("biases").get<std::vector<double>>();
  const std::size_t nw = m.bias_index(0, 0);
  if (w.size() != nw || b.size() != m.num_params() - nw) throw std::invalid_argument("model json: parameter arrays have wrong length");
  auto p = m.params();
  std::copy(w.begin(), w.end(), p.begin());
  std::copy(b.begin(), b.end(), p.begin() + static_cast<std::ptrdiff_t>(nw));
  return m;
}

}  // namespace bpd
