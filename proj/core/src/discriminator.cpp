#include "bpd/discriminator.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "bpd/rollout.hpp"

namespace bpd {

namespace {

// log(1 + e^x) without overflow.
double softplus(double x) { return x > 0.0 ? x + std::log1p(std::exp(-x)) : std::log1p(std::exp(x)); }
double sigmoid(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

}  // namespace

DiscriminatorMode parse_discriminator_mode(const std::string& name) {
  if (name == "full-table") return DiscriminatorMode::kFullTable;
  if (name == "window") return DiscriminatorMode::kWindow;
  throw std::invalid_argument("unknown discriminator mode '" + name + "' (expected full-table or window)");
}

std::string to_string(DiscriminatorMode mode) {
  return mode == DiscriminatorMode::kFullTable ? "full-table" : "window";
}

void DiscriminatorConfig::validate() const {
  if (hidden < 1) throw std::invalid_argument("discriminator.hidden must be >= 1");
  if (window < 1) throw std::invalid_argument("discriminator.window must be >= 1");
  if (window_horizon < window) throw std::invalid_argument("discriminator.window_horizon must be >= discriminator.window");
  if (!(prob_floor > 0.0 && prob_floor < 1.0)) throw std::invalid_argument("discriminator.prob_floor must lie in (0, 1)");
  if (!(adam.learning_rate > 0.0)) throw std::invalid_argument("discriminator learning rate must be > 0");
}

PolicyView table_view(const TabularPolicy& policy) {
  PolicyView v;
  v.states.resize(static_cast<std::size_t>(policy.num_states()));
  for (int s = 0; s < policy.num_states(); ++s) v.states[static_cast<std::size_t>(s)] = s;
  v.probs.assign(policy.probs().begin(), policy.probs().end());
  return v;
}

PolicyView window_view(const TabularPolicy& policy, std::span<const int> states) {
  PolicyView v;
  v.states.assign(states.begin(), states.end());
  v.probs.reserve(states.size() * static_cast<std::size_t>(policy.num_actions()));
  for (int s : states) {
    if (s < 0 || s >= policy.num_states()) throw std::out_of_range("window_view: state out of range");
    const auto row = policy.row(s);
    v.probs.insert(v.probs.end(), row.begin(), row.end());
  }
  return v;
}

Discriminator::Discriminator(int num_states, int num_actions, DiscriminatorConfig cfg, Rng& rng)
    : cfg_(cfg), num_states_(num_states), num_actions_(num_actions) {
  cfg_.validate();
  if (num_states <= 0 || num_actions <= 0) throw std::invalid_argument("Discriminator: dimensions must be positive");
  params_.assign(total_params(), 0.0);
  std::normal_distribution<double> a1(0.0, 1.0 / std::sqrt(static_cast<double>(num_actions + 1)));
  std::normal_distribution<double> hh(0.0, 1.0 / std::sqrt(static_cast<double>(cfg_.hidden)));
  for (std::size_t i = a1_offset(); i < c1_offset(); ++i) params_[i] = a1(rng);
  for (std::size_t i = b_offset(); i < c2_offset(); ++i) params_[i] = hh(rng);
  for (std::size_t i = w2_offset(); i < b2_offset(); ++i) params_[i] = hh(rng);
  adam_ = Adam(params_.size(), cfg_.adam);
}

std::vector<int> Discriminator::window_states(const Trajectory& trajectory, Rng& rng) const {
  const auto k = static_cast<std::size_t>(cfg_.window);
  const std::size_t span = std::min(trajectory.length(), static_cast<std::size_t>(cfg_.window_horizon));
  if (span < k) throw std::invalid_argument("Discriminator: trajectory shorter than the window");
  const std::size_t offset = std::uniform_int_distribution<std::size_t>(0, span - k)(rng);
  std::vector<int> states(k);
  for (std::size_t i = 0; i < k; ++i) states[i] = trajectory.steps[offset + i].state;
  return states;
}

std::vector<int> Discriminator::view_states(const TabularPolicy& policy, const TabularMDP& mdp, Rng& rng) const {
  if (cfg_.mode == DiscriminatorMode::kFullTable) return table_view(policy).states;
  return window_states(rollout(mdp, policy, cfg_.window_horizon, rng), rng);
}

PolicyView Discriminator::view(const TabularPolicy& policy, const TabularMDP& mdp, Rng& rng) const {
  if (policy.num_states() != num_states_ || policy.num_actions() != num_actions_) {
    throw std::invalid_argument("Discriminator: policy shape mismatch");
  }
  if (cfg_.mode == DiscriminatorMode::kFullTable) return table_view(policy);
  return window_view(policy, view_states(policy, mdp, rng));
}

void Discriminator::forward(const PolicyView& view, Forward& f) const {
  const std::size_t n = view.states.size();
  const std::size_t na = static_cast<std::size_t>(num_actions_);
  const std::size_t nh = hidden();
  const std::size_t din = in_dim();
  if (n == 0 || view.probs.size() != n * na) throw std::invalid_argument("Discriminator: malformed policy view");
  const double scale = -std::log(cfg_.prob_floor);
  f.phi.resize(n * na);
  f.h1.resize(n * nh);
  f.pooled.assign(nh, 0.0);
  f.mean_phi.assign(na, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    const int s = view.states[i];
    if (s < 0 || s >= num_states_) throw std::out_of_range("Discriminator: state out of range");
    for (std::size_t a = 0; a < na; ++a) {
      const double v = std::log(std::max(view.probs[i * na + a], cfg_.prob_floor)) / scale;
      f.phi[i * na + a] = v;
      f.mean_phi[a] += v;
    }
    for (std::size_t j = 0; j < nh; ++j) {
      const double* row = params_.data() + a1_offset() + j * din;
      double acc = params_[c1_offset() + j] + row[static_cast<std::size_t>(s)];
      for (std::size_t a = 0; a < na; ++a) acc += row[static_cast<std::size_t>(num_states_) + a] * f.phi[i * na + a];
      const double h = std::tanh(acc);
      f.h1[i * nh + j] = h;
      f.pooled[j] += h;
    }
  }
  const double inv_n = 1.0 / static_cast<double>(n);
  for (double& v : f.pooled) v *= inv_n;
  for (double& v : f.mean_phi) v *= inv_n;
  f.h2.resize(nh);
  double out = params_[b2_offset()];
  for (std::size_t k = 0; k < nh; ++k) {
    const double* row = params_.data() + b_offset() + k * nh;
    double acc = params_[c2_offset() + k];
    for (std::size_t j = 0; j < nh; ++j) acc += row[j] * f.pooled[j];
    f.h2[k] = std::tanh(acc);
    out += params_[w2_offset() + k] * f.h2[k];
  }
  for (std::size_t a = 0; a < na; ++a) out += params_[u_offset() + a] * f.mean_phi[a];
  f.out = out;
}

void Discriminator::backward(const PolicyView& view, const Forward& f, double scale, std::span<double> dphi,
                             std::span<double> grad) const {
  const std::size_t n = view.states.size();
  const std::size_t na = static_cast<std::size_t>(num_actions_);
  const std::size_t nh = hidden();
  const std::size_t din = in_dim();
  const double inv_n = 1.0 / static_cast<double>(n);
  const bool want_params = !grad.empty();
  const bool want_input = !dphi.empty();

  std::vector<double> dpooled(nh, 0.0);
  if (want_params) {
    grad[b2_offset()] += scale;
    for (std::size_t a = 0; a < na; ++a) grad[u_offset() + a] += scale * f.mean_phi[a];
  }
  for (std::size_t k = 0; k < nh; ++k) {
    const double dpre = scale * params_[w2_offset() + k] * (1.0 - f.h2[k] * f.h2[k]);
    const double* row = params_.data() + b_offset() + k * nh;
    if (want_params) {
      grad[w2_offset() + k] += scale * f.h2[k];
      grad[c2_offset() + k] += dpre;
      double* g = grad.data() + b_offset() + k * nh;
      for (std::size_t j = 0; j < nh; ++j) g[j] += dpre * f.pooled[j];
    }
    for (std::size_t j = 0; j < nh; ++j) dpooled[j] += dpre * row[j];
  }
  for (std::size_t i = 0; i < n; ++i) {
    const auto s = static_cast<std::size_t>(view.states[i]);
    if (want_input) {
      for (std::size_t a = 0; a < na; ++a) dphi[i * na + a] = scale * params_[u_offset() + a] * inv_n;
    }
    for (std::size_t j = 0; j < nh; ++j) {
      const double h = f.h1[i * nh + j];
      const double dpre = dpooled[j] * inv_n * (1.0 - h * h);
      if (dpre == 0.0) continue;
      const double* row = params_.data() + a1_offset() + j * din;
      if (want_params) {
        grad[c1_offset() + j] += dpre;
        double* g = grad.data() + a1_offset() + j * din;
        g[s] += dpre;
        for (std::size_t a = 0; a < na; ++a) g[static_cast<std::size_t>(num_states_) + a] += dpre * f.phi[i * na + a];
      }
      if (want_input) {
        for (std::size_t a = 0; a < na; ++a) dphi[i * na + a] += dpre * row[static_cast<std::size_t>(num_states_) + a];
      }
    }
  }
}

double Discriminator::score(const PolicyView& view) const {
  Forward f;
  forward(view, f);
  return f.out;
}

double Discriminator::score_logit_grad(const PolicyView& view, std::span<double> dlogits) const {
  Forward f;
  forward(view, f);
  const std::size_t na = static_cast<std::size_t>(num_actions_);
  const std::size_t n = view.states.size();
  if (dlogits.size() != n * na) throw std::invalid_argument("score_logit_grad: output size mismatch");
  std::vector<double> dphi(n * na, 0.0);
  backward(view, f, 1.0, dphi, {});
  const double scale = -std::log(cfg_.prob_floor);
  for (std::size_t i = 0; i < n; ++i) {
    double total = 0.0;
    for (std::size_t a = 0; a < na; ++a) {
      // Clamped entries have zero derivative.
      if (view.probs[i * na + a] <= cfg_.prob_floor) dphi[i * na + a] = 0.0;
      total += dphi[i * na + a];
    }
    for (std::size_t b = 0; b < na; ++b) {
      dlogits[i * na + b] = (dphi[i * na + b] - view.probs[i * na + b] * total) / scale;
    }
  }
  return f.out;
}

void Discriminator::accumulate_param_grad(const PolicyView& view, double scale, std::span<double> grad) const {
  Forward f;
  forward(view, f);
  backward(view, f, scale, {}, grad);
}

double discriminator_loss(const Discriminator& disc, std::span<const PolicyView> q_views,
                          std::span<const PolicyView> base_views) {
  if (q_views.empty() || base_views.empty()) throw std::invalid_argument("discriminator_loss: empty batch");
  double lq = 0.0;
  for (const auto& v : q_views) lq += softplus(-disc.score(v));
  double lb = 0.0;
  for (const auto& v : base_views) lb += softplus(disc.score(v));
  return lq / static_cast<double>(q_views.size()) + lb / static_cast<double>(base_views.size());
}

void Discriminator::set_learning_rate(double lr) {
  if (!(lr > 0.0)) throw std::invalid_argument("Discriminator: learning rate must be > 0");
  cfg_.adam.learning_rate = lr;
  adam_.set_learning_rate(lr);
}

double Discriminator::update(std::span<const PolicyView> q_views, std::span<const PolicyView> base_views) {
  if (q_views.empty() || base_views.empty()) throw std::invalid_argument("discriminator_update: empty batch");
  std::vector<double> grad(params_.size(), 0.0);
  Forward f;
  double lq = 0.0;
  const double nq = static_cast<double>(q_views.size());
  for (const auto& v : q_views) {
    forward(v, f);
    lq += softplus(-f.out);
    backward(v, f, -sigmoid(-f.out) / nq, {}, grad);
  }
  double lb = 0.0;
  const double nb = static_cast<double>(base_views.size());
  for (const auto& v : base_views) {
    forward(v, f);
    lb += softplus(f.out);
    backward(v, f, sigmoid(f.out) / nb, {}, grad);
  }
  const double loss = lq / nq + lb / nb;
  if (!std::isfinite(loss)) throw std::runtime_error("discriminator_update: non-finite loss " + std::to_string(loss));
  for (std::size_t i = 0; i < grad.size(); ++i) {
    if (!std::isfinite(grad[i])) {
      throw std::runtime_error("discriminator_update: non-finite gradient at parameter " + std::to_string(i) +
                               " (loss " + std::to_string(loss) + ")");
    }
  }
  adam_.step(params_, grad);
  return loss;
}

double kl_estimate(const Discriminator& disc, const PolicySampler& sampler, const TabularMDP& mdp, int num_samples,
                   Rng& rng) {
  if (num_samples < 1) throw std::invalid_argument("kl_estimate: num_samples must be >= 1");
  double acc = 0.0;
  for (int i = 0; i < num_samples; ++i) acc += disc.score(disc.view(sampler(rng), mdp, rng));
  return acc / num_samples;
}

double kl_estimate(const Discriminator& disc, const LatentPolicyModel& model, const TabularMDP& mdp, int num_samples,
                   Rng& rng) {
  return kl_estimate(disc, [&model](Rng& r) { return sample_policy(model, r).policy; }, mdp, num_samples, rng);
}

Json discriminator_to_json(const Discriminator& disc) {
  return Json{{"type", "discriminator"},
              {"mode", to_string(disc.cfg_.mode)},
              {"num_states", disc.num_states_},
              {"num_actions", disc.num_actions_},
              {"hidden", disc.cfg_.hidden},
              {"window", disc.cfg_.window},
              {"window_horizon", disc.cfg_.window_horizon},
              {"prob_floor", disc.cfg_.prob_floor},
              {"params", disc.params_}};
}

Discriminator discriminator_from_json(const Json& doc) {
  DiscriminatorConfig cfg;
  cfg.mode = parse_discriminator_mode(doc.at("mode").get<std::string>());
  cfg.hidden = doc.at("hidden").get<int>();
  cfg.window = doc.at("window").get<int>();
  cfg.window_horizon = doc.value("window_horizon", cfg.window_horizon);
  cfg.prob_floor = doc.at("prob_floor").get<double>();
  Rng rng(0);
  Discriminator disc(doc.at("num_states").get<int>(), doc.at("num_actions").get<int>(), cfg, rng);
  auto p = doc.at("params").get<std::vector<double>>();
  if (p.size() != disc.params_.size()) throw std::invalid_argument("discriminator json: wrong parameter count");
  disc.params_ = std::move(p);
  return disc;
}

}  // namespace bpd
