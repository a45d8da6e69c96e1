#include "bpd/mfvi.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

namespace bpd {

namespace {

void check_noise(const MFVIState& state, std::span<const double> noise) {
  if (noise.empty() || noise.size() % state.mu.size() != 0) {
    throw std::invalid_argument("mfvi: noise must hold a whole number of latent draws");
  }
}

}  // namespace

MFVIState MFVIState::prior(int latent_dim) {
  if (latent_dim < 1) throw std::invalid_argument("MFVIState: latent_dim must be >= 1");
  MFVIState s;
  s.mu.assign(static_cast<std::size_t>(latent_dim), 0.0);
  s.sigma.assign(static_cast<std::size_t>(latent_dim), 1.0);
  return s;
}

void MFVIState::validate() const {
  if (mu.empty() || mu.size() != sigma.size()) throw std::invalid_argument("MFVIState: mu and sigma sizes differ");
  for (std::size_t i = 0; i < mu.size(); ++i) {
    if (!std::isfinite(mu[i]) || !std::isfinite(sigma[i]) || !(sigma[i] > 0.0)) {
      throw std::invalid_argument("MFVIState: entries must be finite with sigma > 0");
    }
  }
}

void MfviConfig::validate() const {
  if (sgd_steps < 1) throw std::invalid_argument("mfvi.sgd_steps must be >= 1");
  if (!(learning_rate > 0.0)) throw std::invalid_argument("mfvi.learning_rate must be > 0");
  if (mc_samples < 1) throw std::invalid_argument("mfvi.mc_samples must be >= 1");
}

double gaussian_kl(const MFVIState& state) {
  double kl = 0.0;
  for (std::size_t i = 0; i < state.mu.size(); ++i) {
    const double s2 = state.sigma[i] * state.sigma[i];
    kl += 0.5 * (s2 + state.mu[i] * state.mu[i] - 1.0 - std::log(s2));
  }
  return kl;
}

double elbo(const LatentPolicyModel& model, const MFVIState& state, const Trajectory& prefix,
            std::span<const double> noise) {
  check_noise(state, noise);
  const std::size_t n = state.mu.size();
  const std::size_t draws = noise.size() / n;
  std::vector<double> z(n);
  double ll = 0.0;
  for (std::size_t m = 0; m < draws; ++m) {
    for (std::size_t i = 0; i < n; ++i) z[i] = state.mu[i] + state.sigma[i] * noise[m * n + i];
    for (const Step& st : prefix.steps) ll += model.log_prob(st.state, st.action, z);
  }
  return ll / static_cast<double>(draws) - gaussian_kl(state);
}

void elbo_gradient(const LatentPolicyModel& model, const MFVIState& state, const Trajectory& prefix,
                   std::span<const double> noise, std::span<double> grad_mu, std::span<double> grad_log_sigma) {
  check_noise(state, noise);
  const std::size_t n = state.mu.size();
  if (grad_mu.size() != n || grad_log_sigma.size() != n) throw std::invalid_argument("elbo_gradient: size mismatch");
  if (static_cast<std::size_t>(model.latent_dim()) != n) throw std::invalid_argument("elbo_gradient: latent_dim mismatch");
  const std::size_t draws = noise.size() / n;
  std::vector<double> z(n);
  std::vector<double> gz(n);
  std::vector<double> acc(n);
  std::fill(grad_mu.begin(), grad_mu.end(), 0.0);
  std::fill(grad_log_sigma.begin(), grad_log_sigma.end(), 0.0);
  for (std::size_t m = 0; m < draws; ++m) {
    const double* eps = noise.data() + m * n;
    for (std::size_t i = 0; i < n; ++i) z[i] = state.mu[i] + state.sigma[i] * eps[i];
    std::fill(acc.begin(), acc.end(), 0.0);
    for (const Step& st : prefix.steps) {
      model.log_prob_latent_grad(st.state, st.action, z, gz);
      for (std::size_t i = 0; i < n; ++i) acc[i] += gz[i];
    }
    for (std::size_t i = 0; i < n; ++i) {
      grad_mu[i] += acc[i];
      grad_log_sigma[i] += acc[i] * eps[i] * state.sigma[i];
    }
  }
  for (std::size_t i = 0; i < n; ++i) {
    grad_mu[i] = grad_mu[i] / static_cast<double>(draws) - state.mu[i];
    grad_log_sigma[i] = grad_log_sigma[i] / static_cast<double>(draws) - (state.sigma[i] * state.sigma[i] - 1.0);
  }
}

MFVIState mfvi_update(const LatentPolicyModel& model, MFVIState state, const Trajectory& prefix,
                      const MfviConfig& cfg, Rng& rng) {
  cfg.validate();
  state.validate();
  const std::size_t n = state.mu.size();
  std::vector<double> noise(n * static_cast<std::size_t>(cfg.mc_samples));
  std::vector<double> g_mu(n);
  std::vector<double> g_ls(n);
  for (int step = 0; step < cfg.sgd_steps; ++step) {
    for (double& e : noise) e = standard_normal(rng);
    elbo_gradient(model, state, prefix, noise, g_mu, g_ls);
    for (std::size_t i = 0; i < n; ++i) {
      if (!std::isfinite(g_mu[i]) || !std::isfinite(g_ls[i])) {
        throw std::runtime_error("mfvi_update: non-finite ELBO gradient at step " + std::to_string(state.steps));
      }
      state.mu[i] += cfg.learning_rate * g_mu[i];
      state.sigma[i] = std::max(kMfviSigmaFloor, state.sigma[i] * std::exp(cfg.learning_rate * g_ls[i]));
    }
    ++state.steps;
  }
  return state;
}

std::vector<double> posterior_predict(const LatentPolicyModel& model, const MFVIState& state, int query_state,
                                      int mc_samples, Rng& rng) {
  if (mc_samples < 1) throw std::invalid_argument("posterior_predict: mc_samples must be >= 1");
  const std::size_t n = state.mu.size();
  std::vector<double> z(n);
  std::vector<double> p(static_cast<std::size_t>(model.num_actions()));
  std::vector<double> out(p.size(), 0.0);
  for (int m = 0; m < mc_samples; ++m) {
    for (std::size_t i = 0; i < n; ++i) z[i] = state.mu[i] + state.sigma[i] * standard_normal(rng);
    model.action_probs(query_state, z, p);
    for (std::size_t a = 0; a < p.size(); ++a) out[a] += p[a];
  }
  for (double& v : out) v /= mc_samples;
  return out;
}

}  // namespace bpd
