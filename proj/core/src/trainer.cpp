#include "bpd/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <ostream>

#include "bpd/maxent.hpp"
#include "bpd/rollout.hpp"

namespace bpd {

namespace {

constexpr int kExactReturnStateCap = 512;

struct Episode {
  PgEpisode pg;
  TabularPolicy policy;
  std::vector<int> view_states;
};

Episode collect_episode(const LatentPolicyModel& model, const Discriminator& disc, const TabularMDP& mdp,
                        const LatentSample& sample, const TrainConfig& cfg, double beta) {
  Episode ep{{}, model.policy(sample.z), {}};
  Rng rng(sample.episode_seed);
  const Trajectory traj = rollout(mdp, ep.policy, cfg.horizon, rng);
  ep.pg.steps.reserve(traj.length());
  for (const Step& st : traj.steps) {
    ep.pg.steps.push_back({st.state, st.action, beta * mdp.reward(st.state, st.action),
                           std::log(ep.policy.prob(st.state, st.action))});
  }
  if (disc.config().mode == DiscriminatorMode::kWindow) {
    Rng window_rng(derive_seed(sample.episode_seed, "window"));
    ep.view_states = disc.window_states(traj, window_rng);
  } else {
    ep.view_states = table_view(ep.policy).states;
  }
  return ep;
}

std::vector<std::size_t> canonical_order(std::span<const LatentSample> samples) {
  std::vector<std::size_t> order(samples.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    const auto& x = samples[a];
    const auto& y = samples[b];
    if (x.z != y.z) return x.z < y.z;
    return x.episode_seed < y.episode_seed;
  });
  return order;
}

std::vector<std::vector<double>> batch_advantages(const std::vector<Episode>& episodes, std::span<const double> values,
                                                  const TabularMDP& mdp, const TrainConfig& cfg) {
  std::vector<std::vector<double>> adv;
  adv.reserve(episodes.size());
  for (const auto& ep : episodes) {
    adv.push_back(step_advantages(ep.pg, values, mdp.discount(), cfg.gae_lambda, cfg.variant));
  }
  return adv;
}

void sample_gradient(const LatentPolicyModel& model, const Discriminator& disc, const LatentSample& sample,
                     const Episode& ep, const std::vector<double>& adv, bool surrogate, const TrainConfig& cfg,
                     double scale, std::span<double> grad) {
  const int na = model.num_actions();
  std::vector<double> probs(static_cast<std::size_t>(na));
  std::vector<double> dlogits(static_cast<std::size_t>(na));
  for (std::size_t t = 0; t < ep.pg.steps.size(); ++t) {
    const PgStep& st = ep.pg.steps[t];
    model.action_probs(st.state, sample.z, probs);
    if (surrogate) {
      clipped_surrogate_logit_grad(probs, st.action, st.log_prob, adv[t] * scale, cfg.clip_epsilon, dlogits);
    } else {
      reinforce_logit_grad(probs, st.action, adv[t] * scale, dlogits);
    }
    model.accumulate_logit_grad(st.state, sample.z, dlogits, grad);
  }
  // Pathwise term: -d at the episode's view states, through the softmax.
  const TabularPolicy pi = surrogate ? model.policy(sample.z) : ep.policy;
  const PolicyView view = window_view(pi, ep.view_states);
  std::vector<double> dd(view.probs.size());
  disc.score_logit_grad(view, dd);
  for (std::size_t i = 0; i < view.states.size(); ++i) {
    for (int a = 0; a < na; ++a) dlogits[static_cast<std::size_t>(a)] = -scale * dd[i * static_cast<std::size_t>(na) + static_cast<std::size_t>(a)];
    model.accumulate_logit_grad(view.states[i], sample.z, dlogits, grad);
  }
}

std::vector<double> combine(const LatentPolicyModel& model, const Discriminator& disc,
                            std::span<const LatentSample> sorted, const std::vector<Episode>& episodes,
                            const std::vector<std::vector<double>>& adv, bool surrogate, const TrainConfig& cfg) {
  std::vector<double> total(model.num_params(), 0.0);
  std::vector<double> local(model.num_params());
  const double scale = 1.0 / static_cast<double>(sorted.size());
  for (std::size_t i = 0; i < sorted.size(); ++i) {
    std::fill(local.begin(), local.end(), 0.0);
    sample_gradient(model, disc, sorted[i], episodes[i], adv[i], surrogate, cfg, scale, local);
    for (std::size_t k = 0; k < total.size(); ++k) total[k] += local[k];
  }
  return total;
}

double mean_return(const TabularMDP& mdp, const std::vector<Episode>& episodes, double beta) {
  double acc = 0.0;
  for (const auto& ep : episodes) {
    if (mdp.num_states() <= kExactReturnStateCap) {
      acc += policy_return(mdp, ep.policy);
    } else {
      double w = mdp.discount();
      for (const auto& st : ep.pg.steps) {
        acc += w * (beta != 0.0 ? st.reward / beta : mdp.reward(st.state, st.action));
        w *= mdp.discount();
      }
    }
  }
  return acc / static_cast<double>(episodes.size());
}

}  // namespace

void TrainConfig::validate() const {
  if (!(beta >= 0.0) || !std::isfinite(beta)) throw std::invalid_argument("train.beta must be finite and >= 0");
  if (latent_dim < 1) throw std::invalid_argument("train.latent_dim must be >= 1");
  if (!(init_weight_scale >= 0.0)) throw std::invalid_argument("train.init_weight_scale must be >= 0");
  if (iterations < 0) throw std::invalid_argument("train.iterations must be >= 0");
  if (policies_per_batch < 2) throw std::invalid_argument("train.policies_per_batch (M) must be >= 2");
  if (horizon < 1) throw std::invalid_argument("train.horizon must be >= 1");
  if (!(learning_rate > 0.0)) throw std::invalid_argument("train.learning_rate must be > 0");
  if (!(critic_learning_rate > 0.0 && critic_learning_rate <= 1.0)) {
    throw std::invalid_argument("train.critic_learning_rate must lie in (0, 1]");
  }
  if (!(gae_lambda >= 0.0 && gae_lambda <= 1.0)) throw std::invalid_argument("train.gae_lambda must lie in [0, 1]");
  if (!(clip_epsilon > 0.0)) throw std::invalid_argument("train.clip_epsilon must be > 0");
  if (surrogate_epochs < 1) throw std::invalid_argument("train.surrogate_epochs must be >= 1");
  if (disc_steps_per_update < 1) throw std::invalid_argument("train.disc_steps_per_update must be >= 1");
  if (disc_batch < 1) throw std::invalid_argument("train.disc_batch must be >= 1");
  if (disc_warmup_steps < 0) throw std::invalid_argument("train.disc_warmup_steps must be >= 0");
  if (beta_warmup_iters < 0) throw std::invalid_argument("train.beta_warmup_iters must be >= 0");
  if (!(adam_beta1 >= 0.0 && adam_beta1 < 1.0)) throw std::invalid_argument("train.adam_beta1 must lie in [0, 1)");
  discriminator.validate();
  if (discriminator.mode == DiscriminatorMode::kWindow && discriminator.window > horizon) {
    throw std::invalid_argument("train.horizon must be >= discriminator.window in window mode");
  }
}

Json train_config_to_json(const TrainConfig& cfg) {
  return Json{{"beta", cfg.beta},
              {"latent_dim", cfg.latent_dim},
              {"init_weight_scale", cfg.init_weight_scale},
              {"init_bias_from_maxent", cfg.init_bias_from_maxent},
              {"iterations", cfg.iterations},
              {"policies_per_batch", cfg.policies_per_batch},
              {"horizon", cfg.horizon},
              {"variant", to_string(cfg.variant)},
              {"learning_rate", cfg.learning_rate},
              {"critic_learning_rate", cfg.critic_learning_rate},
              {"grad_clip", cfg.grad_clip},
              {"gae_lambda", cfg.gae_lambda},
              {"clip_epsilon", cfg.clip_epsilon},
              {"surrogate_epochs", cfg.surrogate_epochs},
              {"disc_steps_per_update", cfg.disc_steps_per_update},
              {"disc_batch", cfg.disc_batch},
              {"disc_warmup_steps", cfg.disc_warmup_steps},
              {"beta_warmup_iters", cfg.beta_warmup_iters},
              {"adam_beta1", cfg.adam_beta1},
              {"discriminator",
               {{"mode", to_string(cfg.discriminator.mode)},
                {"hidden", cfg.discriminator.hidden},
                {"window", cfg.discriminator.window},
                {"window_horizon", cfg.discriminator.window_horizon},
                {"prob_floor", cfg.discriminator.prob_floor},
                {"learning_rate", cfg.discriminator.adam.learning_rate}}},
              {"seed", cfg.seed}};
}

TrainConfig train_config_from_json(const Json& doc) {
  TrainConfig cfg;
  cfg.beta = doc.value("beta", cfg.beta);
  cfg.latent_dim = doc.value("latent_dim", cfg.latent_dim);
  cfg.init_weight_scale = doc.value("init_weight_scale", cfg.init_weight_scale);
  cfg.init_bias_from_maxent = doc.value("init_bias_from_maxent", cfg.init_bias_from_maxent);
  cfg.iterations = doc.value("iterations", cfg.iterations);
  cfg.policies_per_batch = doc.value("policies_per_batch", cfg.policies_per_batch);
  cfg.horizon = doc.value("horizon", cfg.horizon);
  if (doc.contains("variant")) cfg.variant = parse_pg_variant(doc.at("variant").get<std::string>());
  cfg.learning_rate = doc.value("learning_rate", cfg.learning_rate);
  cfg.critic_learning_rate = doc.value("critic_learning_rate", cfg.critic_learning_rate);
  cfg.grad_clip = doc.value("grad_clip", cfg.grad_clip);
  cfg.gae_lambda = doc.value("gae_lambda", cfg.gae_lambda);
  cfg.clip_epsilon = doc.value("clip_epsilon", cfg.clip_epsilon);
  cfg.surrogate_epochs = doc.value("surrogate_epochs", cfg.surrogate_epochs);
  cfg.disc_steps_per_update = doc.value("disc_steps_per_update", cfg.disc_steps_per_update);
  cfg.disc_batch = doc.value("disc_batch", cfg.disc_batch);
  cfg.disc_warmup_steps = doc.value("disc_warmup_steps", cfg.disc_warmup_steps);
  cfg.beta_warmup_iters = doc.value("beta_warmup_iters", cfg.beta_warmup_iters);
  cfg.adam_beta1 = doc.value("adam_beta1", cfg.adam_beta1);
  if (doc.contains("discriminator")) {
    const Json& d = doc.at("discriminator");
    if (d.contains("mode")) cfg.discriminator.mode = parse_discriminator_mode(d.at("mode").get<std::string>());
    cfg.discriminator.hidden = d.value("hidden", cfg.discriminator.hidden);
    cfg.discriminator.window = d.value("window", cfg.discriminator.window);
    cfg.discriminator.window_horizon = d.value("window_horizon", cfg.discriminator.window_horizon);
    cfg.discriminator.prob_floor = d.value("prob_floor", cfg.discriminator.prob_floor);
    cfg.discriminator.adam.learning_rate = d.value("learning_rate", cfg.discriminator.adam.learning_rate);
  }
  cfg.seed = doc.value("seed", cfg.seed);
  return cfg;
}

std::vector<double> batch_gradient(const LatentPolicyModel& model, const Discriminator& disc, const TabularMDP& mdp,
                                   std::span<const LatentSample> samples, std::span<const double> critic_values,
                                   const TrainConfig& cfg) {
  if (samples.empty()) throw std::invalid_argument("batch_gradient: empty batch");
  const auto order = canonical_order(samples);
  std::vector<LatentSample> sorted;
  std::vector<Episode> episodes;
  for (std::size_t i : order) {
    sorted.push_back(samples[i]);
    episodes.push_back(collect_episode(model, disc, mdp, samples[i], cfg, cfg.beta));
  }
  const auto adv = batch_advantages(episodes, critic_values, mdp, cfg);
  return combine(model, disc, sorted, episodes, adv, cfg.variant == PgVariant::kClippedSurrogate, cfg);
}

TrainResult train_bpd(const TabularMDP& mdp, const BaseMeasureConfig& base, const TrainConfig& cfg) {
  base.validate();
  cfg.validate();
  const int ns = mdp.num_states();
  const int na = mdp.num_actions();
  const int m = cfg.policies_per_batch;

  Rng init_rng = make_rng(cfg.seed, "init");
  TrainResult result;
  result.model = LatentPolicyModel::initialized(ns, na, cfg.latent_dim, init_rng, cfg.init_weight_scale);
  if (cfg.init_bias_from_maxent) {
    const auto sol = soft_value_iteration(mdp, cfg.beta);
    auto params = result.model.params();
    for (int s = 0; s < ns; ++s)
      for (int a = 0; a < na; ++a)
        params[result.model.bias_index(s, a)] = std::log(std::max(sol.policy.prob(s, a), 1e-12));
  }
  DiscriminatorConfig dcfg = cfg.discriminator;
  dcfg.adam.beta1 = cfg.adam_beta1;
  result.discriminator = Discriminator(ns, na, dcfg, init_rng);
  LatentPolicyModel& model = result.model;
  Discriminator& disc = result.discriminator;

  Adam policy_opt(model.num_params(), AdamConfig{cfg.learning_rate, cfg.adam_beta1, 0.999, 1e-8});
  TabularCritic critic(ns, cfg.critic_learning_rate);
  Rng latent_rng = make_rng(cfg.seed, "latent");
  Rng disc_rng = make_rng(cfg.seed, "discriminator");
  Rng base_rng = make_rng(cfg.seed, "base");
  const std::uint64_t episode_stream = derive_seed(cfg.seed, "episodes");

  const int nd = cfg.disc_batch;
  std::vector<PolicyView> q_views(static_cast<std::size_t>(nd));
  std::vector<PolicyView> b_views(static_cast<std::size_t>(nd));
  auto disc_step = [&]() {
    // Base policies are inspected at the states of the paired q view.
    for (std::size_t i = 0; i < q_views.size(); ++i) {
      q_views[i] = disc.view(sample_policy(model, disc_rng).policy, mdp, disc_rng);
      b_views[i] = window_view(sample_base_policy(ns, na, base, base_rng), q_views[i].states);
    }
    double q_mean = 0.0;
    for (const auto& v : q_views) q_mean += disc.score(v);
    q_mean /= nd;
    const double loss = disc.update(q_views, b_views);
    return std::pair<double, double>{loss, q_mean};
  };
  for (int i = 0; i < cfg.disc_warmup_steps; ++i) disc_step();

  std::vector<LatentSample> samples(static_cast<std::size_t>(m));
  for (int it = 1; it <= cfg.iterations; ++it) {
    const std::uint64_t iter_seed = derive_seed(episode_stream, static_cast<std::uint64_t>(it));
    for (int i = 0; i < m; ++i) {
      samples[static_cast<std::size_t>(i)] = {sample_latent(cfg.latent_dim, latent_rng),
                                              derive_seed(iter_seed, static_cast<std::uint64_t>(i))};
    }
    const double beta = cfg.beta_warmup_iters > 0
                            ? cfg.beta * std::min(1.0, static_cast<double>(it) / cfg.beta_warmup_iters)
                            : cfg.beta;
    const auto order = canonical_order(samples);
    std::vector<LatentSample> sorted;
    std::vector<Episode> episodes;
    for (std::size_t i : order) {
      sorted.push_back(samples[i]);
      episodes.push_back(collect_episode(model, disc, mdp, samples[i], cfg, beta));
    }
    const auto adv = batch_advantages(episodes, critic.values(), mdp, cfg);
    const bool surrogate = cfg.variant == PgVariant::kClippedSurrogate;
    const int epochs = surrogate ? cfg.surrogate_epochs : 1;
    for (int e = 0; e < epochs; ++e) {
      auto grad = combine(model, disc, sorted, episodes, adv, surrogate, cfg);
      for (double g : grad) {
        if (!std::isfinite(g)) throw TrainingDiverged("train_bpd: non-finite policy gradient", result.log);
      }
      clip_global_norm(grad, cfg.grad_clip);
      for (double& g : grad) g = -g;
      policy_opt.step(model.params(), grad);
    }
    std::vector<PgEpisode> pg;
    pg.reserve(episodes.size());
    for (const auto& ep : episodes) pg.push_back(ep.pg);
    critic.fit(pg, mdp.discount());

    TrainLogRow row;
    row.iter = it;
    row.mean_j = mean_return(mdp, episodes, beta);
    for (int k = 0; k < cfg.disc_steps_per_update; ++k) {
      const auto [loss, q_mean] = disc_step();
      if (k == 0) {
        row.disc_loss = loss;
        row.kl_estimate = q_mean;
      }
    }
    row.objective = cfg.beta * row.mean_j - row.kl_estimate;
    result.log.push_back(row);
    if (!std::isfinite(row.objective)) throw TrainingDiverged("train_bpd: objective is not finite", result.log);
    if (row.kl_estimate > 1e3) throw TrainingDiverged("train_bpd: KL estimate exceeded 1e3", result.log);
  }
  return result;
}

void write_train_log_csv(std::ostream& out, std::span<const TrainLogRow> log) {
  out << "iter,mean_J,kl_estimate,disc_loss\n";
  for (const auto& r : log) {
    out << r.iter << ',' << format_double(r.mean_j) << ',' << format_double(r.kl_estimate) << ','
        << format_double(r.disc_loss) << '\n';
  }
}

}  // namespace bpd
