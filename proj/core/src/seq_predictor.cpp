#include "bpd/seq_predictor.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

#include "bpd/optim.hpp"
#include "bpd/parallel.hpp"
#include "bpd/rollout.hpp"

namespace bpd {

namespace {

using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using ConstMat = Eigen::Map<const RowMat>;
using Mat = Eigen::Map<RowMat>;
using ConstVec = Eigen::Map<const Eigen::VectorXd>;
using Vec = Eigen::Map<Eigen::VectorXd>;

Eigen::VectorXd sigmoid(const Eigen::VectorXd& x) { return (1.0 + (-x.array()).exp()).inverse().matrix(); }

void softmax_inplace(Eigen::VectorXd& v) {
  v.array() -= v.maxCoeff();
  v = v.array().exp().matrix();
  v /= v.sum();
}

struct StepCache {
  std::array<std::size_t, 3> cols{};
  Eigen::VectorXd h_prev, r, z, n, hn, h, probs;
};

}  // namespace

SeqPredictor::SeqPredictor(int num_states, int num_actions, int hidden, Rng& rng)
    : num_states_(num_states), num_actions_(num_actions), hidden_(hidden) {
  if (num_states < 1 || num_actions < 1 || hidden < 1) throw std::invalid_argument("SeqPredictor: dimensions must be >= 1");
  const Layout l = layout();
  params_.assign(l.total, 0.0);
  std::normal_distribution<double> wx(0.0, 0.5);
  std::normal_distribution<double> hh(0.0, 1.0 / std::sqrt(static_cast<double>(hidden)));
  for (std::size_t i = l.wx; i < l.u; ++i) params_[i] = wx(rng);
  for (std::size_t i = l.u; i < l.b; ++i) params_[i] = hh(rng);
  for (std::size_t i = l.wo; i < l.bo; ++i) params_[i] = hh(rng);
}

SeqPredictor::Layout SeqPredictor::layout() const {
  Layout l;
  const auto h = static_cast<std::size_t>(hidden_);
  l.in = static_cast<std::size_t>(2 * num_states_ + num_actions_ + 2);
  l.wx = 0;
  l.u = l.wx + 3 * l.in * h;
  l.b = l.u + 3 * h * h;
  l.bu = l.b + 3 * h;
  l.wo = l.bu + h;
  l.bo = l.wo + static_cast<std::size_t>(num_actions_) * h;
  l.total = l.bo + static_cast<std::size_t>(num_actions_);
  return l;
}

std::array<std::size_t, 3> SeqPredictor::input_columns(int prev_state, int prev_action, int state) const {
  if (state < 0 || state >= num_states_ || prev_state < -1 || prev_state >= num_states_ || prev_action < -1 ||
      prev_action >= num_actions_) {
    throw std::out_of_range("SeqPredictor: state or action out of range");
  }
  const auto ns = static_cast<std::size_t>(num_states_);
  const auto na = static_cast<std::size_t>(num_actions_);
  return {prev_state < 0 ? ns : static_cast<std::size_t>(prev_state),
          ns + 1 + (prev_action < 0 ? na : static_cast<std::size_t>(prev_action)),
          ns + na + 2 + static_cast<std::size_t>(state)};
}

void SeqPredictor::advance(std::span<const double> h, int prev_state, int prev_action, int state,
                           std::span<double> h_out) const {
  const Layout l = layout();
  const auto nh = static_cast<Eigen::Index>(hidden_);
  const auto hs = static_cast<std::size_t>(hidden_);
  const auto cols = input_columns(prev_state, prev_action, state);
  const ConstVec hv(h.data(), nh);
  Eigen::VectorXd pre[3];
  for (std::size_t g = 0; g < 3; ++g) {
    pre[g] = ConstVec(params_.data() + l.b + g * hs, nh);
    for (std::size_t c : cols) pre[g] += ConstVec(params_.data() + l.wx + (g * l.in + c) * hs, nh);
  }
  const Eigen::VectorXd r = sigmoid(pre[0] + ConstMat(params_.data() + l.u, nh, nh) * hv);
  const Eigen::VectorXd z = sigmoid(pre[1] + ConstMat(params_.data() + l.u + hs * hs, nh, nh) * hv);
  const Eigen::VectorXd hn = ConstMat(params_.data() + l.u + 2 * hs * hs, nh, nh) * hv + ConstVec(params_.data() + l.bu, nh);
  const Eigen::VectorXd n = (pre[2].array() + r.array() * hn.array()).tanh().matrix();
  Vec(h_out.data(), nh) = ((1.0 - z.array()) * n.array() + z.array() * hv.array()).matrix();
}

void SeqPredictor::readout(std::span<const double> h, std::span<double> probs) const {
  const Layout l = layout();
  const auto nh = static_cast<Eigen::Index>(hidden_);
  const auto na = static_cast<Eigen::Index>(num_actions_);
  Eigen::VectorXd logits = ConstMat(params_.data() + l.wo, na, nh) * ConstVec(h.data(), nh) + ConstVec(params_.data() + l.bo, na);
  softmax_inplace(logits);
  Vec(probs.data(), na) = logits;
}

double SeqPredictor::sequence_loss(std::span<const Trajectory> episodes, std::span<double> grad,
                                   std::size_t& steps) const {
  const Layout l = layout();
  const auto nh = static_cast<Eigen::Index>(hidden_);
  const auto hs = static_cast<std::size_t>(hidden_);
  const auto na = static_cast<Eigen::Index>(num_actions_);
  const bool want_grad = !grad.empty();
  if (want_grad && grad.size() != params_.size()) throw std::invalid_argument("sequence_loss: gradient size mismatch");
  const ConstMat ur(params_.data() + l.u, nh, nh);
  const ConstMat uz(params_.data() + l.u + hs * hs, nh, nh);
  const ConstMat un(params_.data() + l.u + 2 * hs * hs, nh, nh);
  const ConstMat wo(params_.data() + l.wo, na, nh);
  const ConstVec bu(params_.data() + l.bu, nh);
  const ConstVec bo(params_.data() + l.bo, na);

  double loss = 0.0;
  steps = 0;
  std::vector<StepCache> cache;
  for (const Trajectory& ep : episodes) {
    const std::size_t len = ep.length();
    cache.resize(len);
    Eigen::VectorXd h = Eigen::VectorXd::Zero(nh);
    for (std::size_t t = 0; t < len; ++t) {
      StepCache& c = cache[t];
      const int ps = t == 0 ? -1 : ep.steps[t - 1].state;
      const int pa = t == 0 ? -1 : ep.steps[t - 1].action;
      c.cols = input_columns(ps, pa, ep.steps[t].state);
      Eigen::VectorXd pre[3];
      for (std::size_t g = 0; g < 3; ++g) {
        pre[g] = ConstVec(params_.data() + l.b + g * hs, nh);
        for (std::size_t col : c.cols) pre[g] += ConstVec(params_.data() + l.wx + (g * l.in + col) * hs, nh);
      }
      c.h_prev = h;
      c.r = sigmoid(pre[0] + ur * h);
      c.z = sigmoid(pre[1] + uz * h);
      c.hn = un * h + bu;
      c.n = (pre[2].array() + c.r.array() * c.hn.array()).tanh().matrix();
      h = ((1.0 - c.z.array()) * c.n.array() + c.z.array() * h.array()).matrix();
      c.h = h;
      c.probs = wo * h + bo;
      softmax_inplace(c.probs);
      const int a = ep.steps[t].action;
      if (a < 0 || a >= num_actions_) throw std::out_of_range("SeqPredictor: action out of range");
      loss -= std::log(std::max(c.probs(a), 1e-300));
    }
    steps += len;
    if (!want_grad) continue;

    Mat g_ur(grad.data() + l.u, nh, nh);
    Mat g_uz(grad.data() + l.u + hs * hs, nh, nh);
    Mat g_un(grad.data() + l.u + 2 * hs * hs, nh, nh);
    Mat g_wo(grad.data() + l.wo, na, nh);
    Vec g_bu(grad.data() + l.bu, nh);
    Vec g_bo(grad.data() + l.bo, na);
    Eigen::VectorXd dh_next = Eigen::VectorXd::Zero(nh);
    for (std::size_t t = len; t-- > 0;) {
      const StepCache& c = cache[t];
      Eigen::VectorXd dlogits = c.probs;
      dlogits(ep.steps[t].action) -= 1.0;
      g_wo.noalias() += dlogits * c.h.transpose();
      g_bo += dlogits;
      const Eigen::VectorXd dh = dh_next + wo.transpose() * dlogits;
      const Eigen::VectorXd dn = (dh.array() * (1.0 - c.z.array())).matrix();
      const Eigen::VectorXd dz = (dh.array() * (c.h_prev.array() - c.n.array())).matrix();
      const Eigen::VectorXd dan = (dn.array() * (1.0 - c.n.array().square())).matrix();
      const Eigen::VectorXd dhn = (dan.array() * c.r.array()).matrix();
      const Eigen::VectorXd dar = (dan.array() * c.hn.array() * c.r.array() * (1.0 - c.r.array())).matrix();
      const Eigen::VectorXd daz = (dz.array() * c.z.array() * (1.0 - c.z.array())).matrix();
      g_ur.noalias() += dar * c.h_prev.transpose();
      g_uz.noalias() += daz * c.h_prev.transpose();
      g_un.noalias() += dhn * c.h_prev.transpose();
      g_bu += dhn;
      const Eigen::VectorXd* dpre[3] = {&dar, &daz, &dan};
      for (std::size_t g = 0; g < 3; ++g) {
        Vec(grad.data() + l.b + g * hs, nh) += *dpre[g];
        for (std::size_t col : c.cols) Vec(grad.data() + l.wx + (g * l.in + col) * hs, nh) += *dpre[g];
      }
      dh_next = (dh.array() * c.z.array()).matrix() + ur.transpose() * dar + uz.transpose() * daz + un.transpose() * dhn;
    }
  }
  return loss;
}

Json seq_predictor_to_json(const SeqPredictor& p) {
  return Json{{"type", "seq_predictor"},
              {"num_states", p.num_states_},
              {"num_actions", p.num_actions_},
              {"hidden", p.hidden_},
              {"params", p.params_}};
}

SeqPredictor seq_predictor_from_json(const Json& doc) {
  if (doc.value("type", std::string{}) != "seq_predictor") throw std::invalid_argument("seq predictor json: wrong type");
  Rng rng(0);
  SeqPredictor p(doc.at("num_states").get<int>(), doc.at("num_actions").get<int>(), doc.at("hidden").get<int>(), rng);
  auto params = doc.at("params").get<std::vector<double>>();
  if (params.size() != p.params_.size()) throw std::invalid_argument("seq predictor json: wrong parameter count");
  p.params_ = std::move(params);
  return p;
}

void SeqTrainConfig::validate() const {
  if (hidden < 1) throw std::invalid_argument("predictor.hidden must be >= 1");
  if (epochs < 1) throw std::invalid_argument("predictor.epochs must be >= 1");
  if (batch_episodes < 1) throw std::invalid_argument("predictor.batch_episodes must be >= 1");
  if (!(learning_rate > 0.0)) throw std::invalid_argument("predictor.learning_rate must be > 0");
  if (!(held_out_fraction > 0.0 && held_out_fraction < 1.0)) {
    throw std::invalid_argument("predictor.held_out_fraction must lie in (0, 1)");
  }
}

SeqTrainResult fit_sequence_predictor(int num_states, int num_actions, std::span<const Trajectory> episodes,
                                      const SeqTrainConfig& cfg) {
  cfg.validate();
  const auto held = static_cast<std::size_t>(std::ceil(cfg.held_out_fraction * static_cast<double>(episodes.size())));
  if (episodes.size() < 2 || held >= episodes.size()) throw std::invalid_argument("fit_sequence_predictor: too few episodes");
  const std::size_t n_train = episodes.size() - held;
  const auto train = episodes.first(n_train);
  const auto test = episodes.subspan(n_train);

  Rng init_rng = make_rng(cfg.seed, "predictor-init");
  Rng shuffle_rng = make_rng(cfg.seed, "predictor-shuffle");
  SeqTrainResult out;
  out.predictor = SeqPredictor(num_states, num_actions, cfg.hidden, init_rng);
  SeqPredictor& p = out.predictor;
  Adam opt(p.num_params(), AdamConfig{cfg.learning_rate, 0.9, 0.999, 1e-8});
  std::vector<std::size_t> order(n_train);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::vector<double> grad(p.num_params());
  std::vector<Trajectory> batch;
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), shuffle_rng);
    double epoch_loss = 0.0;
    std::size_t epoch_steps = 0;
    for (std::size_t start = 0; start < n_train; start += static_cast<std::size_t>(cfg.batch_episodes)) {
      const std::size_t stop = std::min(n_train, start + static_cast<std::size_t>(cfg.batch_episodes));
      batch.clear();
      for (std::size_t i = start; i < stop; ++i) batch.push_back(train[order[i]]);
      std::fill(grad.begin(), grad.end(), 0.0);
      std::size_t steps = 0;
      epoch_loss += p.sequence_loss(batch, grad, steps);
      epoch_steps += steps;
      if (steps == 0) continue;
      for (double& g : grad) g /= static_cast<double>(steps);
      clip_global_norm(grad, cfg.grad_clip);
      opt.step(p.params(), grad);
    }
    out.epoch_train_ce.push_back(epoch_steps > 0 ? epoch_loss / static_cast<double>(epoch_steps) : 0.0);
  }
  std::size_t steps = 0;
  const double test_loss = p.sequence_loss(test, {}, steps);
  out.held_out_ce = steps > 0 ? test_loss / static_cast<double>(steps) : 0.0;
  out.underfit = out.held_out_ce > std::log(static_cast<double>(num_actions));
  return out;
}

SeqTrainResult train_sequence_predictor(const LatentPolicyModel& model, const TabularMDP& mdp, int num_policies,
                                        int horizon, const SeqTrainConfig& cfg) {
  if (num_policies < 100) throw std::invalid_argument("train_sequence_predictor: num_policies must be >= 100");
  if (horizon < 1) throw std::invalid_argument("train_sequence_predictor: horizon must be >= 1");
  std::vector<Trajectory> data(static_cast<std::size_t>(num_policies));
  const std::uint64_t stream = derive_seed(cfg.seed, "predictor-data");
  parallel_for(data.size(), [&](std::size_t i) {
    Rng rng(derive_seed(stream, static_cast<std::uint64_t>(i)));
    const TabularPolicy pi = sample_policy(model, rng).policy;
    data[i] = rollout(mdp, pi, horizon, rng);
  });
  return fit_sequence_predictor(model.num_states(), model.num_actions(), data, cfg);
}

std::vector<double> seq_predict(const SeqPredictor& predictor, const Trajectory& prefix, int current_state,
                                std::vector<double>* hidden) {
  std::vector<double> h = predictor.initial_state();
  std::vector<double> next(h.size());
  int ps = -1;
  int pa = -1;
  for (const Step& st : prefix.steps) {
    predictor.advance(h, ps, pa, st.state, next);
    h.swap(next);
    ps = st.state;
    pa = st.action;
  }
  predictor.advance(h, ps, pa, current_state, next);
  std::vector<double> probs(static_cast<std::size_t>(predictor.num_actions()));
  predictor.readout(next, probs);
  if (hidden != nullptr) *hidden = next;
  return probs;
}

}  // namespace bpd
