#pragma once

// Inner-level Soft Actor-Critic for the thrust commands.

#include <cstdint>
#include <string>
#include <vector>

#include "blimp/env.hpp"
#include "blimp/nn.hpp"

namespace blimp::sac {

/// Raw (unnormalized) augmented state and physical action.
struct Transition {
  VecX s;
  VecX a;
  double r = 0.0;
  VecX s_next;
  bool done = false;
};

/// Ring buffer with uniform sampling over the filled region.
class ReplayBuffer {
 public:
  explicit ReplayBuffer(std::size_t capacity = 1'000'000) : capacity_(capacity) {
    if (capacity_ == 0) throw Error(ErrorKind::InvalidConfig, "replay capacity must be positive");
  }

  void add(const Transition& t) {
    if (data_.size() < capacity_) {
      data_.push_back(t);
    } else {
      data_[head_] = t;
    }
    head_ = (head_ + 1) % capacity_;
    ++total_added_;
  }

  std::size_t size() const { return data_.size(); }
  std::size_t capacity() const { return capacity_; }
  std::uint64_t total_added() const { return total_added_; }
  const Transition& at(std::size_t i) const { return data_.at(i); }

  std::vector<std::size_t> sample_indices(std::size_t n, Rng& rng) const {
    if (data_.empty()) throw Error(ErrorKind::InvalidConfig, "cannot sample from an empty replay buffer");
    std::uniform_int_distribution<std::size_t> pick(0, data_.size() - 1);
    std::vector<std::size_t> idx(n);
    for (auto& i : idx) i = pick(rng);
    return idx;
  }

 private:
  std::size_t capacity_;
  std::vector<Transition> data_;
  std::size_t head_ = 0;
  std::uint64_t total_added_ = 0;
};

struct SacConfig {
  double gamma = 0.99;
  double rho = 0.005;  // fraction of the online critic blended into the target
  int batch_size = 256;
  double lr_q = 3e-4;
  double lr_pi = 3e-4;
  double lr_alpha = 3e-4;
  double init_alpha = 0.2;
  double target_entropy = -2.0;  // on the normalized action box
  double reward_scale = 1.0;     // multiplies r in the critic target
  std::vector<int> critic_hidden{512, 512};
  std::vector<int> actor_hidden{128, 128};
  std::size_t buffer_capacity = 1'000'000;
  int warmup = 1000;
  int updates_per_step = 1;
  ObsScale obs_scale;
};

/// Per-component divisors for the blimp augmented state.
inline VecX input_divisors(const ObsScale& k) {
  VecX d(kStateDim);
  d << Vec3::Constant(k.position), Vec3::Constant(k.angle), Vec3::Constant(k.velocity), Vec3::Constant(k.rate),
      Vec3::Constant(k.goal), k.slider;
  return d;
}

/// Column-major batch; states are already normalized, actions are physical.
struct Batch {
  MatX s;       // state_dim x B
  MatX a;       // action_dim x B
  VecX r;       // B
  MatX s_next;  // state_dim x B
  VecX done;    // B, 1.0 for terminal
  Eigen::Index size() const { return r.size(); }
};

struct UpdateStats {
  double q1_loss = 0.0;
  double q2_loss = 0.0;
  double actor_loss = 0.0;
  double alpha_loss = 0.0;
  double alpha = 0.0;
  double entropy = 0.0;  // -mean log pi on the normalized box
};

class SacAgent {
 public:
  /// Blimp thrust agent: 16-dim augmented state, two thrusts in [0, f_max].
  SacAgent(const SacConfig& cfg, double f_max, std::uint64_t seed)
      : SacAgent(cfg, input_divisors(cfg.obs_scale), VecX::Zero(kActionDim), VecX::Constant(kActionDim, f_max), seed) {}

  /// Generic agent; `divisors` normalizes raw states component-wise.
  SacAgent(const SacConfig& cfg, VecX divisors, VecX action_lo, VecX action_hi, std::uint64_t seed)
      : cfg_(cfg),
        divisors_(std::move(divisors)),
        head_(std::move(action_lo), std::move(action_hi)),
        rng_(derive_seed(seed, 11)) {
    Rng init(derive_seed(seed, 10));
    const int sdim = state_dim(), adim = action_dim();
    std::vector<int> actor_sizes{sdim};
    actor_sizes.insert(actor_sizes.end(), cfg.actor_hidden.begin(), cfg.actor_hidden.end());
    actor_sizes.push_back(2 * adim);
    std::vector<int> critic_sizes{sdim + adim};
    critic_sizes.insert(critic_sizes.end(), cfg.critic_hidden.begin(), cfg.critic_hidden.end());
    critic_sizes.push_back(1);
    actor = nn::Mlp(actor_sizes, init);
    q1 = nn::Mlp(critic_sizes, init);
    q2 = nn::Mlp(critic_sizes, init);
    q1_target = q1;
    q2_target = q2;
    log_alpha = std::log(cfg.init_alpha);
    opt_actor.lr = cfg.lr_pi;
    opt_q1.lr = cfg.lr_q;
    opt_q2.lr = cfg.lr_q;
    opt_alpha.lr = cfg.lr_alpha;
  }

  const SacConfig& config() const { return cfg_; }
  SacConfig& config() { return cfg_; }
  const nn::GaussianHead& head() const { return head_; }
  int state_dim() const { return static_cast<int>(divisors_.size()); }
  int action_dim() const { return head_.dim(); }
  double alpha() const { return std::exp(log_alpha); }
  Rng& rng() { return rng_; }

  VecX normalize(const VecX& o) const {
    if (o.size() != divisors_.size()) throw Error(ErrorKind::ShapeMismatch, "state has the wrong dimension");
    return o.cwiseQuotient(divisors_);
  }

  /// Stochastic sample in training, squashed mean when deterministic.
  VecX act(const VecX& s, bool deterministic) {
    const VecX out = actor.forward_one(normalize(s));
    return (deterministic ? head_.deterministic(out) : head_.sample_one(out, rng_)).action;
  }

  ControlInput act_thrust(const Observation& s, bool deterministic) {
    const VecX a = act(VecX(s), deterministic);
    return ControlInput{a[0], a[1]};
  }

  Batch make_batch(const ReplayBuffer& buf, const std::vector<std::size_t>& idx) const {
    const auto n = static_cast<Eigen::Index>(idx.size());
    Batch b;
    b.s.resize(state_dim(), n);
    b.a.resize(action_dim(), n);
    b.r.resize(n);
    b.s_next.resize(state_dim(), n);
    b.done.resize(n);
    for (Eigen::Index j = 0; j < n; ++j) {
      const Transition& t = buf.at(idx[static_cast<std::size_t>(j)]);
      b.s.col(j) = normalize(t.s);
      b.a.col(j) = t.a;
      b.r[j] = t.r;
      b.s_next.col(j) = normalize(t.s_next);
      b.done[j] = t.done ? 1.0 : 0.0;
    }
    return b;
  }

  Batch sample_batch(const ReplayBuffer& buf) {
    return make_batch(buf, buf.sample_indices(static_cast<std::size_t>(cfg_.batch_size), rng_));
  }

  /// Critic input [s; unit action].
  MatX critic_input(const MatX& s, const MatX& action) const {
    const int adim = action_dim();
    MatX x(state_dim() + adim, s.cols());
    x.topRows(state_dim()) = s;
    const VecX half = head_.half_range();
    for (Eigen::Index j = 0; j < s.cols(); ++j)
      x.col(j).tail(adim) = (action.col(j) - head_.lo()).cwiseQuotient(half) - VecX::Ones(adim);
    return x;
  }

  /// y = k r + gamma (1 - done) [min_j Qbar_j(s', a') - alpha log pi(a'|s')], a' ~ pi(.|s').
  VecX critic_target(const Batch& b) {
    const MatX out = actor.forward(b.s_next);
    const nn::SquashedBatch next = head_.sample(out, rng_);
    const MatX x = critic_input(b.s_next, next.action);
    const MatX t1 = q1_target.forward(x);
    const MatX t2 = q2_target.forward(x);
    const VecX soft = t1.row(0).cwiseMin(t2.row(0)).transpose() - alpha() * next.log_prob_unit;
    return cfg_.reward_scale * b.r + cfg_.gamma * (VecX::Ones(b.size()) - b.done).cwiseProduct(soft);
  }

  /// One Adam step per critic toward fixed targets; returns the two MSE losses.
  std::pair<double, double> critic_update(const Batch& b, const VecX& y) {
    const MatX x = critic_input(b.s, b.a);
    const double n = static_cast<double>(b.size());
    auto fit = [&](nn::Mlp& q, nn::AdamState& opt) {
      nn::Tape tape;
      const MatX pred = q.forward(x, &tape);
      const VecX err = pred.row(0).transpose() - y;
      const MatX dy = (2.0 / n) * err.transpose();
      nn::BackwardResult g = q.backward(tape, dy);
      nn::adam_step(q, g.grads, opt);
      return err.squaredNorm() / n;
    };
    const double l1 = fit(q1, opt_q1);
    const double l2 = fit(q2, opt_q2);
    return {l1, l2};
  }

  struct ActorLoss {
    double loss = 0.0;
    VecX log_prob_unit;   // detached, reused by the temperature step
    nn::Gradients grads;  // actor parameter gradients
  };

  /// Loss E[alpha log pi(a|s) - min_i Q_i(s, a)] with reparameterized a, and its gradient.
  ActorLoss actor_loss(const MatX& s, const MatX& eps) const {
    const double n = static_cast<double>(s.cols());
    nn::Tape atape;
    const MatX out = actor.forward(s, &atape);
    const nn::SquashedBatch smp = head_.evaluate(out, eps);
    const MatX x = critic_input(s, smp.action);
    nn::Tape t1, t2;
    const MatX v1 = q1.forward(x, &t1);
    const MatX v2 = q2.forward(x, &t2);
    MatX d1 = MatX::Zero(1, s.cols()), d2 = MatX::Zero(1, s.cols());
    ActorLoss r;
    const double a = alpha();
    for (Eigen::Index j = 0; j < s.cols(); ++j) {
      const bool first = v1(0, j) <= v2(0, j);
      (first ? d1 : d2)(0, j) = -1.0 / n;
      r.loss += (a * smp.log_prob_unit[j] - std::min(v1(0, j), v2(0, j))) / n;
    }
    const MatX dx1 = q1.backward(t1, d1).dx;
    const MatX dx2 = q2.backward(t2, d2).dx;
    // Critics see the unit action; convert to a physical-action gradient.
    MatX dl_da = (dx1 + dx2).bottomRows(action_dim());
    const VecX half = head_.half_range();
    for (Eigen::Index j = 0; j < dl_da.cols(); ++j) dl_da.col(j) = dl_da.col(j).cwiseQuotient(half);
    const VecX dl_dlogp = VecX::Constant(s.cols(), a / n);
    const MatX dout = head_.pathwise_grad(smp, dl_da, dl_dlogp);
    r.grads = actor.backward(atape, dout).grads;
    r.log_prob_unit = smp.log_prob_unit;
    return r;
  }

  /// One Adam step on the actor only; critics are read, not modified.
  ActorLoss actor_update(const Batch& b) {
    MatX eps(action_dim(), b.size());
    for (Eigen::Index k = 0; k < eps.size(); ++k) eps.data()[k] = standard_normal(rng_);
    ActorLoss r = actor_loss(b.s, eps);
    nn::adam_step(actor, r.grads, opt_actor);
    return r;
  }

  /// Gradient step on log alpha for E[-alpha (log pi + H_target)].
  double temperature_update(const VecX& log_prob_unit) {
    const double a = alpha();
    const double mean = (log_prob_unit.array() + cfg_.target_entropy).mean();
    const double loss = -a * mean;
    const double grad = -a * mean;  // d loss / d log alpha
    nn::adam_step(log_alpha, grad, opt_alpha);
    return loss;
  }

  double temperature_update(const Batch& b) {
    const MatX out = actor.forward(b.s);
    return temperature_update(head_.sample(out, rng_).log_prob_unit);
  }

  /// target <- rho * online + (1 - rho) * target, for both critics.
  void polyak_update() {
    blend(q1_target, q1, cfg_.rho);
    blend(q2_target, q2, cfg_.rho);
  }

  static void blend(nn::Mlp& target, const nn::Mlp& online, double rho) {
    if (!target.same_shape(online)) throw Error(ErrorKind::ShapeMismatch, "target network shape differs");
    for (std::size_t i = 0; i < target.layers().size(); ++i) {
      auto& t = target.layers()[i];
      const auto& o = online.layers()[i];
      t.w = rho * o.w + (1.0 - rho) * t.w;
      t.b = rho * o.b + (1.0 - rho) * t.b;
    }
  }

  /// Critics, then actor, then temperature, then targets.
  UpdateStats update(const ReplayBuffer& buf) {
    const Batch b = sample_batch(buf);
    UpdateStats st;
    const VecX y = critic_target(b);
    std::tie(st.q1_loss, st.q2_loss) = critic_update(b, y);
    const ActorLoss al = actor_update(b);
    st.actor_loss = al.loss;
    st.entropy = -al.log_prob_unit.mean();
    st.alpha_loss = temperature_update(al.log_prob_unit);
    polyak_update();
    st.alpha = alpha();
    return st;
  }

  Json to_json() const {
    return Json{{"version", nn::kCheckpointVersion},
                {"actor", nn::to_json(actor)},
                {"q1", nn::to_json(q1)},
                {"q2", nn::to_json(q2)},
                {"q1_target", nn::to_json(q1_target)},
                {"q2_target", nn::to_json(q2_target)},
                {"log_alpha", log_alpha},
                {"opt_actor", nn::to_json(opt_actor)},
                {"opt_q1", nn::to_json(opt_q1)},
                {"opt_q2", nn::to_json(opt_q2)},
                {"opt_alpha", nn::to_json(opt_alpha)}};
  }

  void load_json(const Json& j) {
    if (!j.contains("version") || j.at("version").get<int>() != nn::kCheckpointVersion)
      throw Error(ErrorKind::CheckpointVersionMismatch, "SAC checkpoint version mismatch");
    actor = nn::mlp_from_json(j.at("actor"));
    q1 = nn::mlp_from_json(j.at("q1"));
    q2 = nn::mlp_from_json(j.at("q2"));
    q1_target = nn::mlp_from_json(j.at("q1_target"));
    q2_target = nn::mlp_from_json(j.at("q2_target"));
    log_alpha = j.at("log_alpha").get<double>();
    opt_actor = nn::adam_from_json(j.at("opt_actor"));
    opt_q1 = nn::adam_from_json(j.at("opt_q1"));
    opt_q2 = nn::adam_from_json(j.at("opt_q2"));
    opt_alpha = nn::adam_from_json(j.at("opt_alpha"));
    if (actor.in_dim() != state_dim() || actor.out_dim() != 2 * action_dim() ||
        q1.in_dim() != state_dim() + action_dim() || !q1.same_shape(q1_target) || !q2.same_shape(q2_target))
      throw Error(ErrorKind::ShapeMismatch, "SAC checkpoint network shapes do not match the agent");
  }

  nn::Mlp actor, q1, q2, q1_target, q2_target;
  double log_alpha = 0.0;
  nn::AdamState opt_actor, opt_q1, opt_q2, opt_alpha;

 private:
  SacConfig cfg_;
  VecX divisors_;
  nn::GaussianHead head_;
  Rng rng_;
};

}  // namespace blimp::sac
