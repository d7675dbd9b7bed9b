#pragma once

// Outer-level soft policy gradient over the episode-wise slider position,
// conditioned on the target.

#include <cmath>
#include <string>
#include <vector>

#include "blimp/dynamics.hpp"
#include "blimp/nn.hpp"

namespace blimp::spg {

enum class StepSchedule { Constant, RobbinsMonro };

inline const char* to_string(StepSchedule s) {
  return s == StepSchedule::Constant ? "constant" : "robbins_monro";
}

inline StepSchedule schedule_from_string(const std::string& s) {
  if (s == "constant") return StepSchedule::Constant;
  if (s == "robbins_monro") return StepSchedule::RobbinsMonro;
  throw Error(ErrorKind::InvalidConfig, "unknown step schedule '" + s + "' (constant | robbins_monro)");
}

/// eta0 / (k + 1) for Robbins-Monro, eta0 otherwise.
inline double step_size(std::int64_t k, StepSchedule mode, double eta0) {
  if (k < 0) throw Error(ErrorKind::InvalidConfig, "iteration index must be >= 0");
  return mode == StepSchedule::RobbinsMonro ? eta0 / static_cast<double>(k + 1) : eta0;
}

struct SpgConfig {
  std::vector<int> hidden{32, 32};
  double eta0 = 3e-3;
  StepSchedule schedule = StepSchedule::RobbinsMonro;
  int batch_size = 8;
  double lr_beta = 3e-4;
  double init_beta = 1.0;
  double target_entropy = -1.0;  // on the normalized slider interval (-1, 1)
  double goal_scale = 5.0;
  double baseline_decay = 0.9;  // running mean, used only for single-sample batches
};

struct OuterSample {
  Vec3 zeta = Vec3::Zero();
  double c = 0.0;
  double log_prob = 0.0;  // density of c in meters at selection time
  double ret = 0.0;       // discounted task return, no entropy bonus
};

struct SliderChoice {
  double c = 0.0;
  double log_prob = 0.0;
  double log_prob_unit = 0.0;
};

/// Discounted sum of raw task rewards.
inline double episode_return(const std::vector<double>& rewards, double gamma) {
  double ret = 0.0, disc = 1.0;
  for (double r : rewards) {
    ret += disc * r;
    disc *= gamma;
  }
  return ret;
}

struct OuterGradient {
  nn::Gradients grads;   // gradient of the loss (negated objective)
  double objective = 0.0;  // batch estimate of E[R] + beta H
  VecX log_prob_unit;
};

class OuterPolicy {
 public:
  OuterPolicy(const SpgConfig& cfg, std::uint64_t seed)
      : cfg_(cfg), head_(VecX::Constant(1, -kSliderLimit), VecX::Constant(1, kSliderLimit)) {
    Rng init(derive_seed(seed, 20));
    std::vector<int> sizes{3};
    sizes.insert(sizes.end(), cfg.hidden.begin(), cfg.hidden.end());
    sizes.push_back(2);
    net = nn::Mlp(sizes, init, nn::Activation::Tanh);
    log_beta = std::log(cfg.init_beta);
    opt_beta.lr = cfg.lr_beta;
  }

  const SpgConfig& config() const { return cfg_; }
  SpgConfig& config() { return cfg_; }
  const nn::GaussianHead& head() const { return head_; }
  double beta() const { return std::exp(log_beta); }

  VecX features(const Vec3& zeta) const { return zeta / cfg_.goal_scale; }

  MatX features(const std::vector<OuterSample>& batch) const {
    MatX x(3, static_cast<Eigen::Index>(batch.size()));
    for (std::size_t i = 0; i < batch.size(); ++i) x.col(static_cast<Eigen::Index>(i)) = features(batch[i].zeta);
    return x;
  }

  SliderChoice select_config(const Vec3& zeta, bool deterministic, Rng& rng) const {
    if (!zeta.allFinite()) throw Error(ErrorKind::InvalidConfig, "target must be finite");
    const VecX out = net.forward_one(features(zeta));
    const nn::SquashedSample s = deterministic ? head_.deterministic(out) : head_.sample_one(out, rng);
    return SliderChoice{s.action[0], s.log_prob, s.log_prob_unit};
  }

  /// Re-evaluates the head at stored slider positions: recovers the noise that
  /// produced each c under the current parameters.
  nn::SquashedBatch replay(const MatX& out, const std::vector<OuterSample>& batch) const {
    MatX eps(1, out.cols());
    for (Eigen::Index j = 0; j < out.cols(); ++j) {
      const double unit = std::clamp(batch[static_cast<std::size_t>(j)].c / kSliderLimit, -1.0 + 1e-12, 1.0 - 1e-12);
      const double ls = std::clamp(out(1, j), nn::kLogStdMin, nn::kLogStdMax);
      eps(0, j) = (std::atanh(unit) - out(0, j)) * std::exp(-ls);
    }
    return head_.evaluate(out, eps);
  }

  /// Baselined advantages: leave-one-out batch mean, or the running mean for a single sample.
  VecX advantages(const std::vector<OuterSample>& batch) const {
    const auto n = static_cast<Eigen::Index>(batch.size());
    VecX a(n);
    if (n == 1) {
      a[0] = batch[0].ret - (has_baseline_ ? running_baseline_ : batch[0].ret);
      return a;
    }
    double sum = 0.0;
    for (const auto& s : batch) sum += s.ret;
    for (Eigen::Index i = 0; i < n; ++i) {
      const double r = batch[static_cast<std::size_t>(i)].ret;
      a[i] = r - (sum - r) / static_cast<double>(n - 1);
    }
    return a;
  }

  /// Gradient of -(mean[log pi(c|zeta) A] + beta mean[-log pi]) with the score term
  /// at fixed c and the entropy term along the reparameterized path.
  OuterGradient gradient(const std::vector<OuterSample>& batch) const {
    if (batch.empty()) throw Error(ErrorKind::InvalidConfig, "outer batch must be nonempty");
    const auto n = static_cast<Eigen::Index>(batch.size());
    nn::Tape tape;
    const MatX out = net.forward(features(batch), &tape);
    const nn::SquashedBatch s = replay(out, batch);
    const VecX adv = advantages(batch);
    const double b = beta();
    const MatX score = head_.score_grad(s, adv / static_cast<double>(n));
    const MatX entropy_path =
        head_.pathwise_grad(s, MatX::Zero(1, n), VecX::Constant(n, 1.0 / static_cast<double>(n)));
    // loss = -score_term + beta * mean(log pi)
    const MatX dout = -score + b * entropy_path;
    OuterGradient g;
    g.grads = net.backward(tape, dout).grads;
    double mean_ret = 0.0;
    for (const auto& smp : batch) mean_ret += smp.ret;
    mean_ret /= static_cast<double>(n);
    g.objective = mean_ret - b * s.log_prob_unit.mean();
    g.log_prob_unit = s.log_prob_unit;
    return g;
  }

  /// Gradient ascent step with step size eta^k on the objective; returns its batch estimate.
  double outer_update(const std::vector<OuterSample>& batch, std::int64_t k) {
    OuterGradient g = gradient(batch);
    opt_net.lr = step_size(k, cfg_.schedule, cfg_.eta0);
    nn::adam_step(net, g.grads, opt_net);
    double mean_ret = 0.0;
    for (const auto& s : batch) mean_ret += s.ret;
    mean_ret /= static_cast<double>(batch.size());
    running_baseline_ = has_baseline_ ? cfg_.baseline_decay * running_baseline_ + (1.0 - cfg_.baseline_decay) * mean_ret
                                      : mean_ret;
    has_baseline_ = true;
    ++updates_;
    return g.objective;
  }

  /// Step on log beta for E[-beta (log pi(c|zeta) + H_target)].
  double beta_update(const VecX& log_prob_unit) {
    const double b = beta();
    const double mean = (log_prob_unit.array() + cfg_.target_entropy).mean();
    nn::adam_step(log_beta, -b * mean, opt_beta);
    return -b * mean;
  }

  double beta_update(const std::vector<OuterSample>& batch) {
    const MatX out = net.forward(features(batch));
    return beta_update(replay(out, batch).log_prob_unit);
  }

  std::int64_t updates() const { return updates_; }

  Json to_json() const {
    return Json{{"version", nn::kCheckpointVersion},
                {"net", nn::to_json(net)},
                {"log_beta", log_beta},
                {"opt_net", nn::to_json(opt_net)},
                {"opt_beta", nn::to_json(opt_beta)},
                {"updates", updates_},
                {"running_baseline", running_baseline_},
                {"has_baseline", has_baseline_}};
  }

  void load_json(const Json& j) {
    if (!j.contains("version") || j.at("version").get<int>() != nn::kCheckpointVersion)
      throw Error(ErrorKind::CheckpointVersionMismatch, "outer policy checkpoint version mismatch");
    net = nn::mlp_from_json(j.at("net"));
    if (net.in_dim() != 3 || net.out_dim() != 2)
      throw Error(ErrorKind::ShapeMismatch, "outer policy network must map 3 -> 2");
    log_beta = j.at("log_beta").get<double>();
    opt_net = nn::adam_from_json(j.at("opt_net"));
    opt_beta = nn::adam_from_json(j.at("opt_beta"));
    updates_ = j.at("updates").get<std::int64_t>();
    running_baseline_ = j.at("running_baseline").get<double>();
    has_baseline_ = j.at("has_baseline").get<bool>();
  }

  nn::Mlp net;
  double log_beta = 0.0;
  nn::AdamState opt_net, opt_beta;

 private:
  SpgConfig cfg_;
  nn::GaussianHead head_;
  std::int64_t updates_ = 0;
  double running_baseline_ = 0.0;
  bool has_baseline_ = false;
};

/// Current and frozen-reference inner-policy returns for one probe (zeta, c).
struct ProbeReturn {
  Vec3 zeta = Vec3::Zero();
  double c = 0.0;
  double current = 0.0;
  double reference = 0.0;
};

/// Mean absolute return gap between the current and the reference inner policy
/// over the probe set; a monitoring proxy for the outer-gradient bias.
inline double bias_diagnostic(const std::vector<ProbeReturn>& probes) {
  if (probes.empty()) return 0.0;
  double s = 0.0;
  for (const auto& p : probes) s += std::abs(p.current - p.reference);
  return s / static_cast<double>(probes.size());
}

}  // namespace blimp::spg
