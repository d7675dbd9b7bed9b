#pragma once

// Feed-forward MLPs with explicit reverse-mode gradients, Adam, and the
// tanh-squashed Gaussian head shared by the thrust actor and the slider policy.
//
// Batches are column-major: an input batch is (in_dim x batch).

#include <algorithm>
#include <cmath>
#include <span>
#include <string>
#include <vector>

#include "blimp/common.hpp"
#include "blimp/json_util.hpp"

namespace blimp::nn {

enum class Activation { Identity, Relu, Tanh };

inline const char* to_string(Activation a) {
  switch (a) {
    case Activation::Identity: return "identity";
    case Activation::Relu: return "relu";
    case Activation::Tanh: return "tanh";
  }
  return "identity";
}

inline Activation activation_from_string(const std::string& s) {
  if (s == "identity") return Activation::Identity;
  if (s == "relu") return Activation::Relu;
  if (s == "tanh") return Activation::Tanh;
  throw Error(ErrorKind::InvalidConfig, "unknown activation '" + s + "'");
}

struct Dense {
  MatX w;  // out x in
  VecX b;  // out
  Activation act = Activation::Identity;
};

/// Per-call record of a forward pass; owned by the caller.
struct Tape {
  std::vector<MatX> inputs;  // input to each layer
  std::vector<MatX> pre;     // pre-activation of each layer
  bool recorded() const { return !inputs.empty(); }
};

struct Gradients {
  std::vector<MatX> dw;
  std::vector<VecX> db;

  std::vector<std::span<double>> spans() {
    std::vector<std::span<double>> out;
    for (std::size_t i = 0; i < dw.size(); ++i) {
      out.emplace_back(dw[i].data(), static_cast<std::size_t>(dw[i].size()));
      out.emplace_back(db[i].data(), static_cast<std::size_t>(db[i].size()));
    }
    return out;
  }
};

struct BackwardResult {
  Gradients grads;
  MatX dx;  // gradient w.r.t. the network input
};

class Mlp {
 public:
  Mlp() = default;

  /// sizes = {in, hidden..., out}; hidden layers use `hidden`, the last layer `output`.
  Mlp(const std::vector<int>& sizes, Rng& rng, Activation hidden = Activation::Relu,
      Activation output = Activation::Identity) {
    if (sizes.size() < 2) throw Error(ErrorKind::ShapeMismatch, "an MLP needs at least input and output sizes");
    for (std::size_t i = 0; i + 1 < sizes.size(); ++i) {
      const int in = sizes[i], out = sizes[i + 1];
      if (in <= 0 || out <= 0) throw Error(ErrorKind::ShapeMismatch, "layer sizes must be positive");
      Dense d;
      const double bound = 1.0 / std::sqrt(static_cast<double>(in));
      d.w.resize(out, in);
      d.b.resize(out);
      for (Eigen::Index k = 0; k < d.w.size(); ++k) d.w.data()[k] = uniform(rng, -bound, bound);
      for (Eigen::Index k = 0; k < d.b.size(); ++k) d.b[k] = uniform(rng, -bound, bound);
      d.act = (i + 2 == sizes.size()) ? output : hidden;
      layers_.push_back(std::move(d));
    }
  }

  explicit Mlp(std::vector<Dense> layers) : layers_(std::move(layers)) { check_chain(); }

  int in_dim() const { return layers_.empty() ? 0 : static_cast<int>(layers_.front().w.cols()); }
  int out_dim() const { return layers_.empty() ? 0 : static_cast<int>(layers_.back().w.rows()); }
  const std::vector<Dense>& layers() const { return layers_; }
  std::vector<Dense>& layers() { return layers_; }

  MatX forward(const MatX& x, Tape* tape = nullptr) const {
    if (x.rows() != in_dim())
      throw Error(ErrorKind::ShapeMismatch,
                  "input has " + std::to_string(x.rows()) + " rows, network expects " + std::to_string(in_dim()));
    if (tape) {
      tape->inputs.clear();
      tape->pre.clear();
    }
    MatX a = x;
    for (const Dense& d : layers_) {
      MatX z = d.w * a;
      z.colwise() += d.b;
      if (tape) {
        tape->inputs.push_back(std::move(a));
        tape->pre.push_back(z);
      }
      a = activate(z, d.act);
    }
    return a;
  }

  VecX forward_one(const VecX& x) const { return forward(MatX(x)).col(0); }

  /// Reverse pass over a recorded forward; dy has the shape of the forward output.
  BackwardResult backward(const Tape& tape, const MatX& dy) const {
    if (!tape.recorded() || tape.inputs.size() != layers_.size())
      throw Error(ErrorKind::NoTape, "backward called without a recorded forward pass");
    if (dy.rows() != out_dim() || dy.cols() != tape.inputs.front().cols())
      throw Error(ErrorKind::ShapeMismatch, "output gradient shape does not match the recorded forward");
    BackwardResult r;
    r.grads.dw.resize(layers_.size());
    r.grads.db.resize(layers_.size());
    MatX g = dy;
    for (std::size_t i = layers_.size(); i-- > 0;) {
      const Dense& d = layers_[i];
      apply_activation_grad(g, tape.pre[i], d.act);
      r.grads.dw[i].noalias() = g * tape.inputs[i].transpose();
      r.grads.db[i] = g.rowwise().sum();
      MatX next = d.w.transpose() * g;
      g = std::move(next);
    }
    r.dx = std::move(g);
    return r;
  }

  Gradients zero_gradients() const {
    Gradients g;
    for (const Dense& d : layers_) {
      g.dw.push_back(MatX::Zero(d.w.rows(), d.w.cols()));
      g.db.push_back(VecX::Zero(d.b.size()));
    }
    return g;
  }

  std::vector<std::span<double>> param_spans() {
    std::vector<std::span<double>> out;
    for (Dense& d : layers_) {
      out.emplace_back(d.w.data(), static_cast<std::size_t>(d.w.size()));
      out.emplace_back(d.b.data(), static_cast<std::size_t>(d.b.size()));
    }
    return out;
  }

  std::size_t num_params() const {
    std::size_t n = 0;
    for (const Dense& d : layers_) n += static_cast<std::size_t>(d.w.size() + d.b.size());
    return n;
  }

  VecX flat_params() const {
    VecX out(static_cast<Eigen::Index>(num_params()));
    Eigen::Index k = 0;
    for (const Dense& d : layers_) {
      out.segment(k, d.w.size()) = Eigen::Map<const VecX>(d.w.data(), d.w.size());
      k += d.w.size();
      out.segment(k, d.b.size()) = d.b;
      k += d.b.size();
    }
    return out;
  }

  void set_flat_params(const VecX& flat) {
    if (flat.size() != static_cast<Eigen::Index>(num_params()))
      throw Error(ErrorKind::ShapeMismatch, "flat parameter vector has the wrong length");
    Eigen::Index k = 0;
    for (Dense& d : layers_) {
      Eigen::Map<VecX>(d.w.data(), d.w.size()) = flat.segment(k, d.w.size());
      k += d.w.size();
      d.b = flat.segment(k, d.b.size());
      k += d.b.size();
    }
  }

  bool same_shape(const Mlp& o) const {
    if (layers_.size() != o.layers_.size()) return false;
    for (std::size_t i = 0; i < layers_.size(); ++i) {
      if (layers_[i].w.rows() != o.layers_[i].w.rows() || layers_[i].w.cols() != o.layers_[i].w.cols() ||
          layers_[i].act != o.layers_[i].act)
        return false;
    }
    return true;
  }

 private:
  static MatX activate(const MatX& z, Activation act) {
    switch (act) {
      case Activation::Relu: return z.cwiseMax(0.0);
      case Activation::Tanh: return z.array().tanh().matrix();
      case Activation::Identity: break;
    }
    return z;
  }

  static void apply_activation_grad(MatX& g, const MatX& z, Activation act) {
    switch (act) {
      case Activation::Relu: g.array() *= (z.array() > 0.0).cast<double>(); break;
      case Activation::Tanh: g.array() *= 1.0 - z.array().tanh().square(); break;
      case Activation::Identity: break;
    }
  }

  void check_chain() const {
    for (std::size_t i = 0; i < layers_.size(); ++i) {
      if (layers_[i].b.size() != layers_[i].w.rows())
        throw Error(ErrorKind::ShapeMismatch, "bias length does not match weight rows");
      if (i > 0 && layers_[i].w.cols() != layers_[i - 1].w.rows())
        throw Error(ErrorKind::ShapeMismatch, "layer shapes do not chain");
    }
  }

  std::vector<Dense> layers_;
};

// ---------------------------------------------------------------------------
// Adam

struct AdamState {
  double lr = 3e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  std::int64_t t = 0;
  std::vector<VecX> m;
  std::vector<VecX> v;
};

/// One bias-corrected Adam step; moments are allocated lazily on first use.
inline void adam_step(std::vector<std::span<double>> params, std::vector<std::span<double>> grads, AdamState& st) {
  if (params.size() != grads.size()) throw Error(ErrorKind::ShapeMismatch, "parameter/gradient tensor count differs");
  if (st.m.empty()) {
    for (const auto& p : params) {
      st.m.push_back(VecX::Zero(static_cast<Eigen::Index>(p.size())));
      st.v.push_back(VecX::Zero(static_cast<Eigen::Index>(p.size())));
    }
  }
  if (st.m.size() != params.size()) throw Error(ErrorKind::ShapeMismatch, "Adam state does not match parameters");
  for (std::size_t i = 0; i < params.size(); ++i) {
    if (params[i].size() != grads[i].size() || static_cast<Eigen::Index>(params[i].size()) != st.m[i].size())
      throw Error(ErrorKind::ShapeMismatch, "parameter/gradient tensor size differs");
  }
  ++st.t;
  const double bc1 = 1.0 - std::pow(st.beta1, static_cast<double>(st.t));
  const double bc2 = 1.0 - std::pow(st.beta2, static_cast<double>(st.t));
  for (std::size_t i = 0; i < params.size(); ++i) {
    Eigen::Map<VecX> p(params[i].data(), static_cast<Eigen::Index>(params[i].size()));
    Eigen::Map<const VecX> g(grads[i].data(), static_cast<Eigen::Index>(grads[i].size()));
    st.m[i] = st.beta1 * st.m[i] + (1.0 - st.beta1) * g;
    st.v[i] = st.beta2 * st.v[i] + (1.0 - st.beta2) * g.cwiseAbs2();
    p.array() -= st.lr * (st.m[i].array() / bc1) / ((st.v[i].array() / bc2).sqrt() + st.eps);
  }
}

inline void adam_step(Mlp& net, Gradients& grads, AdamState& st) { adam_step(net.param_spans(), grads.spans(), st); }

/// Adam on a single scalar parameter (log temperatures).
inline void adam_step(double& param, double grad, AdamState& st) {
  adam_step({std::span<double>(&param, 1)}, {std::span<double>(&grad, 1)}, st);
}

// ---------------------------------------------------------------------------
// Squashed Gaussian head
//
// The network emits [mean(d); log_std(d)]. A pre-squash sample u = mean + std*eps
// maps to unit = tanh(u) in (-1, 1) and then affinely to [lo, hi].

inline constexpr double kLogStdMin = -20.0;
inline constexpr double kLogStdMax = 2.0;
inline constexpr double kHalfLog2Pi = 0.91893853320467274178;

/// log(1 - tanh(u)^2), stable for large |u|.
inline double log1m_tanh_sq(double u) {
  const double a = std::abs(u);
  return 2.0 * (std::log(2.0) - a - std::log1p(std::exp(-2.0 * a)));
}

struct SquashedBatch {
  MatX mean;      // d x B
  MatX log_std;   // d x B, clamped
  MatX raw_log_std;
  MatX eps;       // d x B
  MatX u;         // pre-squash
  MatX unit;      // tanh(u)
  MatX action;    // affine-mapped
  VecX log_prob_unit;  // density of `unit` on (-1, 1)^d
  VecX log_prob;       // density of `action` on [lo, hi]
};

struct SquashedSample {
  VecX action;
  double log_prob = 0.0;       // density of the action in its physical units
  double log_prob_unit = 0.0;  // density of the normalized action on (-1, 1)^d
};

class GaussianHead {
 public:
  GaussianHead() = default;
  GaussianHead(VecX lo, VecX hi) : lo_(std::move(lo)), hi_(std::move(hi)) {
    if (lo_.size() != hi_.size() || lo_.size() == 0) throw Error(ErrorKind::ShapeMismatch, "action bounds mismatch");
    if ((hi_.array() <= lo_.array()).any()) throw Error(ErrorKind::InvalidConfig, "action bounds must satisfy lo < hi");
  }

  int dim() const { return static_cast<int>(lo_.size()); }
  const VecX& lo() const { return lo_; }
  const VecX& hi() const { return hi_; }
  VecX half_range() const { return 0.5 * (hi_ - lo_); }

  /// Sum of log half-ranges: log_prob = log_prob_unit - log_scale().
  double log_scale() const { return half_range().array().log().sum(); }

  VecX to_action(const VecX& unit) const { return lo_ + half_range().cwiseProduct(unit + VecX::Ones(dim())); }
  VecX to_unit(const VecX& action) const {
    return (action - lo_).cwiseQuotient(half_range()) - VecX::Ones(dim());
  }

  /// Evaluates the head on network outputs `out` (2d x B) with the given noise.
  SquashedBatch evaluate(const MatX& out, const MatX& eps) const {
    check_out(out);
    const int d = dim();
    const Eigen::Index n = out.cols();
    SquashedBatch s;
    s.mean = out.topRows(d);
    s.raw_log_std = out.bottomRows(d);
    s.log_std = s.raw_log_std.cwiseMax(kLogStdMin).cwiseMin(kLogStdMax);
    s.eps = eps;
    s.u = s.mean + s.log_std.array().exp().matrix().cwiseProduct(eps);
    s.unit = s.u.array().tanh().matrix();
    s.action = s.unit;
    s.log_prob_unit.resize(n);
    for (Eigen::Index j = 0; j < n; ++j) {
      double lp = 0.0;
      for (int i = 0; i < d; ++i) {
        lp += -0.5 * eps(i, j) * eps(i, j) - s.log_std(i, j) - kHalfLog2Pi - log1m_tanh_sq(s.u(i, j));
      }
      s.log_prob_unit[j] = lp;
      s.action.col(j) = to_action(s.unit.col(j));
    }
    s.log_prob = s.log_prob_unit.array() - log_scale();
    return s;
  }

  SquashedBatch sample(const MatX& out, Rng& rng) const {
    MatX eps(dim(), out.cols());
    for (Eigen::Index k = 0; k < eps.size(); ++k) eps.data()[k] = standard_normal(rng);
    return evaluate(out, eps);
  }

  SquashedSample sample_one(const VecX& out, Rng& rng) const { return first(sample(MatX(out), rng)); }

  /// Squashed mean; the zero-noise limit of sampling.
  SquashedSample deterministic(const VecX& out) const {
    return first(evaluate(MatX(out), MatX::Zero(dim(), 1)));
  }

  /// Log density of a given physical action (inverts the squash).
  double log_prob(const VecX& out, const VecX& action) const {
    check_out(MatX(out));
    const int d = dim();
    const VecX unit = to_unit(action);
    double lp = 0.0;
    for (int i = 0; i < d; ++i) {
      const double ls = std::clamp(out[d + i], kLogStdMin, kLogStdMax);
      const double u = std::atanh(unit[i]);
      const double z = (u - out[i]) * std::exp(-ls);
      lp += -0.5 * z * z - ls - kHalfLog2Pi - log1m_tanh_sq(u);
    }
    return lp - log_scale();
  }

  /// Gradient w.r.t. head outputs of a loss L(action(out, eps), log_prob(out, eps))
  /// with eps held fixed (reparameterized path). dl_daction is d x B, dl_dlogp has B entries.
  MatX pathwise_grad(const SquashedBatch& s, const MatX& dl_daction, const VecX& dl_dlogp) const {
    const int d = dim();
    const Eigen::Index n = s.u.cols();
    const VecX half = half_range();
    MatX g(2 * d, n);
    for (Eigen::Index j = 0; j < n; ++j) {
      for (int i = 0; i < d; ++i) {
        const double t = s.unit(i, j);
        const double sigma = std::exp(s.log_std(i, j));
        // dL/du through the action and through -log(1 - tanh^2 u).
        const double dl_du = dl_daction(i, j) * half[i] * (1.0 - t * t) + dl_dlogp[j] * 2.0 * t;
        g(i, j) = dl_du;
        const double through_u = dl_du * sigma * s.eps(i, j);
        const double through_density = -dl_dlogp[j];
        g(d + i, j) = clamp_mask(s.raw_log_std(i, j)) * (through_u + through_density);
      }
    }
    return g;
  }

  /// Gradient w.r.t. head outputs of sum_j weight_j * log_prob(action_j) with the
  /// actions held fixed (score function).
  MatX score_grad(const SquashedBatch& s, const VecX& weight) const {
    const int d = dim();
    const Eigen::Index n = s.u.cols();
    MatX g(2 * d, n);
    for (Eigen::Index j = 0; j < n; ++j) {
      for (int i = 0; i < d; ++i) {
        const double sigma = std::exp(s.log_std(i, j));
        const double e = s.eps(i, j);
        g(i, j) = weight[j] * e / sigma;
        g(d + i, j) = weight[j] * clamp_mask(s.raw_log_std(i, j)) * (e * e - 1.0);
      }
    }
    return g;
  }

 private:
  static double clamp_mask(double raw) { return (raw > kLogStdMin && raw < kLogStdMax) ? 1.0 : 0.0; }

  void check_out(const MatX& out) const {
    if (out.rows() != 2 * dim())
      throw Error(ErrorKind::ShapeMismatch, "head expects " + std::to_string(2 * dim()) + " network outputs");
  }

  static SquashedSample first(const SquashedBatch& b) {
    return SquashedSample{b.action.col(0), b.log_prob[0], b.log_prob_unit[0]};
  }

  VecX lo_;
  VecX hi_;
};

// ---------------------------------------------------------------------------
// Serialization: named tensors as nested arrays plus shape metadata.

inline constexpr int kCheckpointVersion = 1;

inline Json to_json(const Mlp& net) {
  Json layers = Json::array();
  for (const Dense& d : net.layers()) {
    Json w = Json::array();
    for (Eigen::Index r = 0; r < d.w.rows(); ++r) {
      Json row = Json::array();
      for (Eigen::Index c = 0; c < d.w.cols(); ++c) row.push_back(d.w(r, c));
      w.push_back(std::move(row));
    }
    layers.push_back(Json{{"shape", {d.w.rows(), d.w.cols()}},
                          {"activation", to_string(d.act)},
                          {"weight", std::move(w)},
                          {"bias", to_json_array(d.b)}});
  }
  return Json{{"version", kCheckpointVersion}, {"layers", std::move(layers)}};
}

inline Mlp mlp_from_json(const Json& j) {
  if (!j.contains("version") || j.at("version").get<int>() != kCheckpointVersion)
    throw Error(ErrorKind::CheckpointVersionMismatch, "network checkpoint version is not " +
                                                           std::to_string(kCheckpointVersion));
  std::vector<Dense> layers;
  for (const Json& l : j.at("layers")) {
    const auto rows = l.at("shape").at(0).get<Eigen::Index>();
    const auto cols = l.at("shape").at(1).get<Eigen::Index>();
    Dense d;
    d.act = activation_from_string(l.at("activation").get<std::string>());
    d.w.resize(rows, cols);
    const Json& w = l.at("weight");
    if (static_cast<Eigen::Index>(w.size()) != rows) throw Error(ErrorKind::ShapeMismatch, "weight rows mismatch");
    for (Eigen::Index r = 0; r < rows; ++r) {
      if (static_cast<Eigen::Index>(w[r].size()) != cols) throw Error(ErrorKind::ShapeMismatch, "weight cols mismatch");
      for (Eigen::Index c = 0; c < cols; ++c) d.w(r, c) = w[r][c].get<double>();
    }
    const Json& b = l.at("bias");
    if (static_cast<Eigen::Index>(b.size()) != rows) throw Error(ErrorKind::ShapeMismatch, "bias length mismatch");
    d.b.resize(rows);
    for (Eigen::Index r = 0; r < rows; ++r) d.b[r] = b[r].get<double>();
    layers.push_back(std::move(d));
  }
  return Mlp(std::move(layers));
}

inline Json to_json(const AdamState& st) {
  Json m = Json::array(), v = Json::array();
  for (const VecX& x : st.m) m.push_back(to_json_array(x));
  for (const VecX& x : st.v) v.push_back(to_json_array(x));
  return Json{{"lr", st.lr}, {"beta1", st.beta1}, {"beta2", st.beta2}, {"eps", st.eps},
              {"t", st.t},   {"m", std::move(m)}, {"v", std::move(v)}};
}

inline AdamState adam_from_json(const Json& j) {
  AdamState st;
  st.lr = j.at("lr").get<double>();
  st.beta1 = j.at("beta1").get<double>();
  st.beta2 = j.at("beta2").get<double>();
  st.eps = j.at("eps").get<double>();
  st.t = j.at("t").get<std::int64_t>();
  auto read = [](const Json& a) {
    std::vector<VecX> out;
    for (const Json& x : a) {
      VecX v(static_cast<Eigen::Index>(x.size()));
      for (std::size_t i = 0; i < x.size(); ++i) v[static_cast<Eigen::Index>(i)] = x[i].get<double>();
      out.push_back(std::move(v));
    }
    return out;
  };
  st.m = read(j.at("m"));
  st.v = read(j.at("v"));
  return st;
}

}  // namespace blimp::nn
