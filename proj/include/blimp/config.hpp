#pragma once

// Training/evaluation configuration: defaults, presets and strict JSON I/O.

#include <string>
#include <vector>

#include "blimp/baselines.hpp"
#include "blimp/dynamics.hpp"
#include "blimp/env.hpp"
#include "blimp/sac.hpp"
#include "blimp/spg.hpp"
#include "blimp/task.hpp"

namespace blimp {

struct Probe {
  Vec3 zeta = Vec3::Zero();
  double c = 0.0;
};

/// Workspace corners and center; the slider follows the height of each probe.
inline std::vector<Probe> default_probes(const Workspace& ws = {}) {
  std::vector<Probe> out;
  for (int i = 0; i < 8; ++i) {
    const Vec3 z((i & 1) ? ws.hi.x() : ws.lo.x(), (i & 2) ? ws.hi.y() : ws.lo.y(), (i & 4) ? ws.hi.z() : ws.lo.z());
    out.push_back(Probe{z, (i & 4) ? 0.025 : -0.025});
  }
  out.push_back(Probe{0.5 * (ws.lo + ws.hi), 0.0});
  return out;
}

struct TrainConfig {
  std::int64_t episodes = 30000;        // M
  std::int64_t stage1_episodes = 15000;  // N
  std::uint64_t seed = 0;
  EnvConfig env;
  Workspace workspace;
  double goal_radius = 0.2;
  ModelParams model;
  sac::SacConfig sac;
  spg::SpgConfig spg;
  PidGains pid;
  int eval_interval = 100;
  int eval_trials = 3;
  int checkpoint_interval = 1000;
  int divergence_window = 200;
  double divergence_fraction = 0.5;
  int bias_interval = 10;  // outer updates between probe evaluations
  std::vector<Probe> probes = default_probes();

  void validate() const {
    auto bad = [](const std::string& field, const std::string& msg) {
      throw Error(ErrorKind::InvalidConfig, field + ": " + msg);
    };
    if (episodes <= 0) bad("episodes", "must be > 0");
    if (stage1_episodes < 0 || stage1_episodes >= episodes) bad("stage1_episodes", "must satisfy 0 <= N < M");
    if (!(env.physics_dt > 0.0) || env.physics_dt > 0.05) bad("env.physics_dt", "must be in (0, 0.05]");
    if (env.substeps < 1) bad("env.substeps", "must be >= 1");
    if (!(env.limits.horizon > 0.0)) bad("env.horizon", "must be > 0");
    if (!(env.limits.box_half > 0.0)) bad("env.box_half", "must be > 0");
    if (!(goal_radius > 0.0)) bad("goal_radius", "must be > 0");
    for (int i = 0; i < 3; ++i)
      if (!(workspace.lo[i] <= workspace.hi[i])) bad("workspace", "lo must not exceed hi");
    if (!(sac.gamma > 0.0 && sac.gamma <= 1.0)) bad("sac.gamma", "must be in (0, 1]");
    if (!(sac.rho > 0.0 && sac.rho <= 1.0)) bad("sac.rho", "must be in (0, 1]");
    if (sac.batch_size < 1) bad("sac.batch_size", "must be >= 1");
    if (sac.buffer_capacity < 1) bad("sac.buffer_capacity", "must be >= 1");
    if (sac.warmup < 0) bad("sac.warmup", "must be >= 0");
    if (sac.updates_per_step < 0) bad("sac.updates_per_step", "must be >= 0");
    if (!(sac.init_alpha > 0.0)) bad("sac.init_alpha", "must be > 0");
    if (!(sac.reward_scale > 0.0)) bad("sac.reward_scale", "must be > 0");
    if (!(spg.eta0 > 0.0)) bad("spg.eta0", "must be > 0");
    if (spg.batch_size < 1) bad("spg.batch_size", "must be >= 1");
    if (!(spg.init_beta > 0.0)) bad("spg.init_beta", "must be > 0");
    if (!(spg.goal_scale > 0.0)) bad("spg.goal_scale", "must be > 0");
    if (eval_interval < 1) bad("eval_interval", "must be >= 1");
    if (eval_trials < 1) bad("eval_trials", "must be >= 1");
    if (checkpoint_interval < 1) bad("checkpoint_interval", "must be >= 1");
    if (divergence_window < 1) bad("divergence_window", "must be >= 1");
    if (!(divergence_fraction > 0.0 && divergence_fraction <= 1.0)) bad("divergence_fraction", "must be in (0, 1]");
    if (bias_interval < 1) bad("bias_interval", "must be >= 1");
    for (const auto& p : probes)
      if (std::abs(p.c) > kSliderLimit) bad("probes.c", "must lie in [-0.05, 0.05]");
    model.validate();
    pid.validate();
  }
};

/// Full-scale settings.
inline TrainConfig paper_preset() { return TrainConfig{}; }

/// Single-core scale: fewer episodes and narrower networks.
inline TrainConfig desk_preset() {
  TrainConfig c;
  c.episodes = 3000;
  c.stage1_episodes = 1500;
  c.sac.critic_hidden = {128, 128};
  c.sac.actor_hidden = {64, 64};
  c.sac.batch_size = 128;
  c.sac.buffer_capacity = 300'000;
  c.checkpoint_interval = 500;
  c.spg.eta0 = 0.05;  // fewer outer updates than the full run
  return c;
}

inline TrainConfig preset(const std::string& name) {
  if (name == "paper") return paper_preset();
  if (name == "desk") return desk_preset();
  throw Error(ErrorKind::InvalidConfig, "preset: unknown '" + name + "' (paper | desk)");
}

inline Json to_json(const TrainConfig& c) {
  const EnvConfig& e = c.env;
  Json env = {{"physics_dt", e.physics_dt},
              {"substeps", e.substeps},
              {"horizon", e.limits.horizon},
              {"box_half", e.limits.box_half},
              {"randomize_params", e.randomize_params},
              {"randomize_initial_state", e.randomize_initial_state},
              {"init_position", e.init_bounds.position},
              {"init_attitude", e.init_bounds.attitude},
              {"init_velocity", e.init_bounds.velocity},
              {"reward",
               {{"tracking", e.reward.tracking},
                {"heading", e.reward.heading},
                {"progress", e.reward.progress},
                {"goal_bonus", e.reward.goal_bonus}}}};
  const sac::SacConfig& s = c.sac;
  Json sac = {{"gamma", s.gamma},
              {"rho", s.rho},
              {"batch_size", s.batch_size},
              {"lr_q", s.lr_q},
              {"lr_pi", s.lr_pi},
              {"lr_alpha", s.lr_alpha},
              {"init_alpha", s.init_alpha},
              {"target_entropy", s.target_entropy},
              {"reward_scale", s.reward_scale},
              {"critic_hidden", s.critic_hidden},
              {"actor_hidden", s.actor_hidden},
              {"buffer_capacity", s.buffer_capacity},
              {"warmup", s.warmup},
              {"updates_per_step", s.updates_per_step},
              {"obs_scale",
               {{"position", s.obs_scale.position},
                {"angle", s.obs_scale.angle},
                {"velocity", s.obs_scale.velocity},
                {"rate", s.obs_scale.rate},
                {"goal", s.obs_scale.goal},
                {"slider", s.obs_scale.slider}}}};
  const spg::SpgConfig& o = c.spg;
  Json spg = {{"hidden", o.hidden},
              {"eta0", o.eta0},
              {"schedule", spg::to_string(o.schedule)},
              {"batch_size", o.batch_size},
              {"lr_beta", o.lr_beta},
              {"init_beta", o.init_beta},
              {"target_entropy", o.target_entropy},
              {"goal_scale", o.goal_scale},
              {"baseline_decay", o.baseline_decay}};
  Json probes = Json::array();
  for (const auto& p : c.probes) probes.push_back({{"zeta", to_json_array(p.zeta)}, {"c", p.c}});
  return Json{{"episodes", c.episodes},
              {"stage1_episodes", c.stage1_episodes},
              {"seed", c.seed},
              {"env", env},
              {"workspace", {{"lo", to_json_array(c.workspace.lo)}, {"hi", to_json_array(c.workspace.hi)}}},
              {"goal_radius", c.goal_radius},
              {"model", to_json(c.model)},
              {"sac", sac},
              {"spg", spg},
              {"pid", to_json(c.pid)},
              {"eval_interval", c.eval_interval},
              {"eval_trials", c.eval_trials},
              {"checkpoint_interval", c.checkpoint_interval},
              {"divergence_window", c.divergence_window},
              {"divergence_fraction", c.divergence_fraction},
              {"bias_interval", c.bias_interval},
              {"probes", probes}};
}

/// Applies the keys present in `j` on top of `c`; unknown keys are rejected.
inline TrainConfig train_config_from_json(const Json& j, TrainConfig c = {}) {
  ObjectReader r(j, "");
  r.read("episodes", c.episodes);
  r.read("stage1_episodes", c.stage1_episodes);
  r.read("seed", c.seed);
  if (r.has("env")) {
    ObjectReader e(r.child("env"), "env");
    e.read("physics_dt", c.env.physics_dt);
    e.read("substeps", c.env.substeps);
    e.read("horizon", c.env.limits.horizon);
    e.read("box_half", c.env.limits.box_half);
    e.read("randomize_params", c.env.randomize_params);
    e.read("randomize_initial_state", c.env.randomize_initial_state);
    e.read("init_position", c.env.init_bounds.position);
    e.read("init_attitude", c.env.init_bounds.attitude);
    e.read("init_velocity", c.env.init_bounds.velocity);
    if (e.has("reward")) {
      ObjectReader w(e.child("reward"), "env.reward");
      w.read("tracking", c.env.reward.tracking);
      w.read("heading", c.env.reward.heading);
      w.read("progress", c.env.reward.progress);
      w.read("goal_bonus", c.env.reward.goal_bonus);
      w.finish();
    }
    e.finish();
  }
  if (r.has("workspace")) {
    ObjectReader w(r.child("workspace"), "workspace");
    w.read("lo", c.workspace.lo);
    w.read("hi", c.workspace.hi);
    w.finish();
  }
  r.read("goal_radius", c.goal_radius);
  if (r.has("model")) {
    // Partial model blocks patch the current parameters.
    Json merged = to_json(c.model);
    merged.merge_patch(r.child("model"));
    c.model = model_params_from_json(merged, "model");
  }
  if (r.has("sac")) {
    ObjectReader s(r.child("sac"), "sac");
    s.read("gamma", c.sac.gamma);
    s.read("rho", c.sac.rho);
    s.read("batch_size", c.sac.batch_size);
    s.read("lr_q", c.sac.lr_q);
    s.read("lr_pi", c.sac.lr_pi);
    s.read("lr_alpha", c.sac.lr_alpha);
    s.read("init_alpha", c.sac.init_alpha);
    s.read("target_entropy", c.sac.target_entropy);
    s.read("reward_scale", c.sac.reward_scale);
    s.read("critic_hidden", c.sac.critic_hidden);
    s.read("actor_hidden", c.sac.actor_hidden);
    s.read("buffer_capacity", c.sac.buffer_capacity);
    s.read("warmup", c.sac.warmup);
    s.read("updates_per_step", c.sac.updates_per_step);
    if (s.has("obs_scale")) {
      ObjectReader k(s.child("obs_scale"), "sac.obs_scale");
      k.read("position", c.sac.obs_scale.position);
      k.read("angle", c.sac.obs_scale.angle);
      k.read("velocity", c.sac.obs_scale.velocity);
      k.read("rate", c.sac.obs_scale.rate);
      k.read("goal", c.sac.obs_scale.goal);
      k.read("slider", c.sac.obs_scale.slider);
      k.finish();
    }
    s.finish();
  }
  if (r.has("spg")) {
    ObjectReader s(r.child("spg"), "spg");
    s.read("hidden", c.spg.hidden);
    s.read("eta0", c.spg.eta0);
    if (s.has("schedule")) {
      std::string name;
      s.read("schedule", name);
      c.spg.schedule = spg::schedule_from_string(name);
    }
    s.read("batch_size", c.spg.batch_size);
    s.read("lr_beta", c.spg.lr_beta);
    s.read("init_beta", c.spg.init_beta);
    s.read("target_entropy", c.spg.target_entropy);
    s.read("goal_scale", c.spg.goal_scale);
    s.read("baseline_decay", c.spg.baseline_decay);
    s.finish();
  }
  if (r.has("pid")) {
    Json merged = to_json(c.pid);
    merged.merge_patch(r.child("pid"));
    c.pid = pid_gains_from_json(merged, "pid");
  }
  r.read("eval_interval", c.eval_interval);
  r.read("eval_trials", c.eval_trials);
  r.read("checkpoint_interval", c.checkpoint_interval);
  r.read("divergence_window", c.divergence_window);
  r.read("divergence_fraction", c.divergence_fraction);
  r.read("bias_interval", c.bias_interval);
  if (r.has("probes")) {
    const Json& arr = r.child("probes");
    if (!arr.is_array()) throw Error(ErrorKind::InvalidConfig, "probes: expected an array");
    c.probes.clear();
    for (std::size_t i = 0; i < arr.size(); ++i) {
      ObjectReader p(arr[i], "probes[" + std::to_string(i) + "]");
      Probe pr;
      p.read("zeta", pr.zeta);
      p.read("c", pr.c);
      p.finish();
      c.probes.push_back(pr);
    }
  }
  r.finish();
  c.validate();
  return c;
}

}  // namespace blimp
