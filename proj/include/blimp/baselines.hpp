#pragma once

// PID attitude controller with goal-dependent feedforward (paired with the
// learned slider policy), and fixed-slider rollouts of a learned thrust policy.

#include <cmath>
#include <vector>

#include "blimp/rollout.hpp"
#include "blimp/sac.hpp"

namespace blimp {

struct PidLoop {
  double kp = 0.0;
  double ki = 0.0;
  double kd = 0.0;
};

struct PidGains {
  PidLoop pitch{0.05, 0.01, 0.05};
  PidLoop yaw{0.05, 0.001, 0.05};
  double integrator_clamp = 0.5;  // [rad s]
  double ff_k0 = 0.02;            // [N]
  double ff_k1 = 0.005;           // [N/m]

  double feedforward(const Vec3& zeta) const { return ff_k0 + ff_k1 * zeta.norm(); }

  void validate() const {
    const double all[] = {pitch.kp, pitch.ki, pitch.kd, yaw.kp, yaw.ki, yaw.kd, ff_k0, ff_k1};
    for (double g : all)
      if (!std::isfinite(g)) throw Error(ErrorKind::InvalidConfig, "pid: gains must be finite");
    if (!(integrator_clamp > 0.0)) throw Error(ErrorKind::InvalidConfig, "pid.integrator_clamp: must be > 0");
  }
};

inline Json to_json(const PidGains& g) {
  auto loop = [](const PidLoop& l) { return Json{{"kp", l.kp}, {"ki", l.ki}, {"kd", l.kd}}; };
  return Json{{"pitch", loop(g.pitch)},
              {"yaw", loop(g.yaw)},
              {"integrator_clamp", g.integrator_clamp},
              {"ff_k0", g.ff_k0},
              {"ff_k1", g.ff_k1}};
}

inline PidGains pid_gains_from_json(const Json& j, const std::string& path = "pid") {
  PidGains g;
  ObjectReader r(j, path);
  auto loop = [&](const std::string& key, PidLoop& l) {
    if (!r.has(key)) return;
    ObjectReader lr(r.child(key), r.field(key));
    lr.read("kp", l.kp);
    lr.read("ki", l.ki);
    lr.read("kd", l.kd);
    lr.finish();
  };
  loop("pitch", g.pitch);
  loop("yaw", g.yaw);
  r.read("integrator_clamp", g.integrator_clamp);
  r.read("ff_k0", g.ff_k0);
  r.read("ff_k1", g.ff_k1);
  r.finish();
  g.validate();
  return g;
}

struct AttitudeRefs {
  double psi_ref = 0.0;
  double theta_ref = 0.0;
};

/// Heading and climb angle that point the nose at the target (z down, so
/// a target above gives a positive pitch reference).
inline AttitudeRefs attitude_references(const Vec3& p, const Vec3& zeta) {
  const Vec3 e = zeta - p;
  const double n = e.norm();
  if (!(n > 1e-6)) throw Error(ErrorKind::DegenerateGoal, "position coincides with the target");
  const Vec3 u = e / n;
  return AttitudeRefs{std::atan2(u.y(), u.x()), std::atan2(-u.z(), std::hypot(u.x(), u.y()))};
}

struct PidState {
  double int_theta = 0.0;
  double int_psi = 0.0;
};

/// Pitch and yaw moments to thruster forces: solves B_tp f = tau where
/// B_tp = [[l_p, l_p], [l, -l]] holds the pitch and yaw rows of the allocation.
inline Vec2 allocate_moments(double tau_theta, double tau_psi, const ModelParams& m) {
  const double a = tau_theta / m.thruster_pitch_arm;
  const double b = tau_psi / m.thruster_arm;
  return Vec2(0.5 * (a + b), 0.5 * (a - b));
}

inline ControlInput pid_control(const BlimpState& s, const AttitudeRefs& refs, const Vec3& zeta, const PidGains& g,
                                double dt, PidState& st, const ModelParams& m) {
  const Vec3 e_rate = euler_rate_matrix(s.e) * s.w_b;
  const double err_theta = refs.theta_ref - s.e.y();
  const double err_psi = wrap_angle(refs.psi_ref - s.e.z());
  const double lim = g.integrator_clamp;
  st.int_theta = std::clamp(st.int_theta + err_theta * dt, -lim, lim);
  st.int_psi = std::clamp(st.int_psi + err_psi * dt, -lim, lim);
  const double tau_theta = g.pitch.kp * err_theta + g.pitch.ki * st.int_theta - g.pitch.kd * e_rate.y();
  const double tau_psi = g.yaw.kp * err_psi + g.yaw.ki * st.int_psi - g.yaw.kd * e_rate.z();
  const Vec2 f = allocate_moments(tau_theta, tau_psi, m) + Vec2::Constant(g.feedforward(zeta));
  return ControlInput{std::clamp(f.x(), 0.0, m.f_max), std::clamp(f.y(), 0.0, m.f_max)};
}

/// Stateful PID thrust policy for rollouts; uses nominal geometry for allocation.
inline ThrustPolicy pid_policy(const PidGains& g) {
  auto st = std::make_shared<PidState>();
  ThrustPolicy p;
  p.on_reset = [st] { *st = PidState{}; };
  p.act = [st, g](const BlimpEnv& env, const Observation&) {
    const BlimpState& s = env.state();
    const Vec3& zeta = env.goal().zeta;
    AttitudeRefs refs;
    if ((zeta - s.p).norm() > 1e-6) refs = attitude_references(s.p, zeta);
    return pid_control(s, refs, zeta, g, env.config().control_dt(), *st, env.nominal());
  };
  return p;
}

/// Deterministic actor as a rollout policy.
inline ThrustPolicy sac_policy(sac::SacAgent& agent) {
  ThrustPolicy p;
  p.act = [&agent](const BlimpEnv&, const Observation& obs) { return agent.act_thrust(obs, true); };
  return p;
}

/// Deterministic rollouts with the slider pinned at `c_fixed`; trial seeds are
/// derive_seed(seed, goal index, trial).
inline std::vector<EpisodeRecord> run_fixed_slider(sac::SacAgent& agent, double c_fixed, const std::vector<Goal>& goals,
                                                   BlimpEnv& env, std::uint64_t seed, int trials = 1) {
  std::vector<EpisodeRecord> out;
  const ThrustPolicy policy = sac_policy(agent);
  for (std::size_t i = 0; i < goals.size(); ++i)
    for (int k = 0; k < trials; ++k)
      out.push_back(run_rollout(env, policy, goals[i], c_fixed, derive_seed(seed, i, static_cast<std::uint64_t>(k))));
  return out;
}

}  // namespace blimp
