#pragma once

// Goal-directed straight-line tracking: the reference is the segment from the
// origin to the target, and the reward trades tracking, heading and progress.

#include <algorithm>
#include <cmath>
#include <string>

#include "blimp/common.hpp"
#include "blimp/dynamics.hpp"
#include "blimp/json_util.hpp"

namespace blimp {

struct Goal {
  Vec3 zeta = Vec3(4.5, 0.0, 0.0);  // [m]
  double r_g = 0.2;                 // [m]
};

struct RewardWeights {
  double tracking = -2.0;
  double heading = -1.0;
  double progress = 2.0;
  double goal_bonus = 20.0;
};

struct Workspace {
  Vec3 lo = Vec3(4.0, -2.0, -1.0);
  Vec3 hi = Vec3(5.0, 2.0, 1.0);
};

struct StepReward {
  double r = 0.0;
  double e_trk = 0.0;
  double e_head = 0.0;
  double delta_d = 0.0;
  double bonus = 0.0;
};

enum class Termination { Running, GoalReached, Timeout, Diverged };

inline const char* to_string(Termination t) {
  switch (t) {
    case Termination::Running: return "running";
    case Termination::GoalReached: return "goal_reached";
    case Termination::Timeout: return "timeout";
    case Termination::Diverged: return "diverged";
  }
  return "running";
}

inline Termination termination_from_string(const std::string& s) {
  if (s == "running") return Termination::Running;
  if (s == "goal_reached") return Termination::GoalReached;
  if (s == "timeout") return Termination::Timeout;
  if (s == "diverged") return Termination::Diverged;
  throw Error(ErrorKind::InvalidConfig, "unknown termination '" + s + "'");
}

struct TerminationLimits {
  double horizon = 15.0;   // [s]
  double box_half = 10.0;  // [m], divergence bounding box
};

/// Distance from p to the segment {lambda * zeta : lambda in [0, 1]}.
inline double cross_track_error(const Vec3& p, const Vec3& zeta) {
  const double zz = zeta.squaredNorm();
  if (!(std::sqrt(zz) >= 1e-9)) throw Error(ErrorKind::DegenerateGoal, "target too close to the origin");
  const double lambda = std::clamp(p.dot(zeta) / zz, 0.0, 1.0);
  return (p - lambda * zeta).norm();
}

/// Angle in [0, pi] between the velocity and the direction to the target; zero
/// when either vector is (near) zero.
inline double heading_error(const Vec3& v_inertial, const Vec3& p, const Vec3& zeta) {
  const Vec3 to_goal = zeta - p;
  const double nv = v_inertial.norm();
  const double ng = to_goal.norm();
  if (nv < 1e-3 || ng < 1e-3) return 0.0;
  // atan2 form keeps precision near 0 and pi.
  return std::atan2(v_inertial.cross(to_goal).norm(), v_inertial.dot(to_goal));
}

inline double forward_progress(const Vec3& p_prev, const Vec3& p, const Vec3& zeta) {
  return (p_prev - zeta).norm() - (p - zeta).norm();
}

inline StepReward step_reward(const Vec3& p_prev, const Vec3& p, const Vec3& v_inertial, const Goal& goal,
                              const RewardWeights& w = {}) {
  StepReward s;
  s.e_trk = cross_track_error(p, goal.zeta);
  s.e_head = heading_error(v_inertial, p, goal.zeta);
  s.delta_d = forward_progress(p_prev, p, goal.zeta);
  s.bonus = (p - goal.zeta).norm() <= goal.r_g ? w.goal_bonus : 0.0;
  s.r = w.tracking * s.e_trk + w.heading * s.e_head + w.progress * s.delta_d + s.bonus;
  return s;
}

inline bool diverged_state(const BlimpState& s, const TerminationLimits& lim) {
  if (!s.finite()) return true;
  if (s.pack().cwiseAbs().maxCoeff() > kBlowupLimit) return true;
  if (std::abs(s.e.y()) >= kPi / 2.0 - kGimbalMargin) return true;
  return (s.p.cwiseAbs().array() > lim.box_half).any();
}

inline Termination check_termination(const Vec3& p, const Goal& goal, double t, const BlimpState& state,
                                     const TerminationLimits& lim = {}) {
  if (diverged_state(state, lim) || (p.cwiseAbs().array() > lim.box_half).any()) return Termination::Diverged;
  if ((p - goal.zeta).norm() <= goal.r_g) return Termination::GoalReached;
  if (t >= lim.horizon - 1e-9) return Termination::Timeout;
  return Termination::Running;
}

inline Goal sample_goal(std::uint64_t seed, const Workspace& ws = {}, double r_g = 0.2) {
  Rng rng(seed);
  Goal g;
  for (int i = 0; i < 3; ++i) g.zeta[i] = uniform(rng, ws.lo[i], ws.hi[i]);
  g.r_g = r_g;
  return g;
}

}  // namespace blimp
