#pragma once

// Episode-level environment: one control step holds the thrust command over a
// fixed number of RK4 physics substeps and returns the shaped reward.

#include <optional>

#include "blimp/dynamics.hpp"
#include "blimp/task.hpp"

namespace blimp {

inline constexpr int kStateDim = 16;
inline constexpr int kActionDim = 2;

using Observation = Eigen::Matrix<double, kStateDim, 1>;

/// Divisors applied to the augmented state before it enters a network.
struct ObsScale {
  double position = 5.0;
  double angle = kPi;
  double velocity = 1.0;
  double rate = 1.0;
  double goal = 5.0;
  double slider = kSliderLimit;
};

struct EnvConfig {
  double physics_dt = 1.0 / 60.0;
  int substeps = 6;
  TerminationLimits limits;
  RewardWeights reward;
  InitialStateBounds init_bounds;
  bool randomize_params = true;
  bool randomize_initial_state = true;

  double control_dt() const { return physics_dt * substeps; }
  int max_steps() const { return static_cast<int>(std::ceil(limits.horizon / control_dt() - 1e-9)); }
};

/// Augmented state [p, e (yaw wrapped), v_b, w_b, zeta, c].
inline Observation encode_observation(const BlimpState& s, const Goal& g, const SliderConfig& cfg) {
  Observation o;
  o.segment<3>(0) = s.p;
  o.segment<3>(3) = Vec3(s.e.x(), s.e.y(), wrap_angle(s.e.z()));
  o.segment<3>(6) = s.v_b;
  o.segment<3>(9) = s.w_b;
  o.segment<3>(12) = g.zeta;
  o[15] = cfg.c;
  return o;
}

inline Observation normalize_observation(const Observation& o, const ObsScale& k) {
  Observation n = o;
  n.segment<3>(0) /= k.position;
  n.segment<3>(3) /= k.angle;
  n.segment<3>(6) /= k.velocity;
  n.segment<3>(9) /= k.rate;
  n.segment<3>(12) /= k.goal;
  n[15] /= k.slider;
  return n;
}

struct StepOutcome {
  StepReward reward;
  Termination termination = Termination::Running;
  Observation next_obs;
};

class BlimpEnv {
 public:
  BlimpEnv(ModelParams nominal, EnvConfig cfg) : nominal_(std::move(nominal)), cfg_(cfg), params_(nominal_) {
    nominal_.validate();
  }

  /// Randomization follows the config toggles; seeds make each reset reproducible.
  Observation reset(const Goal& goal, const SliderConfig& slider, std::uint64_t seed) {
    goal_ = goal;
    slider_ = SliderConfig::checked(slider.c);
    params_ = randomize_params(nominal_, derive_seed(seed, 1), cfg_.randomize_params);
    state_ = cfg_.randomize_initial_state ? randomize_initial_state(BlimpState{}, derive_seed(seed, 2), cfg_.init_bounds)
                                          : BlimpState{};
    t_ = 0.0;
    steps_ = 0;
    done_ = false;
    return observation();
  }

  /// Resets to an explicit state with explicit parameters (no randomization).
  Observation reset_exact(const Goal& goal, const SliderConfig& slider, const BlimpState& state,
                          const ModelParams& params) {
    goal_ = goal;
    slider_ = SliderConfig::checked(slider.c);
    params_ = params;
    state_ = state;
    t_ = 0.0;
    steps_ = 0;
    done_ = false;
    return observation();
  }

  StepOutcome step(const ControlInput& command) {
    if (done_) throw Error(ErrorKind::InvalidConfig, "step called on a finished episode");
    const ControlInput u{std::clamp(command.f_l, 0.0, params_.f_max), std::clamp(command.f_r, 0.0, params_.f_max)};
    const Vec3 p_prev = state_.p;
    bool blew_up = false;
    for (int k = 0; k < cfg_.substeps; ++k) {
      try {
        state_ = blimp::step(state_, slider_, u, params_, cfg_.physics_dt);
      } catch (const Error& e) {
        if (e.kind() != ErrorKind::GimbalLock && e.kind() != ErrorKind::NumericBlowup) throw;
        blew_up = true;
        break;
      }
    }
    ++steps_;
    t_ = steps_ * cfg_.control_dt();
    StepOutcome out;
    const Vec3 v_inertial = rotation_matrix(state_.e) * state_.v_b;
    out.reward = step_reward(p_prev, state_.p, v_inertial, goal_, cfg_.reward);
    out.termination = blew_up ? Termination::Diverged : check_termination(state_.p, goal_, t_, state_, cfg_.limits);
    if (out.termination != Termination::GoalReached && out.reward.bonus != 0.0) {
      out.reward.r -= out.reward.bonus;
      out.reward.bonus = 0.0;
    }
    done_ = out.termination != Termination::Running;
    out.next_obs = observation();
    return out;
  }

  Observation observation() const { return encode_observation(state_, goal_, slider_); }
  const BlimpState& state() const { return state_; }
  const Goal& goal() const { return goal_; }
  const SliderConfig& slider() const { return slider_; }
  const ModelParams& params() const { return params_; }
  const ModelParams& nominal() const { return nominal_; }
  const EnvConfig& config() const { return cfg_; }
  double time() const { return t_; }
  int steps() const { return steps_; }
  bool done() const { return done_; }

 private:
  ModelParams nominal_;
  EnvConfig cfg_;
  ModelParams params_;
  BlimpState state_;
  Goal goal_;
  SliderConfig slider_;
  double t_ = 0.0;
  int steps_ = 0;
  bool done_ = false;
};

}  // namespace blimp
