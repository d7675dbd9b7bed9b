#pragma once

// Episode records and a controller-agnostic rollout loop.

#include <functional>
#include <limits>
#include <string>
#include <vector>

#include "blimp/env.hpp"
#include "blimp/spg.hpp"

namespace blimp {

struct StepSample {
  double t = 0.0;  // time at the end of the control step
  BlimpState state;
  ControlInput action;
  double reward = 0.0;
  double e_trk = 0.0;
};

struct EpisodeRecord {
  std::int64_t index = 0;
  std::string stage = "eval";  // stage1 | stage2 | eval
  Goal goal;
  double c = 0.0;
  Termination termination = Termination::Running;
  std::vector<StepSample> steps;
  double ret = 0.0;  // discounted with gamma
  double gamma = 0.99;

  std::vector<double> rewards() const {
    std::vector<double> r;
    r.reserve(steps.size());
    for (const auto& s : steps) r.push_back(s.reward);
    return r;
  }

  double undiscounted_return() const {
    double s = 0.0;
    for (const auto& st : steps) s += st.reward;
    return s;
  }

  /// Time of arrival, or NaN when the goal was not reached.
  double time_to_goal() const {
    if (termination != Termination::GoalReached || steps.empty()) return std::numeric_limits<double>::quiet_NaN();
    return steps.back().t;
  }
};

/// Thrust command from the current environment state. Policies that keep
/// per-episode state reset it through `on_reset`.
struct ThrustPolicy {
  std::function<ControlInput(const BlimpEnv&, const Observation&)> act;
  std::function<void()> on_reset;
};

/// Appends one step and reports whether the episode ended.
inline bool record_step(EpisodeRecord& rec, const BlimpEnv& env, const ControlInput& u, const StepOutcome& out) {
  StepSample s;
  s.t = env.time();
  s.state = env.state();
  s.action = ControlInput{std::clamp(u.f_l, 0.0, env.params().f_max), std::clamp(u.f_r, 0.0, env.params().f_max)};
  s.reward = out.reward.r;
  s.e_trk = out.reward.e_trk;
  rec.steps.push_back(s);
  rec.termination = out.termination;
  return out.termination != Termination::Running;
}

inline void finalize_record(EpisodeRecord& rec) { rec.ret = spg::episode_return(rec.rewards(), rec.gamma); }

/// Runs one episode with `c` pinned; reset randomization follows the env config.
inline EpisodeRecord run_rollout(BlimpEnv& env, const ThrustPolicy& policy, const Goal& goal, double c,
                                 std::uint64_t seed, double gamma = 0.99) {
  EpisodeRecord rec;
  rec.goal = goal;
  rec.c = c;
  rec.gamma = gamma;
  Observation obs = env.reset(goal, SliderConfig{c}, seed);
  if (policy.on_reset) policy.on_reset();
  rec.steps.reserve(static_cast<std::size_t>(env.config().max_steps()));
  while (true) {
    const ControlInput u = policy.act(env, obs);
    const StepOutcome out = env.step(u);
    obs = out.next_obs;
    if (record_step(rec, env, u, out)) break;
  }
  finalize_record(rec);
  return rec;
}

}  // namespace blimp
