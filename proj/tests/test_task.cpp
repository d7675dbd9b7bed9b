#include <gtest/gtest.h>

#include "blimp/env.hpp"
#include "blimp/task.hpp"

using namespace blimp;

namespace {

// Brute-force distance to the segment over lambda in {0, 1e-3, ..., 1}.
double grid_cross_track(const Vec3& p, const Vec3& zeta) {
  double best = std::numeric_limits<double>::infinity();
  for (int i = 0; i <= 1000; ++i) best = std::min(best, (p - (i * 1e-3) * zeta).norm());
  return best;
}

Vec3 random_vec(Rng& rng, double lo, double hi) { return Vec3(uniform(rng, lo, hi), uniform(rng, lo, hi), uniform(rng, lo, hi)); }

}  // namespace

TEST(CrossTrack, PointOnLineIsZero) {
  const Vec3 zeta(4.0, 1.0, -1.0);
  EXPECT_NEAR(cross_track_error(0.5 * zeta, zeta), 0.0, 1e-15);
}

TEST(CrossTrack, ClampAtSegmentStart) {
  EXPECT_DOUBLE_EQ(cross_track_error(Vec3(0.0, 1.0, 0.0), Vec3(1.0, 0.0, 0.0)), 1.0);
  EXPECT_DOUBLE_EQ(cross_track_error(Vec3(-1.0, 1.0, 0.0), Vec3(1.0, 0.0, 0.0)), std::sqrt(2.0));
  EXPECT_DOUBLE_EQ(cross_track_error(Vec3(3.0, 0.0, 0.0), Vec3(1.0, 0.0, 0.0)), 2.0);
}

TEST(CrossTrack, MatchesLambdaGridSearch) {
  Rng rng(11);
  for (int i = 0; i < 1000; ++i) {
    const Vec3 zeta = random_vec(rng, -5.0, 5.0);
    const Vec3 p = random_vec(rng, -6.0, 6.0);
    const double exact = cross_track_error(p, zeta);
    const double grid = grid_cross_track(p, zeta);
    // The grid minimum overestimates by at most half a grid cell along the segment.
    const double resolution = 0.5e-3 * zeta.norm();
    EXPECT_LE(exact, grid + 1e-6);
    EXPECT_LE(grid - exact, resolution + 1e-6);
  }
}

TEST(CrossTrack, InvariantUnderRotation) {
  Rng rng(12);
  for (int i = 0; i < 200; ++i) {
    const Vec3 zeta = random_vec(rng, -5.0, 5.0);
    const Vec3 p = random_vec(rng, -5.0, 5.0);
    const Mat3 q = Eigen::Quaterniond(Eigen::Vector4d::Random().normalized()).toRotationMatrix();
    EXPECT_NEAR(cross_track_error(q * p, q * zeta), cross_track_error(p, zeta), 1e-9);
  }
}

TEST(CrossTrack, DegenerateGoalThrows) {
  try {
    cross_track_error(Vec3(1.0, 0.0, 0.0), Vec3::Zero());
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::DegenerateGoal);
  }
}

TEST(Heading, AlignedAntiparallelAndStationary) {
  const Vec3 p(1.0, 0.0, 0.0), zeta(5.0, 2.0, -1.0);
  EXPECT_NEAR(heading_error(0.3 * (zeta - p), p, zeta), 0.0, 1e-12);
  EXPECT_NEAR(heading_error(-0.3 * (zeta - p), p, zeta), kPi, 1e-12);
  EXPECT_EQ(heading_error(Vec3::Zero(), p, zeta), 0.0);
  EXPECT_NEAR(heading_error(Vec3(0.0, 1.0, 0.0), Vec3::Zero(), Vec3(1.0, 0.0, 0.0)), kPi / 2.0, 1e-15);
}

TEST(Progress, HandValues) {
  EXPECT_EQ(forward_progress(Vec3(1.0, 2.0, 3.0), Vec3(1.0, 2.0, 3.0), Vec3(5.0, 0.0, 0.0)), 0.0);
  EXPECT_DOUBLE_EQ(forward_progress(Vec3::Zero(), Vec3(1.0, 0.0, 0.0), Vec3(5.0, 0.0, 0.0)), 1.0);
  // At distance 3 from the goal, a 4 m sidestep ends 5 m away: progress 3 - 5 = -2.
  EXPECT_DOUBLE_EQ(forward_progress(Vec3(2.0, 0.0, 0.0), Vec3(2.0, 4.0, 0.0), Vec3(5.0, 0.0, 0.0)), -2.0);
}

TEST(Reward, WeightedSumFromComponents) {
  const RewardWeights w;
  // e_trk = 0.1, e_head = 0.2, delta_d = 0.05 gives -0.2 - 0.2 + 0.1.
  EXPECT_NEAR(w.tracking * 0.1 + w.heading * 0.2 + w.progress * 0.05, -0.3, 1e-15);
  Rng rng(13);
  for (int i = 0; i < 1000; ++i) {
    const Goal g{Vec3(uniform(rng, 4, 5), uniform(rng, -2, 2), uniform(rng, -1, 1)), 0.2};
    const Vec3 p_prev = random_vec(rng, -1.0, 5.0);
    const Vec3 p = p_prev + random_vec(rng, -0.1, 0.1);
    const Vec3 v = random_vec(rng, -1.0, 1.0);
    const StepReward s = step_reward(p_prev, p, v, g, w);
    EXPECT_EQ(s.r, w.tracking * s.e_trk + w.heading * s.e_head + w.progress * s.delta_d + s.bonus);
    EXPECT_EQ(s.e_trk, cross_track_error(p, g.zeta));
    EXPECT_EQ(s.e_head, heading_error(v, p, g.zeta));
    EXPECT_EQ(s.delta_d, forward_progress(p_prev, p, g.zeta));
  }
}

TEST(Reward, HandArithmeticCase) {
  // On a goal along x, a point 0.1 m off the line moving diagonally.
  const Goal g{Vec3(5.0, 0.0, 0.0), 0.2};
  const Vec3 p_prev(2.0, 0.1, 0.0);
  const Vec3 p(2.05, 0.1, 0.0);
  const StepReward s = step_reward(p_prev, p, Vec3(1.0, 0.0, 0.0), g);
  EXPECT_NEAR(s.e_trk, 0.1, 1e-12);
  const double d_prev = std::hypot(3.0, 0.1), d = std::hypot(2.95, 0.1);
  EXPECT_NEAR(s.delta_d, d_prev - d, 1e-15);
  EXPECT_NEAR(s.e_head, std::atan2(0.1, 2.95), 1e-12);
  EXPECT_NEAR(s.r, -2.0 * 0.1 - std::atan2(0.1, 2.95) + 2.0 * (d_prev - d), 1e-12);
  EXPECT_EQ(s.bonus, 0.0);
}

TEST(Reward, BonusAtGoalAndZeroWhenStationaryOnLine) {
  const Goal g{Vec3(4.0, 1.0, 0.5), 0.2};
  const StepReward at = step_reward(g.zeta, g.zeta, Vec3::Zero(), g);
  EXPECT_EQ(at.bonus, 20.0);
  const Vec3 mid = 0.3 * g.zeta;
  const StepReward still = step_reward(mid, mid, Vec3::Zero(), g);
  EXPECT_EQ(still.r, 0.0);
}

TEST(Reward, MonotoneInEachComponent) {
  const RewardWeights w;
  // Linear weights: a finite difference on each component has the sign of its weight.
  auto r = [&](double trk, double head, double dd) { return w.tracking * trk + w.heading * head + w.progress * dd; };
  EXPECT_LT(r(0.2, 0.1, 0.0), r(0.1, 0.1, 0.0));
  EXPECT_LT(r(0.1, 0.2, 0.0), r(0.1, 0.1, 0.0));
  EXPECT_GT(r(0.1, 0.1, 0.02), r(0.1, 0.1, 0.01));
  EXPECT_LT(w.tracking, 0.0);
  EXPECT_LT(w.heading, 0.0);
  EXPECT_GT(w.progress, 0.0);
}

TEST(Termination, PaperExamples) {
  const Goal g{Vec3(4.5, 0.0, 0.0), 0.2};
  BlimpState s;
  s.p = g.zeta + Vec3(0.19, 0.0, 0.0);
  EXPECT_EQ(check_termination(s.p, g, 3.0, s), Termination::GoalReached);
  s.p = Vec3(1.0, 0.0, 0.0);
  EXPECT_EQ(check_termination(s.p, g, 15.0, s), Termination::Timeout);
  EXPECT_EQ(check_termination(s.p, g, 14.9, s), Termination::Running);
  s.p = Vec3(50.0, 0.0, 0.0);
  EXPECT_EQ(check_termination(s.p, g, 3.0, s), Termination::Diverged);
  s.p = Vec3::Zero();
  s.e.y() = kPi / 2.0 - 1e-4;
  EXPECT_EQ(check_termination(s.p, g, 3.0, s), Termination::Diverged);
  s.e.y() = 0.0;
  s.v_b.x() = std::nan("");
  EXPECT_EQ(check_termination(s.p, g, 3.0, s), Termination::Diverged);
}

TEST(Termination, NamesRoundTrip) {
  for (Termination t : {Termination::Running, Termination::GoalReached, Termination::Timeout, Termination::Diverged})
    EXPECT_EQ(termination_from_string(to_string(t)), t);
  EXPECT_THROW(termination_from_string("done"), Error);
}

TEST(GoalSampling, WithinBoxDeterministicAndCentered) {
  const Workspace ws;
  Vec3 sum = Vec3::Zero();
  const int n = 10000;
  for (int i = 0; i < n; ++i) {
    const Goal g = sample_goal(derive_seed(99, 0, static_cast<std::uint64_t>(i)), ws);
    for (int k = 0; k < 3; ++k) {
      ASSERT_GE(g.zeta[k], ws.lo[k]);
      ASSERT_LE(g.zeta[k], ws.hi[k]);
    }
    EXPECT_EQ(g.r_g, 0.2);
    sum += g.zeta;
  }
  EXPECT_EQ(sample_goal(5, ws).zeta, sample_goal(5, ws).zeta);
  const Vec3 mean = sum / n;
  for (int k = 0; k < 3; ++k) {
    const double width = ws.hi[k] - ws.lo[k];
    const double sigma_mean = width / std::sqrt(12.0) / std::sqrt(static_cast<double>(n));
    EXPECT_LT(std::abs(mean[k] - 0.5 * (ws.lo[k] + ws.hi[k])), 3.0 * sigma_mean);
  }
}

TEST(Env, ObservationLayoutAndYawWrap) {
  BlimpState s;
  s.p = Vec3(1, 2, 3);
  s.e = Vec3(0.1, 0.2, 2.0 * kPi + 0.3);
  s.v_b = Vec3(4, 5, 6);
  s.w_b = Vec3(7, 8, 9);
  const Observation o = encode_observation(s, Goal{Vec3(4.5, -1, 0.5), 0.2}, SliderConfig{0.03});
  EXPECT_EQ(o.segment<3>(0), s.p);
  EXPECT_NEAR(o[5], 0.3, 1e-12);
  EXPECT_EQ(o.segment<3>(6), s.v_b);
  EXPECT_EQ(o.segment<3>(9), s.w_b);
  EXPECT_EQ(o.segment<3>(12), Vec3(4.5, -1, 0.5));
  EXPECT_EQ(o[15], 0.03);
  const Observation n = normalize_observation(o, ObsScale{});
  EXPECT_DOUBLE_EQ(n[0], 0.2);
  EXPECT_DOUBLE_EQ(n[15], 0.6);
}

TEST(Env, StepCountBoundedAndBonusOnlyAtGoal) {
  EnvConfig cfg;
  BlimpEnv env(ModelParams{}, cfg);
  EXPECT_EQ(cfg.max_steps(), 150);
  env.reset(Goal{Vec3(4.5, 0.0, 0.0), 0.2}, SliderConfig{0.0}, 3);
  int steps = 0;
  while (!env.done()) {
    const StepOutcome out = env.step(ControlInput{0.0, 0.0});
    ++steps;
    if (out.termination != Termination::GoalReached) {
      EXPECT_EQ(out.reward.bonus, 0.0);
    }
  }
  EXPECT_LE(steps, cfg.max_steps());
  EXPECT_THROW(env.step(ControlInput{}), Error);
}
