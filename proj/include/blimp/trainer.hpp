#pragma once

// Two-stage bi-level training: Stage 1 pretrains the thrust policy under
// uniformly sampled slider positions, Stage 2 adds the outer slider policy.

#include <deque>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <memory>
#include <optional>
#include <sstream>

#include "blimp/baselines.hpp"
#include "blimp/config.hpp"
#include "blimp/rollout.hpp"

namespace blimp {

enum class Stage { Stage1, Stage2 };

inline Stage stage_boundary_check(std::int64_t j, std::int64_t n) { return j < n ? Stage::Stage1 : Stage::Stage2; }

inline const char* to_string(Stage s) { return s == Stage::Stage1 ? "stage1" : "stage2"; }

enum class EpisodeMode { Train, Eval };

/// One episode of the thrust policy with the slider pinned at `c`. In train
/// mode every transition enters the buffer and SAC updates run per control step
/// once the buffer holds `warmup` transitions.
inline EpisodeRecord run_episode(BlimpEnv& env, sac::SacAgent& agent, sac::ReplayBuffer* buffer, double c,
                                 const Goal& goal, EpisodeMode mode, std::uint64_t seed) {
  const bool train = mode == EpisodeMode::Train;
  if (train && buffer == nullptr) throw Error(ErrorKind::InvalidConfig, "training episode needs a replay buffer");
  EpisodeRecord rec;
  rec.goal = goal;
  rec.c = c;
  rec.gamma = agent.config().gamma;
  Observation obs = env.reset(goal, SliderConfig{c}, seed);
  while (true) {
    const ControlInput u = agent.act_thrust(obs, !train);
    const StepOutcome out = env.step(u);
    if (train) {
      sac::Transition t;
      t.s = obs;
      t.a = Vec2(u.f_l, u.f_r);
      t.r = out.reward.r;
      t.s_next = out.next_obs;
      t.done = out.termination == Termination::GoalReached || out.termination == Termination::Diverged;
      buffer->add(std::move(t));
      if (static_cast<std::int64_t>(buffer->size()) >= agent.config().warmup)
        for (int k = 0; k < agent.config().updates_per_step; ++k) agent.update(*buffer);
    }
    obs = out.next_obs;
    if (record_step(rec, env, u, out)) break;
  }
  finalize_record(rec);
  return rec;
}

/// The 27 evaluation targets: x in {4, 4.5, 5}, y in {-2, 0, 2}, z in {-1, 0, 1}.
inline std::vector<Goal> goal_grid(double r_g = 0.2) {
  std::vector<Goal> out;
  for (double z : {-1.0, 0.0, 1.0})
    for (double y : {-2.0, 0.0, 2.0})
      for (double x : {4.0, 4.5, 5.0}) out.push_back(Goal{Vec3(x, y, z), r_g});
  return out;
}

struct EvalPoint {
  std::int64_t episode = 0;  // training episodes completed
  double mean_return = 0.0;
  double goal_rate = 0.0;
  double mean_rmse = 0.0;
  std::vector<double> returns;
  std::vector<std::string> terminations;
  std::vector<double> slider;
};

struct EpisodeSummary {
  std::int64_t index = 0;
  Stage stage = Stage::Stage1;
  Vec3 zeta = Vec3::Zero();
  double c = 0.0;
  double log_prob = 0.0;
  Termination termination = Termination::Running;
  int steps = 0;
  double ret = 0.0;
  std::vector<double> rewards;
};

struct Checkpoint {
  TrainConfig config;
  std::int64_t episode = 0;
  std::unique_ptr<sac::SacAgent> agent;
  std::unique_ptr<spg::OuterPolicy> outer;
};

inline Json checkpoint_json(const TrainConfig& cfg, std::int64_t episode, const sac::SacAgent& agent,
                            const spg::OuterPolicy& outer) {
  return Json{{"version", nn::kCheckpointVersion},
              {"episode", episode},
              {"config", to_json(cfg)},
              {"sac", agent.to_json()},
              {"outer", outer.to_json()}};
}

inline Checkpoint checkpoint_from_json(const Json& j) {
  if (!j.is_object() || !j.contains("version") || j.at("version") != nn::kCheckpointVersion)
    throw Error(ErrorKind::CheckpointVersionMismatch, "checkpoint version mismatch (expected " +
                                                          std::to_string(nn::kCheckpointVersion) + ")");
  Checkpoint ck;
  ck.config = train_config_from_json(j.at("config"));
  ck.episode = j.at("episode").get<std::int64_t>();
  ck.agent = std::make_unique<sac::SacAgent>(ck.config.sac, ck.config.model.f_max, ck.config.seed);
  ck.agent->load_json(j.at("sac"));
  ck.outer = std::make_unique<spg::OuterPolicy>(ck.config.spg, ck.config.seed);
  ck.outer->load_json(j.at("outer"));
  return ck;
}

inline Checkpoint load_checkpoint(const std::string& path) { return checkpoint_from_json(read_json_file(path)); }

/// Compact, locale-independent JSON line.
inline std::string json_line(const Json& j) { return j.dump() + "\n"; }

class Trainer {
 public:
  explicit Trainer(TrainConfig cfg, std::string out_dir = {})
      : cfg_((cfg.validate(), std::move(cfg))),
        out_dir_(std::move(out_dir)),
        env_(cfg_.model, cfg_.env),
        agent_(cfg_.sac, cfg_.model.f_max, derive_seed(cfg_.seed, 40)),
        outer_(cfg_.spg, derive_seed(cfg_.seed, 41)),
        buffer_(cfg_.sac.buffer_capacity) {
    if (!out_dir_.empty()) {
      std::filesystem::create_directories(std::filesystem::path(out_dir_) / "checkpoints");
      write_text_file(path("config.json"), to_json(cfg_).dump(2) + "\n");
      metrics_.open(path("metrics.jsonl"), std::ios::binary | std::ios::trunc);
      evals_.open(path("evals.jsonl"), std::ios::binary | std::ios::trunc);
      if (!metrics_ || !evals_) throw Error(ErrorKind::Io, "cannot open metrics files in '" + out_dir_ + "'");
    }
  }

  /// Deterministic policies on the goal grid; no exploration, no randomization.
  EvalPoint evaluate_grid(std::int64_t episode) {
    EnvConfig ec = cfg_.env;
    ec.randomize_params = false;
    ec.randomize_initial_state = false;
    BlimpEnv env(cfg_.model, ec);
    EvalPoint pt;
    pt.episode = episode;
    Rng unused(0);
    double rmse_sum = 0.0;
    for (const Goal& g : goal_grid(cfg_.goal_radius)) {
      const double c = outer_.select_config(g.zeta, true, unused).c;
      const EpisodeRecord rec = run_episode(env, agent_, nullptr, c, g, EpisodeMode::Eval, 0);
      pt.returns.push_back(rec.ret);
      pt.terminations.emplace_back(to_string(rec.termination));
      pt.slider.push_back(c);
      pt.mean_return += rec.ret;
      pt.goal_rate += rec.termination == Termination::GoalReached ? 1.0 : 0.0;
      double s = 0.0;
      for (const auto& st : rec.steps) s += st.e_trk * st.e_trk;
      rmse_sum += std::sqrt(s / static_cast<double>(rec.steps.size()));
    }
    const double n = static_cast<double>(pt.returns.size());
    pt.mean_return /= n;
    pt.goal_rate /= n;
    pt.mean_rmse = rmse_sum / n;
    return pt;
  }

  /// Deterministic probe returns under the current thrust policy.
  std::vector<double> probe_returns() {
    EnvConfig ec = cfg_.env;
    ec.randomize_params = false;
    ec.randomize_initial_state = false;
    BlimpEnv env(cfg_.model, ec);
    std::vector<double> out;
    for (const Probe& p : cfg_.probes)
      out.push_back(run_episode(env, agent_, nullptr, p.c, Goal{p.zeta, cfg_.goal_radius}, EpisodeMode::Eval, 0).ret);
    return out;
  }

  /// Runs episodes [next_episode, M); returns the summary written to summary.json.
  Json run(std::ostream* progress = nullptr) {
    std::deque<bool> diverged;
    for (std::int64_t j = next_; j < cfg_.episodes; ++j) {
      if (j % cfg_.eval_interval == 0) log_eval(evaluate_grid(j));
      const Stage stage = stage_boundary_check(j, cfg_.stage1_episodes);
      if (stage == Stage::Stage2 && reference_returns_.empty() && !cfg_.probes.empty())
        reference_returns_ = probe_returns();
      const Goal goal = sample_goal(derive_seed(cfg_.seed, 32, static_cast<std::uint64_t>(j)), cfg_.workspace,
                                    cfg_.goal_radius);
      double c = 0.0, log_prob = 0.0;
      if (stage == Stage::Stage1) {
        Rng rng(derive_seed(cfg_.seed, 30, static_cast<std::uint64_t>(j)));
        c = uniform(rng, -kSliderLimit, kSliderLimit);
        log_prob = -std::log(2.0 * kSliderLimit);
      } else {
        Rng rng(derive_seed(cfg_.seed, 31, static_cast<std::uint64_t>(j)));
        const spg::SliderChoice choice = outer_.select_config(goal.zeta, false, rng);
        c = choice.c;
        log_prob = choice.log_prob;
      }
      EpisodeRecord rec = run_episode(env_, agent_, &buffer_, c, goal, EpisodeMode::Train,
                                      derive_seed(cfg_.seed, 33, static_cast<std::uint64_t>(j)));
      rec.index = j;
      rec.stage = to_string(stage);

      Json extra = Json::object();
      if (stage == Stage::Stage2) {
        pending_.push_back(spg::OuterSample{goal.zeta, c, log_prob, rec.ret});
        if (static_cast<int>(pending_.size()) >= cfg_.spg.batch_size) {
          const std::int64_t k = outer_.updates();
          extra["outer_objective"] = outer_.outer_update(pending_, k);
          extra["outer_step"] = spg::step_size(k, cfg_.spg.schedule, cfg_.spg.eta0);
          extra["beta_loss"] = outer_.beta_update(pending_);
          extra["beta"] = outer_.beta();
          pending_.clear();
          if (outer_.updates() % cfg_.bias_interval == 0 && !cfg_.probes.empty()) {
            const std::vector<double> cur = probe_returns();
            std::vector<spg::ProbeReturn> pr;
            for (std::size_t i = 0; i < cur.size(); ++i)
              pr.push_back(spg::ProbeReturn{cfg_.probes[i].zeta, cfg_.probes[i].c, cur[i], reference_returns_[i]});
            extra["bias_proxy"] = spg::bias_diagnostic(pr);
          }
        }
      }
      log_episode(rec, log_prob, extra);

      diverged.push_back(rec.termination == Termination::Diverged);
      if (static_cast<int>(diverged.size()) > cfg_.divergence_window) diverged.pop_front();
      if (static_cast<int>(diverged.size()) == cfg_.divergence_window) {
        const auto n = std::count(diverged.begin(), diverged.end(), true);
        if (static_cast<double>(n) > cfg_.divergence_fraction * cfg_.divergence_window) {
          std::ostringstream msg;
          msg << n << " of the last " << cfg_.divergence_window << " episodes diverged (episode " << j
              << "); check model parameters and learning rates";
          next_ = j + 1;
          throw Error(ErrorKind::TrainingDiverged, msg.str());
        }
      }
      next_ = j + 1;
      if (!out_dir_.empty() && next_ % cfg_.checkpoint_interval == 0) {
        std::ostringstream name;
        name << "checkpoints/ckpt_" << std::setw(6) << std::setfill('0') << next_ << ".json";
        save_checkpoint(path(name.str()));
      }
      if (progress && (next_ % 50 == 0 || next_ == cfg_.episodes))
        *progress << "episode " << next_ << "/" << cfg_.episodes << " " << rec.stage << " return " << rec.ret
                  << " " << to_string(rec.termination) << "\n";
    }
    const EvalPoint final_eval = evaluate_grid(cfg_.episodes);
    log_eval(final_eval);
    const Json summary = make_summary(final_eval);
    if (!out_dir_.empty()) {
      save_checkpoint(path("checkpoint.json"));
      write_text_file(path("summary.json"), summary.dump(2) + "\n");
      metrics_.flush();
      evals_.flush();
    }
    return summary;
  }

  void save_checkpoint(const std::string& file) const {
    write_text_file(file, checkpoint_json(cfg_, next_, agent_, outer_).dump() + "\n");
  }

  const TrainConfig& config() const { return cfg_; }
  sac::SacAgent& agent() { return agent_; }
  spg::OuterPolicy& outer() { return outer_; }
  const sac::ReplayBuffer& buffer() const { return buffer_; }
  const std::vector<EpisodeSummary>& episodes() const { return episodes_; }
  const std::vector<EvalPoint>& evals() const { return evals_log_; }
  std::int64_t next_episode() const { return next_; }

 private:
  std::string path(const std::string& rel) const { return (std::filesystem::path(out_dir_) / rel).string(); }

  void log_episode(const EpisodeRecord& rec, double log_prob, const Json& extra) {
    EpisodeSummary s;
    s.index = rec.index;
    s.stage = rec.stage == "stage1" ? Stage::Stage1 : Stage::Stage2;
    s.zeta = rec.goal.zeta;
    s.c = rec.c;
    s.log_prob = log_prob;
    s.termination = rec.termination;
    s.steps = static_cast<int>(rec.steps.size());
    s.ret = rec.ret;
    s.rewards = rec.rewards();
    if (metrics_.is_open()) {
      Json j = {{"episode", s.index},
                {"stage", rec.stage},
                {"zeta", to_json_array(s.zeta)},
                {"c", s.c},
                {"log_prob_c", s.log_prob},
                {"termination", to_string(s.termination)},
                {"steps", s.steps},
                {"return", s.ret},
                {"gamma", rec.gamma},
                {"mean_e_trk", mean_e_trk(rec)},
                {"alpha", agent_.alpha()},
                {"buffer", buffer_.size()},
                {"rewards", s.rewards}};
      for (auto it = extra.begin(); it != extra.end(); ++it) j[it.key()] = it.value();
      metrics_ << json_line(j);
    }
    episodes_.push_back(std::move(s));
  }

  void log_eval(const EvalPoint& pt) {
    if (evals_.is_open())
      evals_ << json_line(Json{{"episode", pt.episode},
                               {"mean_return", pt.mean_return},
                               {"goal_rate", pt.goal_rate},
                               {"mean_rmse", pt.mean_rmse},
                               {"returns", pt.returns},
                               {"terminations", pt.terminations},
                               {"slider", pt.slider}});
    evals_log_.push_back(pt);
  }

  static double mean_e_trk(const EpisodeRecord& rec) {
    double s = 0.0;
    for (const auto& st : rec.steps) s += st.e_trk;
    return rec.steps.empty() ? 0.0 : s / static_cast<double>(rec.steps.size());
  }

  Json make_summary(const EvalPoint& final_eval) const {
    std::array<std::int64_t, 4> counts{};
    for (const auto& e : episodes_) ++counts[static_cast<std::size_t>(e.termination)];
    Json curve = Json::array();
    for (const auto& e : evals_log_)
      curve.push_back({{"episode", e.episode}, {"mean_return", e.mean_return}, {"goal_rate", e.goal_rate}});
    return Json{{"episodes", static_cast<std::int64_t>(episodes_.size())},
                {"stage1_episodes", cfg_.stage1_episodes},
                {"seed", cfg_.seed},
                {"outer_updates", outer_.updates()},
                {"goal_reached", counts[static_cast<std::size_t>(Termination::GoalReached)]},
                {"timeout", counts[static_cast<std::size_t>(Termination::Timeout)]},
                {"diverged", counts[static_cast<std::size_t>(Termination::Diverged)]},
                {"final_eval_return", final_eval.mean_return},
                {"final_eval_goal_rate", final_eval.goal_rate},
                {"final_eval_rmse", final_eval.mean_rmse},
                {"alpha", agent_.alpha()},
                {"beta", outer_.beta()},
                {"eval_curve", curve}};
  }

  TrainConfig cfg_;
  std::string out_dir_;
  BlimpEnv env_;
  sac::SacAgent agent_;
  spg::OuterPolicy outer_;
  sac::ReplayBuffer buffer_;
  std::vector<spg::OuterSample> pending_;
  std::vector<double> reference_returns_;
  std::vector<EpisodeSummary> episodes_;
  std::vector<EvalPoint> evals_log_;
  std::ofstream metrics_, evals_;
  std::int64_t next_ = 0;
};

/// Trains from scratch; writes metrics, checkpoints and summary under `out_dir` when given.
inline Json train(const TrainConfig& cfg, const std::string& out_dir = {}, std::ostream* progress = nullptr) {
  Trainer t(cfg, out_dir);
  return t.run(progress);
}

}  // namespace blimp
