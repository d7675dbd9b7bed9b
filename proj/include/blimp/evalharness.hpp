#pragma once

// Goal-grid evaluation: per-trial tracking RMSE, statistics grouped by target
// height, slider trends and left-right symmetry of the slider choice.

#include <filesystem>
#include <iomanip>
#include <limits>
#include <map>
#include <sstream>

#include "blimp/baselines.hpp"
#include "blimp/trainer.hpp"

namespace blimp {

inline double trajectory_rmse(const EpisodeRecord& rec) {
  if (rec.steps.empty()) throw Error(ErrorKind::EmptyTrajectory, "record has no steps");
  double s = 0.0;
  for (const auto& st : rec.steps) s += st.e_trk * st.e_trk;
  return std::sqrt(s / static_cast<double>(rec.steps.size()));
}

/// Climb (z = -1, above the start in NED), Level (z = 0), Descent (z = +1).
inline std::string height_group(const Vec3& zeta) {
  if (zeta.z() < -0.5) return "climb";
  if (zeta.z() > 0.5) return "descent";
  return "level";
}

enum class ControllerKind { Bilevel, SacFixed, PidSpg };

struct ControllerSpec {
  ControllerKind kind = ControllerKind::Bilevel;
  double fixed_c = 0.0;  // [m], SacFixed only
  std::string name = "bilevel";
};

/// bilevel | sac-fixed:<cm> with cm in {-5, 0, 5} | pid-spg
inline ControllerSpec parse_controller(const std::string& s) {
  if (s == "bilevel") return ControllerSpec{ControllerKind::Bilevel, 0.0, s};
  if (s == "pid-spg") return ControllerSpec{ControllerKind::PidSpg, 0.0, s};
  static const std::map<std::string, double> fixed{{"sac-fixed:-5", -0.05}, {"sac-fixed:0", 0.0}, {"sac-fixed:5", 0.05}};
  const auto it = fixed.find(s);
  if (it != fixed.end()) return ControllerSpec{ControllerKind::SacFixed, it->second, s};
  throw Error(ErrorKind::UnknownController,
              "unknown controller '" + s + "' (bilevel | sac-fixed:-5 | sac-fixed:0 | sac-fixed:5 | pid-spg)");
}

inline std::vector<std::string> all_controllers() {
  return {"bilevel", "sac-fixed:-5", "sac-fixed:0", "sac-fixed:5", "pid-spg"};
}

struct TrialResult {
  Vec3 zeta = Vec3::Zero();
  int goal_index = 0;
  int trial = 0;
  double c = 0.0;
  double rmse = 0.0;
  Termination termination = Termination::Running;
  double time_to_goal = std::numeric_limits<double>::quiet_NaN();
};

struct GroupStats {
  double mean = 0.0;
  double std = 0.0;  // sample standard deviation
  int n = 0;
};

inline GroupStats group_stats(const std::vector<double>& v) {
  GroupStats g;
  g.n = static_cast<int>(v.size());
  if (v.empty()) return g;
  for (double x : v) g.mean += x;
  g.mean /= static_cast<double>(v.size());
  if (v.size() > 1) {
    double s = 0.0;
    for (double x : v) s += (x - g.mean) * (x - g.mean);
    g.std = std::sqrt(s / static_cast<double>(v.size() - 1));
  }
  return g;
}

struct EvalReport {
  std::string controller;
  std::uint64_t seed = 0;
  std::vector<TrialResult> trials;
  std::map<std::string, GroupStats> groups;  // climb, level, descent, overall

  void aggregate() {
    std::map<std::string, std::vector<double>> by;
    for (const auto& t : trials) {
      by[height_group(t.zeta)].push_back(t.rmse);
      by["overall"].push_back(t.rmse);
    }
    groups.clear();
    for (const char* k : {"climb", "level", "descent", "overall"}) groups[k] = group_stats(by[k]);
  }

  int goal_reached() const {
    return static_cast<int>(std::count_if(trials.begin(), trials.end(), [](const TrialResult& t) {
      return t.termination == Termination::GoalReached;
    }));
  }
};

struct Controller {
  ControllerSpec spec;
  std::function<double(const Vec3&)> slider;
  ThrustPolicy policy;
};

/// Binds a controller kind to a trained checkpoint (thrust and slider policies).
inline Controller make_controller(const ControllerSpec& spec, sac::SacAgent& agent, const spg::OuterPolicy& outer,
                                  const PidGains& pid) {
  Controller c;
  c.spec = spec;
  auto outer_c = [&outer](const Vec3& zeta) {
    Rng unused(0);
    return outer.select_config(zeta, true, unused).c;
  };
  switch (spec.kind) {
    case ControllerKind::Bilevel:
      c.slider = outer_c;
      c.policy = sac_policy(agent);
      break;
    case ControllerKind::SacFixed: {
      const double fixed = spec.fixed_c;
      c.slider = [fixed](const Vec3&) { return fixed; };
      c.policy = sac_policy(agent);
      break;
    }
    case ControllerKind::PidSpg:
      c.slider = outer_c;
      c.policy = pid_policy(pid);
      break;
  }
  return c;
}

struct EvalOptions {
  int trials = 3;
  std::uint64_t seed = 0;
  std::string trajectory_dir;  // empty: no trajectory files
};

inline std::string trajectory_csv(const EpisodeRecord& rec) {
  std::ostringstream o;
  o << std::setprecision(17);
  o << "t,x,y,z,phi,theta,psi,f_l,f_r,e_trk\n";
  for (const auto& s : rec.steps)
    o << s.t << ',' << s.state.p.x() << ',' << s.state.p.y() << ',' << s.state.p.z() << ',' << s.state.e.x() << ','
      << s.state.e.y() << ',' << s.state.e.z() << ',' << s.action.f_l << ',' << s.action.f_r << ',' << s.e_trk << '\n';
  return o.str();
}

/// Deterministic rollouts on every goal, `trials` times each. Model parameters
/// stay nominal; the initial state is perturbed per trial seed.
inline EvalReport evaluate(const Controller& ctrl, const std::vector<Goal>& grid, const ModelParams& model,
                           EnvConfig env_cfg, const EvalOptions& opt) {
  env_cfg.randomize_params = false;
  env_cfg.randomize_initial_state = true;
  BlimpEnv env(model, env_cfg);
  EvalReport rep;
  rep.controller = ctrl.spec.name;
  rep.seed = opt.seed;
  if (!opt.trajectory_dir.empty()) std::filesystem::create_directories(opt.trajectory_dir);
  for (std::size_t i = 0; i < grid.size(); ++i) {
    const double c = ctrl.slider(grid[i].zeta);
    for (int k = 0; k < opt.trials; ++k) {
      const EpisodeRecord rec =
          run_rollout(env, ctrl.policy, grid[i], c, derive_seed(opt.seed, i, static_cast<std::uint64_t>(k)));
      TrialResult t;
      t.zeta = grid[i].zeta;
      t.goal_index = static_cast<int>(i);
      t.trial = k;
      t.c = c;
      t.rmse = trajectory_rmse(rec);
      t.termination = rec.termination;
      t.time_to_goal = rec.time_to_goal();
      rep.trials.push_back(t);
      if (!opt.trajectory_dir.empty()) {
        std::string name = ctrl.spec.name;
        std::replace(name.begin(), name.end(), ':', '_');
        std::ostringstream f;
        f << name << "_g" << std::setw(2) << std::setfill('0') << i << "_t" << k << ".csv";
        write_text_file((std::filesystem::path(opt.trajectory_dir) / f.str()).string(), trajectory_csv(rec));
      }
    }
  }
  rep.aggregate();
  return rep;
}

inline Json to_json(const GroupStats& g) { return Json{{"mean", g.mean}, {"std", g.std}, {"n", g.n}}; }

inline Json to_json(const EvalReport& r) {
  Json trials = Json::array();
  for (const auto& t : r.trials)
    trials.push_back({{"zeta", to_json_array(t.zeta)},
                      {"goal_index", t.goal_index},
                      {"trial", t.trial},
                      {"c", t.c},
                      {"rmse", t.rmse},
                      {"termination", to_string(t.termination)},
                      {"time_to_goal", std::isnan(t.time_to_goal) ? Json(nullptr) : Json(t.time_to_goal)}});
  Json groups = Json::object();
  for (const auto& [k, g] : r.groups) groups[k] = to_json(g);
  return Json{{"controller", r.controller}, {"seed", r.seed}, {"groups", groups}, {"trials", trials}};
}

inline EvalReport eval_report_from_json(const Json& j) {
  EvalReport r;
  r.controller = j.at("controller").get<std::string>();
  r.seed = j.at("seed").get<std::uint64_t>();
  for (const auto& t : j.at("trials")) {
    TrialResult tr;
    for (int i = 0; i < 3; ++i) tr.zeta[i] = t.at("zeta")[i].get<double>();
    tr.goal_index = t.at("goal_index").get<int>();
    tr.trial = t.at("trial").get<int>();
    tr.c = t.at("c").get<double>();
    tr.rmse = t.at("rmse").get<double>();
    tr.termination = termination_from_string(t.at("termination").get<std::string>());
    tr.time_to_goal =
        t.at("time_to_goal").is_null() ? std::numeric_limits<double>::quiet_NaN() : t.at("time_to_goal").get<double>();
    r.trials.push_back(tr);
  }
  for (auto it = j.at("groups").begin(); it != j.at("groups").end(); ++it)
    r.groups[it.key()] = GroupStats{it.value().at("mean").get<double>(), it.value().at("std").get<double>(),
                                    it.value().at("n").get<int>()};
  return r;
}

inline std::string trials_csv_header() { return "controller,zeta_x,zeta_y,zeta_z,trial,c,rmse,termination,time_to_goal\n"; }

inline std::string trials_csv_rows(const EvalReport& r) {
  std::ostringstream o;
  o << std::setprecision(17);
  for (const auto& t : r.trials) {
    o << r.controller << ',' << t.zeta.x() << ',' << t.zeta.y() << ',' << t.zeta.z() << ',' << t.trial << ',' << t.c
      << ',' << t.rmse << ',' << to_string(t.termination) << ',';
    if (!std::isnan(t.time_to_goal)) o << t.time_to_goal;
    o << '\n';
  }
  return o.str();
}

struct SliderTrend {
  double mean_c_climb = 0.0;
  double mean_c_level = 0.0;
  double mean_c_descent = 0.0;
  std::vector<std::pair<Vec3, double>> map;  // one entry per goal
};

inline SliderTrend slider_trend(const EvalReport& r) {
  std::map<std::string, std::vector<double>> by;
  std::map<int, std::pair<Vec3, double>> per_goal;
  for (const auto& t : r.trials) {
    by[height_group(t.zeta)].push_back(t.c);
    per_goal.emplace(t.goal_index, std::make_pair(t.zeta, t.c));
  }
  SliderTrend s;
  s.mean_c_climb = group_stats(by["climb"]).mean;
  s.mean_c_level = group_stats(by["level"]).mean;
  s.mean_c_descent = group_stats(by["descent"]).mean;
  for (const auto& [i, zc] : per_goal) s.map.push_back(zc);
  return s;
}

inline Json to_json(const SliderTrend& s) {
  Json m = Json::array();
  for (const auto& [z, c] : s.map) m.push_back({{"zeta", to_json_array(z)}, {"c", c}});
  return Json{{"mean_c_climb", s.mean_c_climb},
              {"mean_c_level", s.mean_c_level},
              {"mean_c_descent", s.mean_c_descent},
              {"map", m}};
}

struct SymmetryPair {
  Vec3 zeta = Vec3::Zero();  // the y > 0 member
  double c_pos = 0.0;
  double c_neg = 0.0;
  double asymmetry = 0.0;
};

struct SymmetryReport {
  std::vector<SymmetryPair> pairs;
  double mean = 0.0;
  double max = 0.0;
};

/// Pairs each goal with y > 0 to its mirror image in y; y = 0 goals are skipped.
inline SymmetryReport symmetry_report(const EvalReport& r) {
  std::map<int, std::pair<Vec3, double>> per_goal;
  for (const auto& t : r.trials) per_goal.emplace(t.goal_index, std::make_pair(t.zeta, t.c));
  SymmetryReport s;
  for (const auto& [i, a] : per_goal) {
    if (!(a.first.y() > 1e-9)) continue;
    const Vec3 mirror(a.first.x(), -a.first.y(), a.first.z());
    for (const auto& [k, b] : per_goal) {
      if ((b.first - mirror).norm() < 1e-9) {
        s.pairs.push_back(SymmetryPair{a.first, a.second, b.second, std::abs(a.second - b.second)});
        break;
      }
    }
  }
  for (const auto& p : s.pairs) {
    s.mean += p.asymmetry;
    s.max = std::max(s.max, p.asymmetry);
  }
  if (!s.pairs.empty()) s.mean /= static_cast<double>(s.pairs.size());
  return s;
}

inline Json to_json(const SymmetryReport& s) {
  Json pairs = Json::array();
  for (const auto& p : s.pairs)
    pairs.push_back({{"zeta", to_json_array(p.zeta)}, {"c_pos", p.c_pos}, {"c_neg", p.c_neg}, {"asymmetry", p.asymmetry}});
  return Json{{"mean", s.mean}, {"max", s.max}, {"pairs", pairs}};
}

}  // namespace blimp
