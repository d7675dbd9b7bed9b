#pragma once

// blimpctl: train, eval, simulate, sweep. Configuration precedence is
// preset < --config file < BLIMP_* environment < --seed / --set flags.

#include <CLI11.hpp>

#include <algorithm>
#include <cctype>
#include <filesystem>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>

#include "blimp/evalharness.hpp"
#include "blimp/trainer.hpp"

extern char** environ;

namespace blimp::cli {

inline constexpr const char* kArtifactVersion = "1.0.0";

enum ExitCode : int { kOk = 0, kRuntimeError = 1, kUsageError = 2, kDivergenceAbort = 3 };

/// Environment variables that stand in for command-line flags rather than config keys.
inline const std::vector<std::string>& flag_env_vars() {
  static const std::vector<std::string> v{"BLIMP_PRESET", "BLIMP_CONFIG", "BLIMP_SEED", "BLIMP_OUT"};
  return v;
}

/// Parses a scalar override: JSON when it parses, plain string otherwise.
inline Json parse_value(const std::string& text) {
  try {
    return Json::parse(text);
  } catch (const nlohmann::json::parse_error&) {
    return Json(text);
  }
}

/// {"a": {"b": value}} from the path "a.b".
inline Json nested_patch(const std::vector<std::string>& path, Json value) {
  Json out = std::move(value);
  for (auto it = path.rbegin(); it != path.rend(); ++it) out = Json{{*it, out}};
  return out;
}

inline std::vector<std::string> split(const std::string& s, const std::string& sep) {
  std::vector<std::string> out;
  std::size_t pos = 0;
  while (true) {
    const std::size_t next = s.find(sep, pos);
    out.push_back(s.substr(pos, next == std::string::npos ? std::string::npos : next - pos));
    if (next == std::string::npos) break;
    pos = next + sep.size();
  }
  return out;
}

/// BLIMP_SAC__BATCH_SIZE=64 becomes {"sac": {"batch_size": 64}}; nesting uses "__".
inline Json env_patch(const std::map<std::string, std::string>& env) {
  Json patch = Json::object();
  for (const auto& [name, value] : env) {
    if (name.rfind("BLIMP_", 0) != 0) continue;
    if (std::find(flag_env_vars().begin(), flag_env_vars().end(), name) != flag_env_vars().end()) continue;
    std::string key = name.substr(6);
    std::transform(key.begin(), key.end(), key.begin(), [](unsigned char ch) { return std::tolower(ch); });
    if (key.empty()) continue;
    patch.merge_patch(nested_patch(split(key, "__"), parse_value(value)));
  }
  return patch;
}

/// "sac.batch_size=64"
inline Json set_patch(const std::string& assignment) {
  const std::size_t eq = assignment.find('=');
  if (eq == std::string::npos || eq == 0)
    throw Error(ErrorKind::InvalidConfig, "--set expects key.path=value, got '" + assignment + "'");
  return nested_patch(split(assignment.substr(0, eq), "."), parse_value(assignment.substr(eq + 1)));
}

inline std::map<std::string, std::string> process_env() {
  std::map<std::string, std::string> out;
  for (char** e = environ; e && *e; ++e) {
    const std::string kv(*e);
    const std::size_t eq = kv.find('=');
    if (eq != std::string::npos) out[kv.substr(0, eq)] = kv.substr(eq + 1);
  }
  return out;
}

inline std::optional<std::string> lookup(const std::map<std::string, std::string>& env, const std::string& key) {
  const auto it = env.find(key);
  if (it == env.end()) return std::nullopt;
  return it->second;
}

struct ConfigSources {
  Json base;                       // preset or checkpoint config
  std::string config_path;         // optional file
  std::map<std::string, std::string> env;
  std::optional<std::uint64_t> seed;
  std::vector<std::string> sets;
};

inline TrainConfig resolve_config(const ConfigSources& src) {
  Json j = src.base;
  if (!src.config_path.empty()) {
    const Json file = read_json_file(src.config_path);
    if (!file.is_object()) throw Error(ErrorKind::InvalidConfig, src.config_path + ": expected a JSON object");
    j.merge_patch(file);
  }
  j.merge_patch(env_patch(src.env));
  if (src.seed) j["seed"] = *src.seed;
  for (const auto& s : src.sets) j.merge_patch(set_patch(s));
  return train_config_from_json(j);
}

inline Vec3 parse_goal(const std::string& s) {
  const auto parts = split(s, ",");
  if (parts.size() != 3) throw Error(ErrorKind::InvalidConfig, "--goal expects x,y,z");
  Vec3 g;
  for (int i = 0; i < 3; ++i) {
    try {
      std::size_t used = 0;
      g[i] = std::stod(parts[static_cast<std::size_t>(i)], &used);
      if (used != parts[static_cast<std::size_t>(i)].size()) throw std::invalid_argument("trailing");
    } catch (const std::exception&) {
      throw Error(ErrorKind::InvalidConfig, "--goal: '" + parts[static_cast<std::size_t>(i)] + "' is not a number");
    }
  }
  return g;
}

inline Json manifest(const std::string& command, const TrainConfig& cfg, const Json& extra, const Json& layout) {
  Json m = {{"command", command},
            {"artifact_version", kArtifactVersion},
            {"seed", cfg.seed},
            {"config", to_json(cfg)},
            {"layout", layout}};
  for (auto it = extra.begin(); it != extra.end(); ++it) m[it.key()] = it.value();
  return m;
}

inline std::string out_path(const std::string& dir, const std::string& rel) {
  return (std::filesystem::path(dir) / rel).string();
}

struct EvalOutputs {
  EvalReport report;
  Json json;
};

inline EvalOutputs run_eval(const std::string& controller, Checkpoint& ck, const TrainConfig& cfg, std::uint64_t seed,
                            const std::string& out_dir) {
  const Controller ctrl = make_controller(parse_controller(controller), *ck.agent, *ck.outer, cfg.pid);
  EvalOptions opt;
  opt.trials = cfg.eval_trials;
  opt.seed = seed;
  opt.trajectory_dir = out_dir.empty() ? "" : out_path(out_dir, "trajectories");
  EvalOutputs o;
  o.report = evaluate(ctrl, goal_grid(cfg.goal_radius), cfg.model, cfg.env, opt);
  o.json = to_json(o.report);
  o.json["goal_reached"] = o.report.goal_reached();
  if (ctrl.spec.kind != ControllerKind::SacFixed) {
    o.json["slider_trend"] = to_json(slider_trend(o.report));
    o.json["symmetry"] = to_json(symmetry_report(o.report));
  }
  if (!out_dir.empty()) {
    std::filesystem::create_directories(out_dir);
    write_text_file(out_path(out_dir, "report.json"), o.json.dump(2) + "\n");
    write_text_file(out_path(out_dir, "trials.csv"), trials_csv_header() + trials_csv_rows(o.report));
  }
  return o;
}

inline void print_table(std::ostream& os, const std::vector<EvalReport>& reports) {
  os << std::left << std::setw(14) << "controller" << std::right;
  for (const char* g : {"climb", "level", "descent", "overall"}) os << std::setw(20) << g;
  os << std::setw(10) << "reached" << "\n" << std::fixed << std::setprecision(3);
  for (const auto& r : reports) {
    os << std::left << std::setw(14) << r.controller << std::right;
    for (const char* g : {"climb", "level", "descent", "overall"}) {
      std::ostringstream cell;
      cell << std::fixed << std::setprecision(3) << r.groups.at(g).mean << " +- " << r.groups.at(g).std;
      os << std::setw(20) << cell.str();
    }
    os << std::setw(7) << r.goal_reached() << "/" << r.trials.size() << "\n";
  }
  os.unsetf(std::ios::fixed);
}

/// Runs blimpctl with the given arguments and environment; returns the exit code.
inline int run(int argc, const char* const* argv, const std::map<std::string, std::string>& env, std::ostream& out,
               std::ostream& err) {
  CLI::App app{"Bi-level slider and thrust control for an underactuated blimp"};
  app.require_subcommand(1);
  std::string config_path, preset_name, out_dir, checkpoint, controller = "bilevel", goal_text;
  std::optional<std::uint64_t> seed;
  std::optional<double> slider;
  std::vector<std::string> sets;
  bool quiet = false;

  auto add_common = [&](CLI::App* sub) {
    sub->add_option("--config", config_path, "JSON config file applied on top of the preset or checkpoint");
    sub->add_option("--seed", seed, "Random seed");
    sub->add_option("--out", out_dir, "Output directory");
    sub->add_option("--set", sets, "Config override key.path=value (repeatable)");
  };
  CLI::App* train = app.add_subcommand("train", "Two-stage training");
  add_common(train);
  train->add_option("--preset", preset_name, "paper | desk (default desk)");
  train->add_flag("--quiet", quiet, "No progress output");
  CLI::App* eval = app.add_subcommand("eval", "Goal-grid evaluation of one controller");
  add_common(eval);
  eval->add_option("--checkpoint", checkpoint, "Trained checkpoint")->required();
  eval->add_option("--controller", controller, "bilevel | sac-fixed:-5 | sac-fixed:0 | sac-fixed:5 | pid-spg");
  CLI::App* sim = app.add_subcommand("simulate", "Single deterministic rollout");
  add_common(sim);
  sim->add_option("--checkpoint", checkpoint, "Trained checkpoint");
  sim->add_option("--controller", controller, "Controller kind");
  sim->add_option("--goal", goal_text, "Target x,y,z [m]")->required();
  sim->add_option("--slider", slider, "Slider override c [m]");
  CLI::App* sweep = app.add_subcommand("sweep", "Evaluate all five controllers and merge the reports");
  add_common(sweep);
  sweep->add_option("--checkpoint", checkpoint, "Trained checkpoint")->required();

  auto fail = [&](int code, const std::string& kind, const std::string& msg) {
    err << Json{{"error", kind}, {"message", msg}}.dump() << "\n";
    return code;
  };

  try {
    std::vector<std::string> args;
    for (int i = argc - 1; i >= 1; --i) args.emplace_back(argv[i]);
    app.parse(args);
  } catch (const CLI::CallForHelp& e) {
    out << app.help();
    return kOk;
  } catch (const CLI::CallForAllHelp& e) {
    out << app.help("", CLI::AppFormatMode::All);
    return kOk;
  } catch (const CLI::ParseError& e) {
    return fail(kUsageError, "Usage", e.what());
  }

  if (out_dir.empty()) out_dir = lookup(env, "BLIMP_OUT").value_or("");
  if (config_path.empty()) config_path = lookup(env, "BLIMP_CONFIG").value_or("");
  if (!seed) {
    if (auto s = lookup(env, "BLIMP_SEED")) {
      try {
        seed = std::stoull(*s);
      } catch (const std::exception&) {
        return fail(kUsageError, "InvalidConfig", "BLIMP_SEED: '" + *s + "' is not an unsigned integer");
      }
    }
  }

  try {
    ConfigSources src;
    src.config_path = config_path;
    src.env = env;
    src.seed = seed;
    src.sets = sets;

    if (train->parsed()) {
      if (preset_name.empty()) preset_name = lookup(env, "BLIMP_PRESET").value_or("desk");
      src.base = to_json(preset(preset_name));
      const TrainConfig cfg = resolve_config(src);
      if (out_dir.empty()) return fail(kUsageError, "Usage", "train requires --out");
      std::filesystem::create_directories(out_dir);
      write_text_file(out_path(out_dir, "manifest.json"),
                      manifest("train", cfg, Json{{"preset", preset_name}},
                               Json{{"config", "config.json"},
                                    {"metrics", "metrics.jsonl"},
                                    {"evals", "evals.jsonl"},
                                    {"summary", "summary.json"},
                                    {"checkpoint", "checkpoint.json"},
                                    {"periodic_checkpoints", "checkpoints/"}})
                              .dump(2) +
                          "\n");
      Trainer trainer(cfg, out_dir);
      Json summary;
      try {
        summary = trainer.run(quiet ? nullptr : &err);
      } catch (const Error& e) {
        if (e.kind() != ErrorKind::TrainingDiverged) throw;
        trainer.save_checkpoint(out_path(out_dir, "checkpoint_aborted.json"));
        return fail(kDivergenceAbort, to_string(e.kind()), e.what());
      }
      out << "final eval: return " << summary.at("final_eval_return").get<double>() << ", goal rate "
          << summary.at("final_eval_goal_rate").get<double>() << ", rmse " << summary.at("final_eval_rmse").get<double>()
          << "\n";
      return kOk;
    }

    if (eval->parsed() || sweep->parsed()) {
      Checkpoint ck = load_checkpoint(checkpoint);
      src.base = to_json(ck.config);
      src.seed.reset();
      TrainConfig cfg = resolve_config(src);
      const std::uint64_t eval_seed = seed.value_or(0);
      if (eval->parsed()) {
        parse_controller(controller);
        if (!out_dir.empty()) {
          std::filesystem::create_directories(out_dir);
          write_text_file(out_path(out_dir, "manifest.json"),
                          manifest("eval", cfg, Json{{"controller", controller}, {"eval_seed", eval_seed}},
                                   Json{{"report", "report.json"}, {"trials", "trials.csv"}, {"trajectories", "trajectories/"}})
                                  .dump(2) +
                              "\n");
        }
        const EvalOutputs o = run_eval(controller, ck, cfg, eval_seed, out_dir);
        print_table(out, {o.report});
        return kOk;
      }
      if (out_dir.empty()) return fail(kUsageError, "Usage", "sweep requires --out");
      std::filesystem::create_directories(out_dir);
      write_text_file(out_path(out_dir, "manifest.json"),
                      manifest("sweep", cfg, Json{{"eval_seed", eval_seed}},
                               Json{{"merged", "sweep.json"}, {"trials", "trials.csv"}, {"per_controller", "<controller>/"}})
                              .dump(2) +
                          "\n");
      std::vector<EvalReport> reports;
      Json merged = {{"seed", eval_seed}, {"controllers", Json::array()}};
      std::string csv = trials_csv_header();
      for (const auto& name : all_controllers()) {
        std::string dir = name;
        std::replace(dir.begin(), dir.end(), ':', '_');
        const EvalOutputs o = run_eval(name, ck, cfg, eval_seed, out_path(out_dir, dir));
        reports.push_back(o.report);
        merged["controllers"].push_back(o.json);
        csv += trials_csv_rows(o.report);
      }
      Json table = Json::object();
      for (const auto& r : reports) {
        Json row = Json::object();
        for (const auto& [g, s] : r.groups) row[g] = to_json(s);
        table[r.controller] = row;
      }
      merged["table"] = table;
      write_text_file(out_path(out_dir, "sweep.json"), merged.dump(2) + "\n");
      write_text_file(out_path(out_dir, "trials.csv"), csv);
      print_table(out, reports);
      return kOk;
    }

    // simulate
    const ControllerSpec spec = parse_controller(controller);
    const Vec3 zeta = parse_goal(goal_text);
    std::optional<Checkpoint> ck;
    if (!checkpoint.empty()) ck = load_checkpoint(checkpoint);
    if (!ck && spec.kind != ControllerKind::PidSpg)
      return fail(kUsageError, "Usage", "simulate with '" + controller + "' requires --checkpoint");
    if (!ck && !slider)
      return fail(kUsageError, "Usage", "simulate pid-spg without a checkpoint requires --slider");
    src.base = ck ? to_json(ck->config) : to_json(desk_preset());
    const TrainConfig cfg = resolve_config(src);
    if (((zeta - cfg.workspace.lo).array() < 0.0).any() || ((zeta - cfg.workspace.hi).array() > 0.0).any())
      err << "warning: target outside the training workspace\n";
    if (slider && std::abs(*slider) > kSliderLimit)
      throw Error(ErrorKind::InvalidConfig, "--slider: must lie in [-0.05, 0.05]");
    Controller ctrl;
    if (ck) {
      ctrl = make_controller(spec, *ck->agent, *ck->outer, cfg.pid);
    } else {
      ctrl.spec = spec;
      ctrl.policy = pid_policy(cfg.pid);
    }
    const double c = slider ? *slider : ctrl.slider(zeta);
    EnvConfig ec = cfg.env;
    ec.randomize_params = false;
    ec.randomize_initial_state = false;
    BlimpEnv env(cfg.model, ec);
    const EpisodeRecord rec =
        run_rollout(env, ctrl.policy, Goal{zeta, cfg.goal_radius}, c, seed.value_or(0), cfg.sac.gamma);
    const double rmse = trajectory_rmse(rec);
    const Json record = {{"controller", spec.name},
                         {"zeta", to_json_array(zeta)},
                         {"c", c},
                         {"termination", to_string(rec.termination)},
                         {"steps", rec.steps.size()},
                         {"return", rec.ret},
                         {"rmse", rmse},
                         {"time_to_goal", std::isnan(rec.time_to_goal()) ? Json(nullptr) : Json(rec.time_to_goal())}};
    if (!out_dir.empty()) {
      std::filesystem::create_directories(out_dir);
      write_text_file(out_path(out_dir, "manifest.json"),
                      manifest("simulate", cfg, Json{{"controller", spec.name}, {"zeta", to_json_array(zeta)}, {"c", c}},
                               Json{{"record", "record.json"}, {"trajectory", "trajectory.csv"}})
                              .dump(2) +
                          "\n");
      write_text_file(out_path(out_dir, "record.json"), record.dump(2) + "\n");
      write_text_file(out_path(out_dir, "trajectory.csv"), trajectory_csv(rec));
    }
    out << record.dump() << "\n";
    return kOk;
  } catch (const Error& e) {
    switch (e.kind()) {
      case ErrorKind::InvalidConfig:
      case ErrorKind::Io:
      case ErrorKind::UnknownController:
      case ErrorKind::CheckpointVersionMismatch:
      case ErrorKind::DegenerateGoal:
      case ErrorKind::ShapeMismatch:
        return fail(kUsageError, to_string(e.kind()), e.what());
      case ErrorKind::TrainingDiverged:
        return fail(kDivergenceAbort, to_string(e.kind()), e.what());
      default:
        return fail(kRuntimeError, to_string(e.kind()), e.what());
    }
  } catch (const nlohmann::json::exception& e) {
    return fail(kUsageError, "InvalidConfig", e.what());
  } catch (const std::exception& e) {
    return fail(kRuntimeError, "Runtime", e.what());
  }
}

}  // namespace blimp::cli
