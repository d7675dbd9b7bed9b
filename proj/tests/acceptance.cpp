// Acceptance run: one PASS/FAIL line per criterion. Criteria 6-8 share a
// desk-preset training run under --work-dir; set ACCEPT_REUSE_DIR to an existing
// run directory to skip training.

#include <CLI11.hpp>

#include <chrono>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>

#include "blimp/blimp.hpp"

using namespace blimp;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(double x, int prec = 4) {
  std::ostringstream o;
  o << std::setprecision(prec) << x;
  return o.str();
}

double rel_error(double a, double b) { return std::abs(a - b) / std::max({std::abs(a), std::abs(b), 1e-6}); }

MatX random_matrix(Rng& rng, Eigen::Index r, Eigen::Index c) {
  MatX m(r, c);
  for (Eigen::Index k = 0; k < m.size(); ++k) m.data()[k] = uniform(rng, -1.0, 1.0);
  return m;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return std::string(std::istreambuf_iterator<char>(in), {});
}

std::vector<Json> read_jsonl(const fs::path& p) {
  std::ifstream in(p);
  std::vector<Json> out;
  for (std::string line; std::getline(in, line);)
    if (!line.empty()) out.push_back(Json::parse(line));
  return out;
}

// ---- 1: gradients ----

// Max relative error of backprop vs central differences on `per_tensor` random entries of each tensor.
double mlp_fd_error(const std::vector<int>& sizes, int per_tensor, int& probed) {
  Rng rng(101);
  nn::Mlp net(sizes, rng);
  const MatX x = random_matrix(rng, sizes.front(), 4);
  const MatX w = random_matrix(rng, sizes.back(), 4);
  auto loss = [&] { return net.forward(x).cwiseProduct(w).sum(); };
  nn::Tape tape;
  net.forward(x, &tape);
  nn::Gradients g = net.backward(tape, w).grads;
  auto grads = g.spans();
  auto params = net.param_spans();
  const double h = 1e-5;
  double worst = 0.0;
  for (std::size_t t = 0; t < params.size(); ++t)
    for (int s = 0; s < per_tensor; ++s) {
      const std::size_t i = static_cast<std::size_t>(rng() % params[t].size());
      const double keep = params[t][i];
      params[t][i] = keep + h;
      const double up = loss();
      params[t][i] = keep - h;
      const double dn = loss();
      params[t][i] = keep;
      worst = std::max(worst, rel_error((up - dn) / (2.0 * h), grads[t][i]));
      ++probed;
    }
  return worst;
}

double head_fd_error(int& probed) {
  const nn::GaussianHead head(Eigen::Vector2d(0.0, 0.0), Eigen::Vector2d(0.1, 0.1));
  Rng rng(102);
  MatX out = random_matrix(rng, 4, 8);
  out.bottomRows(2).array() -= 0.5;
  const MatX eps = random_matrix(rng, 2, 8);
  const MatX wa = random_matrix(rng, 2, 8);
  const VecX wl = random_matrix(rng, 8, 1).col(0);
  const double h = 1e-5;
  double worst = 0.0;
  // Reparameterized path: d/d(out) [sum wa .* a + wl . log pi(a)].
  auto path_loss = [&](const MatX& o) {
    const nn::SquashedBatch s = head.evaluate(o, eps);
    return s.action.cwiseProduct(wa).sum() + s.log_prob.dot(wl);
  };
  const MatX gp = head.pathwise_grad(head.evaluate(out, eps), wa, wl);
  // Score path: d/d(out) sum wl log pi(a) at fixed a.
  const nn::SquashedBatch fixed = head.sample(out, rng);
  auto score_loss = [&](const MatX& o) {
    double t = 0.0;
    for (Eigen::Index j = 0; j < o.cols(); ++j) t += wl[j] * head.log_prob(o.col(j), fixed.action.col(j));
    return t;
  };
  const MatX gs = head.score_grad(fixed, wl);
  for (Eigen::Index k = 0; k < out.size(); ++k) {
    MatX up = out, dn = out;
    up.data()[k] += h;
    dn.data()[k] -= h;
    worst = std::max(worst, rel_error(gp.data()[k], (path_loss(up) - path_loss(dn)) / (2.0 * h)));
    worst = std::max(worst, rel_error(gs.data()[k], (score_loss(up) - score_loss(dn)) / (2.0 * h)));
    probed += 2;
  }
  return worst;
}

Outcome criterion1() {
  int pc = 0, pa = 0, ph = 0;
  const double ec = mlp_fd_error({16, 512, 512, 1}, 200, pc);
  const double ea = mlp_fd_error({16, 128, 128, 4}, 200, pa);
  const double eh = head_fd_error(ph);
  const bool pass = ec < 1e-4 && ea < 1e-4 && eh < 1e-4 && pc >= 1000 && pa >= 1000;
  return {pass, "max rel err critic " + fmt(ec) + " (" + std::to_string(pc) + " params), actor " + fmt(ea) + " (" +
                    std::to_string(pa) + "), log-prob " + fmt(eh) + " (" + std::to_string(ph) + ")"};
}

// ---- 2: dynamics ----

BlimpState random_state(Rng& rng) {
  BlimpState s;
  for (int i = 0; i < 3; ++i) {
    s.p[i] = uniform(rng, -2.0, 2.0);
    s.v_b[i] = uniform(rng, -0.5, 0.5);
    s.w_b[i] = uniform(rng, -0.3, 0.3);
  }
  s.e = Vec3(uniform(rng, -0.4, 0.4), uniform(rng, -0.4, 0.4), uniform(rng, -3.0, 3.0));
  return s;
}

Outcome criterion2() {
  Rng rng(201);
  double orth = 0.0;
  for (int i = 0; i < 1000; ++i) {
    const Mat3 r = rotation_matrix(Vec3(uniform(rng, -kPi, kPi), uniform(rng, -1.5, 1.5), uniform(rng, -10, 10)));
    orth = std::max({orth, (r.transpose() * r - Mat3::Identity()).cwiseAbs().maxCoeff(), std::abs(r.determinant() - 1.0)});
  }

  ModelParams smooth;
  smooth.aero.drag = Vec3::Zero();
  smooth.aero.lift_slope = 0.0;
  double order_lo = 1e9, order_hi = -1e9;
  for (int trial = 0; trial < 5; ++trial) {
    const BlimpState s0 = random_state(rng);
    const SliderConfig cfg{uniform(rng, -0.05, 0.05)};
    const ControlInput u{uniform(rng, 0.0, 0.1), uniform(rng, 0.0, 0.1)};
    auto integrate = [&](double dt, int n) {
      BlimpState s = s0;
      for (int k = 0; k < n; ++k) s = step(s, cfg, u, smooth, dt);
      return s.pack();
    };
    const auto x1 = integrate(0.04, 40), x2 = integrate(0.02, 80), x3 = integrate(0.01, 160);
    const double order = std::log2((x1 - x2).norm() / (x2 - x3).norm());
    order_lo = std::min(order_lo, order);
    order_hi = std::max(order_hi, order);
  }

  const ModelParams nominal;
  double mirror_err = 0.0;
  for (int i = 0; i < 200; ++i) {
    const BlimpState s = random_state(rng);
    const SliderConfig cfg{uniform(rng, -0.05, 0.05)};
    const ControlInput u{uniform(rng, 0.0, nominal.f_max), uniform(rng, 0.0, nominal.f_max)};
    const BlimpState a = mirror(step(s, cfg, u, nominal, 1.0 / 60.0));
    const BlimpState b = step(mirror(s), cfg, ControlInput{u.f_r, u.f_l}, nominal, 1.0 / 60.0);
    mirror_err = std::max(mirror_err, (a.pack() - b.pack()).cwiseAbs().maxCoeff());
  }

  ModelParams neutral;
  neutral.buoyancy = 0.0;
  const BlimpState rest;
  const double fixed_err =
      (step(rest, SliderConfig{0.0}, ControlInput{}, neutral, 1.0 / 60.0).pack() - rest.pack()).cwiseAbs().maxCoeff();

  int pd_fail = 0;
  for (int i = 0; i <= 100; ++i) pd_fail += !is_positive_definite(mass_matrix(SliderConfig{-0.05 + 0.001 * i}, nominal));
  for (std::uint64_t seed = 0; seed < 1000; ++seed) {
    const ModelParams p = randomize_params(nominal, seed);
    for (double c : {-0.05, 0.0, 0.05}) pd_fail += !is_positive_definite(mass_matrix(SliderConfig{c}, p));
  }

  const bool pass = orth < 1e-12 && order_lo >= 3.7 && order_hi <= 4.3 && mirror_err < 1e-10 && fixed_err < 1e-10 &&
                    pd_fail == 0;
  return {pass, "orthonormality " + fmt(orth) + ", RK4 order [" + fmt(order_lo) + ", " + fmt(order_hi) +
                    "], mirror " + fmt(mirror_err) + ", fixed point " + fmt(fixed_err) + ", non-PD M(c) " +
                    std::to_string(pd_fail)};
}

// ---- 3: task math ----

Outcome criterion3() {
  Rng rng(301);
  auto rv = [&](double lo, double hi) { return Vec3(uniform(rng, lo, hi), uniform(rng, lo, hi), uniform(rng, lo, hi)); };
  int trk_bad = 0;
  double trk_worst = 0.0;
  for (int i = 0; i < 1000; ++i) {
    const Vec3 zeta = rv(-5, 5), p = rv(-6, 6);
    double grid = std::numeric_limits<double>::infinity();
    for (int k = 0; k <= 1000; ++k) grid = std::min(grid, (p - (k * 1e-3) * zeta).norm());
    const double exact = cross_track_error(p, zeta);
    const double bound = 0.5e-3 * zeta.norm() + 1e-6;
    trk_worst = std::max(trk_worst, grid - exact);
    trk_bad += !(exact <= grid + 1e-6 && grid - exact <= bound);
  }
  const RewardWeights w;
  int recomb_bad = 0;
  for (int i = 0; i < 1000; ++i) {
    const Goal g{Vec3(uniform(rng, 4, 5), uniform(rng, -2, 2), uniform(rng, -1, 1)), 0.2};
    const Vec3 prev = rv(-1, 5);
    const Vec3 p = prev + rv(-0.1, 0.1);
    const StepReward s = step_reward(prev, p, rv(-1, 1), g, w);
    recomb_bad += s.r != w.tracking * s.e_trk + w.heading * s.e_head + w.progress * s.delta_d + s.bonus;
  }
  const Workspace ws;
  int box_bad = 0;
  for (int i = 0; i < 10000; ++i) {
    const Vec3 z = sample_goal(derive_seed(302, 0, static_cast<std::uint64_t>(i)), ws).zeta;
    for (int k = 0; k < 3; ++k) box_bad += z[k] < ws.lo[k] || z[k] > ws.hi[k];
  }
  return {trk_bad == 0 && recomb_bad == 0 && box_bad == 0,
          "cross-track mismatches " + std::to_string(trk_bad) + " (max grid excess " + fmt(trk_worst) +
              "), recombination mismatches " + std::to_string(recomb_bad) + ", goals outside box " +
              std::to_string(box_bad) + "/10000"};
}

// ---- 4: SAC toy ----

Outcome criterion4() {
  sac::SacConfig cfg;
  cfg.actor_hidden = {16, 16};
  cfg.critic_hidden = {16, 16};
  cfg.batch_size = 64;
  cfg.lr_q = 3e-3;
  cfg.lr_pi = 3e-3;
  cfg.target_entropy = -3.0;
  const double a_star = 0.7;
  sac::SacAgent agent(cfg, VecX::Ones(1), VecX::Zero(1), VecX::Ones(1), 401);
  sac::ReplayBuffer buf(5000);
  const VecX s = VecX::Zero(1);
  for (int i = 0; i < 10000; ++i) {
    const VecX a = agent.act(s, false);
    buf.add(sac::Transition{s, a, -(a[0] - a_star) * (a[0] - a_star), s, true});
    if (i >= 64) agent.update(buf);
  }
  const double a = agent.act(s, true)[0];
  return {std::abs(a - a_star) < 0.05, "deterministic action " + fmt(a) + " vs a* = 0.7 after 10^4 steps"};
}

// ---- 5: SPG bandit ----

Outcome criterion5() {
  spg::SpgConfig cfg;
  cfg.schedule = spg::StepSchedule::RobbinsMonro;
  cfg.eta0 = 0.05;
  cfg.init_beta = 1e-6;
  spg::OuterPolicy pol(cfg, 501);
  Rng rng(502);
  const Vec3 za(4.5, 0, -1), zb(4.5, 0, 1);
  const double ca = -0.02, cb = 0.03;
  for (int k = 0; k < 2000; ++k) {
    std::vector<spg::OuterSample> batch;
    for (int i = 0; i < 8; ++i) {
      const bool second = i % 2 == 1;
      const Vec3& z = second ? zb : za;
      const double target = second ? cb : ca;
      const spg::SliderChoice ch = pol.select_config(z, false, rng);
      batch.push_back(spg::OuterSample{z, ch.c, ch.log_prob, -(ch.c - target) * (ch.c - target)});
    }
    pol.outer_update(batch, k);
    pol.beta_update(batch);
  }
  Rng eval(503);
  double ma = 0.0, mb = 0.0;
  for (int i = 0; i < 4000; ++i) {
    ma += pol.select_config(za, false, eval).c / 4000.0;
    mb += pol.select_config(zb, false, eval).c / 4000.0;
  }
  const double ea = std::abs(ma - ca), eb = std::abs(mb - cb);
  return {ea < 0.005 && eb < 0.005, "|mean c - c*| = " + fmt(ea) + " (c* = -0.02), " + fmt(eb) +
                                        " (c* = 0.03) after 2000 robbins_monro iterations"};
}

// ---- 6-8: desk run ----

struct DeskRun {
  fs::path dir;
  TrainConfig cfg;
  Json summary;
};

DeskRun desk_run(const fs::path& work) {
  DeskRun run;
  run.cfg = desk_preset();
  if (const char* reuse = std::getenv("ACCEPT_REUSE_DIR"); reuse && *reuse) {
    run.dir = reuse;
    run.cfg = train_config_from_json(read_json_file((run.dir / "config.json").string()));
    run.summary = read_json_file((run.dir / "summary.json").string());
    std::cout << "reusing desk run in " << run.dir.string() << "\n";
    return run;
  }
  run.dir = work / "desk";
  fs::remove_all(run.dir);
  const auto t0 = std::chrono::steady_clock::now();
  run.summary = train(run.cfg, run.dir.string(), &std::cerr);
  const double minutes = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count() / 60.0;
  std::cout << "desk training took " << fmt(minutes, 3) << " min\n";
  return run;
}

Outcome criterion6(const DeskRun& run) {
  const auto evals = read_jsonl(run.dir / "evals.jsonl");
  if (evals.size() < 6) return {false, "only " + std::to_string(evals.size()) + " evaluation checkpoints"};
  const double first = evals.front().at("mean_return").get<double>();
  double last5 = 0.0;
  for (std::size_t i = evals.size() - 5; i < evals.size(); ++i) last5 += evals[i].at("mean_return").get<double>() / 5.0;
  // Returns are negative, so "exceeds by 50%" is measured against |first|.
  const double needed = first + 0.5 * std::abs(first);
  const double goal_rate = evals.back().at("goal_rate").get<double>();
  return {last5 >= needed && goal_rate >= 0.6, "first eval " + fmt(first) + ", mean of final 5 " + fmt(last5) +
                                                    " (need >= " + fmt(needed) + "), final goal rate " +
                                                    fmt(goal_rate, 3) + " (need >= 0.6)"};
}

struct Reports {
  std::map<std::string, EvalReport> by_name;
};

Reports evaluate_all(const DeskRun& run) {
  Checkpoint ck = load_checkpoint((run.dir / "checkpoint.json").string());
  Reports r;
  for (const auto& name : all_controllers()) {
    const Controller ctrl = make_controller(parse_controller(name), *ck.agent, *ck.outer, ck.config.pid);
    EvalOptions opt;
    opt.trials = 3;
    opt.seed = 0;
    r.by_name[name] = evaluate(ctrl, goal_grid(ck.config.goal_radius), ck.config.model, ck.config.env, opt);
  }
  return r;
}

Outcome criterion7(const Reports& r) {
  const SliderTrend trend = slider_trend(r.by_name.at("bilevel"));
  const bool a = trend.mean_c_climb < trend.mean_c_descent;
  auto mean = [&](const std::string& n, const std::string& g) { return r.by_name.at(n).groups.at(g).mean; };
  const bool b = mean("sac-fixed:-5", "climb") < mean("sac-fixed:5", "climb") &&
                 mean("sac-fixed:5", "descent") < mean("sac-fixed:-5", "descent");
  const double best_fixed =
      std::min({mean("sac-fixed:-5", "overall"), mean("sac-fixed:0", "overall"), mean("sac-fixed:5", "overall")});
  const bool c = mean("bilevel", "overall") <= 1.05 * best_fixed;
  return {a && b && c,
          std::string("(a) ") + (a ? "ok" : "no") + " mean c climb " + fmt(trend.mean_c_climb) + " vs descent " +
              fmt(trend.mean_c_descent) + "; (b) " + (b ? "ok" : "no") + " climb RMSE -5 " +
              fmt(mean("sac-fixed:-5", "climb")) + " / +5 " + fmt(mean("sac-fixed:5", "climb")) +
              ", descent -5 " + fmt(mean("sac-fixed:-5", "descent")) + " / +5 " + fmt(mean("sac-fixed:5", "descent")) +
              "; (c) " + (c ? "ok" : "no") + " bilevel " + fmt(mean("bilevel", "overall")) + " vs 1.05 x " +
              fmt(best_fixed)};
}

Outcome criterion8(const Reports& r) {
  const EvalReport& pid = r.by_name.at("pid-spg");
  std::map<int, int> reached;
  std::map<int, Vec3> zeta;
  for (const auto& t : pid.trials) {
    if (std::abs(t.zeta.z()) > 1e-9 || std::abs(t.zeta.y()) > 1e-9) continue;
    zeta[t.goal_index] = t.zeta;
    reached[t.goal_index] += t.termination == Termination::GoalReached && t.time_to_goal <= 15.0;
  }
  bool pass = reached.size() == 3;
  std::string detail;
  for (const auto& [i, n] : reached) {
    pass = pass && n >= 2;
    detail += "(" + fmt(zeta[i].x(), 2) + ",0,0): " + std::to_string(n) + "/3 ";
  }
  int level_all = 0;
  for (const auto& t : pid.trials) level_all += std::abs(t.zeta.z()) < 1e-9 && t.termination == Termination::GoalReached;
  return {pass, detail + "; all level goals " + std::to_string(level_all) + "/27 trials"};
}

// ---- 9: reproducibility ----

std::vector<std::string> repro_train_args(const fs::path& out) {
  return {"train", "--out", out.string(), "--seed", "9", "--quiet", "--set", "episodes=40", "--set",
          "stage1_episodes=20", "--set", "eval_interval=20", "--set", "eval_trials=1", "--set",
          "sac.actor_hidden=[32,32]", "--set", "sac.critic_hidden=[32,32]", "--set", "sac.warmup=200", "--set",
          "spg.batch_size=4"};
}

int run_blimpctl(const std::vector<std::string>& args) {
#ifdef BLIMPCTL_PATH
  std::string cmd = BLIMPCTL_PATH;
  for (const auto& a : args) cmd += " '" + a + "'";
  const int s = std::system((cmd + " >/dev/null 2>&1").c_str());
  return WIFEXITED(s) ? WEXITSTATUS(s) : -1;
#else
  std::vector<const char*> argv{"blimpctl"};
  for (const auto& a : args) argv.push_back(a.c_str());
  std::ostringstream out, err;
  return cli::run(static_cast<int>(argv.size()), argv.data(), {}, out, err);
#endif
}

Outcome criterion9(const fs::path& work) {
  std::vector<std::string> mismatched;
  int bad_exit = 0;
  for (const char* tag : {"a", "b"}) {
    const fs::path d = work / "repro" / tag;
    fs::remove_all(d);
    bad_exit += run_blimpctl(repro_train_args(d / "train")) != 0;
    bad_exit += run_blimpctl({"eval", "--checkpoint", (d / "train" / "checkpoint.json").string(), "--controller",
                              "bilevel", "--seed", "4", "--out", (d / "eval").string()}) != 0;
  }
  const fs::path a = work / "repro" / "a", b = work / "repro" / "b";
  for (const char* f : {"train/metrics.jsonl", "train/evals.jsonl", "train/summary.json", "train/checkpoint.json",
                        "train/config.json", "eval/report.json", "eval/trials.csv"})
    if (!fs::exists(a / f) || slurp(a / f) != slurp(b / f)) mismatched.push_back(f);

  // Round trip: reloaded networks reproduce actor and critic outputs bit for bit.
  bool exact = false;
  if (fs::exists(a / "train/checkpoint.json")) {
    Checkpoint c1 = load_checkpoint((a / "train/checkpoint.json").string());
    const std::string again = checkpoint_json(c1.config, c1.episode, *c1.agent, *c1.outer).dump() + "\n";
    Checkpoint c2 = checkpoint_from_json(Json::parse(again));
    exact = again == slurp(a / "train/checkpoint.json");
    Rng rng(901);
    for (int i = 0; i < 200 && exact; ++i) {
      Observation o;
      for (int k = 0; k < kStateDim; ++k) o[k] = uniform(rng, -3.0, 3.0);
      o[15] = uniform(rng, -0.05, 0.05);
      const MatX x = o.cwiseQuotient(sac::input_divisors(c1.config.sac.obs_scale));
      exact = exact && c1.agent->actor.forward(x) == c2.agent->actor.forward(x);
      MatX xa(kStateDim + kActionDim, 1);
      xa << x, uniform(rng, -1, 1), uniform(rng, -1, 1);
      exact = exact && c1.agent->q1.forward(xa) == c2.agent->q1.forward(xa) &&
              c1.agent->q2.forward(xa) == c2.agent->q2.forward(xa);
      const Vec3 z(uniform(rng, 4, 5), uniform(rng, -2, 2), uniform(rng, -1, 1));
      Rng r1(i), r2(i);
      exact = exact && c1.outer->select_config(z, true, r1).c == c2.outer->select_config(z, true, r2).c &&
              c1.outer->select_config(z, false, r1).c == c2.outer->select_config(z, false, r2).c;
    }
  }
  std::string detail = "exit failures " + std::to_string(bad_exit) + ", differing files " +
                       std::to_string(mismatched.size());
  for (const auto& m : mismatched) detail += " " + m;
  detail += std::string(", checkpoint round trip ") + (exact ? "bit-exact" : "NOT exact");
  return {bad_exit == 0 && mismatched.empty() && exact, detail};
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Acceptance criteria 1-9"};
  std::string work_dir = "acceptance_runs";
  app.add_option("--work-dir", work_dir, "Scratch directory for training runs");
  CLI11_PARSE(app, argc, argv);
  const fs::path work(work_dir);
  fs::create_directories(work);

  std::vector<std::pair<int, Outcome>> results;
  auto record = [&](int n, const std::function<Outcome()>& f) {
    const auto t0 = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = f();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    const double s = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    std::cout << "CRITERION " << n << " " << (o.pass ? "PASS" : "FAIL") << " [" << fmt(s, 3) << " s] " << o.detail
              << std::endl;
    results.emplace_back(n, o);
  };

  record(1, criterion1);
  record(2, criterion2);
  record(3, criterion3);
  record(4, criterion4);
  record(5, criterion5);

  std::optional<DeskRun> run;
  std::optional<Reports> reports;
  try {
    run = desk_run(work);
    reports = evaluate_all(*run);
  } catch (const std::exception& e) {
    std::cout << "desk run failed: " << e.what() << std::endl;
  }
  auto need_run = [&](auto f) {
    return [&, f]() -> Outcome {
      if (!run || !reports) return {false, "desk run unavailable"};
      return f();
    };
  };
  record(6, need_run([&] { return criterion6(*run); }));
  record(7, need_run([&] { return criterion7(*reports); }));
  record(8, need_run([&] { return criterion8(*reports); }));
  record(9, [&] { return criterion9(work); });

  Json out = Json::array();
  int passed = 0;
  for (const auto& [n, o] : results) {
    out.push_back({{"criterion", n}, {"pass", o.pass}, {"detail", o.detail}});
    passed += o.pass;
  }
  if (reports) {
    Json table = Json::object();
    for (const auto& [name, rep] : reports->by_name) table[name] = to_json(rep);
    write_text_file((work / "acceptance_eval.json").string(), table.dump(2) + "\n");
  }
  write_text_file((work / "acceptance.json").string(), out.dump(2) + "\n");
  std::cout << passed << "/" << results.size() << " criteria passed" << std::endl;
  return passed == static_cast<int>(results.size()) ? 0 : 1;
}
