#include "rcppo/cli.hpp"

#include "CLI11.hpp"

#include <cmath>
#include <fstream>
#include <iostream>
#include <sstream>

namespace rcppo::cli {

namespace fs = std::filesystem;

namespace {

struct Options {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::string out;
  std::optional<int> episodes;
  std::optional<double> tol;
  bool force = false;
  std::string states;
  std::string z_source;
  std::optional<double> noise;
  std::string x0;
  std::string fixture = "all";
};

std::string num(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.10g", v);
  return buf;
}

std::ofstream open_out(const fs::path& p) {
  std::ofstream os(p);
  if (!os) throw std::runtime_error("cannot write " + p.string());
  return os;
}

struct Context {
  RunConfig cfg;
  fs::path dir;
  std::string hash;
  envkit::ProblemPtr problem;
};

Context load_context(const Options& o, bool create_dir) {
  if (o.config.empty()) throw ConfigError("--config is required");
  Context c;
  c.cfg = load_config(o.config);
  if (o.seed) {
    c.cfg.seed = *o.seed;
    c.cfg.phase1.ppo.seed = *o.seed;
  }
  if (!o.out.empty()) c.cfg.output_dir = o.out;
  if (o.episodes) c.cfg.evaluation.episodes = *o.episodes;
  if (o.tol) {
    if (!(*o.tol > 0.0)) throw ConfigError("--tol must be positive");
    c.cfg.evaluation.tol = *o.tol;
    c.cfg.zfit.tol = *o.tol;
  }
  if (!o.z_source.empty()) {
    if (o.z_source != "bisection" && o.z_source != "regressor" && o.z_source != "fixed")
      throw ConfigError("--z-source must be one of {bisection, regressor, fixed}");
    c.cfg.evaluation.z_source = o.z_source;
  }
  c.hash = config_hash(c.cfg);
  c.dir = resolve_output_dir(c.cfg);
  if (create_dir) fs::create_directories(c.dir);
  auto env = c.cfg.environment;
  if (o.noise) {
    // evaluation-time perturbation; deliberately outside the config hash
    env.noise.noise_half_width = *o.noise;
  }
  c.problem = make_problem(env);
  return c;
}

void write_resolved(const Context& c) {
  auto os = open_out(c.dir / "config.resolved.json");
  Json j = to_json(c.cfg);
  j["config_hash"] = c.hash;
  os << j.dump(2) << '\n';
}

approx::Checkpoint load_checked(const Context& c, const std::string& name, bool force) {
  const fs::path p = c.dir / name;
  if (!fs::exists(p)) throw ContractError("missing checkpoint " + p.string() + "; run the producing command first");
  auto ck = approx::Checkpoint::load(p.string());
  if (ck.config_hash != c.hash && !force)
    throw ContractError("checkpoint " + p.string() + " was produced under config hash " + ck.config_hash +
                        " but the current config hashes to " + c.hash + " (use --force to override)");
  return ck;
}

double meta_real(const approx::Checkpoint& ck, const std::string& key) {
  auto it = ck.meta.find(key);
  if (it == ck.meta.end()) throw ContractError("checkpoint lacks metadata '" + key + "'");
  return std::stod(it->second);
}

struct Models {
  approx::GaussianPolicy policy;
  approx::ValueModel value;
  algo::InputEncoder encoder;
  augment::AugmentedGoalParams goal;
};

Models load_models(const Context& c, bool force, bool prefer_phase2) {
  const auto pol = load_checked(c, "policy.json", force);
  const bool rc = c.cfg.algorithm == "rcppo";
  algo::InputEncoder enc = rc ? algo::budget_encoder(*c.problem, meta_real(pol, "z_min"), meta_real(pol, "z_max"))
                              : algo::plain_encoder(*c.problem);
  const augment::AugmentedGoalParams goal{meta_real(pol, "big_c")};
  const auto& hidden = c.cfg.phase1.ppo.hidden;
  approx::GaussianPolicy policy(algo::trunk_spec(enc.dim(), hidden, c.problem->action_dim()), c.problem->action_low(),
                                c.problem->action_high());
  approx::load_into(pol, policy);
  const std::string vname = prefer_phase2 && fs::exists(c.dir / "value_phase2.json") ? "value_phase2.json" : "value.json";
  const auto val = load_checked(c, vname, force);
  approx::ValueModel value(algo::trunk_spec(enc.dim(), hidden, 1), meta_real(val, "scale"));
  approx::load_into(val, value);
  return {std::move(policy), std::move(value), enc, goal};
}

void save_models(const Context& c, const algo::TrainedModels& m, const std::string& value_name) {
  auto pol = approx::to_checkpoint(m.policy, c.hash);
  pol.meta["z_min"] = num(m.encoder.z_min);
  pol.meta["z_max"] = num(m.encoder.z_max);
  pol.meta["big_c"] = num(m.goal.big_c);
  pol.meta["algorithm"] = c.cfg.algorithm;
  pol.save((c.dir / "policy.json").string());
  approx::to_checkpoint(m.value, "value", c.hash).save((c.dir / value_name).string());
}

void print_row(const algo::LogRow& r) {
  std::cerr << "iter " << r.iteration << " steps " << r.env_steps << " reach "
            << (r.reach_rate ? num(*r.reach_rate) : "-") << " cost "
            << (r.mean_cost_reached ? num(*r.mean_cost_reached) : "-") << " vloss " << num(r.value_loss) << '\n';
}

// ---------------------------------------------------------------------------

int cmd_train(const Options& o) {
  auto c = load_context(o, true);
  write_resolved(c);
  algo::TrainedModels m = c.cfg.algorithm == "rcppo"
                              ? algo::train_phase1(*c.problem, c.cfg.phase1, print_row)
                              : baselines::train_ppo_baseline(*c.problem, baseline_config(c.cfg), print_row);
  save_models(c, m, "value.json");
  auto os = open_out(c.dir / "train_log.csv");
  algo::write_log_csv(os, m.log);
  std::cout << Json{{"output_dir", c.dir.string()}, {"iterations", m.log.size()}, {"config_hash", c.hash}}.dump()
            << '\n';
  return 0;
}

int cmd_finetune(const Options& o) {
  auto c = load_context(o, true);
  if (c.cfg.algorithm != "rcppo") throw ConfigError("finetune applies to algorithm 'rcppo' only");
  auto models = load_models(c, o.force, false);
  algo::TrainedModels m{models.policy, models.value, models.encoder, models.goal, {}};
  std::vector<algo::LogRow> log;
  auto value = algo::finetune_phase2(*c.problem, m, c.cfg.phase2, &log);
  approx::to_checkpoint(value, "value", c.hash).save((c.dir / "value_phase2.json").string());
  auto os = open_out(c.dir / "finetune_log.csv");
  algo::write_log_csv(os, log);
  std::cout << Json{{"output_dir", c.dir.string()},
                    {"gamma", algo::phase2_gamma(c.cfg.phase2, m.goal.big_c, c.problem->horizon_max())}}
                   .dump()
            << '\n';
  return 0;
}

std::vector<std::pair<Vec, augment::Safety>> read_states(const std::string& path, int dim,
                                                         const envkit::ReachAvoidProblem& problem) {
  std::ifstream is(path);
  if (!is) throw ConfigError("cannot open states file " + path);
  std::string line;
  std::getline(is, line);  // header
  std::vector<std::pair<Vec, augment::Safety>> out;
  int lineno = 1;
  while (std::getline(is, line)) {
    ++lineno;
    if (line.empty()) continue;
    std::vector<double> vals;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) vals.push_back(std::stod(cell));
    if (static_cast<int>(vals.size()) != dim && static_cast<int>(vals.size()) != dim + 1)
      throw ConfigError("states file line " + std::to_string(lineno) + " needs " + std::to_string(dim) +
                        " state columns and an optional y column");
    Vec x = Eigen::Map<Vec>(vals.data(), dim);
    auto y = vals.size() == static_cast<std::size_t>(dim) + 1
                 ? (vals.back() > 0 ? augment::Safety::Unsafe : augment::Safety::Safe)
                 : augment::shifted_indicator(problem.in_avoid(x));
    out.push_back({x, y});
  }
  return out;
}

int cmd_bisect(const Options& o) {
  auto c = load_context(o, false);
  if (o.states.empty()) throw ConfigError("--states is required");
  auto m = load_models(c, o.force, true);
  const auto states = read_states(o.states, c.problem->state_dim(), *c.problem);
  fs::create_directories(c.dir);
  auto os = open_out(c.dir / "zstar.csv");
  os << "index";
  for (int i = 0; i < c.problem->state_dim(); ++i) os << ",x" << i;
  os << ",y,z_star,feasible,iterations,bracket_lo,bracket_hi,non_monotone\n";
  int infeasible = 0;
  for (std::size_t i = 0; i < states.size(); ++i) {
    const auto& [x, y] = states[i];
    const auto sol = algo::bisect_z_star(*c.problem, m.value, m.encoder, x, y, m.encoder.z_min, m.encoder.z_max,
                                         c.cfg.evaluation.tol);
    infeasible += sol.status == algo::ZStatus::Infeasible;
    os << i;
    for (int k = 0; k < x.size(); ++k) os << ',' << num(x[k]);
    os << ',' << augment::as_real(y) << ',' << num(sol.z_star) << ','
       << (sol.status == algo::ZStatus::Feasible ? "true" : "false") << ',' << sol.iterations << ',' << num(sol.lo)
       << ',' << num(sol.hi) << ',' << (sol.non_monotone ? "true" : "false") << '\n';
  }
  std::cout << Json{{"rows", states.size()}, {"infeasible", infeasible}, {"file", (c.dir / "zstar.csv").string()}}.dump()
            << '\n';
  return 0;
}

int cmd_fit_zmap(const Options& o) {
  auto c = load_context(o, false);
  auto m = load_models(c, o.force, true);
  algo::ZFitReport rep;
  const auto& problem = *c.problem;
  auto reg = algo::fit_z_regressor(problem, m.value, m.encoder, [&](Rng& r) { return problem.sample_initial(r); },
                                   c.cfg.zfit, &rep);
  algo::to_checkpoint(reg, c.hash).save((c.dir / "zmap.json").string());
  Json j{{"labelled", rep.labelled},
         {"infeasible", rep.infeasible},
         {"train_mae", rep.train_mae},
         {"heldout_mae", rep.heldout_mae},
         {"train_median_abs_error", rep.train_median_abs_error}};
  auto os = open_out(c.dir / "zmap_report.json");
  os << j.dump(2) << '\n';
  std::cout << j.dump() << '\n';
  return 0;
}

struct Source {
  algo::ZSource fn;
  std::optional<algo::ZRegressor> reg;
};

void make_source(const Context& c, const Models& m, bool force, Source& s) {
  const auto& ev = c.cfg.evaluation;
  if (c.cfg.algorithm != "rcppo" || ev.z_source == "fixed") {
    s.fn = algo::fixed_source(ev.fixed_z);
  } else if (ev.z_source == "regressor") {
    s.reg = algo::zregressor_from_checkpoint(load_checked(c, "zmap.json", force));
    s.fn = algo::regressor_source(*c.problem, *s.reg, m.encoder.z_min, m.encoder.z_max);
  } else {
    s.fn = algo::bisection_source(*c.problem, m.value, m.encoder, m.encoder.z_min, m.encoder.z_max, ev.tol);
  }
}

std::vector<double> parse_list(const std::string& s) {
  std::vector<double> out;
  std::stringstream ss(s);
  std::string cell;
  while (std::getline(ss, cell, ',')) out.push_back(std::stod(cell));
  return out;
}

int cmd_deploy(const Options& o) {
  auto c = load_context(o, false);
  auto m = load_models(c, o.force, true);
  Source src;
  make_source(c, m, o.force, src);
  Vec x0;
  if (!o.x0.empty()) {
    const auto v = parse_list(o.x0);
    if (static_cast<int>(v.size()) != c.problem->state_dim()) throw ConfigError("--x0 has the wrong dimension");
    x0 = Eigen::Map<const Vec>(v.data(), v.size());
  } else {
    Rng rng(c.cfg.evaluation.seed);
    x0 = c.problem->sample_initial(rng);
  }
  auto env = c.problem->clone();
  env->reseed(mix_seed(c.cfg.evaluation.seed, 99));
  const auto d = algo::deploy_policy(*env, m.policy, m.encoder, m.goal, src.fn, x0);
  auto os = open_out(c.dir / "deploy_trajectory.csv");
  algo::write_trajectory_csv(os, *c.problem, d);
  std::cout << Json{{"z0", d.record.z0},
                    {"feasible", d.start.feasible},
                    {"reached", d.record.reached},
                    {"violated", d.record.violated},
                    {"cumulative_cost", d.record.cumulative_cost},
                    {"length", d.record.length}}
                   .dump()
            << '\n';
  return 0;
}

int cmd_evaluate(const Options& o) {
  auto c = load_context(o, false);
  auto m = load_models(c, o.force, true);
  Source src;
  make_source(c, m, o.force, src);
  std::vector<algo::Deployment> keep;
  const auto& ev = c.cfg.evaluation;
  const auto rep = algo::evaluate(*c.problem, m.policy, m.encoder, m.goal, src.fn, ev.episodes, ev.seed,
                                  ev.trajectories > 0 ? &keep : nullptr);
  {
    auto os = open_out(c.dir / "eval_episodes.jsonl");
    rep.write_jsonl(os);
  }
  Json summary = Json::parse(rep.summary_json());
  const auto sound = algo::budget_soundness(rep.records, ev.tol);
  summary["budget_soundness"] = sound ? Json(*sound) : Json();
  summary["z_source"] = c.cfg.algorithm == "rcppo" ? ev.z_source : "none";
  summary["noise_half_width"] = o.noise.value_or(c.cfg.environment.noise.noise_half_width);
  {
    auto os = open_out(c.dir / "eval_summary.json");
    os << summary.dump(2) << '\n';
  }
  if (ev.trajectories > 0) {
    fs::create_directories(c.dir / "trajectories");
    for (int i = 0; i < std::min<int>(ev.trajectories, keep.size()); ++i) {
      char name[64];
      std::snprintf(name, sizeof name, "episode_%04d.csv", i);
      auto os = open_out(c.dir / "trajectories" / name);
      algo::write_trajectory_csv(os, *c.problem, keep[i]);
    }
  }
  std::cout << summary.dump() << '\n';
  return 0;
}

int cmd_gridsearch(const Options& o) {
  auto c = load_context(o, true);
  write_resolved(c);
  const auto& g = c.cfg.gridsearch;
  baselines::GridSearchConfig gc = g.full_grid ? baselines::GridSearchConfig::full_grid() : baselines::GridSearchConfig{};
  if (!g.full_grid) {
    gc.r_goal = g.r_goal;
    gc.p_goal = g.p_goal;
    gc.beta = g.beta;
  }
  gc.base = baseline_config(c.cfg);
  gc.base.ppo.total_steps = g.steps_per_cell;
  gc.eval_episodes = g.eval_episodes;
  gc.eval_seed = c.cfg.evaluation.seed;
  const auto results = baselines::grid_search(*c.problem, gc, [](std::size_t i, const baselines::GridResult& r) {
    std::cerr << "cell " << i << " r_goal=" << r.cell.r_goal << " p_goal=" << r.cell.p_goal << " beta=" << r.cell.beta
              << (r.ok ? "" : " failed: " + r.error) << '\n';
  });
  auto os = open_out(c.dir / "pareto.csv");
  baselines::write_pareto_csv(os, results);
  int front = 0, failed = 0;
  for (const auto& r : results) {
    front += r.on_front;
    failed += !r.ok;
  }
  std::cout << Json{{"cells", results.size()}, {"on_front", front}, {"failed", failed}}.dump() << '\n';
  return 0;
}

int cmd_oracle_check(const Options& o) {
  const auto verdicts = oracle_check(o.fixture, o.seed.value_or(0));
  bool all = true;
  for (const auto& v : verdicts) {
    all = all && v.passed;
    std::cout << Json{{"fixture", v.fixture}, {"property", v.property}, {"passed", v.passed}, {"detail", v.detail}}.dump()
              << '\n';
  }
  return all ? 0 : 1;
}

}  // namespace

int run_cli(int argc, char** argv) {
  CLI::App app{"Budget-conditioned reach-avoid PPO: training, budget extraction, evaluation and oracle checks"};
  app.require_subcommand(1);
  Options o;
  std::uint64_t seed = 0;
  int episodes = 0;
  double tol = 0.0, noise = 0.0;

  auto common = [&](CLI::App* sub) {
    sub->add_option("--config", o.config, "Run configuration (JSON)")->required();
    sub->add_option("--seed", seed, "Override the configured seed");
    sub->add_option("--out", o.out, "Output directory (default: $RCPPO_OUT_ROOT/<env>-<algorithm>-seed<seed>)");
    sub->add_flag("--force", o.force, "Accept checkpoints produced under a different config hash");
  };
  auto* train = app.add_subcommand("train", "Train phase 1 (rcppo) or the Lagrangian baseline");
  common(train);
  auto* finetune = app.add_subcommand("finetune", "Fine-tune the reach value under the deterministic policy");
  common(finetune);
  auto* bisect = app.add_subcommand("bisect", "Solve for the optimal budget at each state of a CSV file");
  common(bisect);
  bisect->add_option("--states", o.states, "CSV with a header and columns x0..xn[,y]")->required();
  bisect->add_option("--tol", tol, "Bisection tolerance");
  auto* fit = app.add_subcommand("fit-zmap", "Fit the state-to-budget regressor");
  common(fit);
  fit->add_option("--tol", tol, "Bisection tolerance for the labels");
  auto* deploy = app.add_subcommand("deploy", "Roll out the deterministic policy from one state");
  common(deploy);
  deploy->add_option("--x0", o.x0, "Comma-separated initial state (default: sampled)");
  deploy->add_option("--z-source", o.z_source, "bisection | regressor | fixed");
  deploy->add_option("--tol", tol, "Bisection tolerance");
  auto* evaluate = app.add_subcommand("evaluate", "Seeded evaluation with per-episode records");
  common(evaluate);
  evaluate->add_option("--episodes", episodes, "Number of evaluation episodes");
  evaluate->add_option("--z-source", o.z_source, "bisection | regressor | fixed");
  evaluate->add_option("--tol", tol, "Bisection tolerance and budget slack");
  evaluate->add_option("--noise", noise, "Uniform control-noise half-width applied at evaluation");
  auto* grid = app.add_subcommand("gridsearch", "Reward-coefficient grid search for the Lagrangian baseline");
  common(grid);
  auto* oracle = app.add_subcommand("oracle-check", "Run the exact oracle property suites");
  oracle->add_option("--fixture", o.fixture, "appendix_f | theorem1 | contraction | bisection | theorem3 | all");
  oracle->add_option("--seed", seed, "Seed for randomised suites");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  }
  for (auto* sub : app.get_subcommands()) {
    if (sub->count("--seed")) o.seed = seed;
    if (sub->get_option_no_throw("--episodes") && sub->count("--episodes")) o.episodes = episodes;
    if (sub->get_option_no_throw("--tol") && sub->count("--tol")) o.tol = tol;
    if (sub->get_option_no_throw("--noise") && sub->count("--noise")) o.noise = noise;
  }

  try {
    if (*train) return cmd_train(o);
    if (*finetune) return cmd_finetune(o);
    if (*bisect) return cmd_bisect(o);
    if (*fit) return cmd_fit_zmap(o);
    if (*deploy) return cmd_deploy(o);
    if (*evaluate) return cmd_evaluate(o);
    if (*grid) return cmd_gridsearch(o);
    if (*oracle) return cmd_oracle_check(o);
  } catch (const ConfigError& e) {
    std::cerr << Json{{"error", "config"}, {"message", e.what()}}.dump() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << Json{{"error", "runtime"}, {"message", e.what()}}.dump() << '\n';
    return 1;
  }
  return 1;
}

}  // namespace rcppo::cli
