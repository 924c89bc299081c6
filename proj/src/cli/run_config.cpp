#include "rcppo/cli.hpp"

#include <cmath>
#include <cstdlib>
#include <fstream>
#include <set>

namespace rcppo::cli {

namespace {

// Walks one JSON object, remembering which keys were consumed so that
// leftovers can be reported as unknown fields.
class Section {
 public:
  Section(const Json& j, std::string path) : j_(j), path_(std::move(path)) {
    if (!j_.is_object()) throw ConfigError("config field '" + display() + "' must be an object");
  }
  ~Section() noexcept(false) {
    if (std::uncaught_exceptions() > 0) return;
    for (auto it = j_.begin(); it != j_.end(); ++it)
      if (!used_.count(it.key())) throw ConfigError("unknown config field '" + field(it.key()) + "'");
  }

  bool has(const std::string& key) const { return j_.contains(key); }

  template <class T>
  void get(const std::string& key, T& out) {
    if (!j_.contains(key)) return;
    used_.insert(key);
    try {
      out = j_.at(key).get<T>();
    } catch (const Json::exception&) {
      throw ConfigError("config field '" + field(key) + "' has the wrong type");
    }
  }

  template <class T>
  void require(const std::string& key, T& out) {
    if (!j_.contains(key)) throw ConfigError("missing required config field '" + field(key) + "'");
    get(key, out);
  }

  /// Reals that may be null (meaning "estimate").
  void get_optional_real(const std::string& key, double& out) {
    if (!j_.contains(key)) return;
    if (j_.at(key).is_null()) {
      used_.insert(key);
      out = std::numeric_limits<double>::quiet_NaN();
      return;
    }
    get(key, out);
  }

  void choice(const std::string& key, std::string& out, const std::vector<std::string>& options, bool required) {
    if (required) require(key, out);
    else get(key, out);
    for (const auto& o : options)
      if (o == out) return;
    std::string list;
    for (const auto& o : options) list += (list.empty() ? "" : ", ") + o;
    throw ConfigError("config field '" + field(key) + "' must be one of {" + list + "}, got '" + out + "'");
  }

  Section sub(const std::string& key) {
    used_.insert(key);
    return Section(j_.at(key), field(key));
  }

  std::string field(const std::string& key) const { return path_.empty() ? key : path_ + "." + key; }

 private:
  std::string display() const { return path_.empty() ? "<root>" : path_; }
  const Json& j_;
  std::string path_;
  std::set<std::string> used_;
};

void check(bool ok, const std::string& field, const std::string& what) {
  if (!ok) throw ConfigError("config field '" + field + "' " + what);
}

std::vector<envkit::GridCell> cells_from(const std::vector<std::array<int, 2>>& v) {
  std::vector<envkit::GridCell> out;
  for (const auto& c : v) out.push_back({c[0], c[1]});
  return out;
}

std::vector<std::array<int, 2>> cells_to(const std::vector<envkit::GridCell>& v) {
  std::vector<std::array<int, 2>> out;
  for (const auto& c : v) out.push_back({c.col, c.row});
  return out;
}

Json real_or_null(double v) { return std::isnan(v) ? Json() : Json(v); }

void parse_ppo(Section s, algo::PpoConfig& p) {
  s.get("clip_eps", p.clip_eps);
  s.get("entropy_coef", p.entropy_coef);
  s.get("epochs", p.epochs);
  s.get("minibatch_size", p.minibatch_size);
  s.get("total_steps", p.total_steps);
  s.get("num_envs", p.num_envs);
  s.get("steps_per_env", p.steps_per_env);
  s.get("lr", p.lr);
  s.get("value_lr", p.value_lr);
  s.get("max_grad_norm", p.max_grad_norm);
  s.get("hidden", p.hidden);
  s.get("init_log_std", p.init_log_std);
}

}  // namespace

RunConfig parse_config(const Json& doc) {
  RunConfig c;
  Section root(doc, "");
  {
    auto env = root.has("environment") ? root.sub("environment") : throw ConfigError("missing required config field 'environment'");
    env.choice("id", c.environment.id, {"pendulum", "windfield", "grid"}, true);
    if (env.has("pendulum")) {
      auto p = env.sub("pendulum");
      auto& pp = c.environment.pendulum;
      p.get("gravity", pp.gravity);
      p.get("mass", pp.mass);
      p.get("length", pp.length);
      p.get("dt", pp.dt);
      p.get("max_speed", pp.max_speed);
      p.get("max_torque", pp.max_torque);
      p.get("horizon", pp.horizon);
      p.get("free_torque", pp.free_torque);
      p.get("torque_cost", pp.torque_cost);
      p.get("goal_weight", pp.goal_weight);
    }
    if (env.has("windfield")) {
      auto w = env.sub("windfield");
      auto& wp = c.environment.windfield;
      w.get("goal", wp.goal);
      w.get("goal_radius", wp.goal_radius);
      w.get("half_extent", wp.half_extent);
      w.get("max_speed", wp.max_speed);
      w.get("dt", wp.dt);
      w.get("horizon", wp.horizon);
      if (w.has("obstacles")) {
        std::vector<std::array<double, 4>> rects;
        w.get("obstacles", rects);
        wp.obstacles.clear();
        for (const auto& r : rects) wp.obstacles.push_back({r[0], r[1], r[2], r[3]});
      }
    }
    if (env.has("grid")) {
      auto g = env.sub("grid");
      auto& e = c.environment;
      g.get("width", e.grid_width);
      g.get("height", e.grid_height);
      if (g.has("hazards")) {
        std::vector<std::array<int, 2>> h;
        g.get("hazards", h);
        e.grid_hazards = cells_from(h);
      }
      if (g.has("goal")) {
        std::array<int, 2> goal{};
        g.get("goal", goal);
        e.grid_goal = {goal[0], goal[1]};
      }
      g.get("step_cost", e.grid_step_cost);
    }
    if (env.has("noise")) {
      auto n = env.sub("noise");
      n.get("half_width", c.environment.noise.noise_half_width);
      n.get("seed", c.environment.noise.seed);
      check(c.environment.noise.noise_half_width >= 0.0, "environment.noise.half_width", "must be nonnegative");
    }
  }
  root.choice("algorithm", c.algorithm, {"rcppo", "ppo_lagrangian"}, true);
  root.get("seed", c.seed);
  root.get("output_dir", c.output_dir);
  if (root.has("ppo")) parse_ppo(root.sub("ppo"), c.phase1.ppo);
  if (root.has("backup")) {
    auto b = root.sub("backup");
    b.get("gamma", c.phase1.ppo.gamma);
    b.get("lambda", c.phase1.ppo.lambda);
  }
  if (root.has("phase1")) {
    auto p = root.sub("phase1");
    p.get("z_min", c.phase1.z_min);
    p.get_optional_real("z_max", c.phase1.z_max);
    p.get_optional_real("big_c", c.phase1.big_c);
    std::string w = "renormalized";
    p.choice("gae_weighting", w, {"renormalized", "literal"}, false);
    c.phase1.weighting = w == "literal" ? reachval::GaeWeighting::Literal : reachval::GaeWeighting::Renormalized;
  }
  if (root.has("phase2")) {
    auto p = root.sub("phase2");
    auto& q = c.phase2;
    p.get("total_steps", q.total_steps);
    p.get("num_envs", q.num_envs);
    p.get("steps_per_env", q.steps_per_env);
    p.get("epochs", q.epochs);
    p.get("minibatch_size", q.minibatch_size);
    p.get("lr", q.lr);
    p.get("lambda", q.lambda);
    p.get_optional_real("gamma", q.gamma);
    p.get("sign_margin", q.sign_margin);
  }
  if (root.has("reward")) {
    auto r = root.sub("reward");
    auto& q = c.reward;
    r.get("beta", q.beta);
    r.get("c_fail", q.c_fail);
    r.get("r_goal", q.r_goal);
    r.get("p_goal", q.p_goal);
    r.get("shaping_enabled", q.shaping_enabled);
    r.get("shaping_k", q.shaping_k);
  }
  if (root.has("zfit")) {
    auto z = root.sub("zfit");
    auto& q = c.zfit;
    z.get("n_samples", q.n_samples);
    z.get("holdout_fraction", q.holdout_fraction);
    z.get("epochs", q.epochs);
    z.get("minibatch_size", q.minibatch_size);
    z.get("lr", q.lr);
    z.get("hidden", q.hidden);
  }
  if (root.has("evaluation")) {
    auto e = root.sub("evaluation");
    auto& q = c.evaluation;
    e.get("episodes", q.episodes);
    e.get("seed", q.seed);
    e.choice("z_source", q.z_source, {"bisection", "regressor", "fixed"}, false);
    e.get("fixed_z", q.fixed_z);
    e.get("tol", q.tol);
    e.get("trajectories", q.trajectories);
    check(q.episodes >= 0, "evaluation.episodes", "must be nonnegative");
    check(q.tol > 0.0, "evaluation.tol", "must be positive");
  }
  if (root.has("gridsearch")) {
    auto g = root.sub("gridsearch");
    auto& q = c.gridsearch;
    g.get("full_grid", q.full_grid);
    g.get("r_goal", q.r_goal);
    g.get("p_goal", q.p_goal);
    g.get("beta", q.beta);
    g.get("steps_per_cell", q.steps_per_cell);
    g.get("eval_episodes", q.eval_episodes);
  }

  c.phase1.ppo.seed = c.seed;
  c.reward.gamma = c.phase1.ppo.gamma;
  c.zfit.tol = c.evaluation.tol;
  try {
    c.phase1.validate();
    c.phase2.validate();
    c.reward.validate();
  } catch (const ContractError& e) {
    throw ConfigError(e.what());
  }
  return c;
}

RunConfig load_config(const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is) throw ConfigError("cannot open config file " + path.string());
  Json doc;
  try {
    doc = Json::parse(is, nullptr, true, true);
  } catch (const Json::exception& e) {
    throw ConfigError("config file " + path.string() + " is not valid JSON: " + e.what());
  }
  return parse_config(doc);
}

Json to_json(const RunConfig& c) {
  const auto& e = c.environment;
  const auto& pp = e.pendulum;
  const auto& wp = e.windfield;
  std::vector<std::array<double, 4>> rects;
  for (const auto& r : wp.obstacles) rects.push_back({r.x_min, r.y_min, r.x_max, r.y_max});
  const auto& p = c.phase1.ppo;
  Json j;
  j["environment"] = {
      {"id", e.id},
      {"pendulum",
       {{"gravity", pp.gravity}, {"mass", pp.mass}, {"length", pp.length}, {"dt", pp.dt}, {"max_speed", pp.max_speed},
        {"max_torque", pp.max_torque}, {"horizon", pp.horizon}, {"free_torque", pp.free_torque},
        {"torque_cost", pp.torque_cost}, {"goal_weight", pp.goal_weight}}},
      {"windfield",
       {{"goal", wp.goal}, {"goal_radius", wp.goal_radius}, {"half_extent", wp.half_extent},
        {"max_speed", wp.max_speed}, {"dt", wp.dt}, {"horizon", wp.horizon}, {"obstacles", rects}}},
      {"grid",
       {{"width", e.grid_width}, {"height", e.grid_height}, {"hazards", cells_to(e.grid_hazards)},
        {"goal", std::array<int, 2>{e.grid_goal.col, e.grid_goal.row}}, {"step_cost", e.grid_step_cost}}},
      {"noise", {{"half_width", e.noise.noise_half_width}, {"seed", e.noise.seed}}}};
  j["algorithm"] = c.algorithm;
  j["seed"] = c.seed;
  j["output_dir"] = c.output_dir;
  j["ppo"] = {{"clip_eps", p.clip_eps},   {"entropy_coef", p.entropy_coef},   {"epochs", p.epochs},
              {"minibatch_size", p.minibatch_size}, {"total_steps", p.total_steps}, {"num_envs", p.num_envs},
              {"steps_per_env", p.steps_per_env},   {"lr", p.lr},                   {"value_lr", p.value_lr},
              {"max_grad_norm", p.max_grad_norm},   {"hidden", p.hidden},           {"init_log_std", p.init_log_std}};
  j["backup"] = {{"gamma", p.gamma}, {"lambda", p.lambda}};
  j["phase1"] = {{"z_min", c.phase1.z_min},
                 {"z_max", real_or_null(c.phase1.z_max)},
                 {"big_c", real_or_null(c.phase1.big_c)},
                 {"gae_weighting", c.phase1.weighting == reachval::GaeWeighting::Literal ? "literal" : "renormalized"}};
  const auto& q = c.phase2;
  j["phase2"] = {{"total_steps", q.total_steps}, {"num_envs", q.num_envs},   {"steps_per_env", q.steps_per_env},
                 {"epochs", q.epochs},           {"minibatch_size", q.minibatch_size}, {"lr", q.lr},
                 {"lambda", q.lambda},           {"gamma", real_or_null(q.gamma)},      {"sign_margin", q.sign_margin}};
  const auto& r = c.reward;
  j["reward"] = {{"beta", r.beta},     {"c_fail", r.c_fail}, {"r_goal", r.r_goal}, {"p_goal", r.p_goal},
                 {"shaping_enabled", r.shaping_enabled}, {"shaping_k", r.shaping_k}};
  const auto& z = c.zfit;
  j["zfit"] = {{"n_samples", z.n_samples}, {"holdout_fraction", z.holdout_fraction}, {"epochs", z.epochs},
               {"minibatch_size", z.minibatch_size}, {"lr", z.lr}, {"hidden", z.hidden}};
  const auto& ev = c.evaluation;
  j["evaluation"] = {{"episodes", ev.episodes}, {"seed", ev.seed},   {"z_source", ev.z_source},
                     {"fixed_z", ev.fixed_z},   {"tol", ev.tol},     {"trajectories", ev.trajectories}};
  const auto& g = c.gridsearch;
  j["gridsearch"] = {{"full_grid", g.full_grid}, {"r_goal", g.r_goal}, {"p_goal", g.p_goal}, {"beta", g.beta},
                     {"steps_per_cell", g.steps_per_cell}, {"eval_episodes", g.eval_episodes}};
  return j;
}

std::string config_hash(const RunConfig& cfg) {
  const Json j = to_json(cfg);
  Json model;
  for (const char* key : {"environment", "algorithm", "seed", "ppo", "backup", "phase1", "reward"}) model[key] = j[key];
  char buf[32];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(fnv1a(model.dump())));
  return buf;
}

envkit::ProblemPtr make_problem(const EnvironmentConfig& env) {
  envkit::ProblemPtr p;
  if (env.id == "pendulum") {
    p = envkit::pendulum_make(env.pendulum);
  } else if (env.id == "windfield") {
    p = envkit::windfield_make(env.windfield);
  } else if (env.id == "grid") {
    auto mdp = envkit::grid_reachavoid_make(env.grid_width, env.grid_height, env.grid_hazards, env.grid_goal,
                                            std::vector<double>(env.grid_width * env.grid_height, env.grid_step_cost));
    const int horizon = envkit::grid_horizon(mdp);
    p = std::make_unique<envkit::TabularProblem>(std::move(mdp), horizon, "grid");
  } else {
    throw ConfigError("config field 'environment.id' must be one of {pendulum, windfield, grid}");
  }
  if (env.noise.noise_half_width > 0.0) p = envkit::wrap_with_control_noise(std::move(p), env.noise);
  return p;
}

baselines::BaselineConfig baseline_config(const RunConfig& cfg) {
  baselines::BaselineConfig b;
  b.ppo = cfg.phase1.ppo;
  b.reward = cfg.reward;
  return b;
}

std::filesystem::path output_root() {
  const char* env = std::getenv("RCPPO_OUT_ROOT");
  return env && *env ? std::filesystem::path(env) : std::filesystem::path("runs");
}

std::filesystem::path resolve_output_dir(const RunConfig& cfg) {
  if (!cfg.output_dir.empty()) return cfg.output_dir;
  return output_root() / (cfg.environment.id + "-" + cfg.algorithm + "-seed" + std::to_string(cfg.seed));
}

}  // namespace rcppo::cli
