// Acceptance runner: one PASS/FAIL line per criterion.  Criteria 7 to 10
// share trained pendulum artifacts cached under the artifact root; a cached
// model is reused only while its config hash matches the shipped config.

#include "rcppo/cli.hpp"

#include "CLI11.hpp"

#include <chrono>
#include <cmath>
#include <fstream>
#include <functional>
#include <iostream>
#include <sstream>

using namespace rcppo;
namespace fs = std::filesystem;
using Json = cli::Json;

namespace {

// Pinned thresholds.
constexpr double kAppendixTol = 0.01;
constexpr double kAppendixReward = 23.33;
constexpr double kGradRelTol = 1e-4;
constexpr double kReachMin = 0.95;
constexpr double kCostRatioMax = 0.7;
constexpr double kBaselineReachMin = 0.9;
constexpr double kSoundnessMin = 0.9;
constexpr double kNoiseHalfWidth = 0.1;
constexpr double kNoiseReachMin = 0.9;
constexpr int kEvalEpisodes = 256;

struct Outcome {
  bool passed = false;
  std::string detail;
};

struct Paths {
  fs::path configs;
  fs::path artifacts;
};

std::string fmt(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.6g", v);
  return buf;
}

std::string fmt(const Json& v) { return v.is_null() ? "null" : fmt(v.get<double>()); }

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

Outcome oracle(const std::string& fixture, double max_seconds) {
  const auto t0 = std::chrono::steady_clock::now();
  const auto verdicts = cli::oracle_check(fixture, 0);
  const double secs = seconds_since(t0);
  Outcome o{secs <= max_seconds, ""};
  for (const auto& v : verdicts) {
    o.passed = o.passed && v.passed;
    if (!v.passed) o.detail += "[" + v.property + ": " + v.detail + "] ";
  }
  o.detail += std::to_string(verdicts.size()) + " properties in " + fmt(secs) + "s (limit " + fmt(max_seconds) + "s)";
  return o;
}

Outcome criterion1() {
  // The counterexample's published reward is checked at the pinned tolerance.
  const auto mdp = envkit::appendix_f_make();
  const auto th = baselines::appendix_f_enumerate(mdp, baselines::AppendixFMode::Thresholded, 20.0);
  Outcome o = oracle("appendix_f", 1.0);
  o.detail = "thresholded X=20 -> p=(" + fmt(th.p_a) + "," + fmt(th.p_b) + ") reward=" + fmt(th.reward) +
             " expected " + fmt(kAppendixReward) + "+-" + fmt(kAppendixTol) + "; " + o.detail;
  return o;
}

// ---------------------------------------------------------------------------

Mat random_mat(Rng& rng, int rows, int cols) {
  Mat m(rows, cols);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = uniform(rng, -1.0, 1.0);
  return m;
}

std::vector<int> sample_coords(Rng& rng, int n, int k) {
  if (n <= k) return {};
  std::vector<int> c(k);
  for (auto& i : c) i = static_cast<int>(rng() % static_cast<unsigned>(n));
  return c;
}

Outcome criterion6() {
  const auto t0 = std::chrono::steady_clock::now();
  double worst = 0.0;
  std::string where;
  auto record = [&](double err, const std::string& head, std::uint64_t seed) {
    if (err > worst) {
      worst = err;
      where = head + " seed " + std::to_string(seed);
    }
  };
  // Pendulum-shaped heads at two widths: the small net is checked on every
  // coordinate, the full-size net on a random subset.
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    for (const std::vector<int>& hidden : {std::vector<int>{16, 16}, std::vector<int>{256, 256}}) {
      Rng rng(seed);
      const int in = 5, batch = 12;
      const Vec low = Vec::Constant(1, -2.0), high = Vec::Constant(1, 2.0);
      approx::GaussianPolicy pol(algo::trunk_spec(in, hidden, 1), low, high);
      pol.initialize(rng, -0.5, 1.0);
      const Mat x = random_mat(rng, in, batch);
      Mat act(1, batch);
      Vec old(batch), adv(batch);
      for (int i = 0; i < batch; ++i) {
        const auto s = pol.sample(x.col(i), rng);
        act(0, i) = s.raw[0];
        old[i] = s.log_prob + uniform(rng, -0.1, 0.1);
        adv[i] = uniform(rng, -1.0, 1.0);
      }
      const auto coords = sample_coords(rng, pol.num_params(), 300);
      // clipping is disabled so the loss is smooth around the probe point
      const double clip = std::numeric_limits<double>::infinity();
      const auto pl = algo::ppo_policy_loss(pol, pol.params(), x, act, old, adv, clip, 0.01);
      auto pf = [&](const Vec& q) { return algo::ppo_policy_loss(pol, q, x, act, old, adv, clip, 0.01).loss; };
      record(approx::check_gradient(pf, pol.params(), pl.grad, 1e-6, coords).relative_error,
             "policy h" + std::to_string(hidden[0]), seed);

      approx::ValueModel val(algo::trunk_spec(in, hidden, 1), 50.0);
      val.initialize(rng);
      Vec tgt(batch);
      for (auto& t : tgt) t = uniform(rng, -60.0, 60.0);
      const auto vl = algo::value_loss(val, val.params(), x, tgt);
      auto vf = [&](const Vec& q) { return algo::value_loss(val, q, x, tgt).loss; };
      record(approx::check_gradient(vf, val.params(), vl.grad, 1e-6, sample_coords(rng, val.num_params(), 300))
                 .relative_error,
             "value h" + std::to_string(hidden[0]), seed);

      // budget regressor head: observation plus the safety flag
      approx::ValueModel zr(algo::trunk_spec(4, {64, 64}, 1), 30.0);
      zr.initialize(rng);
      const Mat xz = random_mat(rng, 4, batch);
      const auto zl = algo::value_loss(zr, zr.params(), xz, tgt);
      auto zf = [&](const Vec& q) { return algo::value_loss(zr, q, xz, tgt).loss; };
      record(approx::check_gradient(zf, zr.params(), zl.grad, 1e-6, sample_coords(rng, zr.num_params(), 300))
                 .relative_error,
             "zmap", seed);
    }
  }
  const double secs = seconds_since(t0);
  return {worst < kGradRelTol && secs < 60.0,
          "worst relative error " + fmt(worst) + " (" + where + ") limit " + fmt(kGradRelTol) + "; " + fmt(secs) + "s"};
}

// ---------------------------------------------------------------------------
// Trained pendulum artifacts

int run(std::vector<std::string> args) {
  std::vector<char*> argv;
  static std::string prog = "rcppo";
  argv.push_back(prog.data());
  for (auto& a : args) argv.push_back(a.data());
  std::cerr << "$ rcppo";
  for (const auto& a : args) std::cerr << ' ' << a;
  std::cerr << '\n';
  return cli::run_cli(static_cast<int>(argv.size()), argv.data());
}

bool fresh(const fs::path& ckpt, const std::string& hash) {
  if (!fs::exists(ckpt)) return false;
  try {
    return approx::Checkpoint::load(ckpt.string()).config_hash == hash;
  } catch (const std::exception&) {
    return false;
  }
}

Json read_json(const fs::path& p) {
  std::ifstream is(p);
  if (!is) throw std::runtime_error("cannot read " + p.string());
  return Json::parse(is);
}

struct Method {
  std::string name;
  fs::path config;
  fs::path dir;
};

Method rcppo_method(const Paths& p) {
  return {"rcppo", p.configs / "pendulum_rcppo.json", p.artifacts / "pendulum_rcppo"};
}
Method baseline_method(const Paths& p) {
  return {"ppo_beta_low", p.configs / "pendulum_ppo_beta_low.json", p.artifacts / "pendulum_ppo_beta_low"};
}

void ensure_trained(const Method& m) {
  const auto hash = cli::config_hash(cli::load_config(m.config));
  const std::string cfg = m.config.string(), out = m.dir.string();
  if (!fresh(m.dir / "policy.json", hash)) {
    fs::remove(m.dir / "value_phase2.json");
    if (run({"train", "--config", cfg, "--out", out}) != 0) throw std::runtime_error("training " + m.name + " failed");
  }
  if (m.name == "rcppo" && !fresh(m.dir / "value_phase2.json", hash))
    if (run({"finetune", "--config", cfg, "--out", out}) != 0) throw std::runtime_error("fine-tuning failed");
}

/// Evaluation summary, cached per noise level next to the checkpoints.
Json evaluation(const Method& m, double noise) {
  ensure_trained(m);
  const fs::path cache = m.dir / ("acceptance_eval_noise" + fmt(noise) + ".json");
  const auto hash = cli::config_hash(cli::load_config(m.config));
  const auto stamp = fs::last_write_time(m.dir / "policy.json");
  if (fs::exists(cache)) {
    const Json j = read_json(cache);
    if (j.value("config_hash", "") == hash && fs::last_write_time(cache) >= stamp) return j;
  }
  std::vector<std::string> args{"evaluate", "--config", m.config.string(), "--out", m.dir.string(), "--episodes",
                                std::to_string(kEvalEpisodes)};
  if (noise > 0.0) {
    args.push_back("--noise");
    args.push_back(fmt(noise));
  }
  if (run(args) != 0) throw std::runtime_error("evaluating " + m.name + " failed");
  Json j = read_json(m.dir / "eval_summary.json");
  j["config_hash"] = hash;
  std::ofstream(cache) << j.dump(2) << '\n';
  return j;
}

bool num(const Json& j) { return j.is_number(); }

Outcome criterion7(const Paths& p) {
  const Json rc = evaluation(rcppo_method(p), 0.0), bl = evaluation(baseline_method(p), 0.0);
  const Json &rr = rc["reach_rate"], &rcost = rc["mean_cost"], &br = bl["reach_rate"], &bcost = bl["mean_cost"];
  const bool reach_ok = num(rr) && rr.get<double>() >= kReachMin;
  const bool base_ok = num(br) && br.get<double>() >= kBaselineReachMin;
  const bool cost_ok = num(rcost) && num(bcost) && rcost.get<double>() <= kCostRatioMax * bcost.get<double>();
  std::string d = "rcppo reach " + fmt(rr) + " (>= " + fmt(kReachMin) + ") cost " + fmt(rcost) + "; ppo_beta_low reach " +
                  fmt(br) + " (>= " + fmt(kBaselineReachMin) + ") cost " + fmt(bcost);
  if (num(rcost) && num(bcost)) d += "; ratio " + fmt(rcost.get<double>() / bcost.get<double>()) + " (<= " + fmt(kCostRatioMax) + ")";
  return {reach_ok && base_ok && cost_ok, d};
}

Outcome criterion8(const Paths& p) {
  const Json rc = evaluation(rcppo_method(p), 0.0);
  const Json& s = rc["budget_soundness"];
  return {num(s) && s.get<double>() >= kSoundnessMin,
          "fraction of reaching episodes with cost <= z0 + tol: " + fmt(s) + " (>= " + fmt(kSoundnessMin) + ")"};
}

Outcome criterion9(const Paths& p) {
  const Json rc = evaluation(rcppo_method(p), 0.0);
  const fs::path cfg = p.configs / "pendulum_gridsearch.json";
  const fs::path dir = p.artifacts / "pendulum_gridsearch";
  const auto hash = cli::config_hash(cli::load_config(cfg));
  bool cached = false;
  if (fs::exists(dir / "pareto.csv") && fs::exists(dir / "config.resolved.json"))
    cached = read_json(dir / "config.resolved.json").value("config_hash", "") == hash;
  if (!cached) {
    fs::remove(dir / "pareto.csv");
    run({"gridsearch", "--config", cfg.string(), "--out", dir.string()});
  }
  Json report;
  report["rcppo"] = {{"reach_rate", rc["reach_rate"]}, {"mean_cost", rc["mean_cost"]}};
  report["cells"] = Json::array();
  bool dominated = false;
  int cells = 0;
  std::string by;
  std::ifstream is(dir / "pareto.csv");
  const double rc_reach = num(rc["reach_rate"]) ? rc["reach_rate"].get<double>() : 0.0;
  const double rc_cost = num(rc["mean_cost"]) ? rc["mean_cost"].get<double>() : std::numeric_limits<double>::infinity();
  std::string line;
  std::getline(is, line);
  while (std::getline(is, line)) {
    std::vector<std::string> f;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) f.push_back(cell);
    f.resize(6);
    ++cells;
    Json row{{"r_goal", std::stod(f[0])}, {"p_goal", std::stod(f[1])}, {"beta", std::stod(f[2])}};
    row["reach_rate"] = f[3].empty() ? Json() : Json(std::stod(f[3]));
    row["mean_cost"] = f[4].empty() ? Json() : Json(std::stod(f[4]));
    const double reach = f[3].empty() ? 0.0 : std::stod(f[3]);
    const double cost = f[4].empty() ? std::numeric_limits<double>::infinity() : std::stod(f[4]);
    row["dominates_rcppo"] = baselines::dominates(reach, cost, rc_reach, rc_cost);
    if (row["dominates_rcppo"].get<bool>()) {
      dominated = true;
      by += "(" + f[0] + "," + f[1] + "," + f[2] + ") ";
    }
    report["cells"].push_back(row);
  }
  const bool ok = cells == 27 && !dominated;
  report["passed"] = ok;
  std::ofstream(p.artifacts / "pareto_report.json") << report.dump(2) << '\n';
  return {ok, "rcppo (" + fmt(rc["reach_rate"]) + ", " + fmt(rc["mean_cost"]) + ") against " + std::to_string(cells) +
                  " cells; " + (dominated ? "dominated by " + by : "not dominated") + "; report " +
                  (p.artifacts / "pareto_report.json").string()};
}

Outcome criterion10(const Paths& p) {
  const Json rc = evaluation(rcppo_method(p), kNoiseHalfWidth), bl = evaluation(baseline_method(p), kNoiseHalfWidth);
  const Json &rr = rc["reach_rate"], &rcost = rc["mean_cost"], &bcost = bl["mean_cost"];
  const bool reach_ok = num(rr) && rr.get<double>() >= kNoiseReachMin;
  const bool lowest = num(rcost) && (!num(bcost) || rcost.get<double>() < bcost.get<double>());
  return {reach_ok && lowest, "noise half-width " + fmt(kNoiseHalfWidth) + ": rcppo reach " + fmt(rr) + " (>= " +
                                  fmt(kNoiseReachMin) + ") cost " + fmt(rcost) + "; ppo_beta_low reach " +
                                  fmt(bl["reach_rate"]) + " cost " + fmt(bcost)};
}

Outcome dispatch(int n, const Paths& p) {
  switch (n) {
    case 1: return criterion1();
    case 2: return oracle("theorem1", 30.0);
    case 3: return oracle("contraction", 10.0);
    case 4: return oracle("bisection", 120.0);
    case 5: return oracle("theorem3", 60.0);
    case 6: return criterion6();
    case 7: return criterion7(p);
    case 8: return criterion8(p);
    case 9: return criterion9(p);
    case 10: return criterion10(p);
  }
  throw std::invalid_argument("criterion must be 1..10");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Acceptance criteria runner"};
  std::string which = "all";
  Paths paths{RCPPO_CONFIG_DIR, RCPPO_ARTIFACT_DIR};
  app.add_option("--criterion", which, "1..10 or all");
  app.add_option("--configs", paths.configs, "Directory holding the pendulum configs");
  app.add_option("--artifacts", paths.artifacts, "Cache directory for trained models");
  CLI11_PARSE(app, argc, argv);

  std::vector<int> todo;
  if (which == "all") {
    for (int i = 1; i <= 10; ++i) todo.push_back(i);
  } else {
    todo.push_back(std::stoi(which));
  }
  fs::create_directories(paths.artifacts);
  bool all = true;
  for (int n : todo) {
    Outcome o;
    try {
      o = dispatch(n, paths);
    } catch (const std::exception& e) {
      o = {false, std::string("error: ") + e.what()};
    }
    all = all && o.passed;
    std::cout << "criterion " << n << ": " << (o.passed ? "PASS" : "FAIL") << " - " << o.detail << std::endl;
  }
  return all ? 0 : 1;
}
