#include "rcppo/cli.hpp"

#include <cmath>
#include <limits>
#include <queue>
#include <sstream>

namespace rcppo::cli {

namespace {

using augment::Safety;

std::string fmt(double v) {
  std::ostringstream os;
  os.precision(10);
  os << v;
  return os.str();
}

// ---------------------------------------------------------------------------

std::vector<Verdict> check_appendix_f() {
  namespace af = envkit::appendix_f;
  using baselines::AppendixFMode;
  std::vector<Verdict> out;
  const auto mdp = envkit::appendix_f_make();
  const auto at11 = baselines::appendix_f_expectation(mdp, 1.0, 1.0);
  out.push_back({"appendix_f", "cost_at_(1,1)_is_20", at11.cost == 20.0, "cost=" + fmt(at11.cost)});
  out.push_back({"appendix_f", "reward_at_(1,1)_is_15", at11.reward == 15.0, "reward=" + fmt(at11.reward)});

  bool ok = true;
  std::string detail;
  for (double w : {0.1, 0.5, 0.6, 0.7, 0.9, 1.5, 2.0, 5.0, 100.0}) {
    const auto e = baselines::appendix_f_enumerate(mdp, AppendixFMode::Scalarized, w);
    const double pa = w >= 1.0 ? 1.0 : 0.0, pb = w <= 2.0 / 3.0 ? 1.0 : 0.0;
    if (std::abs(e.p_a - pa) > 1e-3 || std::abs(e.p_b - pb) > 1e-3) {
      ok = false;
      detail += "w=" + fmt(w) + " gave (" + fmt(e.p_a) + "," + fmt(e.p_b) + ") ";
    }
  }
  out.push_back({"appendix_f", "scalarized_optimum_indicator_form", ok, detail});

  const auto th = baselines::appendix_f_enumerate(mdp, AppendixFMode::Thresholded, 20.0);
  out.push_back({"appendix_f", "thresholded_optimum_at_X20_is_(0,2/3)",
                 std::abs(th.p_a) <= 1e-3 && std::abs(th.p_b - 2.0 / 3.0) <= 1e-3,
                 "p=(" + fmt(th.p_a) + "," + fmt(th.p_b) + ")"});
  out.push_back({"appendix_f", "thresholded_reward_at_X20_is_23.33", std::abs(th.reward - 23.33) <= 0.01,
                 "reward=" + fmt(th.reward) + " (closed form " + fmt(af::expected(0.0, 2.0 / 3.0).reward) + ")"});

  bool never = true;
  for (int i = 0; i < 200; ++i) {
    const double w = std::pow(10.0, -3.0 + 6.0 * i / 199.0);
    const auto e = baselines::appendix_f_enumerate(mdp, AppendixFMode::Scalarized, w, 1e-2);
    never = never && !(e.unique && e.p_a == 1.0 && e.p_b == 1.0);
  }
  for (int i = 0; i < 200; ++i) {
    const double x = 10.0 + 15.0 * i / 199.0;
    const auto e = baselines::appendix_f_enumerate(mdp, AppendixFMode::Thresholded, x, 1e-2);
    never = never && !(e.p_a == 1.0 && e.p_b == 1.0);
  }
  out.push_back({"appendix_f", "(1,1)_never_optimal", never, ""});
  return out;
}

// ---------------------------------------------------------------------------

std::vector<envkit::ProblemPtr> theorem1_problems() {
  std::vector<envkit::ProblemPtr> ps;
  ps.push_back(envkit::pendulum_make());
  ps.push_back(envkit::windfield_make(std::array<double, 2>{0.0, 0.0}));
  for (const auto& f : standard_grid_fixtures()) {
    auto mdp = f.mdp;
    const int h = envkit::grid_horizon(mdp);
    ps.push_back(std::make_unique<envkit::TabularProblem>(std::move(mdp), h, f.name));
  }
  return ps;
}

std::vector<Verdict> check_theorem1(std::uint64_t seed) {
  auto problems = theorem1_problems();
  Rng rng(seed);
  std::vector<augment::AugmentedGoalParams> goal_params;
  for (std::size_t i = 0; i < problems.size(); ++i)
    goal_params.push_back(augment::estimate_goal_params(*problems[i], 2000, seed + i));
  int rollouts = 0, counterexamples = 0, positives = 0;
  constexpr int kRollouts = 10000;
  for (int r = 0; r < kRollouts; ++r) {
    auto& p = *problems[r % problems.size()];
    const auto& params = goal_params[r % problems.size()];
    Vec x0 = p.sample_state(rng);
    // budgets straddle the realised cost so both outcomes occur
    const int steps = 1 + static_cast<int>(rng() % static_cast<unsigned>(std::min(60, p.horizon_max())));
    augment::AugmentedTrajectory traj;
    traj.z0 = 0.0;
    std::vector<Vec> us;
    double total = 0.0;
    {
      auto probe = p.clone();
      Vec x = x0;
      for (int t = 0; t < steps; ++t) {
        Vec u(p.action_dim());
        for (int j = 0; j < u.size(); ++j) u[j] = uniform(rng, p.action_low()[j], p.action_high()[j]);
        auto tr = probe->transition(x, u);
        total += tr.cost;
        us.push_back(u);
        x = tr.next;
      }
    }
    const double z0 = std::floor(uniform(rng, -0.25, 1.25) * (total + 1.0));
    traj.z0 = z0;
    auto s = augment::augmented_reset(p, x0, z0);
    traj.states.push_back(s);
    for (const auto& u : us) {
      auto st = augment::augmented_step(p, s, u);
      traj.actions.push_back(st.executed);
      traj.costs.push_back(st.cost);
      s = st.next;
      traj.states.push_back(s);
    }
    for (std::ptrdiff_t T = 0; T < static_cast<std::ptrdiff_t>(traj.states.size()); ++T) {
      const auto c = augment::theorem1_predicate(p, traj, params, T);
      counterexamples += c.lhs != c.rhs;
      positives += c.lhs;
    }
    ++rollouts;
  }
  return {{"theorem1", "equivalence_over_10000_rollouts", counterexamples == 0,
           "rollouts=" + std::to_string(rollouts) + " counterexamples=" + std::to_string(counterexamples) +
               " positive_steps=" + std::to_string(positives)}};
}

// ---------------------------------------------------------------------------

envkit::TabularMDP random_mdp(Rng& rng, int n_states, int n_actions) {
  envkit::TabularMDP m;
  m.num_states = n_states;
  m.num_actions = n_actions;
  m.next.resize(n_states * n_actions);
  m.cost.resize(n_states * n_actions);
  m.reward.assign(n_states * n_actions, 0.0);
  m.goal.assign(n_states, 0);
  m.avoid.assign(n_states, 0);
  m.goal_margin.resize(n_states);
  m.initial.assign(n_states, 1.0 / n_states);
  for (auto& s : m.next) s = static_cast<int>(rng() % n_states);
  for (auto& c : m.cost) c = std::floor(uniform(rng, 0.0, 4.0));
  for (int s = 0; s < n_states; ++s) {
    const double u = uniform(rng, 0.0, 1.0);
    if (u < 0.2) m.goal[s] = 1;
    else if (u < 0.35) m.avoid[s] = 1;
    m.goal_margin[s] = m.goal[s] ? envkit::kGoalPlateau : uniform(rng, 0.5, 20.0);
  }
  return m;
}

std::vector<Verdict> check_contraction(std::uint64_t seed) {
  Rng rng(seed);
  int violations = 0;
  double worst = 0.0;
  constexpr double gamma = 0.9;
  for (int trial = 0; trial < 100; ++trial) {
    const auto mdp = random_mdp(rng, 3 + static_cast<int>(rng() % 10), 2 + static_cast<int>(rng() % 3));
    reachval::AugmentedTabular aug(mdp, {-2.0, 1.0, 8}, {25.0});
    std::vector<double> v1(aug.size()), v2(aug.size());
    for (int i = 0; i < aug.size(); ++i) {
      v1[i] = uniform(rng, -400.0, 400.0);
      v2[i] = uniform(rng, -400.0, 400.0);
    }
    std::vector<int> pol(aug.size());
    for (auto& a : pol) a = static_cast<int>(rng() % mdp.num_actions);
    for (int mode = 0; mode < 2; ++mode) {
      reachval::TabularPolicy policy;
      if (mode == 1) policy = [&pol](int i) { return pol[i]; };
      const auto t1 = reachval::apply_backup(aug, v1, policy, gamma);
      const auto t2 = reachval::apply_backup(aug, v2, policy, gamma);
      double num = 0.0, den = 0.0;
      for (int i = 0; i < aug.size(); ++i) {
        num = std::max(num, std::abs(t1[i] - t2[i]));
        den = std::max(den, std::abs(v1[i] - v2[i]));
      }
      const double modulus = den > 0.0 ? num / den : 0.0;
      worst = std::max(worst, modulus);
      if (modulus > gamma + 1e-12) ++violations;
    }
  }
  return {{"contraction", "sup_norm_modulus_at_most_gamma", violations == 0,
           "trials=100 worst_modulus=" + fmt(worst) + " gamma=" + fmt(gamma)}};
}

// ---------------------------------------------------------------------------

// Budget grid offset by half a cell from the integer costs of the fixtures.
reachval::ZGrid fixture_grid(const envkit::TabularMDP& mdp) {
  double worst = 0.0;
  for (int s = 0; s < mdp.num_states; ++s)
    if (auto c = min_safe_path_cost(mdp, s)) worst = std::max(worst, *c);
  const double spacing = 0.5;
  const double z_lo = -1.25;
  const int count = static_cast<int>(std::ceil((worst + 4.0 - z_lo) / spacing)) + 1;
  return {z_lo, spacing, count};
}

int fixture_horizon(const envkit::TabularMDP& mdp) { return mdp.num_states; }

double fixture_gamma(const reachval::AugmentedTabular& aug, int horizon) {
  const double lo = reachval::theorem3_min_gamma(aug.max_ghat(), horizon, 0.5 * aug.grid().spacing);
  return lo + 0.5 * (1.0 - lo);
}

std::vector<Verdict> check_bisection() {
  std::vector<Verdict> out;
  for (const auto& f : standard_grid_fixtures()) {
    const auto grid = fixture_grid(f.mdp);
    reachval::AugmentedTabular aug(f.mdp, grid, {augment::estimate_goal_params(
                                                     envkit::TabularProblem(f.mdp, 1), 500, 3).big_c});
    reachval::ValueIterationOptions opt;
    opt.gamma = fixture_gamma(aug, fixture_horizon(f.mdp));
    opt.tol = 1e-9;
    opt.max_sweeps = 2'000'000;
    const auto table = reachval::tabular_value_iteration(aug, {}, opt);
    int checked = 0, bad = 0;
    std::string detail;
    for (int s = 0; s < f.mdp.num_states; ++s) {
      if (f.mdp.goal[s]) continue;
      const auto truth = min_safe_path_cost(f.mdp, s);
      auto v = [&](double z) { return table.values[aug.start(s, z)]; };
      const auto sol = algo::bisect_z_star(v, grid.z_lo, grid.z_hi(), 0.25 * grid.spacing);
      ++checked;
      const bool ok = truth ? (sol.status == algo::ZStatus::Feasible && std::abs(sol.z_star - *truth) <= grid.spacing)
                            : sol.status == algo::ZStatus::Infeasible;
      if (!ok) {
        ++bad;
        if (detail.size() < 200)
          detail += "s=" + std::to_string(s) + " z*=" + fmt(sol.z_star) + " truth=" + (truth ? fmt(*truth) : "none") + " ";
      }
    }
    out.push_back({"bisection", f.name, bad == 0 && table.converged,
                   "starts=" + std::to_string(checked) + " mismatches=" + std::to_string(bad) +
                       " sweeps=" + std::to_string(table.sweeps) + " " + detail});
  }
  return out;
}

// ---------------------------------------------------------------------------

std::vector<Verdict> check_theorem3(std::uint64_t seed) {
  std::vector<Verdict> out;
  Rng rng(seed);
  for (const auto& f : standard_grid_fixtures()) {
    envkit::TabularProblem tp(f.mdp, 1);
    const auto grid = fixture_grid(f.mdp);
    reachval::AugmentedTabular aug(f.mdp, grid, {augment::estimate_goal_params(tp, 500, 3).big_c});
    const int horizon = fixture_horizon(f.mdp);
    reachval::ValueIterationOptions opt;
    opt.gamma = fixture_gamma(aug, horizon);
    opt.tol = 1e-9;
    opt.max_sweeps = 2'000'000;
    int reach_checked = 0, noreach_checked = 0, failures = 0;
    for (int trial = 0; trial < 20; ++trial) {
      const double greedy_share = uniform(rng, 0.3, 1.0);
      std::vector<int> per_state(f.mdp.num_states);
      for (int s = 0; s < f.mdp.num_states; ++s) {
        int best = static_cast<int>(rng() % f.mdp.num_actions);
        if (uniform(rng, 0.0, 1.0) < greedy_share) {
          double bd = std::numeric_limits<double>::infinity();
          for (int a = 0; a < f.mdp.num_actions; ++a) {
            const double d = tp.goal_distance(Vec::Constant(1, f.mdp.successor(s, a)));
            if (d < bd) {
              bd = d;
              best = a;
            }
          }
        }
        per_state[s] = best;
      }
      reachval::TabularPolicy pol = [&](int i) { return per_state[aug.state_of(i)]; };
      const auto table = reachval::tabular_value_iteration(aug, pol, opt);
      for (int s = 0; s < f.mdp.num_states; ++s) {
        if (f.mdp.goal[s]) continue;
        for (int k = 0; k < grid.count; k += 3) {
          const int start = aug.start(s, grid.at(k));
          // follow the deterministic augmented chain until it enters the goal or repeats
          int i = start, t = 0, reach_t = -1;
          std::vector<char> seen(aug.size(), 0);
          while (!seen[i]) {
            if (aug.in_goal(i)) {
              reach_t = t;
              break;
            }
            seen[i] = 1;
            i = aug.successor(i, pol(i));
            ++t;
          }
          const double v = table.values[start];
          if (reach_t >= 0 && reach_t <= horizon) {
            ++reach_checked;
            failures += !(v < 0.0);
          } else if (reach_t < 0) {
            ++noreach_checked;
            failures += !(v > 0.0);
          }
        }
      }
    }
    out.push_back({"theorem3", f.name, failures == 0 && reach_checked > 0 && noreach_checked > 0,
                   "reaching=" + std::to_string(reach_checked) + " non_reaching=" + std::to_string(noreach_checked) +
                       " failures=" + std::to_string(failures) + " gamma=" + fmt(opt.gamma)});
  }
  return out;
}

}  // namespace

std::vector<GridFixture> standard_grid_fixtures() {
  using envkit::GridCell;
  std::vector<GridFixture> f;
  f.push_back({"grid5_diagonal", envkit::grid_reachavoid_make(5, 5, {{1, 1}, {2, 2}, {3, 3}}, {4, 4},
                                                               std::vector<double>(25, 1.0))});
  f.push_back({"grid6x4_wall", envkit::grid_reachavoid_make(6, 4, {{2, 0}, {2, 1}, {2, 2}}, {5, 0},
                                                             std::vector<double>(24, 1.0))});
  std::vector<double> costs7(49);
  for (int r = 0; r < 7; ++r)
    for (int c = 0; c < 7; ++c) costs7[r * 7 + c] = r < 3 ? 3.0 : 1.0;
  f.push_back({"grid7_expensive_rows", envkit::grid_reachavoid_make(7, 7, {{3, 3}, {4, 3}}, {6, 0}, costs7)});
  std::vector<double> costs8(64 * 4);
  for (int s = 0; s < 64; ++s)
    for (int a = 0; a < 4; ++a) costs8[s * 4 + a] = (a == envkit::kRight) ? 2.0 : 1.0;
  f.push_back({"grid8_directional", envkit::grid_reachavoid_make(8, 8, {{5, 5}, {6, 2}, {1, 6}}, {7, 7}, costs8)});
  std::vector<double> costs10(100);
  for (int s = 0; s < 100; ++s) costs10[s] = 1.0 + (s % 3 == 0 ? 1.0 : 0.0);
  f.push_back({"grid10_mixed", envkit::grid_reachavoid_make(10, 10, {{4, 0}, {4, 1}, {4, 2}}, {9, 0}, costs10)});
  return f;
}

std::optional<double> min_safe_path_cost(const envkit::TabularMDP& mdp, int start) {
  if (mdp.avoid[start]) return std::nullopt;
  std::vector<double> dist(mdp.num_states, std::numeric_limits<double>::infinity());
  using Item = std::pair<double, int>;
  std::priority_queue<Item, std::vector<Item>, std::greater<>> pq;
  dist[start] = 0.0;
  pq.push({0.0, start});
  while (!pq.empty()) {
    auto [d, s] = pq.top();
    pq.pop();
    if (d > dist[s]) continue;
    if (mdp.goal[s]) return d;
    for (int a = 0; a < mdp.num_actions; ++a) {
      const int s2 = mdp.successor(s, a);
      if (mdp.avoid[s2]) continue;
      const double nd = d + mdp.step_cost(s, a);
      if (nd < dist[s2]) {
        dist[s2] = nd;
        pq.push({nd, s2});
      }
    }
  }
  return std::nullopt;
}

std::vector<std::string> oracle_fixtures() { return {"appendix_f", "theorem1", "contraction", "bisection", "theorem3"}; }

std::vector<Verdict> oracle_check(const std::string& fixture, std::uint64_t seed) {
  if (fixture == "all") {
    std::vector<Verdict> all;
    for (const auto& f : oracle_fixtures()) {
      auto v = oracle_check(f, seed);
      all.insert(all.end(), v.begin(), v.end());
    }
    return all;
  }
  if (fixture == "appendix_f") return check_appendix_f();
  if (fixture == "theorem1") return check_theorem1(seed);
  if (fixture == "contraction") return check_contraction(seed);
  if (fixture == "bisection") return check_bisection();
  if (fixture == "theorem3") return check_theorem3(seed);
  std::string list;
  for (const auto& f : oracle_fixtures()) list += f + ", ";
  throw ContractError("unknown oracle fixture '" + fixture + "'; choose one of {" + list + "all}");
}

}  // namespace rcppo::cli
