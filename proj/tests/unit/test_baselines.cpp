#include "doctest.h"

#include "rcppo/baselines.hpp"

#include <cmath>
#include <set>
#include <sstream>

using namespace rcppo;
using namespace rcppo::baselines;
using doctest::Approx;

namespace {

Vec cell(int s) { return Vec::Constant(1, s); }

// 4x4 grid with one hazard at (1, 2) and the goal at (3, 3).
envkit::TabularProblem grid4() {
  return envkit::TabularProblem(
      envkit::grid_reachavoid_make(4, 4, {{1, 2}}, {3, 3}, std::vector<double>(16, 1.0)), 32);
}

// Undiscounted tabular Q under the Lagrangian reward; the goal is terminal.
std::vector<double> solve_q(const envkit::TabularProblem& p, const LagrangianRewardConfig& cfg) {
  const auto& m = p.mdp();
  std::vector<double> v(m.num_states, 0.0), q(m.num_states * m.num_actions, 0.0);
  for (int sweep = 0; sweep < 5000; ++sweep) {
    for (int s = 0; s < m.num_states; ++s) {
      if (m.goal[s]) continue;
      for (int a = 0; a < m.num_actions; ++a) {
        const int n = m.successor(s, a);
        q[m.idx(s, a)] = lagrangian_reward(p, cell(s), m.step_cost(s, a), cell(n), cfg) + (m.goal[n] ? 0.0 : v[n]);
      }
    }
    for (int s = 0; s < m.num_states; ++s) {
      if (m.goal[s]) continue;
      double best = -1e300;
      for (int a = 0; a < m.num_actions; ++a) best = std::max(best, q[m.idx(s, a)]);
      v[s] = best;
    }
  }
  return q;
}

std::set<int> argmax_set(const std::vector<double>& q, int s, int na) {
  double best = -1e300;
  for (int a = 0; a < na; ++a) best = std::max(best, q[s * na + a]);
  std::set<int> out;
  for (int a = 0; a < na; ++a)
    if (q[s * na + a] >= best - 1e-9) out.insert(a);
  return out;
}

}  // namespace

TEST_CASE("lagrangian reward examples") {
  auto p = grid4();
  LagrangianRewardConfig cfg;
  const int hazard = envkit::grid_index(p.mdp(), {1, 2});
  const int goal = envkit::grid_index(p.mdp(), {3, 3});
  CHECK(lagrangian_reward(p, cell(0), 2.0, cell(1), cfg) == Approx(-0.2).epsilon(1e-12));
  CHECK(lagrangian_reward(p, cell(goal - 1), 0.0, cell(goal), cfg) == 20.0);
  cfg.beta = kBetaHigh;
  CHECK(lagrangian_reward(p, cell(hazard - 1), 1.0, cell(hazard), cfg) == -210.0);
  cfg.beta = 0.0;
  cfg.p_goal = 3.0;
  CHECK(lagrangian_reward(p, cell(0), 1.0, cell(1), cfg) == -3.0);
  CHECK(kBetaLow == 0.1);
}

TEST_CASE("potential shaping") {
  auto p = grid4();
  LagrangianRewardConfig cfg;
  CHECK(potential_phi(p, cell(0), cfg) == 0.0);
  cfg.shaping_enabled = true;
  cfg.shaping_k = 2.0;
  const int goal = envkit::grid_index(p.mdp(), {3, 3});
  CHECK(potential_phi(p, cell(goal), cfg) == 0.0);
  CHECK(potential_phi(p, cell(0), cfg) == -12.0);

  SUBCASE("telescopes over an episode at unit discount") {
    cfg.gamma = 1.0;
    LagrangianRewardConfig plain = cfg;
    plain.shaping_enabled = false;
    Rng rng(1);
    for (int ep = 0; ep < 50; ++ep) {
      int s = 0;
      double shaped = 0.0, base = 0.0;
      const int x0 = s;
      for (int t = 0; t < 20; ++t) {
        const int a = std::uniform_int_distribution<int>(0, 3)(rng);
        const int n = p.mdp().successor(s, a);
        shaped += lagrangian_reward(p, cell(s), 1.0, cell(n), cfg);
        base += lagrangian_reward(p, cell(s), 1.0, cell(n), plain);
        s = n;
      }
      REQUIRE(shaped - base == Approx(potential_phi(p, cell(s), cfg) - potential_phi(p, cell(x0), cfg)));
    }
  }
  SUBCASE("optimal tabular policy is unchanged") {
    cfg.gamma = 1.0;
    LagrangianRewardConfig plain = cfg;
    plain.shaping_enabled = false;
    const auto q0 = solve_q(p, plain), q1 = solve_q(p, cfg);
    for (int s = 0; s < p.mdp().num_states; ++s) {
      if (p.mdp().goal[s]) continue;
      REQUIRE(argmax_set(q0, s, 4) == argmax_set(q1, s, 4));
    }
  }
}

TEST_CASE("standard advantages") {
  algo::RolloutBatch b;
  b.steps = 5;
  b.values.resize(5);
  b.values << 1.0, 2.0, 3.0, 4.0, 5.0;
  algo::Segment s1;
  s1.begin = 0;
  s1.end = 2;
  s1.kind = algo::TerminalKind::Reached;
  s1.bootstrap_value = 99.0;  // ignored: goal entry is terminal
  algo::Segment s2;
  s2.begin = 2;
  s2.end = 5;
  s2.kind = algo::TerminalKind::Cut;
  s2.bootstrap_value = 6.0;
  b.segments = {s1, s2};
  Vec r(5);
  r << 0.5, -1.0, 2.0, 0.0, 1.0;
  const double g = 0.9, l = 0.8;
  Vec adv, tgt;
  standard_advantages(b, r, g, l, adv, tgt);
  const double d1 = -1.0 + 0 - 2.0, d0 = 0.5 + g * 2.0 - 1.0;
  CHECK(adv[1] == Approx(d1));
  CHECK(adv[0] == Approx(d0 + g * l * d1));
  const double e4 = 1.0 + g * 6.0 - 5.0, e3 = 0.0 + g * 5.0 - 4.0, e2 = 2.0 + g * 4.0 - 3.0;
  CHECK(adv[4] == Approx(e4));
  CHECK(adv[3] == Approx(e3 + g * l * e4));
  CHECK(adv[2] == Approx(e2 + g * l * (e3 + g * l * e4)));
  for (int i = 0; i < 5; ++i) CHECK(tgt[i] == Approx(adv[i] + b.values[i]));
}

TEST_CASE("grid search cells and pareto front") {
  GridSearchConfig small;
  CHECK(small.cells().size() == 27);
  CHECK(GridSearchConfig::full_grid().cells().size() == 75);

  CHECK(dominates(0.9, 10.0, 0.8, 20.0));
  CHECK(dominates(0.9, 10.0, 0.9, 20.0));
  CHECK_FALSE(dominates(0.9, 10.0, 0.9, 10.0));
  CHECK_FALSE(dominates(0.9, 30.0, 0.8, 20.0));

  std::vector<GridResult> rs(5);
  rs[0].ok = true, rs[0].reach_rate = 0.9, rs[0].mean_cost = 50.0;
  rs[1].ok = true, rs[1].reach_rate = 0.8, rs[1].mean_cost = 60.0;  // dominated by 0
  rs[2].ok = true, rs[2].reach_rate = 0.5, rs[2].mean_cost = 10.0;
  rs[3].ok = true, rs[3].reach_rate = 0.0;                            // no reaching episodes
  rs[4].ok = false, rs[4].error = "diverged";
  mark_pareto_front(rs);
  CHECK(rs[0].on_front);
  CHECK_FALSE(rs[1].on_front);
  CHECK(rs[2].on_front);
  CHECK_FALSE(rs[3].on_front);
  CHECK_FALSE(rs[4].on_front);

  std::ostringstream os;
  write_pareto_csv(os, rs);
  const std::string csv = os.str();
  CHECK(csv.rfind("r_goal,p_goal,beta,reach_rate,mean_cost,on_front", 0) == 0);
  CHECK(std::count(csv.begin(), csv.end(), '\n') == 6);
}

TEST_CASE("two-state counterexample solvers") {
  const auto mdp = envkit::appendix_f_make();
  const auto o = appendix_f_expectation(mdp, 1.0, 1.0);
  CHECK(o.cost == 20.0);
  CHECK(o.reward == 15.0);
  for (double pa : {0.0, 0.3, 1.0})
    for (double pb : {0.0, 0.6, 1.0}) {
      const auto t = appendix_f_expectation(mdp, pa, pb);
      const auto c = envkit::appendix_f::expected(pa, pb);
      CHECK(t.reward == Approx(c.reward).epsilon(1e-14));
      CHECK(t.cost == Approx(c.cost).epsilon(1e-14));
    }

  const auto w2 = appendix_f_analytic(AppendixFMode::Scalarized, 2.0);
  CHECK(w2.p_a == 1.0);
  CHECK(w2.p_b == 0.0);
  for (double w : {0.01, 0.5, 0.7, 0.9, 1.5, 10.0}) {
    const auto a = appendix_f_analytic(AppendixFMode::Scalarized, w);
    const auto e = appendix_f_enumerate(mdp, AppendixFMode::Scalarized, w, 1e-2);
    CHECK(a.p_a == (w >= 1.0 ? 1.0 : 0.0));
    CHECK(a.p_b == (w <= 2.0 / 3.0 ? 1.0 : 0.0));
    CHECK(std::abs(e.p_a - a.p_a) <= 1e-2);
    CHECK(std::abs(e.p_b - a.p_b) <= 1e-2);
  }

  const auto x20 = appendix_f_analytic(AppendixFMode::Thresholded, 20.0);
  CHECK(x20.p_a == 0.0);
  CHECK(x20.p_b == Approx(2.0 / 3.0).epsilon(1e-15));
  CHECK(x20.cost == Approx(20.0).epsilon(1e-12));
  // Follows from the tables: 0.5 * 20 + 0.5 * (2/3) * 20.
  CHECK(x20.reward == Approx(50.0 / 3.0).epsilon(1e-12));
  const auto e20 = appendix_f_enumerate(mdp, AppendixFMode::Thresholded, 20.0, 1e-3);
  CHECK(std::abs(e20.p_a - 0.0) <= 1e-3 + 1e-12);
  CHECK(std::abs(e20.p_b - 2.0 / 3.0) <= 1e-3);
  CHECK(e20.cost <= 20.0 + 1e-12);

  CHECK_FALSE(appendix_f_analytic(AppendixFMode::Thresholded, 4.0).feasible);
  CHECK_FALSE(appendix_f_enumerate(mdp, AppendixFMode::Thresholded, 4.0, 1e-2).feasible);
  const auto x7 = appendix_f_analytic(AppendixFMode::Thresholded, 7.0);
  CHECK(x7.p_a == Approx(0.6));
  CHECK(x7.cost == Approx(7.0));
}

TEST_CASE("baseline training runs and is reproducible") {
  auto p = grid4();
  BaselineConfig cfg;
  cfg.ppo.hidden = {16, 16};
  cfg.ppo.total_steps = 1024;
  cfg.ppo.num_envs = 4;
  cfg.ppo.steps_per_env = 64;
  cfg.ppo.minibatch_size = 64;
  cfg.ppo.epochs = 2;
  cfg.ppo.seed = 5;
  const auto a = train_ppo_baseline(p, cfg);
  const auto b = train_ppo_baseline(p, cfg);
  CHECK(a.log.size() == 4);
  CHECK(a.encoder.dim() == p.observation_dim());
  CHECK_FALSE(a.encoder.with_budget);
  CHECK(a.policy.params() == b.policy.params());
  std::ostringstream la, lb;
  algo::write_log_csv(la, a.log);
  algo::write_log_csv(lb, b.log);
  CHECK(la.str() == lb.str());
}
