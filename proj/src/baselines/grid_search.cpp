#include "rcppo/baselines.hpp"

#include <cmath>
#include <limits>
#include <ostream>

namespace rcppo::baselines {

GridSearchConfig GridSearchConfig::full_grid() {
  GridSearchConfig c;
  c.r_goal = {2.0, 20.0, 200.0, 2000.0, 20000.0};
  c.p_goal = {1.0, 10.0, 100.0, 1000.0, 10000.0};
  c.beta = {0.1, 1.0, 10.0};
  return c;
}

std::vector<GridCell> GridSearchConfig::cells() const {
  std::vector<GridCell> out;
  for (double r : r_goal)
    for (double p : p_goal)
      for (double b : beta) out.push_back({r, p, b});
  return out;
}

bool dominates(double reach_a, double cost_a, double reach_b, double cost_b) {
  return reach_a >= reach_b && cost_a <= cost_b && (reach_a > reach_b || cost_a < cost_b);
}

namespace {
double reach_of(const GridResult& r) { return r.reach_rate.value_or(0.0); }
double cost_of(const GridResult& r) { return r.mean_cost.value_or(std::numeric_limits<double>::infinity()); }
}  // namespace

void mark_pareto_front(std::vector<GridResult>& results) {
  for (auto& a : results) {
    a.on_front = a.ok;
    if (!a.ok) continue;
    for (const auto& b : results)
      if (b.ok && dominates(reach_of(b), cost_of(b), reach_of(a), cost_of(a))) {
        a.on_front = false;
        break;
      }
  }
}

std::vector<GridResult> grid_search(const envkit::ReachAvoidProblem& problem, const GridSearchConfig& cfg,
                                    const CellProgressFn& progress) {
  std::vector<GridResult> results;
  const auto cells = cfg.cells();
  for (std::size_t i = 0; i < cells.size(); ++i) {
    GridResult r;
    r.cell = cells[i];
    try {
      BaselineConfig bc = cfg.base;
      bc.reward.r_goal = cells[i].r_goal;
      bc.reward.p_goal = cells[i].p_goal;
      bc.reward.beta = cells[i].beta;
      bc.ppo.seed = mix_seed(cfg.base.ppo.seed, 100 + i);
      const auto m = train_ppo_baseline(problem, bc);
      const auto rep = algo::evaluate(problem, m.policy, m.encoder, m.goal, algo::fixed_source(0.0),
                                      cfg.eval_episodes, cfg.eval_seed);
      r.reach_rate = rep.reach_rate;
      r.mean_cost = rep.mean_cost;
      r.ok = true;
    } catch (const std::exception& e) {
      r.error = e.what();
    }
    results.push_back(r);
    if (progress) progress(i, results.back());
  }
  mark_pareto_front(results);
  return results;
}

void write_pareto_csv(std::ostream& os, const std::vector<GridResult>& results) {
  os << "r_goal,p_goal,beta,reach_rate,mean_cost,on_front\n";
  char buf[64];
  auto num = [&](const std::optional<double>& v) {
    if (!v) return std::string();
    std::snprintf(buf, sizeof buf, "%.10g", *v);
    return std::string(buf);
  };
  for (const auto& r : results)
    os << num(r.cell.r_goal) << ',' << num(r.cell.p_goal) << ',' << num(r.cell.beta) << ',' << num(r.reach_rate)
       << ',' << num(r.mean_cost) << ',' << (r.on_front ? "true" : "false") << '\n';
}

}  // namespace rcppo::baselines
