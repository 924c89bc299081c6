#include "rcppo/baselines.hpp"

#include <cmath>

namespace rcppo::baselines {

void LagrangianRewardConfig::validate() const {
  if (!(beta >= 0.0)) throw ContractError("beta must be nonnegative");
  if (!(p_goal >= 0.0)) throw ContractError("p_goal must be nonnegative");
  if (!std::isfinite(c_fail) || !std::isfinite(r_goal)) throw ContractError("reward weights must be finite");
  if (!(gamma > 0.0 && gamma <= 1.0)) throw ContractError("shaping gamma must lie in (0, 1]");
  if (!(shaping_k >= 0.0)) throw ContractError("shaping_k must be nonnegative");
}

double potential_phi(const envkit::ReachAvoidProblem& problem, const Vec& x, const LagrangianRewardConfig& cfg) {
  if (!cfg.shaping_enabled) return 0.0;
  return -cfg.shaping_k * problem.goal_distance(x);
}

double lagrangian_reward(const envkit::ReachAvoidProblem& problem, const Vec& x, double step_cost, const Vec& x_next,
                         const LagrangianRewardConfig& cfg) {
  const bool goal = problem.in_goal(x_next);
  const bool fail = problem.in_avoid(x_next);
  double r = goal ? cfg.r_goal : -cfg.p_goal;
  r -= cfg.beta * ((fail ? cfg.c_fail : 0.0) + step_cost);
  if (cfg.shaping_enabled) r += cfg.gamma * potential_phi(problem, x_next, cfg) - potential_phi(problem, x, cfg);
  return r;
}

void BaselineConfig::validate() const {
  ppo.validate();
  reward.validate();
}

}  // namespace rcppo::baselines
