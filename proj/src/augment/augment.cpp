#include "rcppo/augment.hpp"

#include <cmath>

namespace rcppo::augment {

AugmentedGoalParams estimate_goal_params(const envkit::ReachAvoidProblem& problem, int samples, std::uint64_t seed) {
  Rng rng(seed);
  double c = 0.0;
  for (int i = 0; i < samples; ++i) c = std::max(c, problem.goal_margin(problem.sample_state(rng)));
  if (!(c > 0.0)) c = 1.0;
  return {c};
}

AugmentedState augmented_reset(const envkit::ReachAvoidProblem& problem, const Vec& x0, double z0) {
  if (!std::isfinite(z0)) throw ContractError("initial budget must be finite");
  return {x0, shifted_indicator(problem.in_avoid(x0)), z0};
}

AugmentedStep augmented_step(envkit::ReachAvoidProblem& problem, const AugmentedState& s, const Vec& u) {
  if (!s.x.allFinite() || !u.allFinite() || !std::isfinite(s.z))
    throw ContractError("augmented_step received a non-finite state or action");
  auto t = problem.transition(s.x, u);
  AugmentedStep out;
  out.next.y = latch(shifted_indicator(problem.in_avoid(t.next)), s.y);
  out.next.z = s.z - t.cost;
  out.next.x = std::move(t.next);
  out.cost = t.cost;
  out.executed = std::move(t.executed);
  return out;
}

double augmented_goal(const envkit::ReachAvoidProblem& problem, const AugmentedState& s,
                      const AugmentedGoalParams& params) {
  return augmented_goal(problem.goal_margin(s.x), s.y, s.z, params);
}

bool in_augmented_goal(const envkit::ReachAvoidProblem& problem, const AugmentedState& s,
                       const AugmentedGoalParams& params) {
  return augmented_goal(problem, s, params) <= 0.0;
}

Theorem1Check theorem1_predicate(const envkit::ReachAvoidProblem& problem, const AugmentedTrajectory& traj,
                                 const AugmentedGoalParams& params, std::ptrdiff_t T) {
  if (traj.states.empty()) throw ContractError("theorem1_predicate needs a non-empty trajectory");
  const auto last = static_cast<std::ptrdiff_t>(traj.states.size()) - 1;
  if (T < 0) T = last;
  if (T > last || T > static_cast<std::ptrdiff_t>(traj.costs.size()))
    throw ContractError("theorem1_predicate step index out of range");

  bool safe = true;
  for (std::ptrdiff_t t = 0; t <= T; ++t) safe = safe && !problem.in_avoid(traj.states[t].x);
  double spent = 0.0;
  for (std::ptrdiff_t k = 0; k < T; ++k) spent += traj.costs[k];

  Theorem1Check r;
  r.lhs = problem.in_goal(traj.states[T].x) && safe && traj.z0 >= spent;
  r.rhs = in_augmented_goal(problem, traj.states[T], params);
  return r;
}

}  // namespace rcppo::augment
