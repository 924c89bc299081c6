#include "rcppo/envkit.hpp"

namespace rcppo::envkit {

Vec ReachAvoidProblem::clamp_action(const Vec& u) const {
  return u.cwiseMax(action_low()).cwiseMin(action_high());
}

Transition ReachAvoidProblem::transition(const Vec& x, const Vec& u) {
  Transition t;
  t.executed = clamp_action(u);
  t.next = dynamics(x, t.executed);
  t.cost = cost(x, t.executed);
  return t;
}

void ReachAvoidProblem::validate() const {
  if (state_dim() < 1 || action_dim() < 1) throw ContractError("problem dimensions must be positive");
  if (action_low().size() != action_dim() || action_high().size() != action_dim())
    throw ContractError("action box size does not match action_dim");
  if (!(action_low().array() < action_high().array()).all())
    throw ContractError("action_low must be strictly below action_high");
  if (horizon_max() < 1) throw ContractError("horizon_max must be at least 1");
}

}  // namespace rcppo::envkit
