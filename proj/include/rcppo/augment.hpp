#pragma once

// Cost-budget state augmentation: x -> (x, y, z) with a latched safety flag y
// and a remaining budget z, and the augmented goal that folds reach, avoid and
// budget into a single sublevel set.

#include "rcppo/envkit.hpp"

#include <vector>

namespace rcppo::augment {

/// Latched unsafe indicator, valued exactly -1 (never unsafe) or +1.
enum class Safety : int { Safe = -1, Unsafe = 1 };

inline double as_real(Safety y) { return static_cast<double>(static_cast<int>(y)); }

/// Shifted indicator: +1 for members, -1 otherwise.
inline Safety shifted_indicator(bool member) { return member ? Safety::Unsafe : Safety::Safe; }

inline Safety latch(Safety a, Safety b) {
  return (a == Safety::Unsafe || b == Safety::Unsafe) ? Safety::Unsafe : Safety::Safe;
}

struct AugmentedState {
  Vec x;
  Safety y = Safety::Safe;
  double z = 0.0;
};

struct AugmentedGoalParams {
  double big_c = 1.0;  ///< weight on the safety flag; must be positive
};

/// Default C: the largest g over `samples` draws from the problem's state box.
AugmentedGoalParams estimate_goal_params(const envkit::ReachAvoidProblem& problem, int samples, std::uint64_t seed);

AugmentedState augmented_reset(const envkit::ReachAvoidProblem& problem, const Vec& x0, double z0);

struct AugmentedStep {
  AugmentedState next;
  double cost = 0.0;
  Vec executed;
};

/// One step of the augmented dynamics: x' = f(x,u), y' = max(I[x' in F], y),
/// z' = z - c(x,u).  Throws ContractError on non-finite inputs.
AugmentedStep augmented_step(envkit::ReachAvoidProblem& problem, const AugmentedState& s, const Vec& u);

/// max{g, C y, -z}
inline double augmented_goal(double g, Safety y, double z, const AugmentedGoalParams& params) {
  return std::max({g, params.big_c * as_real(y), -z});
}

double augmented_goal(const envkit::ReachAvoidProblem& problem, const AugmentedState& s,
                      const AugmentedGoalParams& params);

bool in_augmented_goal(const envkit::ReachAvoidProblem& problem, const AugmentedState& s,
                       const AugmentedGoalParams& params);

/// A rollout of the augmented system together with the raw per-step costs.
struct AugmentedTrajectory {
  std::vector<AugmentedState> states;  ///< x^_0 .. x^_T
  std::vector<Vec> actions;            ///< executed controls u_0 .. u_{T-1}
  std::vector<double> costs;           ///< c(x_t, u_t)
  double z0 = 0.0;
};

struct Theorem1Check {
  bool lhs = false;  ///< reach, never-unsafe and budget constraints on the raw trajectory
  bool rhs = false;  ///< augmented state at T lies in the augmented goal
};

/// Evaluates both sides of the reach/avoid/budget equivalence at step T
/// (defaults to the last state).  The left side uses the geometric
/// membership predicates and a fresh sum of the recorded costs.
Theorem1Check theorem1_predicate(const envkit::ReachAvoidProblem& problem, const AugmentedTrajectory& traj,
                                 const AugmentedGoalParams& params, std::ptrdiff_t T = -1);

}  // namespace rcppo::augment
