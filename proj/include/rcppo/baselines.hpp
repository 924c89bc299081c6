#pragma once

// Reward-scalarisation baselines: static-Lagrangian PPO with optional
// potential-based shaping, the reward-coefficient grid search with its Pareto
// front, and exact solvers for the two-state counterexample MDP.

#include "rcppo/algo.hpp"

#include <iosfwd>
#include <string>
#include <vector>

namespace rcppo::baselines {

struct LagrangianRewardConfig {
  double beta = 0.1;      ///< static multiplier; 0.1 and 10 are the low / high settings
  double c_fail = 20.0;   ///< penalty weight on entering F
  double r_goal = 20.0;   ///< reward on entering G
  double p_goal = 0.0;    ///< per-step penalty while outside G
  bool shaping_enabled = false;
  double shaping_k = 1.0; ///< potential phi(x) = -k * goal_distance(x)
  double gamma = 0.99;    ///< discount used inside the shaping term

  void validate() const;
};

inline constexpr double kBetaLow = 0.1;
inline constexpr double kBetaHigh = 10.0;

/// phi(x) = -k * goal_distance(x), or 0 when shaping is disabled.
double potential_phi(const envkit::ReachAvoidProblem& problem, const Vec& x, const LagrangianRewardConfig& cfg);

/// R_goal 1[x' in G] - P_goal 1[x' not in G] - beta (C_fail 1[x' in F] + c)
/// plus gamma phi(x') - phi(x) when shaping is enabled.
double lagrangian_reward(const envkit::ReachAvoidProblem& problem, const Vec& x, double step_cost, const Vec& x_next,
                         const LagrangianRewardConfig& cfg);

struct BaselineConfig {
  algo::PpoConfig ppo;
  LagrangianRewardConfig reward;

  void validate() const;
};

/// Typical return magnitude, used as the value head's output scale.
double baseline_value_scale(const envkit::ReachAvoidProblem& problem, const BaselineConfig& cfg);

/// Standard discounted-return GAE over segments of a batch; rewards are one per step.
void standard_advantages(const algo::RolloutBatch& batch, const Vec& rewards, double gamma, double lambda,
                         Vec& advantages, Vec& targets);

/// PPO on the Lagrangian reward; policy and value see observe(x) only.
algo::TrainedModels train_ppo_baseline(const envkit::ReachAvoidProblem& problem, const BaselineConfig& cfg,
                                       const algo::ProgressFn& progress = {});

// ---------------------------------------------------------------------------
// Grid search

struct GridCell {
  double r_goal = 0.0, p_goal = 0.0, beta = 0.0;
};

struct GridSearchConfig {
  std::vector<double> r_goal{2.0, 200.0, 20000.0};
  std::vector<double> p_goal{1.0, 100.0, 10000.0};
  std::vector<double> beta{0.1, 1.0, 10.0};
  BaselineConfig base;        ///< per-cell trainer settings; reward coefficients are overwritten
  int eval_episodes = 256;
  std::uint64_t eval_seed = 1234;

  /// The full 5 x 5 x 3 coefficient grid.
  static GridSearchConfig full_grid();
  std::vector<GridCell> cells() const;
};

struct GridResult {
  GridCell cell;
  bool ok = false;
  std::string error;
  std::optional<double> reach_rate;
  std::optional<double> mean_cost;
  bool on_front = false;
};

/// Points are (reach_rate, mean_cost): higher reach and lower cost are
/// better; a missing cost counts as +infinity and a missing reach rate as 0.
bool dominates(double reach_a, double cost_a, double reach_b, double cost_b);

/// Marks the nondominated successful cells.
void mark_pareto_front(std::vector<GridResult>& results);

using CellProgressFn = std::function<void(std::size_t index, const GridResult&)>;

/// Trains and evaluates one baseline per cell; a failing cell is recorded and
/// the search continues.
std::vector<GridResult> grid_search(const envkit::ReachAvoidProblem& problem, const GridSearchConfig& cfg,
                                    const CellProgressFn& progress = {});

void write_pareto_csv(std::ostream& os, const std::vector<GridResult>& results);

// ---------------------------------------------------------------------------
// Two-state counterexample

enum class AppendixFMode { Scalarized, Thresholded };

struct AppendixFSolution {
  double p_a = 0.0, p_b = 0.0;
  double reward = 0.0, cost = 0.0;
  bool feasible = true;
  bool unique = true;  ///< no other enumerated point attains the same objective
};

/// Exact optimum over (p_A, p_B) in [0, 1]^2: Scalarized minimises -R + w C,
/// Thresholded maximises R subject to C <= X.  Derived from the expected
/// reward and cost being affine in (p_A, p_B).
AppendixFSolution appendix_f_analytic(AppendixFMode mode, double parameter);

/// Same optimisation by exhaustive enumeration on a grid of the given
/// resolution, using the fixture's transition table for the expectations.
AppendixFSolution appendix_f_enumerate(const envkit::TabularMDP& mdp, AppendixFMode mode, double parameter,
                                       double resolution = 1e-3);

/// Expected one-step reward and cost of the fixture for a (p_A, p_B) policy,
/// computed from its tables under the uniform start over {A, B}.
envkit::appendix_f::Outcome appendix_f_expectation(const envkit::TabularMDP& mdp, double p_a, double p_b);

}  // namespace rcppo::baselines
