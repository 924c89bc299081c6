#pragma once

// Reach-avoid problem interface and the shipped desk-scale environments.

#include "rcppo/common.hpp"

#include <array>
#include <memory>
#include <optional>
#include <string>
#include <vector>

namespace rcppo::envkit {

/// Goal value used on the whole goal set of every shipped environment.
inline constexpr double kGoalPlateau = -300.0;

struct GoalAvoidMargins {
  double g_value = 0.0;  ///< <= 0 inside the goal set G
  double h_value = 0.0;  ///< > 0 inside the avoid set F
};

/// Result of executing one control on the environment.
struct Transition {
  Vec next;
  double cost = 0.0;
  Vec executed;  ///< the control actually applied (after clamping / noise)
};

/// A minimum-cost reach-avoid task: dynamics f, running cost c, goal margin g
/// and avoid margin h over a continuous state box, plus an initial-state
/// sampler and an episode step cap.
///
/// `dynamics`, `cost` and the margins are pure.  `transition` is the single
/// entry point used by rollouts; wrappers that inject randomness override it
/// and own their generator, so an instance must not be shared across threads.
class ReachAvoidProblem {
 public:
  virtual ~ReachAvoidProblem() = default;

  virtual std::string name() const = 0;
  virtual int state_dim() const = 0;
  virtual int action_dim() const = 0;
  virtual const Vec& action_low() const = 0;
  virtual const Vec& action_high() const = 0;
  virtual double dt() const = 0;
  virtual int horizon_max() const = 0;

  virtual Vec dynamics(const Vec& x, const Vec& u) const = 0;
  virtual double cost(const Vec& x, const Vec& u) const = 0;
  virtual double goal_margin(const Vec& x) const = 0;
  virtual double avoid_margin(const Vec& x) const = 0;

  // Membership predicates evaluated from the set geometry, not from g / h.
  virtual bool in_goal(const Vec& x) const = 0;
  virtual bool in_avoid(const Vec& x) const = 0;

  virtual Vec sample_initial(Rng& rng) const = 0;
  /// Uniform draw over the whole state box (used to estimate sup g and
  /// for property tests).
  virtual Vec sample_state(Rng& rng) const = 0;

  /// Feature map fed to networks; defaults to the raw state.
  virtual Vec observe(const Vec& x) const { return x; }
  virtual int observation_dim() const { return state_dim(); }

  /// Nonnegative distance-like measure to the goal, zero on the goal centre.
  virtual double goal_distance(const Vec& x) const = 0;

  virtual std::unique_ptr<ReachAvoidProblem> clone() const = 0;

  /// Clamps u into the action box, then applies f and c to the clamped control.
  virtual Transition transition(const Vec& x, const Vec& u);
  /// Restarts any internal random stream; no-op for deterministic problems.
  virtual void reseed(std::uint64_t /*seed*/) {}

  GoalAvoidMargins margins(const Vec& x) const { return {goal_margin(x), avoid_margin(x)}; }
  Vec clamp_action(const Vec& u) const;
  /// Throws ContractError when the declared box / horizon are malformed.
  void validate() const;
};

using ProblemPtr = std::unique_ptr<ReachAvoidProblem>;

// ---------------------------------------------------------------------------
// Pendulum

struct PendulumParams {
  double gravity = 10.0;
  double mass = 1.0;
  double length = 1.0;
  double dt = 0.05;
  double max_speed = 8.0;
  double max_torque = 1.0;
  int horizon = 200;
  double free_torque = 0.1;   ///< controls with |u| below this cost nothing
  double torque_cost = 8.0;   ///< c = torque_cost * |u|^2 otherwise
  double goal_weight = 100.0; ///< g = goal_weight * theta^2 outside G
};

/// Gym-style torque-limited pendulum; theta = 0 is upright.  The goal set is
/// the upright crossing {theta * (theta + thetadot * dt) < 0}; there is no
/// avoid set.
class Pendulum final : public ReachAvoidProblem {
 public:
  explicit Pendulum(PendulumParams p = {});

  std::string name() const override { return "pendulum"; }
  int state_dim() const override { return 2; }
  int action_dim() const override { return 1; }
  const Vec& action_low() const override { return low_; }
  const Vec& action_high() const override { return high_; }
  double dt() const override { return p_.dt; }
  int horizon_max() const override { return p_.horizon; }

  Vec dynamics(const Vec& x, const Vec& u) const override;
  double cost(const Vec& x, const Vec& u) const override;
  double goal_margin(const Vec& x) const override;
  double avoid_margin(const Vec& x) const override;
  bool in_goal(const Vec& x) const override;
  bool in_avoid(const Vec& x) const override;
  Vec sample_initial(Rng& rng) const override;
  Vec sample_state(Rng& rng) const override;
  Vec observe(const Vec& x) const override;
  int observation_dim() const override { return 3; }
  double goal_distance(const Vec& x) const override;
  ProblemPtr clone() const override { return std::make_unique<Pendulum>(*this); }

  const PendulumParams& params() const { return p_; }

 private:
  PendulumParams p_;
  Vec low_, high_;
};

double angle_normalize(double theta);
ProblemPtr pendulum_make(PendulumParams p = {});

// ---------------------------------------------------------------------------
// WindFieldLite

struct Rect {
  double x_min, y_min, x_max, y_max;
  bool contains_strict(double x, double y) const {
    return x > x_min && x < x_max && y > y_min && y < y_max;
  }
};

struct Vortex {
  double cx, cy;
  double circulation;  ///< signed; positive is counter-clockwise
  double core_radius;
};

/// Synthetic wind: uniform base flow, a linear shear of the x-component in y,
/// and regularised point vortices.
struct WindModel {
  std::array<double, 2> base{1.0, 0.0};
  double shear = 0.02;  ///< d(wind_x)/dy
  std::vector<Vortex> vortices{{-12.0, 10.0, 60.0, 4.0}, {12.0, -10.0, -60.0, 4.0}};

  std::array<double, 2> at(double x, double y) const;
};

struct WindFieldParams {
  std::array<double, 2> goal{0.0, 0.0};
  double goal_radius = 4.0;
  double half_extent = 30.0;  ///< state box is [-half_extent, half_extent]^2
  double max_speed = 3.0;     ///< control box is [-max_speed, max_speed]^2
  double dt = 0.1;
  int horizon = 300;
  std::vector<Rect> obstacles{{-20.0, -4.0, -14.0, 4.0}, {8.0, 10.0, 14.0, 22.0}, {-6.0, -24.0, 2.0, -16.0}};
  WindModel wind{};
};

/// Planar point mass under velocity control and additive wind drift,
/// navigating around rectangular buildings to a disc around the goal.
class WindFieldLite final : public ReachAvoidProblem {
 public:
  explicit WindFieldLite(WindFieldParams p);

  std::string name() const override { return "windfield"; }
  int state_dim() const override { return 2; }
  int action_dim() const override { return 2; }
  const Vec& action_low() const override { return low_; }
  const Vec& action_high() const override { return high_; }
  double dt() const override { return p_.dt; }
  int horizon_max() const override { return p_.horizon; }

  Vec dynamics(const Vec& x, const Vec& u) const override;
  double cost(const Vec& x, const Vec& u) const override;
  double goal_margin(const Vec& x) const override;
  double avoid_margin(const Vec& x) const override;
  bool in_goal(const Vec& x) const override;
  bool in_avoid(const Vec& x) const override;
  Vec sample_initial(Rng& rng) const override;
  Vec sample_state(Rng& rng) const override;
  Vec observe(const Vec& x) const override;
  double goal_distance(const Vec& x) const override;
  ProblemPtr clone() const override { return std::make_unique<WindFieldLite>(*this); }

  /// The outside-goal branch of g: 10 sqrt(dx^2 + 10 dy^2) - 40.
  double distance_margin(const Vec& x) const;
  const WindFieldParams& params() const { return p_; }

 private:
  WindFieldParams p_;
  Vec low_, high_;
};

/// Throws ContractError if the goal lies outside the map or inside an obstacle.
ProblemPtr windfield_make(WindFieldParams p);
ProblemPtr windfield_make(std::array<double, 2> goal_xy);

// ---------------------------------------------------------------------------
// Tabular fixtures

/// Finite deterministic reach-avoid MDP.  Arrays indexed [s * num_actions + a].
struct TabularMDP {
  int num_states = 0;
  int num_actions = 0;
  std::vector<int> next;
  std::vector<double> cost;
  std::vector<double> reward;
  std::vector<char> goal;
  std::vector<char> avoid;
  std::vector<double> goal_margin;  ///< g(s): kGoalPlateau on goal states, > 0 elsewhere
  std::vector<double> initial;      ///< initial-state distribution
  std::vector<std::string> labels;
  int width = 0, height = 0;        ///< grid geometry when built from a grid

  int idx(int s, int a) const { return s * num_actions + a; }
  int successor(int s, int a) const { return next[idx(s, a)]; }
  double step_cost(int s, int a) const { return cost[idx(s, a)]; }
  double max_cost() const;
  void validate() const;
};

struct GridCell {
  int col = 0, row = 0;
  bool operator==(const GridCell&) const = default;
};

enum GridAction : int { kUp = 0, kDown = 1, kLeft = 2, kRight = 3 };

/// 4-connected deterministic gridworld.  Moves off the grid leave the agent in
/// place.  `step_cost_table` holds either one cost per cell (charged for any
/// action taken there) or one per (cell, action), row-major cells.
TabularMDP grid_reachavoid_make(int width, int height, const std::vector<GridCell>& hazards,
                                GridCell goal_cell, const std::vector<double>& step_cost_table);

inline int grid_index(const TabularMDP& m, GridCell c) { return c.row * m.width + c.col; }

/// Default step cap for grid worlds.
inline int grid_horizon(const TabularMDP& m) { return 4 * (m.width + m.height); }

namespace appendix_f {
enum State : int { A = 0, B = 1, G1 = 2, G2 = 3, G3 = 4, I = 5 };
enum Action : int { Left = 0, Right = 1 };

struct Outcome {
  double reward;
  double cost;
};
/// Closed-form expectations under the uniform start over {A, B} when the
/// policy picks `left` with probability p_a at A and p_b at B.
Outcome expected(double p_a, double p_b);
}  // namespace appendix_f

TabularMDP appendix_f_make();

/// Presents a TabularMDP as a ReachAvoidProblem: the state is the cell index
/// stored in a 1-vector and the action is a 1-D box [0, num_actions) whose
/// floor selects the discrete action.
class TabularProblem final : public ReachAvoidProblem {
 public:
  TabularProblem(TabularMDP mdp, int horizon, std::string name = "tabular");

  std::string name() const override { return name_; }
  int state_dim() const override { return 1; }
  int action_dim() const override { return 1; }
  const Vec& action_low() const override { return low_; }
  const Vec& action_high() const override { return high_; }
  double dt() const override { return 1.0; }
  int horizon_max() const override { return horizon_; }

  Vec dynamics(const Vec& x, const Vec& u) const override;
  double cost(const Vec& x, const Vec& u) const override;
  double goal_margin(const Vec& x) const override;
  double avoid_margin(const Vec& x) const override;
  bool in_goal(const Vec& x) const override;
  bool in_avoid(const Vec& x) const override;
  Vec sample_initial(Rng& rng) const override;
  Vec sample_state(Rng& rng) const override;
  /// One-hot encoding of the cell.
  Vec observe(const Vec& x) const override;
  int observation_dim() const override { return mdp_.num_states; }
  double goal_distance(const Vec& x) const override;
  ProblemPtr clone() const override { return std::make_unique<TabularProblem>(*this); }

  const TabularMDP& mdp() const { return mdp_; }
  int state_of(const Vec& x) const;
  int action_of(const Vec& u) const;
  static Vec encode_action(int a) { return Vec::Constant(1, a + 0.5); }

 private:
  TabularMDP mdp_;
  int horizon_;
  std::string name_;
  Vec low_, high_;
  std::vector<double> initial_cdf_;
  std::vector<double> dist_to_goal_;
};

// ---------------------------------------------------------------------------
// Control-noise wrapper

struct NoiseWrapperConfig {
  double noise_half_width = 0.0;
  std::uint64_t seed = 0;
};

/// Adds xi ~ U[-w, w] to every control before clamping into the action box and
/// charges the cost of the executed control.
class ControlNoise final : public ReachAvoidProblem {
 public:
  ControlNoise(ProblemPtr base, NoiseWrapperConfig cfg);
  ControlNoise(const ControlNoise& other);

  std::string name() const override { return base_->name() + "+noise"; }
  int state_dim() const override { return base_->state_dim(); }
  int action_dim() const override { return base_->action_dim(); }
  const Vec& action_low() const override { return base_->action_low(); }
  const Vec& action_high() const override { return base_->action_high(); }
  double dt() const override { return base_->dt(); }
  int horizon_max() const override { return base_->horizon_max(); }

  Vec dynamics(const Vec& x, const Vec& u) const override { return base_->dynamics(x, u); }
  double cost(const Vec& x, const Vec& u) const override { return base_->cost(x, u); }
  double goal_margin(const Vec& x) const override { return base_->goal_margin(x); }
  double avoid_margin(const Vec& x) const override { return base_->avoid_margin(x); }
  bool in_goal(const Vec& x) const override { return base_->in_goal(x); }
  bool in_avoid(const Vec& x) const override { return base_->in_avoid(x); }
  Vec sample_initial(Rng& rng) const override { return base_->sample_initial(rng); }
  Vec sample_state(Rng& rng) const override { return base_->sample_state(rng); }
  Vec observe(const Vec& x) const override { return base_->observe(x); }
  int observation_dim() const override { return base_->observation_dim(); }
  double goal_distance(const Vec& x) const override { return base_->goal_distance(x); }
  ProblemPtr clone() const override { return std::make_unique<ControlNoise>(*this); }

  Transition transition(const Vec& x, const Vec& u) override;
  void reseed(std::uint64_t seed) override { rng_.seed(seed); }

  const ReachAvoidProblem& base() const { return *base_; }
  const NoiseWrapperConfig& config() const { return cfg_; }

 private:
  ProblemPtr base_;
  NoiseWrapperConfig cfg_;
  Rng rng_;
};

ProblemPtr wrap_with_control_noise(ProblemPtr problem, NoiseWrapperConfig cfg);

}  // namespace rcppo::envkit
