#include "rcppo/envkit.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <limits>

namespace rcppo::envkit {

double TabularMDP::max_cost() const {
  double m = 0.0;
  for (double c : cost) m = std::max(m, c);
  return m;
}

void TabularMDP::validate() const {
  const std::size_t n = static_cast<std::size_t>(num_states) * num_actions;
  if (num_states < 1 || num_actions < 1) throw ContractError("tabular MDP needs states and actions");
  if (next.size() != n || cost.size() != n || reward.size() != n)
    throw ContractError("tabular MDP transition/cost/reward tables have the wrong size");
  const auto ns = static_cast<std::size_t>(num_states);
  if (goal.size() != ns || avoid.size() != ns || goal_margin.size() != ns || initial.size() != ns)
    throw ContractError("tabular MDP per-state tables have the wrong size");
  for (int s : next)
    if (s < 0 || s >= num_states) throw ContractError("tabular MDP successor out of range");
  for (double c : cost)
    if (!std::isfinite(c) || c < 0.0) throw ContractError("tabular MDP costs must be finite and nonnegative");
  for (int s = 0; s < num_states; ++s) {
    if (goal[s] && avoid[s]) throw ContractError("a state cannot be both goal and avoid");
    if ((goal_margin[s] <= 0.0) != static_cast<bool>(goal[s]))
      throw ContractError("goal margin sign disagrees with goal membership");
  }
}

namespace {

std::vector<int> bfs_distance_to_goal(const TabularMDP& m) {
  // Reverse BFS over the transition graph from every goal state.
  std::vector<std::vector<int>> preds(m.num_states);
  for (int s = 0; s < m.num_states; ++s)
    for (int a = 0; a < m.num_actions; ++a) preds[m.successor(s, a)].push_back(s);
  std::vector<int> dist(m.num_states, -1);
  std::deque<int> q;
  for (int s = 0; s < m.num_states; ++s)
    if (m.goal[s]) {
      dist[s] = 0;
      q.push_back(s);
    }
  while (!q.empty()) {
    const int s = q.front();
    q.pop_front();
    for (int p : preds[s])
      if (dist[p] < 0) {
        dist[p] = dist[s] + 1;
        q.push_back(p);
      }
  }
  return dist;
}

}  // namespace

TabularMDP grid_reachavoid_make(int width, int height, const std::vector<GridCell>& hazards, GridCell goal_cell,
                                const std::vector<double>& step_cost_table) {
  if (width < 1 || height < 1) throw ContractError("grid dimensions must be positive");
  if (width > 12 || height > 12) throw ContractError("grid dimensions are limited to 12x12");
  auto inside = [&](GridCell c) { return c.col >= 0 && c.col < width && c.row >= 0 && c.row < height; };
  if (!inside(goal_cell)) throw ContractError("goal cell outside the grid");
  for (const auto& h : hazards) {
    if (!inside(h)) throw ContractError("hazard cell outside the grid");
    if (h == goal_cell) throw ContractError("goal cell cannot be a hazard");
  }
  const int n = width * height;
  const bool per_cell = step_cost_table.size() == static_cast<std::size_t>(n);
  if (!per_cell && step_cost_table.size() != static_cast<std::size_t>(n) * 4)
    throw ContractError("step cost table must have width*height or width*height*4 entries");

  TabularMDP m;
  m.num_states = n;
  m.num_actions = 4;
  m.width = width;
  m.height = height;
  m.next.resize(n * 4);
  m.cost.resize(n * 4);
  m.reward.assign(n * 4, 0.0);
  m.goal.assign(n, 0);
  m.avoid.assign(n, 0);
  m.goal_margin.resize(n);
  m.initial.assign(n, 0.0);
  m.labels.resize(n);

  const int goal = goal_cell.row * width + goal_cell.col;
  m.goal[goal] = 1;
  for (const auto& h : hazards) m.avoid[h.row * width + h.col] = 1;

  constexpr int dcol[4] = {0, 0, -1, 1};
  constexpr int drow[4] = {-1, 1, 0, 0};
  for (int r = 0; r < height; ++r)
    for (int c = 0; c < width; ++c) {
      const int s = r * width + c;
      m.labels[s] = "(" + std::to_string(c) + "," + std::to_string(r) + ")";
      for (int a = 0; a < 4; ++a) {
        GridCell to{c + dcol[a], r + drow[a]};
        m.next[m.idx(s, a)] = inside(to) ? to.row * width + to.col : s;
        m.cost[m.idx(s, a)] = per_cell ? step_cost_table[s] : step_cost_table[s * 4 + a];
      }
      const int manhattan = std::abs(c - goal_cell.col) + std::abs(r - goal_cell.row);
      m.goal_margin[s] = m.goal[s] ? kGoalPlateau : 1.0 + manhattan;
    }

  int starts = 0;
  for (int s = 0; s < n; ++s) starts += !m.goal[s] && !m.avoid[s];
  for (int s = 0; s < n; ++s)
    if (!m.goal[s] && !m.avoid[s]) m.initial[s] = 1.0 / starts;
  m.validate();
  return m;
}

namespace appendix_f {
Outcome expected(double p_a, double p_b) {
  const double from_a_cost = 10.0 * p_a + 20.0 * (1.0 - p_a);
  const double from_a_reward = 10.0 * p_a + 20.0 * (1.0 - p_a);
  return {0.5 * from_a_reward + 0.5 * (20.0 * p_b), 0.5 * from_a_cost + 0.5 * (30.0 * p_b)};
}
}  // namespace appendix_f

TabularMDP appendix_f_make() {
  using namespace appendix_f;
  TabularMDP m;
  m.num_states = 6;
  m.num_actions = 2;
  m.next.resize(12);
  m.cost.assign(12, 0.0);
  m.reward.assign(12, 0.0);
  m.goal = {0, 0, 1, 1, 1, 0};
  m.avoid.assign(6, 0);
  m.goal_margin = {1.0, 1.0, kGoalPlateau, kGoalPlateau, kGoalPlateau, 1.0};
  m.initial = {0.5, 0.5, 0.0, 0.0, 0.0, 0.0};
  m.labels = {"A", "B", "G1", "G2", "G3", "I"};
  for (int s = 0; s < 6; ++s)
    for (int a = 0; a < 2; ++a) m.next[m.idx(s, a)] = s;  // goals and I absorb
  auto set = [&](int s, int a, int to, double c, double r) {
    m.next[m.idx(s, a)] = to;
    m.cost[m.idx(s, a)] = c;
    m.reward[m.idx(s, a)] = r;
  };
  set(A, Left, G1, 10.0, 10.0);
  set(A, Right, G2, 20.0, 20.0);
  set(B, Left, G3, 30.0, 20.0);
  set(B, Right, I, 0.0, 0.0);
  m.validate();
  return m;
}

// ---------------------------------------------------------------------------

TabularProblem::TabularProblem(TabularMDP mdp, int horizon, std::string name)
    : mdp_(std::move(mdp)),
      horizon_(horizon),
      name_(std::move(name)),
      low_(Vec::Zero(1)),
      high_(Vec::Constant(1, static_cast<double>(mdp_.num_actions))) {
  mdp_.validate();
  validate();
  double acc = 0.0;
  for (double p : mdp_.initial) initial_cdf_.push_back(acc += p);
  if (acc <= 0.0) throw ContractError("tabular problem has an empty initial distribution");
  const auto d = bfs_distance_to_goal(mdp_);
  dist_to_goal_.resize(d.size());
  for (std::size_t i = 0; i < d.size(); ++i)
    dist_to_goal_[i] = d[i] < 0 ? static_cast<double>(mdp_.num_states) : static_cast<double>(d[i]);
}

int TabularProblem::state_of(const Vec& x) const {
  const int s = static_cast<int>(std::lround(x[0]));
  if (s < 0 || s >= mdp_.num_states) throw ContractError("tabular state index out of range");
  return s;
}

int TabularProblem::action_of(const Vec& u) const {
  return std::clamp(static_cast<int>(std::floor(u[0])), 0, mdp_.num_actions - 1);
}

Vec TabularProblem::dynamics(const Vec& x, const Vec& u) const {
  return Vec::Constant(1, mdp_.successor(state_of(x), action_of(u)));
}

double TabularProblem::cost(const Vec& x, const Vec& u) const { return mdp_.step_cost(state_of(x), action_of(u)); }
double TabularProblem::goal_margin(const Vec& x) const { return mdp_.goal_margin[state_of(x)]; }
double TabularProblem::avoid_margin(const Vec& x) const { return mdp_.avoid[state_of(x)] ? 1.0 : -1.0; }
bool TabularProblem::in_goal(const Vec& x) const { return mdp_.goal[state_of(x)] != 0; }
bool TabularProblem::in_avoid(const Vec& x) const { return mdp_.avoid[state_of(x)] != 0; }

Vec TabularProblem::sample_initial(Rng& rng) const {
  const double r = uniform(rng, 0.0, initial_cdf_.back());
  const auto it = std::upper_bound(initial_cdf_.begin(), initial_cdf_.end(), r);
  const auto s = std::min<std::ptrdiff_t>(it - initial_cdf_.begin(), mdp_.num_states - 1);
  return Vec::Constant(1, static_cast<double>(s));
}

Vec TabularProblem::sample_state(Rng& rng) const {
  return Vec::Constant(1, std::uniform_int_distribution<int>(0, mdp_.num_states - 1)(rng));
}

Vec TabularProblem::observe(const Vec& x) const {
  Vec o = Vec::Zero(mdp_.num_states);
  o[state_of(x)] = 1.0;
  return o;
}

double TabularProblem::goal_distance(const Vec& x) const { return dist_to_goal_[state_of(x)]; }

}  // namespace rcppo::envkit
