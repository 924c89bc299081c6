#include "rcppo/reachval.hpp"

#include <cmath>
#include <limits>
#include <ostream>

namespace rcppo::reachval {

using augment::Safety;

int ZGrid::snap(double z) const {
  const double k = std::floor((z - z_lo) / spacing + 1e-9);
  if (k < 0.0) return 0;
  if (k > count - 1) return count - 1;
  return static_cast<int>(k);
}

AugmentedTabular::AugmentedTabular(const envkit::TabularMDP& mdp, ZGrid grid, augment::AugmentedGoalParams params)
    : mdp_(&mdp), grid_(grid), params_(params) {
  mdp.validate();
  if (grid_.count < 1 || !(grid_.spacing > 0.0)) throw ContractError("z grid needs a positive spacing and count");
  if (!(params_.big_c > 0.0)) throw ContractError("augmented goal constant must be positive");
  const int n = size();
  ghat_.resize(n);
  succ_.resize(static_cast<std::size_t>(n) * mdp.num_actions);
  for (int i = 0; i < n; ++i) {
    const int s = state_of(i);
    const Safety y = safety_of(i);
    const int k = zindex_of(i);
    ghat_[i] = augment::augmented_goal(mdp.goal_margin[s], y, grid_.at(k), params_);
    for (int a = 0; a < mdp.num_actions; ++a) {
      const int s2 = mdp.successor(s, a);
      const Safety y2 = augment::latch(augment::shifted_indicator(mdp.avoid[s2] != 0), y);
      const int k2 = grid_.snap(grid_.at(k) - mdp.step_cost(s, a));
      succ_[static_cast<std::size_t>(i) * mdp.num_actions + a] = index(s2, y2, k2);
    }
  }
}

int AugmentedTabular::index(int s, Safety y, int k) const {
  return s * 2 * grid_.count + (y == Safety::Unsafe ? grid_.count : 0) + k;
}

Safety AugmentedTabular::safety_of(int i) const {
  return (i / grid_.count) % 2 == 1 ? Safety::Unsafe : Safety::Safe;
}

int AugmentedTabular::start(int s, double z) const {
  return index(s, augment::shifted_indicator(mdp_->avoid[s] != 0), grid_.snap(z));
}

double AugmentedTabular::max_ghat() const {
  double m = -std::numeric_limits<double>::infinity();
  for (double g : ghat_) m = std::max(m, g);
  return m;
}

std::vector<double> apply_backup(const AugmentedTabular& aug, std::span<const double> v, const TabularPolicy& policy,
                                 double gamma) {
  if (v.size() != static_cast<std::size_t>(aug.size())) throw ContractError("value table has the wrong size");
  std::vector<double> out(v.size());
  for (int i = 0; i < aug.size(); ++i) {
    double next;
    if (policy) {
      next = v[aug.successor(i, policy(i))];
    } else {
      next = std::numeric_limits<double>::infinity();
      for (int a = 0; a < aug.num_actions(); ++a) next = std::min(next, v[aug.successor(i, a)]);
    }
    out[i] = discounted_backup(aug.ghat(i), next, gamma);
  }
  return out;
}

TabularValueTable tabular_value_iteration(const AugmentedTabular& aug, const TabularPolicy& policy,
                                          const ValueIterationOptions& opts) {
  if (!(opts.tol > 0.0)) throw ContractError("value iteration tolerance must be positive");
  if (!(opts.gamma > 0.0 && opts.gamma <= 1.0)) throw ContractError("gamma must lie in (0, 1]");
  TabularValueTable table;
  table.values.resize(aug.size());
  for (int i = 0; i < aug.size(); ++i) table.values[i] = aug.ghat(i);
  for (int sweep = 0; sweep < opts.max_sweeps; ++sweep) {
    auto next = apply_backup(aug, table.values, policy, opts.gamma);
    double res = 0.0;
    for (std::size_t i = 0; i < next.size(); ++i) res = std::max(res, std::abs(next[i] - table.values[i]));
    table.values = std::move(next);
    table.residual = res;
    table.residual_history.push_back(res);
    table.sweeps = sweep + 1;
    if (res < opts.tol) {
      table.converged = true;
      break;
    }
  }
  return table;
}

int greedy_action(const AugmentedTabular& aug, std::span<const double> v, int aug_index) {
  int best = 0;
  double best_v = std::numeric_limits<double>::infinity();
  for (int a = 0; a < aug.num_actions(); ++a) {
    const double q = v[aug.successor(aug_index, a)];
    if (q < best_v) {
      best_v = q;
      best = a;
    }
  }
  return best;
}

void TabularValueTable::write_csv(std::ostream& os, const AugmentedTabular& aug) const {
  os << "state,label,y,z,ghat,value\n";
  const auto& mdp = aug.mdp();
  os.precision(17);
  for (int i = 0; i < aug.size(); ++i) {
    const int s = aug.state_of(i);
    os << s << ',' << (mdp.labels.empty() ? std::to_string(s) : mdp.labels[s]) << ','
       << static_cast<int>(aug.safety_of(i)) << ',' << aug.grid().at(aug.zindex_of(i)) << ',' << aug.ghat(i) << ','
       << values[i] << '\n';
  }
}

}  // namespace rcppo::reachval
