#pragma once

// Reachability value mathematics: Bellman backups for the reach-avoid and
// reach value functions, the discounted contraction backup and its
// phi-reduction, the matching advantage estimator, an exact tabular oracle
// and the discount bound that makes the discounted value sign-exact.

#include "rcppo/augment.hpp"
#include "rcppo/envkit.hpp"

#include <functional>
#include <iosfwd>
#include <optional>
#include <span>
#include <vector>

namespace rcppo::reachval {

struct BackupConfig {
  double gamma = 0.99;
  double lambda = 0.95;
};

/// max{h, min{g, V'}}
inline double rabe_backup(double g, double h, double v_next) { return std::max(h, std::min(g, v_next)); }

/// min{g^, V'}
inline double rbe_backup(double ghat, double v_next) { return std::min(ghat, v_next); }

/// (1 - gamma) g^ + gamma min{g^, V'}
inline double discounted_backup(double ghat, double v_next, double gamma) {
  return (1.0 - gamma) * ghat + gamma * std::min(ghat, v_next);
}

/// Same arithmetic as discounted_backup; callers pass the successor value of
/// the action being scored.
inline double q_backup(double ghat, double v_next, double gamma) { return discounted_backup(ghat, v_next, gamma); }

/// Right fold of the one-step reduction over n + 1 arguments (n >= 1).
double phi_reduce(std::span<const double> values, double gamma);

enum class GaeWeighting {
  Renormalized,  ///< lambda^k weights truncated at episode end, rescaled to sum to one
  Literal,       ///< 1/(1-lambda) sum_k lambda^k, truncated without rescaling
};

struct AdvantageRecord {
  std::vector<double> k_step_adv;  ///< element k-1 holds the k-step advantage
  double gae_adv = 0.0;
  double lambda_return = 0.0;      ///< gae_adv + V_t, the value-regression target

  double k_step(std::size_t k) const { return k_step_adv.at(k - 1); }
};

/// Advantages for one episode segment.  `ghat` holds g^(x^_t) for
/// t = 0..L-1, `values` holds V(x^_t) for the same steps and `bootstrap`
/// stands in for the value after the last step.
std::vector<AdvantageRecord> gae_advantages(std::span<const double> ghat, std::span<const double> values,
                                            double bootstrap, const BackupConfig& cfg,
                                            GaeWeighting weighting = GaeWeighting::Renormalized);

/// Same estimator without materialising the per-k table; writes advantages
/// and lambda-return targets.  Used by the trainer.
void gae_advantages_into(std::span<const double> ghat, std::span<const double> values, double bootstrap,
                         const BackupConfig& cfg, GaeWeighting weighting, std::span<double> adv_out,
                         std::span<double> return_out);

/// Infimum discount for which gamma^T / (1 - gamma^T) > g_max / eps holds
/// for any gamma strictly above it.
double theorem3_min_gamma(double g_max, int t_max, double eps);

// ---------------------------------------------------------------------------
// Tabular oracle over a discretised budget.

/// Uniform budget grid z_k = z_lo + k * spacing, k = 0..count-1.  Off-grid
/// budgets snap toward -inf; budgets below z_lo saturate at z_lo.
struct ZGrid {
  double z_lo = 0.0;
  double spacing = 1.0;
  int count = 1;

  double at(int k) const { return z_lo + k * spacing; }
  int snap(double z) const;
  double z_hi() const { return at(count - 1); }
};

/// Finite augmented state space (s, y, z_k) of a TabularMDP.
class AugmentedTabular {
 public:
  AugmentedTabular(const envkit::TabularMDP& mdp, ZGrid grid, augment::AugmentedGoalParams params);

  int size() const { return mdp_->num_states * 2 * grid_.count; }
  int index(int s, augment::Safety y, int k) const;
  int state_of(int i) const { return i / (2 * grid_.count); }
  augment::Safety safety_of(int i) const;
  int zindex_of(int i) const { return i % grid_.count; }
  double ghat(int i) const { return ghat_[i]; }
  int successor(int i, int a) const { return succ_[static_cast<std::size_t>(i) * mdp_->num_actions + a]; }
  int num_actions() const { return mdp_->num_actions; }
  bool in_goal(int i) const { return ghat_[i] <= 0.0; }
  /// Augmented start index for (s, z): y from the avoid set, z snapped to the grid.
  int start(int s, double z) const;

  const envkit::TabularMDP& mdp() const { return *mdp_; }
  const ZGrid& grid() const { return grid_; }
  const augment::AugmentedGoalParams& goal_params() const { return params_; }
  double max_ghat() const;

 private:
  const envkit::TabularMDP* mdp_;
  ZGrid grid_;
  augment::AugmentedGoalParams params_;
  std::vector<double> ghat_;
  std::vector<int> succ_;
};

/// Deterministic policy over augmented indices; empty means greedy (min over actions).
using TabularPolicy = std::function<int(int aug_index)>;

struct TabularValueTable {
  std::vector<double> values;
  double residual = 0.0;
  int sweeps = 0;
  bool converged = false;
  std::vector<double> residual_history;

  /// Writes one row per augmented state: state,label,y,z,ghat,value.
  void write_csv(std::ostream& os, const AugmentedTabular& aug) const;
};

/// One synchronous application of the discounted backup.
std::vector<double> apply_backup(const AugmentedTabular& aug, std::span<const double> v, const TabularPolicy& policy,
                                 double gamma);

struct ValueIterationOptions {
  double gamma = 0.99;
  double tol = 1e-10;
  int max_sweeps = 100000;
};

/// Jacobi value iteration from V = g^.  The table reports `converged = false`
/// (with its last residual) when max_sweeps is exhausted.
TabularValueTable tabular_value_iteration(const AugmentedTabular& aug, const TabularPolicy& policy,
                                          const ValueIterationOptions& opts);

/// Greedy action of a converged table.
int greedy_action(const AugmentedTabular& aug, std::span<const double> v, int aug_index);

}  // namespace rcppo::reachval
