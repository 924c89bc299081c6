#pragma once

// Budget-conditioned reach-avoid PPO: rollout collection over the augmented
// dynamics, the clipped policy loss and value regression, the two training
// phases, optimal-budget extraction by bisection and a learned budget map,
// deployment and evaluation.

#include "rcppo/approx.hpp"
#include "rcppo/augment.hpp"
#include "rcppo/envkit.hpp"
#include "rcppo/reachval.hpp"

#include <functional>
#include <iosfwd>
#include <limits>
#include <optional>
#include <string>
#include <vector>

namespace rcppo::algo {

// ---------------------------------------------------------------------------
// Network inputs

/// Maps an augmented state to network features: observe(x), then optionally
/// the raw flag y and the budget rescaled to [0, 1] over [z_min, z_max].
struct InputEncoder {
  int obs_dim = 0;
  bool with_budget = true;
  double z_min = 0.0;
  double z_max = 1.0;

  int dim() const { return obs_dim + (with_budget ? 2 : 0); }
  Vec encode(const envkit::ReachAvoidProblem& problem, const augment::AugmentedState& s) const;
  void encode_into(const envkit::ReachAvoidProblem& problem, const augment::AugmentedState& s,
                   Eigen::Ref<Vec> out) const;
};

InputEncoder budget_encoder(const envkit::ReachAvoidProblem& problem, double z_min, double z_max);
InputEncoder plain_encoder(const envkit::ReachAvoidProblem& problem);

/// Largest single-step cost seen over `samples` random (state, action) draws.
double estimate_max_step_cost(const envkit::ReachAvoidProblem& problem, int samples, std::uint64_t seed);

// ---------------------------------------------------------------------------
// Configuration

/// Hyperparameters shared by every PPO-style trainer.
struct PpoConfig {
  double clip_eps = 0.2;
  double entropy_coef = 1e-2;  ///< initial value; decays linearly to 0 over training
  int epochs = 10;
  int minibatch_size = 256;
  long total_steps = 2'000'000;
  int num_envs = 16;
  int steps_per_env = 128;     ///< rollout length per environment per iteration
  double gamma = 0.99;
  double lambda = 0.95;
  double lr = 3e-4;
  double value_lr = 3e-4;
  double max_grad_norm = 0.5;
  std::vector<int> hidden{256, 256};
  double init_log_std = 0.0;
  std::uint64_t seed = 0;

  long batch_size() const { return static_cast<long>(num_envs) * steps_per_env; }
  long num_iterations() const { return total_steps <= 0 ? 0 : (total_steps + batch_size() - 1) / batch_size(); }
  void validate() const;
};

struct Phase1Config {
  PpoConfig ppo;
  double z_min = -1.0;
  /// Upper end of the budget sampling range; NaN means horizon * max step cost.
  double z_max = std::numeric_limits<double>::quiet_NaN();
  /// Weight C on the safety flag; NaN means the sampled sup of g.
  double big_c = std::numeric_limits<double>::quiet_NaN();
  reachval::GaeWeighting weighting = reachval::GaeWeighting::Renormalized;
  int estimate_samples = 20000;

  void validate() const;
};

/// Phase-1 configuration with every NaN default replaced by its estimate.
Phase1Config resolve_defaults(const envkit::ReachAvoidProblem& problem, Phase1Config cfg);

struct Phase2Config {
  long total_steps = 200'000;
  int num_envs = 16;
  int steps_per_env = 128;
  int epochs = 10;
  int minibatch_size = 256;
  double lr = 1e-4;
  double lambda = 0.95;
  /// Discount for the fine-tuning targets; NaN selects the smallest value
  /// admitted by the sign-exactness bound, nudged upward.
  double gamma = std::numeric_limits<double>::quiet_NaN();
  double sign_margin = 1.0;  ///< the eps of the discount bound
  std::uint64_t seed = 1;

  void validate() const;
};

/// Discount used by phase 2 for a given sup g and horizon.
double phase2_gamma(const Phase2Config& cfg, double g_max, int horizon);

// ---------------------------------------------------------------------------
// Rollouts

enum class TerminalKind {
  Reached,    ///< episode ended on entering the terminal set
  Truncated,  ///< episode hit the step cap
  Cut,        ///< the batch ended mid-episode; the episode continues in the next batch
};

/// A contiguous run of steps of one environment's episode inside a batch.
struct Segment {
  int begin = 0, end = 0;  ///< step range [begin, end)
  TerminalKind kind = TerminalKind::Cut;
  double terminal_ghat = 0.0;   ///< g^ of the state after the last step (Reached)
  double bootstrap_value = 0.0; ///< V of the state after the last step (Truncated / Cut)
  double z0 = 0.0;
  int env = 0;
};

struct EpisodeRecord {
  double z0 = 0.0;
  bool reached = false;   ///< entered G with the flag never latched
  bool violated = false;  ///< flag latched at some step
  double cumulative_cost = 0.0;  ///< summed up to the first goal entry (or the end)
  int length = 0;
};

struct RolloutBatch {
  int steps = 0;
  std::vector<augment::AugmentedState> states;  ///< x^_t for every step
  std::vector<Vec> next_x;                       ///< raw successor state
  Mat inputs;                                    ///< encoded x^_t, one column per step
  Mat raw_actions;                               ///< pre-clamp samples
  Vec log_probs;                                 ///< log pi(raw | x^_t) under the collecting policy
  Vec ghat;
  Vec values;
  Vec costs;
  std::vector<char> episode_start;               ///< step t is the first step of an episode
  std::vector<Segment> segments;
  std::vector<EpisodeRecord> finished;           ///< episodes that ended inside this batch
};

enum class EpisodeRule {
  AugmentedGoal,  ///< stop when x^ enters the augmented goal (budget-conditioned training)
  GoalEntry,      ///< stop when x enters G (reward-based baselines)
};

struct CollectorConfig {
  int num_envs = 16;
  double z_min = 0.0, z_max = 0.0;
  augment::AugmentedGoalParams goal{};
  EpisodeRule rule = EpisodeRule::AugmentedGoal;
  bool deterministic = false;  ///< act with the policy mode instead of sampling
  std::uint64_t seed = 0;
};

/// Lock-step vector of environment copies.  Episodes persist across calls;
/// a batch that ends mid-episode closes the segment with a value bootstrap.
class RolloutCollector {
 public:
  RolloutCollector(const envkit::ReachAvoidProblem& problem, InputEncoder encoder, CollectorConfig cfg);

  RolloutBatch collect(const approx::GaussianPolicy& policy, const approx::ValueModel& value, int steps_per_env);

  /// Deterministic collection with an arbitrary actor mapping encoded inputs
  /// (one column per environment) and the matching augmented states to controls.
  using Actor = std::function<Mat(const Mat& inputs, const std::vector<augment::AugmentedState>& states)>;
  RolloutBatch collect(const Actor& actor, const approx::ValueModel& value, int steps_per_env);

  const CollectorConfig& config() const { return cfg_; }
  const InputEncoder& encoder() const { return encoder_; }

 private:
  struct EnvSlot {
    envkit::ProblemPtr problem;
    augment::AugmentedState state;
    double z0 = 0.0;
    double cost_to_goal = 0.0;
    bool goal_seen = false;
    bool reached = false;
    int t = 0;
  };
  void reset(EnvSlot& slot);
  RolloutBatch run(const approx::GaussianPolicy* policy, const Actor* actor, const approx::ValueModel& value,
                   int steps_per_env);

  InputEncoder encoder_;
  CollectorConfig cfg_;
  Rng rng_;
  std::vector<EnvSlot> envs_;
};

/// Budget-conditioned advantages: phi-GAE per segment; writes `advantages`
/// (value minus target, so that positive means better) and value targets.
void reach_advantages(const RolloutBatch& batch, const reachval::BackupConfig& backup,
                      reachval::GaeWeighting weighting, Vec& advantages, Vec& targets);

// ---------------------------------------------------------------------------
// Losses

struct PolicyLoss {
  double loss = 0.0;           ///< clipped surrogate minus entropy bonus
  double surrogate = 0.0;
  double entropy = 0.0;
  Vec grad;
  int excluded = 0;            ///< samples dropped for a non-finite ratio
  double clip_fraction = 0.0;
  double approx_kl = 0.0;      ///< mean of (r - 1) - log r
};

/// mean_t max(-r_t A_t, -clip(r_t, 1-eps, 1+eps) A_t) - entropy_coef * H.
/// `clip_eps` may be +infinity.  Throws NumericalError when more than 1% of
/// the samples have a non-finite ratio.
PolicyLoss ppo_policy_loss(const approx::GaussianPolicy& policy, const Vec& params, const Mat& inputs,
                           const Mat& raw_actions, const Vec& old_log_probs, const Vec& advantages, double clip_eps,
                           double entropy_coef);

struct ValueLoss {
  double loss = 0.0;
  Vec grad;
};

/// mean_t (V(x^_t) - target_t)^2 with targets held constant.
ValueLoss value_loss(const approx::ValueModel& value, const Vec& params, const Mat& inputs, const Vec& targets);

/// Zero-mean, unit-std rescaling; leaves a constant vector at zero.
Vec standardize(const Vec& v);

// ---------------------------------------------------------------------------
// Training

struct LogRow {
  long iteration = 0;
  long env_steps = 0;
  std::optional<double> reach_rate;        ///< over episodes finished in this batch
  std::optional<double> mean_cost_reached;
  double policy_loss = 0.0;
  double value_loss = 0.0;
  double entropy = 0.0;
  double kl_estimate = 0.0;
};

void write_log_csv(std::ostream& os, const std::vector<LogRow>& rows);

/// Epoch/minibatch update loop shared by every PPO-style trainer.  Owns one
/// Adam per network; learning rates and the entropy bonus decay linearly to
/// zero over the configured number of iterations.
class PpoUpdater {
 public:
  PpoUpdater(approx::GaussianPolicy& policy, approx::ValueModel& value, const PpoConfig& cfg);

  /// Runs the configured epochs; advantages are standardized per batch here.
  LogRow update(const RolloutBatch& batch, const Vec& advantages, const Vec& targets);

 private:
  approx::GaussianPolicy& policy_;
  approx::ValueModel& value_;
  PpoConfig cfg_;
  approx::Adam policy_opt_, value_opt_;
  Rng rng_;
  long iteration_ = 0;
};

struct TrainedModels {
  approx::GaussianPolicy policy;
  approx::ValueModel value;
  InputEncoder encoder;
  augment::AugmentedGoalParams goal;
  std::vector<LogRow> log;
};

using ProgressFn = std::function<void(const LogRow&)>;

approx::MlpSpec trunk_spec(int input_dim, const std::vector<int>& hidden, int output_dim);

/// Phase 1: z-conditioned stochastic policy and reach value.
TrainedModels train_phase1(const envkit::ReachAvoidProblem& problem, const Phase1Config& cfg,
                           const ProgressFn& progress = {});

/// Phase 2: value regression under the deterministic (mode) policy with
/// near-undiscounted phi-GAE targets.  Returns the fine-tuned value model and
/// its log (policy columns are zero).
approx::ValueModel finetune_phase2(const envkit::ReachAvoidProblem& problem, const TrainedModels& phase1,
                                   const Phase2Config& cfg, std::vector<LogRow>* log = nullptr);

/// The regression loop behind finetune_phase2 for an arbitrary deterministic actor.
approx::ValueModel finetune_value(const envkit::ReachAvoidProblem& problem, const RolloutCollector::Actor& actor,
                                  const InputEncoder& encoder, const augment::AugmentedGoalParams& goal,
                                  approx::ValueModel value, const Phase2Config& cfg, std::vector<LogRow>* log = nullptr);

// ---------------------------------------------------------------------------
// Optimal budget

enum class ZStatus { Feasible, Infeasible };

struct ZStarSolution {
  ZStatus status = ZStatus::Feasible;
  double z_star = 0.0;
  double v_at_zstar = 0.0;
  double lo = 0.0, hi = 0.0;
  int iterations = 0;
  bool non_monotone = false;  ///< endpoint signs contradict a nonincreasing value
};

/// Smallest z in [z_min, z_max] (to within tol) with v(z) <= 0, maintaining
/// v(lo) > 0 >= v(hi).  Infeasible when v(z_max) > 0; z_star is then z_max.
ZStarSolution bisect_z_star(const std::function<double(double)>& v, double z_min, double z_max, double tol);

/// Value-model overload: evaluates V(x, y, z) through the encoder.
ZStarSolution bisect_z_star(const envkit::ReachAvoidProblem& problem, const approx::ValueModel& value,
                            const InputEncoder& encoder, const Vec& x, augment::Safety y, double z_min, double z_max,
                            double tol);

/// Number of negative-to-positive sign changes of v along `points` evenly
/// spaced budgets in [z_min, z_max].
int count_sign_violations(const std::function<double(double)>& v, double z_min, double z_max, int points = 64);

/// Regression of (x, y) -> z* on bisection labels: z* = offset + scale * net(observe(x), y).
struct ZRegressor {
  approx::ValueModel net;
  int obs_dim = 0;
  double label_offset = 0.0;

  double predict(const envkit::ReachAvoidProblem& problem, const Vec& x, augment::Safety y) const;
};

struct ZFitConfig {
  int n_samples = 2000;
  double holdout_fraction = 0.2;
  int epochs = 300;
  int minibatch_size = 128;
  double lr = 1e-3;
  std::vector<int> hidden{64, 64};
  double tol = 1e-2;
  std::uint64_t seed = 7;
};

struct ZFitReport {
  int labelled = 0;
  int infeasible = 0;
  double train_mae = 0.0;
  double heldout_mae = 0.0;
  double train_median_abs_error = 0.0;
};

using StateSampler = std::function<Vec(Rng&)>;

/// Labels sampled states by bisection, drops infeasible ones and fits the
/// regressor.  Throws NumericalError when more than half are infeasible.
ZRegressor fit_z_regressor(const envkit::ReachAvoidProblem& problem, const approx::ValueModel& value,
                           const InputEncoder& encoder, const StateSampler& sampler, const ZFitConfig& cfg,
                           ZFitReport* report = nullptr);

approx::Checkpoint to_checkpoint(const ZRegressor& reg, const std::string& config_hash);
ZRegressor zregressor_from_checkpoint(const approx::Checkpoint& ckpt);

// ---------------------------------------------------------------------------
// Deployment and evaluation

struct ZQuery {
  double z0 = 0.0;
  bool feasible = true;
};

using ZSource = std::function<ZQuery(const Vec& x, augment::Safety y)>;

ZSource bisection_source(const envkit::ReachAvoidProblem& problem, const approx::ValueModel& value,
                         const InputEncoder& encoder, double z_min, double z_max, double tol);
ZSource regressor_source(const envkit::ReachAvoidProblem& problem, const ZRegressor& reg, double z_min,
                         double z_max);
ZSource fixed_source(double z0);

struct Deployment {
  augment::AugmentedTrajectory traj;
  std::vector<double> g, h, ghat;
  ZQuery start;
  EpisodeRecord record;
};

/// Sets z0 from the source, then acts with the policy mode until the state
/// enters G or the step cap is hit.  An infeasible start still runs with the
/// source's z0 and is reported.
Deployment deploy_policy(envkit::ReachAvoidProblem& problem, const approx::GaussianPolicy& policy,
                         const InputEncoder& encoder, const augment::AugmentedGoalParams& goal, const ZSource& source,
                         const Vec& x0);

void write_trajectory_csv(std::ostream& os, const envkit::ReachAvoidProblem& problem, const Deployment& d);

struct EvalReport {
  std::vector<EpisodeRecord> records;
  std::optional<double> reach_rate;
  std::optional<double> mean_cost;    ///< over reaching episodes
  std::optional<double> median_cost;
  std::optional<double> violation_rate;
  int infeasible_starts = 0;

  static EvalReport from_records(std::vector<EpisodeRecord> records, int infeasible_starts = 0);
  void write_jsonl(std::ostream& os) const;
  std::string summary_json() const;
};

/// Seeded evaluation over `episodes` initial states drawn from the problem's
/// sampler (resampled while the start is already in G).
EvalReport evaluate(const envkit::ReachAvoidProblem& problem, const approx::GaussianPolicy& policy,
                    const InputEncoder& encoder, const augment::AugmentedGoalParams& goal, const ZSource& source,
                    int episodes, std::uint64_t seed, std::vector<Deployment>* keep = nullptr);

/// Fraction of reaching records with cumulative_cost <= z0 + tol; nullopt when none reach.
std::optional<double> budget_soundness(const std::vector<EpisodeRecord>& records, double tol);

}  // namespace rcppo::algo
