#include "rcppo/algo.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace rcppo::algo {

namespace {

void summarize_episodes(const std::vector<EpisodeRecord>& eps, LogRow& row) {
  if (eps.empty()) return;
  int reached = 0;
  double cost = 0.0;
  for (const auto& e : eps)
    if (e.reached) {
      ++reached;
      cost += e.cumulative_cost;
    }
  row.reach_rate = static_cast<double>(reached) / eps.size();
  if (reached > 0) row.mean_cost_reached = cost / reached;
}

}  // namespace

TrainedModels train_phase1(const envkit::ReachAvoidProblem& problem, const Phase1Config& cfg_in,
                           const ProgressFn& progress) {
  const Phase1Config cfg = resolve_defaults(problem, cfg_in);
  const PpoConfig& ppo = cfg.ppo;
  const InputEncoder enc = budget_encoder(problem, cfg.z_min, cfg.z_max);
  const augment::AugmentedGoalParams goal{cfg.big_c};

  TrainedModels m{approx::GaussianPolicy(trunk_spec(enc.dim(), ppo.hidden, problem.action_dim()),
                                         problem.action_low(), problem.action_high()),
                  approx::ValueModel(trunk_spec(enc.dim(), ppo.hidden, 1), std::max(-envkit::kGoalPlateau, cfg.big_c)),
                  enc, goal, {}};
  Rng init_rng(mix_seed(ppo.seed, 1));
  m.policy.initialize(init_rng, ppo.init_log_std, 0.01);
  m.value.initialize(init_rng, 0.1);
  if (ppo.num_iterations() == 0) return m;

  CollectorConfig cc;
  cc.num_envs = ppo.num_envs;
  cc.z_min = cfg.z_min;
  cc.z_max = cfg.z_max;
  cc.goal = goal;
  cc.rule = EpisodeRule::AugmentedGoal;
  cc.seed = mix_seed(ppo.seed, 2);
  RolloutCollector collector(problem, enc, cc);
  PpoUpdater updater(m.policy, m.value, ppo);
  const reachval::BackupConfig backup{ppo.gamma, ppo.lambda};

  long env_steps = 0;
  Vec adv, targets;
  for (long it = 0; it < ppo.num_iterations(); ++it) {
    const RolloutBatch batch = collector.collect(m.policy, m.value, ppo.steps_per_env);
    env_steps += batch.steps;
    reach_advantages(batch, backup, cfg.weighting, adv, targets);
    LogRow row = updater.update(batch, adv, targets);
    row.iteration = it;
    row.env_steps = env_steps;
    summarize_episodes(batch.finished, row);
    m.log.push_back(row);
    if (progress) progress(row);
  }
  return m;
}

approx::ValueModel finetune_value(const envkit::ReachAvoidProblem& problem, const RolloutCollector::Actor& actor,
                                  const InputEncoder& encoder, const augment::AugmentedGoalParams& goal,
                                  approx::ValueModel value, const Phase2Config& cfg, std::vector<LogRow>* log) {
  cfg.validate();
  const long batch_size = static_cast<long>(cfg.num_envs) * cfg.steps_per_env;
  const long iters = cfg.total_steps <= 0 ? 0 : (cfg.total_steps + batch_size - 1) / batch_size;
  if (iters == 0) return value;
  const double gamma = phase2_gamma(cfg, goal.big_c, problem.horizon_max());
  const reachval::BackupConfig backup{gamma, cfg.lambda};

  CollectorConfig cc;
  cc.num_envs = cfg.num_envs;
  cc.z_min = encoder.z_min;
  cc.z_max = encoder.z_max;
  cc.goal = goal;
  cc.rule = EpisodeRule::AugmentedGoal;
  cc.deterministic = true;
  cc.seed = mix_seed(cfg.seed, 2);
  RolloutCollector collector(problem, encoder, cc);

  const long mb_per_epoch = (batch_size + cfg.minibatch_size - 1) / cfg.minibatch_size;
  approx::AdamConfig ac;
  ac.lr = cfg.lr;
  ac.total_steps = iters * cfg.epochs * mb_per_epoch;
  approx::Adam opt(value.num_params(), ac);
  Rng rng(mix_seed(cfg.seed, 3));

  long env_steps = 0;
  Vec adv, targets;
  for (long it = 0; it < iters; ++it) {
    const RolloutBatch batch = collector.collect(actor, value, cfg.steps_per_env);
    env_steps += batch.steps;
    reach_advantages(batch, backup, reachval::GaeWeighting::Renormalized, adv, targets);
    std::vector<int> order(batch.steps);
    std::iota(order.begin(), order.end(), 0);
    double vl_sum = 0.0;
    int count = 0;
    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
      std::shuffle(order.begin(), order.end(), rng);
      for (int start = 0; start < batch.steps; start += cfg.minibatch_size) {
        const int len = std::min(cfg.minibatch_size, batch.steps - start);
        Mat in(batch.inputs.rows(), len);
        Vec tgt(len);
        for (int j = 0; j < len; ++j) {
          in.col(j) = batch.inputs.col(order[start + j]);
          tgt[j] = targets[order[start + j]];
        }
        auto vl = value_loss(value, value.params(), in, tgt);
        opt.step(value.params(), vl.grad);
        if (!value.params().allFinite()) throw NumericalError("value parameters became non-finite");
        vl_sum += vl.loss;
        ++count;
      }
    }
    if (log) {
      LogRow row;
      row.iteration = it;
      row.env_steps = env_steps;
      row.value_loss = vl_sum / count;
      summarize_episodes(batch.finished, row);
      log->push_back(row);
    }
  }
  return value;
}

approx::ValueModel finetune_phase2(const envkit::ReachAvoidProblem& problem, const TrainedModels& phase1,
                                   const Phase2Config& cfg, std::vector<LogRow>* log) {
  const approx::GaussianPolicy& policy = phase1.policy;
  RolloutCollector::Actor actor = [&policy](const Mat& inputs, const std::vector<augment::AugmentedState>&) {
    Mat u = policy.mean(inputs);
    for (int i = 0; i < u.cols(); ++i) u.col(i) = policy.clamp_to_box(u.col(i));
    return u;
  };
  return finetune_value(problem, actor, phase1.encoder, phase1.goal, phase1.value, cfg, log);
}

}  // namespace rcppo::algo
