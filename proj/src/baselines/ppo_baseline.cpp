#include "rcppo/baselines.hpp"

#include <algorithm>
#include <cmath>

namespace rcppo::baselines {

double baseline_value_scale(const envkit::ReachAvoidProblem& problem, const BaselineConfig& cfg) {
  const auto& r = cfg.reward;
  const double steps = std::min<double>(problem.horizon_max(), 1.0 / (1.0 - std::min(cfg.ppo.gamma, 0.999)));
  const double c_max = algo::estimate_max_step_cost(problem, 2000, mix_seed(cfg.ppo.seed, 21));
  double scale = std::max({1.0, std::abs(r.r_goal), r.p_goal * steps, r.beta * (r.c_fail + c_max) * steps});
  if (r.shaping_enabled) {
    Rng rng(mix_seed(cfg.ppo.seed, 22));
    double d = 0.0;
    for (int i = 0; i < 200; ++i) d = std::max(d, problem.goal_distance(problem.sample_state(rng)));
    scale = std::max(scale, r.shaping_k * d);
  }
  return scale;
}

void standard_advantages(const algo::RolloutBatch& batch, const Vec& rewards, double gamma, double lambda,
                         Vec& advantages, Vec& targets) {
  if (rewards.size() != batch.steps) throw ContractError("reward array does not match the batch");
  advantages.resize(batch.steps);
  targets.resize(batch.steps);
  for (const auto& seg : batch.segments) {
    // a goal entry is terminal with value 0; truncation and cuts bootstrap
    double next_v = seg.kind == algo::TerminalKind::Reached ? 0.0 : seg.bootstrap_value;
    double acc = 0.0;
    for (int t = seg.end - 1; t >= seg.begin; --t) {
      const double delta = rewards[t] + gamma * next_v - batch.values[t];
      acc = delta + gamma * lambda * acc;
      advantages[t] = acc;
      targets[t] = acc + batch.values[t];
      next_v = batch.values[t];
    }
  }
}

algo::TrainedModels train_ppo_baseline(const envkit::ReachAvoidProblem& problem, const BaselineConfig& cfg,
                                       const algo::ProgressFn& progress) {
  cfg.validate();
  const auto& ppo = cfg.ppo;
  const algo::InputEncoder enc = algo::plain_encoder(problem);
  const auto goal = augment::estimate_goal_params(problem, 2000, mix_seed(ppo.seed, 12));
  algo::TrainedModels m{
      approx::GaussianPolicy(algo::trunk_spec(enc.dim(), ppo.hidden, problem.action_dim()), problem.action_low(),
                             problem.action_high()),
      approx::ValueModel(algo::trunk_spec(enc.dim(), ppo.hidden, 1), baseline_value_scale(problem, cfg)),
      enc, goal, {}};
  Rng init_rng(mix_seed(ppo.seed, 1));
  m.policy.initialize(init_rng, ppo.init_log_std, 0.01);
  m.value.initialize(init_rng, 0.1);
  if (ppo.num_iterations() == 0) return m;

  algo::CollectorConfig cc;
  cc.num_envs = ppo.num_envs;
  cc.goal = goal;
  cc.rule = algo::EpisodeRule::GoalEntry;
  cc.seed = mix_seed(ppo.seed, 2);
  algo::RolloutCollector collector(problem, enc, cc);
  algo::PpoUpdater updater(m.policy, m.value, ppo);

  long env_steps = 0;
  Vec rewards, adv, targets;
  for (long it = 0; it < ppo.num_iterations(); ++it) {
    const algo::RolloutBatch batch = collector.collect(m.policy, m.value, ppo.steps_per_env);
    env_steps += batch.steps;
    rewards.resize(batch.steps);
    for (int t = 0; t < batch.steps; ++t)
      rewards[t] = lagrangian_reward(problem, batch.states[t].x, batch.costs[t], batch.next_x[t], cfg.reward);
    standard_advantages(batch, rewards, ppo.gamma, ppo.lambda, adv, targets);
    algo::LogRow row = updater.update(batch, adv, targets);
    row.iteration = it;
    row.env_steps = env_steps;
    int reached = 0;
    double cost = 0.0;
    for (const auto& e : batch.finished)
      if (e.reached) {
        ++reached;
        cost += e.cumulative_cost;
      }
    if (!batch.finished.empty()) row.reach_rate = static_cast<double>(reached) / batch.finished.size();
    if (reached > 0) row.mean_cost_reached = cost / reached;
    m.log.push_back(row);
    if (progress) progress(row);
  }
  return m;
}

}  // namespace rcppo::baselines
