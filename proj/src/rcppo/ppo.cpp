#include "rcppo/algo.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <ostream>

namespace rcppo::algo {

approx::MlpSpec trunk_spec(int input_dim, const std::vector<int>& hidden, int output_dim) {
  approx::MlpSpec s;
  s.input_dim = input_dim;
  s.hidden = hidden;
  s.output_dim = output_dim;
  return s;
}

namespace {

long updates_per_iteration(const PpoConfig& cfg) {
  const long mb = (cfg.batch_size() + cfg.minibatch_size - 1) / cfg.minibatch_size;
  return mb * cfg.epochs;
}

approx::AdamConfig adam_for(const PpoConfig& cfg, double lr) {
  approx::AdamConfig a;
  a.lr = lr;
  a.total_steps = cfg.num_iterations() * updates_per_iteration(cfg);
  return a;
}

std::string fmt_opt(const std::optional<double>& v) {
  if (!v) return "";
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.10g", *v);
  return buf;
}

std::string fmt(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.10g", v);
  return buf;
}

}  // namespace

void write_log_csv(std::ostream& os, const std::vector<LogRow>& rows) {
  os << "iteration,env_steps,reach_rate,mean_cost_reached,policy_loss,value_loss,entropy,kl_estimate\n";
  for (const auto& r : rows)
    os << r.iteration << ',' << r.env_steps << ',' << fmt_opt(r.reach_rate) << ',' << fmt_opt(r.mean_cost_reached)
       << ',' << fmt(r.policy_loss) << ',' << fmt(r.value_loss) << ',' << fmt(r.entropy) << ','
       << fmt(r.kl_estimate) << '\n';
}

PpoUpdater::PpoUpdater(approx::GaussianPolicy& policy, approx::ValueModel& value, const PpoConfig& cfg)
    : policy_(policy),
      value_(value),
      cfg_(cfg),
      policy_opt_(policy.num_params(), adam_for(cfg, cfg.lr)),
      value_opt_(value.num_params(), adam_for(cfg, cfg.value_lr)),
      rng_(mix_seed(cfg.seed, 3)) {
  cfg_.validate();
}

LogRow PpoUpdater::update(const RolloutBatch& batch, const Vec& advantages, const Vec& targets) {
  const int n = batch.steps;
  if (advantages.size() != n || targets.size() != n) throw ContractError("advantage arrays do not match the batch");
  const long iters = std::max(1L, cfg_.num_iterations());
  const double ent_coef = cfg_.entropy_coef * std::max(0.0, 1.0 - static_cast<double>(iteration_) / iters);
  const Vec adv = standardize(advantages);

  std::vector<int> order(n);
  std::iota(order.begin(), order.end(), 0);
  LogRow row;
  double pl_sum = 0.0, vl_sum = 0.0, kl_sum = 0.0;
  int count = 0;
  const int mb = std::min(cfg_.minibatch_size, n);
  for (int epoch = 0; epoch < cfg_.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng_);
    for (int start = 0; start < n; start += mb) {
      const int len = std::min(mb, n - start);
      Mat in(batch.inputs.rows(), len), act(batch.raw_actions.rows(), len);
      Vec old_lp(len), a(len), tgt(len);
      for (int j = 0; j < len; ++j) {
        const int i = order[start + j];
        in.col(j) = batch.inputs.col(i);
        act.col(j) = batch.raw_actions.col(i);
        old_lp[j] = batch.log_probs[i];
        a[j] = adv[i];
        tgt[j] = targets[i];
      }
      auto pl = ppo_policy_loss(policy_, policy_.params(), in, act, old_lp, a, cfg_.clip_eps, ent_coef);
      if (!std::isfinite(pl.loss)) throw NumericalError("policy loss is not finite");
      approx::clip_grad_norm(pl.grad, cfg_.max_grad_norm);
      policy_opt_.step(policy_.params(), pl.grad);
      policy_.clamp_log_std();

      // the value loss is in raw units; Adam is invariant to its scale
      auto vl = value_loss(value_, value_.params(), in, tgt);
      value_opt_.step(value_.params(), vl.grad);

      if (!policy_.params().allFinite() || !value_.params().allFinite())
        throw NumericalError("parameters became non-finite");
      pl_sum += pl.surrogate;
      vl_sum += vl.loss;
      kl_sum += pl.approx_kl;
      ++count;
    }
  }
  ++iteration_;
  row.policy_loss = pl_sum / count;
  row.value_loss = vl_sum / count;
  row.kl_estimate = kl_sum / count;
  row.entropy = policy_.entropy();
  return row;
}

}  // namespace rcppo::algo
