#include "rcppo/algo.hpp"

#include <cmath>

namespace rcppo::algo {

Vec InputEncoder::encode(const envkit::ReachAvoidProblem& problem, const augment::AugmentedState& s) const {
  Vec out(dim());
  encode_into(problem, s, out);
  return out;
}

void InputEncoder::encode_into(const envkit::ReachAvoidProblem& problem, const augment::AugmentedState& s,
                               Eigen::Ref<Vec> out) const {
  if (out.size() != dim()) throw ContractError("encoder output has the wrong size");
  out.head(obs_dim) = problem.observe(s.x);
  if (with_budget) {
    out[obs_dim] = augment::as_real(s.y);
    out[obs_dim + 1] = (s.z - z_min) / (z_max - z_min);
  }
}

InputEncoder budget_encoder(const envkit::ReachAvoidProblem& problem, double z_min, double z_max) {
  if (!(z_min < z_max)) throw ContractError("budget range needs z_min < z_max");
  return {problem.observation_dim(), true, z_min, z_max};
}

InputEncoder plain_encoder(const envkit::ReachAvoidProblem& problem) {
  return {problem.observation_dim(), false, 0.0, 1.0};
}

double estimate_max_step_cost(const envkit::ReachAvoidProblem& problem, int samples, std::uint64_t seed) {
  Rng rng(seed);
  const Vec& lo = problem.action_low();
  const Vec& hi = problem.action_high();
  double best = 0.0;
  for (int i = 0; i < samples; ++i) {
    const Vec x = problem.sample_state(rng);
    Vec u(problem.action_dim());
    for (int j = 0; j < u.size(); ++j) u[j] = uniform(rng, lo[j], hi[j]);
    best = std::max(best, problem.cost(x, u));
  }
  // the box corners are where quadratic costs peak
  for (int corner = 0; corner < (1 << std::min(problem.action_dim(), 10)); ++corner) {
    Vec u(problem.action_dim());
    for (int j = 0; j < u.size(); ++j) u[j] = (corner >> j) & 1 ? hi[j] : lo[j];
    for (int k = 0; k < 16; ++k) best = std::max(best, problem.cost(problem.sample_state(rng), u));
  }
  return best;
}

void PpoConfig::validate() const {
  if (!(clip_eps > 0.0)) throw ContractError("clip_eps must be positive");
  if (!(entropy_coef >= 0.0)) throw ContractError("entropy_coef must be nonnegative");
  if (epochs < 1) throw ContractError("epochs must be at least 1");
  if (minibatch_size < 1) throw ContractError("minibatch_size must be at least 1");
  if (total_steps < 0) throw ContractError("total_steps must be nonnegative");
  if (num_envs < 1 || steps_per_env < 1) throw ContractError("num_envs and steps_per_env must be positive");
  if (!(gamma > 0.0 && gamma <= 1.0)) throw ContractError("gamma must lie in (0, 1]");
  if (!(lambda > 0.0 && lambda < 1.0)) throw ContractError("lambda must lie in (0, 1)");
  if (!(lr >= 0.0 && value_lr >= 0.0)) throw ContractError("learning rates must be nonnegative");
  if (hidden.empty()) throw ContractError("networks need at least one hidden layer");
}

void Phase1Config::validate() const {
  ppo.validate();
  if (!(ppo.clip_eps < 1.0)) throw ContractError("clip_eps must lie in (0, 1)");
  if (!std::isfinite(z_min)) throw ContractError("z_min must be finite");
  if (!std::isnan(z_max) && !(z_min < z_max)) throw ContractError("z_min must be below z_max");
  if (!std::isnan(big_c) && !(big_c > 0.0)) throw ContractError("big_c must be positive");
}

Phase1Config resolve_defaults(const envkit::ReachAvoidProblem& problem, Phase1Config cfg) {
  if (std::isnan(cfg.z_max))
    cfg.z_max = problem.horizon_max() * estimate_max_step_cost(problem, cfg.estimate_samples, mix_seed(cfg.ppo.seed, 11));
  if (std::isnan(cfg.big_c))
    cfg.big_c = augment::estimate_goal_params(problem, cfg.estimate_samples, mix_seed(cfg.ppo.seed, 12)).big_c;
  cfg.validate();
  return cfg;
}

void Phase2Config::validate() const {
  if (total_steps < 0) throw ContractError("phase-2 total_steps must be nonnegative");
  if (num_envs < 1 || steps_per_env < 1 || epochs < 1 || minibatch_size < 1)
    throw ContractError("phase-2 batch settings must be positive");
  if (!(lambda > 0.0 && lambda < 1.0)) throw ContractError("phase-2 lambda must lie in (0, 1)");
  if (!std::isnan(gamma) && !(gamma > 0.0 && gamma <= 1.0)) throw ContractError("phase-2 gamma must lie in (0, 1]");
  if (!(sign_margin > 0.0)) throw ContractError("sign_margin must be positive");
}

double phase2_gamma(const Phase2Config& cfg, double g_max, int horizon) {
  if (!std::isnan(cfg.gamma)) return cfg.gamma;
  const double lo = reachval::theorem3_min_gamma(g_max, horizon, cfg.sign_margin);
  return lo + 0.5 * (1.0 - lo);
}

}  // namespace rcppo::algo
