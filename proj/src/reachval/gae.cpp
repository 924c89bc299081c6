#include "rcppo/reachval.hpp"

#include <cmath>

namespace rcppo::reachval {

namespace {

void check_inputs(std::span<const double> ghat, std::span<const double> values, const BackupConfig& cfg) {
  if (ghat.empty()) throw ContractError("advantage estimation needs a non-empty trajectory");
  if (ghat.size() != values.size()) throw ContractError("ghat and value arrays differ in length");
  if (!(cfg.gamma > 0.0 && cfg.gamma <= 1.0)) throw ContractError("gamma must lie in (0, 1]");
  if (!(cfg.lambda > 0.0 && cfg.lambda < 1.0)) throw ContractError("lambda must lie in (0, 1)");
}

// Walks k = 1..L, keeping chain[t] = phi^(k)(g^_t, .., g^_{t+k-1}, V_{t+k}) for
// every t that still has k steps left, and hands each k-step advantage to `sink`.
template <class Sink>
void for_each_k_step(std::span<const double> ghat, std::span<const double> values, double bootstrap, double gamma,
                     Sink&& sink) {
  const std::size_t len = ghat.size();
  std::vector<double> chain(len + 1);
  for (std::size_t t = 0; t < len; ++t) chain[t] = values[t];
  chain[len] = bootstrap;
  for (std::size_t k = 1; k <= len; ++k) {
    // after this pass chain[t] holds the k-chain for t <= len - k
    for (std::size_t t = 0; t + k <= len; ++t) {
      chain[t] = discounted_backup(ghat[t], chain[t + 1], gamma);
      sink(t, k, chain[t] - values[t]);
    }
  }
}

double weight_total(std::size_t n, double lambda, GaeWeighting w) {
  if (w == GaeWeighting::Literal) return 1.0 - lambda;
  // sum_{k=1}^n lambda^k
  return lambda * (1.0 - std::pow(lambda, static_cast<double>(n))) / (1.0 - lambda);
}

}  // namespace

std::vector<AdvantageRecord> gae_advantages(std::span<const double> ghat, std::span<const double> values,
                                            double bootstrap, const BackupConfig& cfg, GaeWeighting weighting) {
  check_inputs(ghat, values, cfg);
  const std::size_t len = ghat.size();
  std::vector<AdvantageRecord> out(len);
  for (std::size_t t = 0; t < len; ++t) out[t].k_step_adv.resize(len - t);
  for_each_k_step(ghat, values, bootstrap, cfg.gamma,
                  [&](std::size_t t, std::size_t k, double adv) { out[t].k_step_adv[k - 1] = adv; });
  for (std::size_t t = 0; t < len; ++t) {
    const double norm = weight_total(len - t, cfg.lambda, weighting);
    double acc = 0.0, lk = 1.0;
    for (double a : out[t].k_step_adv) {
      lk *= cfg.lambda;
      acc += lk * a;
    }
    out[t].gae_adv = acc / norm;
    out[t].lambda_return = out[t].gae_adv + values[t];
  }
  return out;
}

void gae_advantages_into(std::span<const double> ghat, std::span<const double> values, double bootstrap,
                         const BackupConfig& cfg, GaeWeighting weighting, std::span<double> adv_out,
                         std::span<double> return_out) {
  check_inputs(ghat, values, cfg);
  const std::size_t len = ghat.size();
  if (adv_out.size() != len || return_out.size() != len) throw ContractError("output spans have the wrong length");
  std::vector<double> lambda_pow(len + 1, 1.0);
  for (std::size_t k = 1; k <= len; ++k) lambda_pow[k] = lambda_pow[k - 1] * cfg.lambda;
  std::fill(adv_out.begin(), adv_out.end(), 0.0);
  for_each_k_step(ghat, values, bootstrap, cfg.gamma,
                  [&](std::size_t t, std::size_t k, double adv) { adv_out[t] += lambda_pow[k] * adv; });
  for (std::size_t t = 0; t < len; ++t) {
    adv_out[t] /= weight_total(len - t, cfg.lambda, weighting);
    return_out[t] = adv_out[t] + values[t];
  }
}

}  // namespace rcppo::reachval
