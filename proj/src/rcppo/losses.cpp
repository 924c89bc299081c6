#include "rcppo/algo.hpp"

#include <algorithm>
#include <cmath>

namespace rcppo::algo {

PolicyLoss ppo_policy_loss(const approx::GaussianPolicy& policy, const Vec& params, const Mat& inputs,
                           const Mat& raw_actions, const Vec& old_log_probs, const Vec& advantages, double clip_eps,
                           double entropy_coef) {
  const int n = static_cast<int>(inputs.cols());
  const int ad = policy.action_dim();
  if (n == 0) throw ContractError("policy loss needs at least one sample");
  if (raw_actions.cols() != n || old_log_probs.size() != n || advantages.size() != n || raw_actions.rows() != ad)
    throw ContractError("policy loss inputs disagree in shape");
  if (params.size() != policy.num_params()) throw ContractError("policy parameter vector has the wrong size");
  if (!(clip_eps > 0.0)) throw ContractError("clip_eps must be positive");

  const auto& trunk = policy.trunk();
  approx::Mlp::Cache cache;
  const Mat mu = trunk.forward(params.head(trunk.num_params()), inputs, cache);
  const Vec log_std = params.tail(ad).cwiseMax(approx::kLogStdMin).cwiseMin(approx::kLogStdMax);
  const Eigen::ArrayXd inv_std = (-log_std.array()).exp();
  const Mat zs = ((raw_actions - mu).array().colwise() * inv_std).matrix();
  constexpr double kHalfLog2Pi = 0.91893853320467274178;
  const Vec logp = (-0.5 * zs.colwise().squaredNorm().transpose()).array() - (log_std.sum() + ad * kHalfLog2Pi);

  const double lo = 1.0 - clip_eps, hi = 1.0 + clip_eps;
  Vec dlogp = Vec::Zero(n);
  std::vector<char> valid(n, 1);
  PolicyLoss out;
  double sum = 0.0, kl = 0.0;
  int clipped = 0;
  for (int i = 0; i < n; ++i) {
    const double r = std::exp(logp[i] - old_log_probs[i]);
    if (!std::isfinite(r) || !std::isfinite(advantages[i])) {
      valid[i] = 0;
      ++out.excluded;
      continue;
    }
    const double a = advantages[i];
    const double rc = std::clamp(r, lo, hi);
    const double unclipped = -r * a, clipped_val = -rc * a;
    sum += std::max(unclipped, clipped_val);
    if (unclipped >= clipped_val) dlogp[i] = -a * r;
    if (r < lo || r > hi) ++clipped;
    kl += (r - 1.0) - std::log(r);
  }
  if (out.excluded * 100 > n) throw NumericalError("more than 1% of importance ratios are non-finite");
  const int m = n - out.excluded;
  if (m == 0) throw NumericalError("every importance ratio is non-finite");
  dlogp /= m;
  out.surrogate = sum / m;
  out.clip_fraction = static_cast<double>(clipped) / m;
  out.approx_kl = kl / m;
  out.entropy = (log_std.array() + 0.5 + kHalfLog2Pi).sum();
  out.loss = out.surrogate - entropy_coef * out.entropy;

  // d logp / d mu = (a - mu) / sigma^2 ; d logp / d log_std = z^2 - 1
  Mat d_mu = (zs.array().colwise() * inv_std).matrix();
  for (int i = 0; i < n; ++i) d_mu.col(i) *= valid[i] ? dlogp[i] : 0.0;
  out.grad = Vec::Zero(policy.num_params());
  trunk.backward(params.head(trunk.num_params()), cache, d_mu, out.grad.head(trunk.num_params()));
  Eigen::Ref<Vec> g_ls = out.grad.tail(ad);
  for (int i = 0; i < n; ++i) {
    if (!valid[i] || dlogp[i] == 0.0) continue;
    g_ls += dlogp[i] * (zs.col(i).array().square() - 1.0).matrix();
  }
  // entropy depends on log_std only; the clamp is inactive inside its range
  for (int j = 0; j < ad; ++j) {
    const double raw = params[trunk.num_params() + j];
    if (raw > approx::kLogStdMin && raw < approx::kLogStdMax) g_ls[j] -= entropy_coef;
  }
  for (int j = 0; j < ad; ++j) {
    const double raw = params[trunk.num_params() + j];
    if (raw < approx::kLogStdMin || raw > approx::kLogStdMax) g_ls[j] = 0.0;
  }
  return out;
}

ValueLoss value_loss(const approx::ValueModel& value, const Vec& params, const Mat& inputs, const Vec& targets) {
  const int n = static_cast<int>(inputs.cols());
  if (n == 0 || targets.size() != n) throw ContractError("value loss inputs disagree in shape");
  approx::Mlp::Cache cache;
  const Vec pred = value.scale() * value.net().forward(params, inputs, cache).row(0).transpose();
  const Vec diff = pred - targets;
  ValueLoss out;
  out.loss = diff.squaredNorm() / n;
  if (!std::isfinite(out.loss)) throw NumericalError("value loss is not finite");
  const Mat d_out = (2.0 * value.scale() / n) * diff.transpose();
  out.grad = Vec::Zero(params.size());
  value.net().backward(params, cache, d_out, out.grad);
  return out;
}

Vec standardize(const Vec& v) {
  if (v.size() == 0) return v;
  const double mean = v.mean();
  const Vec c = v.array() - mean;
  const double sd = std::sqrt(c.squaredNorm() / v.size());
  if (!(sd > 1e-12)) return Vec::Zero(v.size());
  return c / sd;
}

}  // namespace rcppo::algo
