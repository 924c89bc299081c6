#include "rcppo/approx.hpp"

#include <cmath>
#include <numbers>

namespace rcppo::approx {

namespace {
constexpr double kHalfLog2Pi = 0.91893853320467274178;
}

GaussianPolicy::GaussianPolicy(MlpSpec trunk, Vec action_low, Vec action_high)
    : trunk_(std::move(trunk)), low_(std::move(action_low)), high_(std::move(action_high)) {
  if (low_.size() != action_dim() || high_.size() != action_dim())
    throw ContractError("action bounds do not match the policy output dimension");
  if ((high_.array() < low_.array()).any()) throw ContractError("action box has high < low");
  params_ = Vec::Zero(num_params());
}

void GaussianPolicy::initialize(Rng& rng, double init_log_std, double output_gain) {
  params_.head(trunk_.num_params()) = trunk_.init(rng, std::sqrt(2.0), output_gain);
  params_.tail(action_dim()).setConstant(init_log_std);
  clamp_log_std();
}

void GaussianPolicy::clamp_log_std() {
  auto ls = params_.tail(action_dim());
  ls = ls.cwiseMax(kLogStdMin).cwiseMin(kLogStdMax);
}

GaussianPolicy::Sample GaussianPolicy::sample(const Vec& input, Rng& rng) const {
  const Vec mu = trunk_.forward(params_.head(trunk_.num_params()), input).col(0);
  const Vec ls = log_std();
  std::normal_distribution<double> normal(0.0, 1.0);
  Sample s;
  s.raw.resize(action_dim());
  double lp = 0.0;
  for (int i = 0; i < action_dim(); ++i) {
    const double eps = normal(rng);
    s.raw[i] = mu[i] + std::exp(ls[i]) * eps;
    lp += -0.5 * eps * eps - ls[i] - kHalfLog2Pi;
  }
  s.executed = clamp_to_box(s.raw);
  s.log_prob = lp;
  return s;
}

Vec GaussianPolicy::mode(const Vec& input) const {
  return clamp_to_box(trunk_.forward(params_.head(trunk_.num_params()), input).col(0));
}

double GaussianPolicy::log_prob(const Vec& input, const Vec& raw_action) const {
  const Mat mu = trunk_.forward(params_.head(trunk_.num_params()), input);
  return log_prob_batch(mu, raw_action)[0];
}

double GaussianPolicy::entropy() const {
  return (log_std().array() + 0.5 + kHalfLog2Pi).sum();
}

Vec GaussianPolicy::log_prob_batch(const Mat& means, const Mat& raw_actions) const {
  if (means.rows() != action_dim() || raw_actions.rows() != action_dim() || means.cols() != raw_actions.cols())
    throw ContractError("log_prob_batch shape mismatch");
  const Vec ls = log_std();
  const Eigen::ArrayXd inv_std = (-ls.array()).exp();
  const Mat zs = ((raw_actions - means).array().colwise() * inv_std).matrix();
  Vec out = -0.5 * zs.colwise().squaredNorm().transpose();
  out.array() -= ls.sum() + action_dim() * kHalfLog2Pi;
  return out;
}

ValueModel::ValueModel(MlpSpec net, double scale) : net_(std::move(net)), scale_(scale) {
  if (net_.spec().output_dim != 1) throw ContractError("value model must have a scalar output");
  if (!(scale_ > 0.0) || !std::isfinite(scale_)) throw ContractError("value scale must be positive");
  params_ = Vec::Zero(net_.num_params());
}

void ValueModel::initialize(Rng& rng, double output_gain) { params_ = net_.init(rng, std::sqrt(2.0), output_gain); }

Vec ValueModel::predict(const Mat& inputs) const { return scale_ * net_.forward(params_, inputs).row(0).transpose(); }

double ValueModel::predict(const Vec& input) const { return predict(Mat(input))[0]; }

}  // namespace rcppo::approx
