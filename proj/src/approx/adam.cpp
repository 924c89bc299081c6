#include "rcppo/approx.hpp"

#include <cmath>

namespace rcppo::approx {

Adam::Adam(int num_params, AdamConfig cfg) : cfg_(cfg), m_(Vec::Zero(num_params)), v_(Vec::Zero(num_params)) {
  if (!(cfg_.lr >= 0.0)) throw ContractError("Adam learning rate must be nonnegative");
}

double Adam::current_lr() const {
  if (cfg_.total_steps <= 0) return cfg_.lr;
  const double frac = 1.0 - static_cast<double>(t_ + 1) / static_cast<double>(cfg_.total_steps);
  return cfg_.lr * std::max(0.0, frac);
}

void Adam::step(Eigen::Ref<Vec> params, const Vec& grad) {
  if (params.size() != m_.size() || grad.size() != m_.size()) throw ContractError("Adam shape mismatch");
  const double lr = current_lr();
  ++t_;
  m_ = cfg_.beta1 * m_ + (1.0 - cfg_.beta1) * grad;
  v_ = cfg_.beta2 * v_ + (1.0 - cfg_.beta2) * grad.cwiseProduct(grad);
  if (lr == 0.0) return;
  const double c1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(t_));
  const double c2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(t_));
  params.array() -= lr * (m_.array() / c1) / ((v_.array() / c2).sqrt() + cfg_.eps);
}

double clip_grad_norm(Vec& grad, double max_norm) {
  const double n = grad.norm();
  if (max_norm > 0.0 && n > max_norm) grad *= max_norm / n;
  return n;
}

}  // namespace rcppo::approx
