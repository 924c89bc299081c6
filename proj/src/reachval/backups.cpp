#include "rcppo/reachval.hpp"

#include <cmath>

namespace rcppo::reachval {

double phi_reduce(std::span<const double> values, double gamma) {
  if (values.size() < 2) throw ContractError("phi_reduce needs at least two arguments");
  double acc = values.back();
  for (std::size_t i = values.size() - 1; i-- > 0;) acc = discounted_backup(values[i], acc, gamma);
  return acc;
}

double theorem3_min_gamma(double g_max, int t_max, double eps) {
  if (!(g_max > 0.0) || !(eps > 0.0) || t_max < 1)
    throw ContractError("theorem3_min_gamma requires g_max > 0, eps > 0, t_max >= 1");
  // gamma^T / (1 - gamma^T) = g_max / eps  <=>  gamma^T = g_max / (g_max + eps)
  return std::exp(std::log(g_max / (g_max + eps)) / t_max);
}

}  // namespace rcppo::reachval
