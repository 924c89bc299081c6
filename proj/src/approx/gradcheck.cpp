#include "rcppo/approx.hpp"

#include <cmath>

namespace rcppo::approx {

GradCheckResult check_gradient(const std::function<double(const Vec&)>& loss, const Vec& params,
                               const Vec& analytic, double eps, std::span<const int> coords) {
  if (analytic.size() != params.size()) throw ContractError("analytic gradient has the wrong size");
  std::vector<int> all;
  if (coords.empty()) {
    all.resize(params.size());
    for (int i = 0; i < params.size(); ++i) all[i] = i;
    coords = all;
  }
  Vec p = params;
  Vec a(coords.size()), n(coords.size());
  for (std::size_t j = 0; j < coords.size(); ++j) {
    const int i = coords[j];
    if (i < 0 || i >= params.size()) throw ContractError("gradient check coordinate out of range");
    p[i] = params[i] + eps;
    const double up = loss(p);
    p[i] = params[i] - eps;
    const double down = loss(p);
    p[i] = params[i];
    n[j] = (up - down) / (2.0 * eps);
    a[j] = analytic[i];
  }
  GradCheckResult r;
  r.coordinates = static_cast<int>(coords.size());
  const double denom = std::max({a.norm(), n.norm(), 1e-300});
  r.relative_error = (a - n).norm() / denom;
  r.max_abs_error = coords.empty() ? 0.0 : (a - n).cwiseAbs().maxCoeff();
  return r;
}

}  // namespace rcppo::approx
