#include "rcppo/baselines.hpp"

#include <cmath>
#include <limits>

namespace rcppo::baselines {

namespace af = envkit::appendix_f;

envkit::appendix_f::Outcome appendix_f_expectation(const envkit::TabularMDP& mdp, double p_a, double p_b) {
  if (mdp.num_states != 6 || mdp.num_actions != 2) throw ContractError("not the two-state counterexample fixture");
  auto branch = [&](int s, double p_left, const std::vector<double>& table) {
    return p_left * table[mdp.idx(s, af::Left)] + (1.0 - p_left) * table[mdp.idx(s, af::Right)];
  };
  const double r = mdp.initial[af::A] * branch(af::A, p_a, mdp.reward) +
                   mdp.initial[af::B] * branch(af::B, p_b, mdp.reward);
  const double c = mdp.initial[af::A] * branch(af::A, p_a, mdp.cost) +
                   mdp.initial[af::B] * branch(af::B, p_b, mdp.cost);
  return {r, c};
}

AppendixFSolution appendix_f_analytic(AppendixFMode mode, double parameter) {
  // R = 10 - 5 p_A + 10 p_B and C = 10 - 5 p_A + 15 p_B
  AppendixFSolution s;
  if (mode == AppendixFMode::Scalarized) {
    const double w = parameter;
    if (!(w >= 0.0)) throw ContractError("scalarisation weight must be nonnegative");
    // objective -R + w C has slope 5 (1 - w) in p_A and 15 w - 10 in p_B
    s.p_a = w >= 1.0 ? 1.0 : 0.0;
    s.p_b = w <= 2.0 / 3.0 ? 1.0 : 0.0;
    s.unique = w != 1.0 && std::abs(w - 2.0 / 3.0) > 1e-15;
  } else {
    const double x = parameter;
    // R rises with p_B and falls with p_A while C rises with p_B, so spend the
    // budget on p_B with p_A = 0, then raise p_A only to cut cost when needed
    if (x < 10.0) {
      s.feasible = x >= 5.0;
      s.p_a = s.feasible ? (10.0 - x) / 5.0 : 1.0;
      s.p_b = 0.0;
    } else {
      s.p_a = 0.0;
      s.p_b = std::min(1.0, (x - 10.0) / 15.0);
    }
  }
  const auto o = af::expected(s.p_a, s.p_b);
  s.reward = o.reward;
  s.cost = o.cost;
  return s;
}

AppendixFSolution appendix_f_enumerate(const envkit::TabularMDP& mdp, AppendixFMode mode, double parameter,
                                       double resolution) {
  if (!(resolution > 0.0 && resolution <= 1.0)) throw ContractError("resolution must lie in (0, 1]");
  const int n = static_cast<int>(std::lround(1.0 / resolution));
  AppendixFSolution best;
  best.feasible = false;
  double best_obj = std::numeric_limits<double>::infinity();
  int ties = 0;
  constexpr double kTieTol = 1e-9;
  // the expectation is affine, so tabulate the four corner coefficients once
  const auto o00 = appendix_f_expectation(mdp, 0.0, 0.0);
  const auto o10 = appendix_f_expectation(mdp, 1.0, 0.0);
  const auto o01 = appendix_f_expectation(mdp, 0.0, 1.0);
  for (int i = 0; i <= n; ++i) {
    const double pa = static_cast<double>(i) / n;
    for (int j = 0; j <= n; ++j) {
      const double pb = static_cast<double>(j) / n;
      const double r = o00.reward + pa * (o10.reward - o00.reward) + pb * (o01.reward - o00.reward);
      const double c = o00.cost + pa * (o10.cost - o00.cost) + pb * (o01.cost - o00.cost);
      double obj;
      if (mode == AppendixFMode::Scalarized) {
        obj = -r + parameter * c;
      } else {
        if (c > parameter + 1e-12) continue;
        obj = -r;
      }
      if (obj < best_obj - kTieTol) {
        best_obj = obj;
        best = {pa, pb, r, c, true, true};
        ties = 0;
      } else if (std::abs(obj - best_obj) <= kTieTol) {
        ++ties;
      }
    }
  }
  best.unique = best.feasible && ties == 0;
  return best;
}

}  // namespace rcppo::baselines
