#include "rcppo/algo.hpp"

#include "json.hpp"

#include <algorithm>
#include <cmath>
#include <ostream>

namespace rcppo::algo {

ZSource bisection_source(const envkit::ReachAvoidProblem& problem, const approx::ValueModel& value,
                         const InputEncoder& encoder, double z_min, double z_max, double tol) {
  return [&problem, &value, encoder, z_min, z_max, tol](const Vec& x, augment::Safety y) {
    const auto sol = bisect_z_star(problem, value, encoder, x, y, z_min, z_max, tol);
    return ZQuery{sol.z_star, sol.status == ZStatus::Feasible};
  };
}

ZSource regressor_source(const envkit::ReachAvoidProblem& problem, const ZRegressor& reg, double z_min,
                         double z_max) {
  return [&problem, &reg, z_min, z_max](const Vec& x, augment::Safety y) {
    const double z = reg.predict(problem, x, y);
    return ZQuery{std::clamp(z, z_min, z_max), z <= z_max};
  };
}

ZSource fixed_source(double z0) {
  return [z0](const Vec&, augment::Safety) { return ZQuery{z0, true}; };
}

Deployment deploy_policy(envkit::ReachAvoidProblem& problem, const approx::GaussianPolicy& policy,
                         const InputEncoder& encoder, const augment::AugmentedGoalParams& goal, const ZSource& source,
                         const Vec& x0) {
  Deployment d;
  const auto y0 = augment::shifted_indicator(problem.in_avoid(x0));
  d.start = source(x0, y0);
  auto s = augment::augmented_reset(problem, x0, d.start.z0);
  d.traj.z0 = d.start.z0;
  d.record.z0 = d.start.z0;
  Vec in(encoder.dim());
  auto note = [&](const augment::AugmentedState& st) {
    d.traj.states.push_back(st);
    d.g.push_back(problem.goal_margin(st.x));
    d.h.push_back(problem.avoid_margin(st.x));
    d.ghat.push_back(augment::augmented_goal(problem, st, goal));
    d.record.violated = d.record.violated || st.y == augment::Safety::Unsafe;
  };
  note(s);
  for (int t = 0; t < problem.horizon_max() && !problem.in_goal(s.x); ++t) {
    encoder.encode_into(problem, s, in);
    auto st = augment::augmented_step(problem, s, policy.mode(in));
    d.traj.actions.push_back(st.executed);
    d.traj.costs.push_back(st.cost);
    d.record.cumulative_cost += st.cost;
    s = std::move(st.next);
    note(s);
  }
  d.record.length = static_cast<int>(d.traj.actions.size());
  d.record.reached = problem.in_goal(s.x) && s.y == augment::Safety::Safe;
  return d;
}

void write_trajectory_csv(std::ostream& os, const envkit::ReachAvoidProblem& problem, const Deployment& d) {
  os << "t";
  for (int i = 0; i < problem.state_dim(); ++i) os << ",x" << i;
  for (int i = 0; i < problem.action_dim(); ++i) os << ",u" << i;
  os << ",g,h,ghat,y,z,cost\n";
  char buf[64];
  auto num = [&](double v) {
    std::snprintf(buf, sizeof buf, "%.10g", v);
    return std::string(buf);
  };
  for (std::size_t t = 0; t < d.traj.states.size(); ++t) {
    const auto& s = d.traj.states[t];
    os << t;
    for (int i = 0; i < s.x.size(); ++i) os << ',' << num(s.x[i]);
    const bool has_action = t < d.traj.actions.size();
    for (int i = 0; i < problem.action_dim(); ++i) os << ',' << (has_action ? num(d.traj.actions[t][i]) : "");
    os << ',' << num(d.g[t]) << ',' << num(d.h[t]) << ',' << num(d.ghat[t]) << ',' << augment::as_real(s.y) << ','
       << num(s.z) << ',' << (has_action ? num(d.traj.costs[t]) : "") << '\n';
  }
}

EvalReport EvalReport::from_records(std::vector<EpisodeRecord> records, int infeasible_starts) {
  EvalReport r;
  r.records = std::move(records);
  r.infeasible_starts = infeasible_starts;
  if (r.records.empty()) return r;
  std::vector<double> costs;
  int violated = 0;
  for (const auto& e : r.records) {
    if (e.reached) costs.push_back(e.cumulative_cost);
    if (e.violated) ++violated;
  }
  const double n = static_cast<double>(r.records.size());
  r.reach_rate = costs.size() / n;
  r.violation_rate = violated / n;
  if (!costs.empty()) {
    double sum = 0.0;
    for (double c : costs) sum += c;
    r.mean_cost = sum / costs.size();
    std::sort(costs.begin(), costs.end());
    const std::size_t m = costs.size();
    r.median_cost = m % 2 ? costs[m / 2] : 0.5 * (costs[m / 2 - 1] + costs[m / 2]);
  }
  return r;
}

void EvalReport::write_jsonl(std::ostream& os) const {
  for (const auto& e : records) {
    nlohmann::ordered_json j{{"z0", e.z0},
                             {"reached", e.reached},
                             {"violated", e.violated},
                             {"cumulative_cost", e.cumulative_cost},
                             {"length", e.length}};
    os << j.dump() << '\n';
  }
}

std::string EvalReport::summary_json() const {
  auto opt = [](const std::optional<double>& v) { return v ? nlohmann::ordered_json(*v) : nlohmann::ordered_json(); };
  nlohmann::ordered_json j{{"episodes", records.size()},
                           {"reach_rate", opt(reach_rate)},
                           {"mean_cost", opt(mean_cost)},
                           {"median_cost", opt(median_cost)},
                           {"violation_rate", opt(violation_rate)},
                           {"infeasible_starts", infeasible_starts}};
  return j.dump(2);
}

EvalReport evaluate(const envkit::ReachAvoidProblem& problem, const approx::GaussianPolicy& policy,
                    const InputEncoder& encoder, const augment::AugmentedGoalParams& goal, const ZSource& source,
                    int episodes, std::uint64_t seed, std::vector<Deployment>* keep) {
  if (episodes < 0) throw ContractError("episode count must be nonnegative");
  auto env = problem.clone();
  env->reseed(mix_seed(seed, 99));
  Rng rng(seed);
  std::vector<EpisodeRecord> recs;
  int infeasible = 0;
  for (int i = 0; i < episodes; ++i) {
    Vec x0 = env->sample_initial(rng);
    for (int tries = 0; env->in_goal(x0); ++tries) {
      if (tries > 10000) throw NumericalError("could not sample an initial state outside G");
      x0 = env->sample_initial(rng);
    }
    auto d = deploy_policy(*env, policy, encoder, goal, source, x0);
    if (!d.start.feasible) ++infeasible;
    recs.push_back(d.record);
    if (keep) keep->push_back(std::move(d));
  }
  return EvalReport::from_records(std::move(recs), infeasible);
}

std::optional<double> budget_soundness(const std::vector<EpisodeRecord>& records, double tol) {
  int reached = 0, sound = 0;
  for (const auto& e : records) {
    if (!e.reached) continue;
    ++reached;
    if (e.cumulative_cost <= e.z0 + tol) ++sound;
  }
  if (reached == 0) return std::nullopt;
  return static_cast<double>(sound) / reached;
}

}  // namespace rcppo::algo
