#include "doctest.h"

#include "rcppo/algo.hpp"

#include <cmath>
#include <sstream>

using namespace rcppo;
using namespace rcppo::algo;
using doctest::Approx;

namespace {

approx::GaussianPolicy small_policy(int in_dim, int act_dim, std::uint64_t seed, double log_std = -0.3) {
  approx::GaussianPolicy p(trunk_spec(in_dim, {16, 16}, act_dim), Vec::Constant(act_dim, -1.0),
                           Vec::Constant(act_dim, 1.0));
  Rng rng(seed);
  p.initialize(rng, log_std, 1.0);
  return p;
}

Mat random_mat(Rng& rng, int rows, int cols, double scale = 1.0) {
  Mat m(rows, cols);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = uniform(rng, -scale, scale);
  return m;
}

// Linear value model v = scale * (w . input + b), no hidden layer.
approx::ValueModel linear_value(const Vec& w, double b, double scale = 1.0) {
  approx::MlpSpec spec;
  spec.input_dim = static_cast<int>(w.size());
  spec.hidden.clear();
  approx::ValueModel v(spec, scale);
  v.params().head(w.size()) = w;
  v.params()[w.size()] = b;
  return v;
}

// Corridor 0 -> 1 -> 2 -> 3 (goal) of unit costs; every episode starts in cell 0.
envkit::TabularProblem corridor() {
  auto m = envkit::grid_reachavoid_make(4, 1, {}, {3, 0}, std::vector<double>(4, 1.0));
  std::fill(m.initial.begin(), m.initial.end(), 0.0);
  m.initial[0] = 1.0;
  return envkit::TabularProblem(m, 16);
}

RolloutCollector::Actor constant_actor(int action) {
  return [action](const Mat& inputs, const std::vector<augment::AugmentedState>&) {
    return Mat::Constant(1, inputs.cols(), action + 0.5);
  };
}

}  // namespace

TEST_CASE("input encoding") {
  auto p = envkit::pendulum_make();
  const auto enc = budget_encoder(*p, -1.0, 199.0);
  CHECK(enc.dim() == 5);
  Vec x(2);
  x << 0.0, 4.0;
  const Vec in = enc.encode(*p, {x, augment::Safety::Unsafe, 99.0});
  CHECK(in[0] == 1.0);
  CHECK(in[1] == 0.0);
  CHECK(in[2] == 0.5);
  CHECK(in[3] == 1.0);
  CHECK(in[4] == Approx(0.5));
  CHECK(plain_encoder(*p).dim() == 3);
}

TEST_CASE("collector samples budgets from the configured range") {
  auto p = envkit::pendulum_make();
  const auto enc = budget_encoder(*p, 0.0, 10.0);
  CollectorConfig cc;
  cc.num_envs = 4;
  cc.z_min = cc.z_max = 7.0;
  cc.goal = {987.0};
  cc.seed = 3;
  RolloutCollector col(*p, enc, cc);
  auto pol = small_policy(enc.dim(), 1, 1);
  const auto val = linear_value(Vec::Zero(enc.dim()), 1.0);
  const auto batch = col.collect(pol, val, 300);
  CHECK(batch.steps == 1200);
  REQUIRE_FALSE(batch.finished.empty());
  for (const auto& e : batch.finished) CHECK(e.z0 == 7.0);
  for (const auto& s : batch.segments) CHECK(s.z0 == 7.0);
  for (int t = 0; t < batch.steps; ++t)
    if (batch.episode_start[t]) CHECK(batch.states[t].z == 7.0);
}

TEST_CASE("deterministic collection repeats under a fixed seed") {
  auto p = envkit::pendulum_make();
  const auto enc = budget_encoder(*p, 0.0, 100.0);
  auto pol = small_policy(enc.dim(), 1, 2);
  pol.params().setZero();
  const auto val = linear_value(Vec::Zero(enc.dim()), 1.0);
  CollectorConfig cc;
  cc.num_envs = 3;
  cc.z_min = 0.0;
  cc.z_max = 100.0;
  cc.goal = {987.0};
  cc.deterministic = true;
  cc.seed = 17;
  RolloutCollector a(*p, enc, cc), b(*p, enc, cc);
  const auto ba = a.collect(pol, val, 64), bb = b.collect(pol, val, 64);
  CHECK(ba.inputs == bb.inputs);
  CHECK(ba.raw_actions == bb.raw_actions);
  CHECK(ba.raw_actions.isZero());
  CHECK(ba.costs == bb.costs);
  CHECK(ba.ghat == bb.ghat);
}

TEST_CASE("episode reaching the augmented goal terminates with a reached segment") {
  auto p = corridor();
  const auto enc = budget_encoder(p, 0.0, 20.0);
  CollectorConfig cc;
  cc.num_envs = 1;
  cc.z_min = cc.z_max = 10.0;
  cc.goal = {10.0};
  RolloutCollector col(p, enc, cc);
  const auto val = linear_value(Vec::Zero(enc.dim()), 0.0);
  const auto batch = col.collect(constant_actor(envkit::kRight), val, 3);
  REQUIRE(batch.segments.size() == 1);
  const auto& seg = batch.segments[0];
  CHECK(seg.kind == TerminalKind::Reached);
  CHECK(seg.end - seg.begin == 3);
  CHECK(seg.terminal_ghat == -7.0);
  CHECK(seg.bootstrap_value == seg.terminal_ghat);
  REQUIRE(batch.finished.size() == 1);
  CHECK(batch.finished[0].reached);
  CHECK(batch.finished[0].length == 3);
  CHECK(batch.finished[0].cumulative_cost == 3.0);
}

TEST_CASE("segments that run out of budget continue until the step cap") {
  auto p = corridor();
  const auto enc = budget_encoder(p, 0.0, 20.0);
  CollectorConfig cc;
  cc.num_envs = 1;
  cc.z_min = cc.z_max = 1.0;
  cc.goal = {10.0};
  RolloutCollector col(p, enc, cc);
  const auto val = linear_value(Vec::Zero(enc.dim()), 2.5);
  const auto batch = col.collect(constant_actor(envkit::kRight), val, 20);
  REQUIRE(batch.segments.size() == 2);
  CHECK(batch.segments[0].kind == TerminalKind::Truncated);
  CHECK(batch.segments[0].end == 16);
  CHECK(batch.segments[0].bootstrap_value == 2.5);
  CHECK(batch.segments[1].kind == TerminalKind::Cut);
  // Entered G safely but over budget: reached for reporting, not for the augmented goal.
  CHECK(batch.finished[0].reached);
  CHECK(batch.finished[0].cumulative_cost == 3.0);
}

TEST_CASE("clipped loss hand case") {
  auto pol = small_policy(2, 1, 3);
  Rng rng(4);
  const Mat in = random_mat(rng, 2, 2);
  const Mat act = random_mat(rng, 1, 2);
  const Vec lp = pol.log_prob_batch(pol.mean(in), act);
  Vec old(2);
  old << lp[0] - std::log(1.5), lp[1] - std::log(0.5);
  Vec adv(2);
  adv << 1.0, -1.0;
  const auto l = ppo_policy_loss(pol, pol.params(), in, act, old, adv, 0.2, 0.0);
  CHECK(l.loss == Approx(-0.2).epsilon(1e-12));
  CHECK(l.clip_fraction == 1.0);
  // Both samples sit on the flat side of the clip.
  CHECK(l.grad.isZero());
}

TEST_CASE("ratio identity and clip inertness") {
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    auto pol = small_policy(3, 2, 10 + seed);
    Rng rng(seed);
    const int n = 12;
    const Mat in = random_mat(rng, 3, n);
    const Mat act = random_mat(rng, 2, n, 1.5);
    const Vec adv = random_mat(rng, n, 1, 2.0);
    const Vec lp = pol.log_prob_batch(pol.mean(in), act);

    // Unclipped surrogate mean(-r A), independent of the loss implementation.
    auto surrogate = [&](const Vec& old) {
      return [&, old](const Vec& q) {
        approx::GaussianPolicy tmp = pol;
        tmp.params() = q;
        const Vec l2 = tmp.log_prob_batch(tmp.mean(in), act);
        return -((l2 - old).array().exp() * adv.array()).mean();
      };
    };

    const auto at_one = ppo_policy_loss(pol, pol.params(), in, act, lp, adv, 0.2, 0.0);
    CHECK(at_one.loss == Approx(-adv.mean()).epsilon(1e-12));
    CHECK(at_one.approx_kl == Approx(0.0).epsilon(1e-12));
    const auto fd = approx::check_gradient(surrogate(lp), pol.params(), at_one.grad, 1e-6);
    CHECK(fd.relative_error < 1e-6);

    Vec shifted = lp;
    for (int i = 0; i < n; ++i) shifted[i] += uniform(rng, -1.0, 1.0);
    const auto inert = ppo_policy_loss(pol, pol.params(), in, act, shifted, adv, std::numeric_limits<double>::infinity(), 0.0);
    const auto fd2 = approx::check_gradient(surrogate(shifted), pol.params(), inert.grad, 1e-6);
    CHECK(fd2.relative_error < 1e-6);
  }
}

TEST_CASE("policy loss gradient including the entropy bonus") {
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    auto pol = small_policy(4, 2, 20 + seed);
    Rng rng(seed + 100);
    const int n = 16;
    const Mat in = random_mat(rng, 4, n);
    const Mat act = random_mat(rng, 2, n, 1.5);
    const Vec adv = random_mat(rng, n, 1, 2.0);
    Vec old = pol.log_prob_batch(pol.mean(in), act);
    for (int i = 0; i < n; ++i) old[i] += uniform(rng, -0.1, 0.1);
    const auto l = ppo_policy_loss(pol, pol.params(), in, act, old, adv, 0.2, 0.05);
    auto f = [&](const Vec& q) { return ppo_policy_loss(pol, q, in, act, old, adv, 0.2, 0.05).loss; };
    CHECK(approx::check_gradient(f, pol.params(), l.grad, 1e-6).relative_error < 1e-4);
  }
}

TEST_CASE("non-finite ratios are excluded and counted") {
  auto pol = small_policy(2, 1, 5);
  Rng rng(6);
  const int n = 200;
  const Mat in = random_mat(rng, 2, n);
  const Mat act = random_mat(rng, 1, n);
  Vec old = pol.log_prob_batch(pol.mean(in), act);
  const Vec adv = Vec::Ones(n);
  old[0] = -std::numeric_limits<double>::infinity();
  CHECK(ppo_policy_loss(pol, pol.params(), in, act, old, adv, 0.2, 0.0).excluded == 1);
  old[1] = old[2] = -std::numeric_limits<double>::infinity();
  CHECK_THROWS_AS(ppo_policy_loss(pol, pol.params(), in, act, old, adv, 0.2, 0.0), NumericalError);
}

TEST_CASE("value loss") {
  Rng rng(7);
  approx::ValueModel val(trunk_spec(3, {8, 8}, 1), 5.0);
  val.initialize(rng, 1.0);
  const Mat in = random_mat(rng, 3, 10);
  const Vec pred = val.predict(in);
  CHECK(value_loss(val, val.params(), in, pred).loss == Approx(0.0).epsilon(1e-15));
  CHECK(value_loss(val, val.params(), in, (pred.array() - 0.7).matrix()).loss == Approx(0.49).epsilon(1e-12));
  const Vec tgt = random_mat(rng, 10, 1, 3.0);
  const auto vl = value_loss(val, val.params(), in, tgt);
  auto f = [&](const Vec& q) { return value_loss(val, q, in, tgt).loss; };
  CHECK(approx::check_gradient(f, val.params(), vl.grad, 1e-6).relative_error < 1e-4);
}

TEST_CASE("standardize") {
  Vec v(4);
  v << 1, 2, 3, 4;
  const Vec s = standardize(v);
  CHECK(s.mean() == Approx(0.0).epsilon(1e-15));
  CHECK(std::sqrt(s.squaredNorm() / 4) == Approx(1.0));
  CHECK(standardize(Vec::Constant(3, 2.0)).isZero());
}

TEST_CASE("bisection") {
  auto linear = [](double z) { return 5.0 - z; };
  const auto s = bisect_z_star(linear, 0.0, 10.0, 1e-3);
  CHECK(s.status == ZStatus::Feasible);
  CHECK(std::abs(s.z_star - 5.0) <= 1e-3);
  CHECK(s.v_at_zstar <= 0.0);
  CHECK(s.hi - s.lo <= 1e-3);

  const auto always = bisect_z_star([](double) { return -1.0; }, 2.0, 10.0, 1e-3);
  CHECK(always.z_star == 2.0);
  CHECK(always.iterations == 0);

  const auto never = bisect_z_star([](double) { return 1.0; }, 0.0, 10.0, 1e-3);
  CHECK(never.status == ZStatus::Infeasible);
  CHECK_FALSE(never.non_monotone);
  const auto flipped = bisect_z_star([](double z) { return z - 5.0; }, 0.0, 10.0, 1e-3);
  CHECK(flipped.status == ZStatus::Infeasible);
  CHECK(flipped.non_monotone);

  const auto half = bisect_z_star(linear, 0.0, 10.0, 5e-4);
  CHECK(half.hi - half.lo == Approx(0.5 * (s.hi - s.lo)).epsilon(1e-12));

  CHECK(count_sign_violations(linear, 0.0, 10.0) == 0);
  CHECK(count_sign_violations([](double z) { return std::sin(z); }, 0.0, 10.0) == 2);
}

TEST_CASE("bisection through a value model") {
  auto p = envkit::pendulum_make();
  const auto enc = budget_encoder(*p, 0.0, 100.0);
  Vec w = Vec::Zero(enc.dim());
  w[enc.dim() - 1] = -1.0;
  const auto val = linear_value(w, 0.25, 10.0);  // V <= 0 once the scaled budget passes 0.25
  Vec x(2);
  x << 3.0, 0.0;
  const auto s = bisect_z_star(*p, val, enc, x, augment::Safety::Safe, 0.0, 100.0, 1e-3);
  CHECK(std::abs(s.z_star - 25.0) <= 1e-3);
}

TEST_CASE("budget regressor") {
  auto p = envkit::pendulum_make();
  const auto enc = budget_encoder(*p, 0.0, 100.0);
  ZFitConfig zc;
  zc.n_samples = 400;
  zc.epochs = 100;
  zc.hidden = {32, 32};
  auto sampler = [&](Rng& r) { return p->sample_state(r); };

  SUBCASE("constant optimal budget") {
    Vec w = Vec::Zero(enc.dim());
    w[enc.dim() - 1] = -1.0;
    const auto val = linear_value(w, 0.4);
    ZFitReport rep;
    const auto reg = fit_z_regressor(*p, val, enc, sampler, zc, &rep);
    CHECK(rep.infeasible == 0);
    CHECK(rep.train_mae < zc.tol);
    CHECK(rep.heldout_mae < zc.tol);
    Vec x(2);
    x << 1.0, 1.0;
    CHECK(std::abs(reg.predict(*p, x, augment::Safety::Safe) - 40.0) < zc.tol);
  }
  SUBCASE("state-dependent budget with an infeasible region") {
    // z* / 100 = 0.5 + 0.6 cos(theta); infeasible where that exceeds 1.
    Vec w = Vec::Zero(enc.dim());
    w[0] = 0.6;
    w[enc.dim() - 1] = -1.0;
    const auto val = linear_value(w, 0.5);
    ZFitReport rep;
    zc.epochs = 300;
    const auto reg = fit_z_regressor(*p, val, enc, sampler, zc, &rep);
    CHECK(rep.infeasible > 0);
    CHECK(rep.labelled + rep.infeasible == zc.n_samples);
    CHECK(rep.train_median_abs_error < 3 * 100 * zc.tol);
    const auto ck = to_checkpoint(reg, "h");
    const auto back = zregressor_from_checkpoint(ck);
    Vec x(2);
    x << 2.0, 0.0;
    CHECK(back.predict(*p, x, augment::Safety::Safe) == reg.predict(*p, x, augment::Safety::Safe));
  }
  SUBCASE("mostly infeasible states abort the fit") {
    const auto val = linear_value(Vec::Zero(enc.dim()), 1.0);
    CHECK_THROWS_AS(fit_z_regressor(*p, val, enc, sampler, zc), NumericalError);
  }
}

TEST_CASE("phase 1 with zero steps and seeded determinism") {
  auto p = envkit::pendulum_make();
  Phase1Config cfg;
  cfg.ppo.hidden = {16, 16};
  cfg.ppo.total_steps = 0;
  cfg.z_max = 100.0;
  const auto m = train_phase1(*p, cfg);
  CHECK(m.log.empty());
  CHECK(m.policy.params().allFinite());
  CHECK_FALSE(m.policy.params().isZero());

  cfg.ppo.total_steps = 2048;
  cfg.ppo.num_envs = 4;
  cfg.ppo.steps_per_env = 128;
  cfg.ppo.minibatch_size = 128;
  cfg.ppo.epochs = 2;
  cfg.ppo.seed = 9;
  const auto a = train_phase1(*p, cfg);
  const auto b = train_phase1(*p, cfg);
  std::ostringstream la, lb;
  write_log_csv(la, a.log);
  write_log_csv(lb, b.log);
  CHECK(a.log.size() == 4);
  CHECK(la.str() == lb.str());
  CHECK(a.policy.params() == b.policy.params());
  CHECK(a.value.params() == b.value.params());
  CHECK(la.str().rfind("iteration,env_steps,reach_rate,mean_cost_reached,policy_loss,value_loss,entropy,kl_estimate\n", 0) == 0);

  Phase2Config p2;
  p2.total_steps = 0;
  const auto v = finetune_phase2(*p, a, p2);
  CHECK(v.params() == a.value.params());
}

TEST_CASE("phase 2 recovers the tabular value of the greedy policy") {
  const auto mdp = envkit::grid_reachavoid_make(4, 4, {{1, 1}}, {3, 3}, std::vector<double>(16, 1.0));
  const int horizon = envkit::grid_horizon(mdp);
  envkit::TabularProblem prob(mdp, horizon);
  const augment::AugmentedGoalParams goal{10.0};
  const double z_min = 0.0, z_max = 8.0;
  // Budgets stay integral along every path, so the grid is exact from z_max down to z_min - horizon.
  const reachval::ZGrid grid{z_min - horizon - 1, 1.0, static_cast<int>(z_max - z_min) + horizon + 2};
  reachval::AugmentedTabular aug(mdp, grid, goal);
  const double gamma = 0.98;
  reachval::ValueIterationOptions vo;
  vo.gamma = gamma;
  vo.tol = 1e-12;
  const auto table = reachval::tabular_value_iteration(aug, {}, vo);
  REQUIRE(table.converged);

  const auto enc = budget_encoder(prob, z_min, z_max);
  RolloutCollector::Actor actor = [&](const Mat&, const std::vector<augment::AugmentedState>& states) {
    Mat u(1, states.size());
    for (std::size_t i = 0; i < states.size(); ++i) {
      const auto& s = states[i];
      const int idx = aug.index(prob.state_of(s.x), s.y, grid.snap(s.z));
      u(0, i) = reachval::greedy_action(aug, table.values, idx) + 0.5;
    }
    return u;
  };
  approx::ValueModel value(trunk_spec(enc.dim(), {64, 64}, 1), 10.0);
  Rng rng(1);
  value.initialize(rng, 0.1);
  Phase2Config p2;
  p2.total_steps = 150000;
  p2.lr = 1e-3;
  p2.gamma = gamma;
  p2.lambda = 0.95;
  const auto tuned = finetune_value(prob, actor, enc, goal, value, p2);

  double lo = 1e300, hi = -1e300, gap = 0.0, total = 0.0;
  int n = 0, sign_errors = 0;
  for (int s = 0; s < mdp.num_states; ++s) {
    if (mdp.goal[s] || mdp.avoid[s]) continue;
    for (int z = static_cast<int>(z_min); z <= static_cast<int>(z_max); ++z) {
      const double truth = table.values[aug.index(s, augment::Safety::Safe, grid.snap(z))];
      const double pred = tuned.predict(enc.encode(prob, {Vec::Constant(1, s), augment::Safety::Safe, double(z)}));
      lo = std::min(lo, truth);
      hi = std::max(hi, truth);
      gap = std::max(gap, std::abs(pred - truth));
      total += std::abs(pred - truth);
      ++n;
      sign_errors += std::abs(truth) > 0.5 && (truth > 0.0) != (pred > 0.0);
    }
  }
  MESSAGE("sup gap " << gap << " mean gap " << total / n << " over value range " << hi - lo);
  CHECK(gap < 0.1 * (hi - lo));
  CHECK(total / n < 0.02 * (hi - lo));
  CHECK(sign_errors == 0);
}

TEST_CASE("deployment, evaluation and budget soundness") {
  auto p = corridor();
  const auto enc = budget_encoder(p, 0.0, 10.0);
  approx::GaussianPolicy pol(trunk_spec(enc.dim(), {4}, 1), Vec::Zero(1), Vec::Constant(1, 4.0));
  pol.params().setZero();
  // Mean fixed at 3.5, i.e. always "right".
  pol.params()[pol.trunk().bias_offset(1)] = 3.5;
  const augment::AugmentedGoalParams goal{10.0};

  const auto d = deploy_policy(p, pol, enc, goal, fixed_source(5.0), Vec::Constant(1, 0.0));
  CHECK(d.record.reached);
  CHECK(d.record.length == 3);
  CHECK(d.record.cumulative_cost == 3.0);
  for (std::size_t t = 0; t < d.traj.states.size(); ++t) CHECK(d.traj.states[t].z == 5.0 - static_cast<double>(t));
  std::ostringstream csv;
  write_trajectory_csv(csv, p, d);
  CHECK(csv.str().rfind("t,x0,u0,g,h,ghat,y,z,cost\n", 0) == 0);

  const auto rep = evaluate(p, pol, enc, goal, fixed_source(2.0), 10, 1);
  CHECK(rep.reach_rate == 1.0);
  CHECK(rep.mean_cost == 3.0);
  CHECK(rep.violation_rate == 0.0);
  // Budget 2 is below the realised cost 3.
  CHECK(budget_soundness(rep.records, 0.5) == 0.0);
  CHECK(budget_soundness(rep.records, 1.0) == 1.0);

  const auto empty = EvalReport::from_records({});
  CHECK_FALSE(empty.reach_rate.has_value());
  CHECK(empty.summary_json().find("\"reach_rate\": null") != std::string::npos);
  CHECK_FALSE(budget_soundness({}, 0.1).has_value());

  std::vector<EpisodeRecord> recs{{1.0, true, false, 1.0, 3}, {1.0, false, true, 2.0, 5}, {4.0, true, false, 3.0, 4}};
  const auto agg = EvalReport::from_records(recs);
  CHECK(*agg.reach_rate == Approx(2.0 / 3.0));
  CHECK(*agg.mean_cost == 2.0);
  CHECK(*agg.median_cost == 2.0);
  CHECK(*agg.violation_rate == Approx(1.0 / 3.0));
}
