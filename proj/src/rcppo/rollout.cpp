#include "rcppo/algo.hpp"

#include <cmath>

namespace rcppo::algo {

namespace {

constexpr int kMaxResets = 10000;

struct EnvBuffer {
  std::vector<augment::AugmentedState> states;
  std::vector<Vec> next_x;
  std::vector<Vec> inputs, raw;
  std::vector<double> log_probs, ghat, values, costs;
  std::vector<char> episode_start;
  std::vector<Segment> segments;  // begin/end relative to this buffer
};

}  // namespace

RolloutCollector::RolloutCollector(const envkit::ReachAvoidProblem& problem, InputEncoder encoder, CollectorConfig cfg)
    : encoder_(encoder), cfg_(cfg), rng_(cfg.seed) {
  if (cfg_.num_envs < 1) throw ContractError("collector needs at least one environment");
  if (!(cfg_.z_min <= cfg_.z_max)) throw ContractError("collector budget range needs z_min <= z_max");
  problem.validate();
  envs_.resize(cfg_.num_envs);
  for (int e = 0; e < cfg_.num_envs; ++e) {
    envs_[e].problem = problem.clone();
    envs_[e].problem->reseed(mix_seed(cfg_.seed, 1000 + e));
    reset(envs_[e]);
  }
}

void RolloutCollector::reset(EnvSlot& slot) {
  for (int attempt = 0; attempt < kMaxResets; ++attempt) {
    const Vec x0 = slot.problem->sample_initial(rng_);
    const double z0 = cfg_.z_min == cfg_.z_max ? cfg_.z_min : uniform(rng_, cfg_.z_min, cfg_.z_max);
    auto s = augment::augmented_reset(*slot.problem, x0, z0);
    const bool done = cfg_.rule == EpisodeRule::AugmentedGoal ? augment::in_augmented_goal(*slot.problem, s, cfg_.goal)
                                                               : slot.problem->in_goal(s.x);
    if (done) continue;
    slot.state = std::move(s);
    slot.z0 = z0;
    slot.cost_to_goal = 0.0;
    slot.goal_seen = false;
    slot.reached = false;
    slot.t = 0;
    return;
  }
  throw NumericalError("could not sample an initial state outside the terminal set");
}

RolloutBatch RolloutCollector::collect(const approx::GaussianPolicy& policy, const approx::ValueModel& value,
                                       int steps_per_env) {
  return run(&policy, nullptr, value, steps_per_env);
}

RolloutBatch RolloutCollector::collect(const Actor& actor, const approx::ValueModel& value, int steps_per_env) {
  return run(nullptr, &actor, value, steps_per_env);
}

RolloutBatch RolloutCollector::run(const approx::GaussianPolicy* policy, const Actor* actor,
                                   const approx::ValueModel& value, int steps_per_env) {
  if (steps_per_env < 1) throw ContractError("steps_per_env must be positive");
  if (policy && policy->input_dim() != encoder_.dim()) throw ContractError("policy input does not match the encoder");
  if (value.input_dim() != encoder_.dim()) throw ContractError("value input does not match the encoder");
  const int n_env = cfg_.num_envs;
  std::vector<EnvBuffer> buf(n_env);
  std::vector<int> seg_begin(n_env, 0);
  std::vector<EpisodeRecord> finished;
  Mat inputs(encoder_.dim(), n_env);
  std::normal_distribution<double> normal(0.0, 1.0);

  auto bootstrap_v = [&](const EnvSlot& slot) {
    return value.predict(encoder_.encode(*slot.problem, slot.state));
  };

  for (int step = 0; step < steps_per_env; ++step) {
    std::vector<augment::AugmentedState> cur(n_env);
    for (int e = 0; e < n_env; ++e) {
      encoder_.encode_into(*envs_[e].problem, envs_[e].state, inputs.col(e));
      cur[e] = envs_[e].state;
    }
    const Vec v = value.predict(inputs);
    Mat means = policy ? policy->mean(inputs) : (*actor)(inputs, cur);
    if (means.cols() != n_env) throw ContractError("actor returned the wrong number of controls");
    Mat raw = means;
    Vec logp = Vec::Zero(n_env);
    if (policy && !cfg_.deterministic) {
      const Vec ls = policy->log_std();
      for (int e = 0; e < n_env; ++e)
        for (int j = 0; j < raw.rows(); ++j) raw(j, e) += std::exp(ls[j]) * normal(rng_);
      logp = policy->log_prob_batch(means, raw);
    } else if (policy) {
      logp = policy->log_prob_batch(means, raw);
    }

    for (int e = 0; e < n_env; ++e) {
      EnvSlot& slot = envs_[e];
      EnvBuffer& b = buf[e];
      const auto& pr = *slot.problem;
      const Vec executed = policy ? policy->clamp_to_box(raw.col(e)) : Vec(raw.col(e));
      b.episode_start.push_back(slot.t == 0);
      b.states.push_back(slot.state);
      b.inputs.push_back(inputs.col(e));
      b.raw.push_back(raw.col(e));
      b.log_probs.push_back(logp[e]);
      b.ghat.push_back(augment::augmented_goal(pr, slot.state, cfg_.goal));
      b.values.push_back(v[e]);

      auto st = augment::augmented_step(*slot.problem, slot.state, executed);
      b.costs.push_back(st.cost);
      b.next_x.push_back(st.next.x);
      if (!slot.goal_seen) slot.cost_to_goal += st.cost;
      slot.state = std::move(st.next);
      ++slot.t;
      if (!slot.goal_seen && pr.in_goal(slot.state.x)) {
        slot.goal_seen = true;
        slot.reached = slot.state.y == augment::Safety::Safe;
      }

      const bool terminal = cfg_.rule == EpisodeRule::AugmentedGoal
                                ? augment::in_augmented_goal(pr, slot.state, cfg_.goal)
                                : pr.in_goal(slot.state.x);
      const bool truncated = !terminal && slot.t >= pr.horizon_max();
      if (!terminal && !truncated) continue;

      Segment seg;
      seg.begin = seg_begin[e];
      seg.end = static_cast<int>(b.states.size());
      seg.kind = terminal ? TerminalKind::Reached : TerminalKind::Truncated;
      seg.terminal_ghat = augment::augmented_goal(pr, slot.state, cfg_.goal);
      seg.bootstrap_value = terminal ? seg.terminal_ghat : bootstrap_v(slot);
      seg.z0 = slot.z0;
      seg.env = e;
      b.segments.push_back(seg);
      seg_begin[e] = seg.end;
      finished.push_back({slot.z0, slot.reached, slot.state.y == augment::Safety::Unsafe, slot.cost_to_goal, slot.t});
      reset(slot);
    }
  }

  for (int e = 0; e < n_env; ++e) {
    const int end = static_cast<int>(buf[e].states.size());
    if (seg_begin[e] == end) continue;
    Segment seg;
    seg.begin = seg_begin[e];
    seg.end = end;
    seg.kind = TerminalKind::Cut;
    seg.terminal_ghat = augment::augmented_goal(*envs_[e].problem, envs_[e].state, cfg_.goal);
    seg.bootstrap_value = bootstrap_v(envs_[e]);
    seg.z0 = envs_[e].z0;
    seg.env = e;
    buf[e].segments.push_back(seg);
  }

  RolloutBatch out;
  out.steps = n_env * steps_per_env;
  const int act_dim = static_cast<int>(buf[0].raw[0].size());
  out.inputs.resize(encoder_.dim(), out.steps);
  out.raw_actions.resize(act_dim, out.steps);
  out.log_probs.resize(out.steps);
  out.ghat.resize(out.steps);
  out.values.resize(out.steps);
  out.costs.resize(out.steps);
  out.states.reserve(out.steps);
  out.next_x.reserve(out.steps);
  int offset = 0;
  for (int e = 0; e < n_env; ++e) {
    auto& b = buf[e];
    for (int t = 0; t < steps_per_env; ++t) {
      const int i = offset + t;
      out.inputs.col(i) = b.inputs[t];
      out.raw_actions.col(i) = b.raw[t];
      out.log_probs[i] = b.log_probs[t];
      out.ghat[i] = b.ghat[t];
      out.values[i] = b.values[t];
      out.costs[i] = b.costs[t];
      out.states.push_back(std::move(b.states[t]));
      out.next_x.push_back(std::move(b.next_x[t]));
      out.episode_start.push_back(b.episode_start[t]);
    }
    for (auto seg : b.segments) {
      seg.begin += offset;
      seg.end += offset;
      out.segments.push_back(seg);
    }
    offset += steps_per_env;
  }
  out.finished = std::move(finished);
  return out;
}

void reach_advantages(const RolloutBatch& batch, const reachval::BackupConfig& backup,
                      reachval::GaeWeighting weighting, Vec& advantages, Vec& targets) {
  advantages.resize(batch.steps);
  targets.resize(batch.steps);
  for (const auto& seg : batch.segments) {
    const std::size_t n = seg.end - seg.begin;
    std::span<const double> g(batch.ghat.data() + seg.begin, n);
    std::span<const double> v(batch.values.data() + seg.begin, n);
    std::span<double> adv(advantages.data() + seg.begin, n);
    std::span<double> ret(targets.data() + seg.begin, n);
    reachval::gae_advantages_into(g, v, seg.bootstrap_value, backup, weighting, adv, ret);
  }
  // the reach value is minimised, so improvement is value minus target
  advantages = -advantages;
}

}  // namespace rcppo::algo
