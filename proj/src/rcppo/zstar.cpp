#include "rcppo/algo.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace rcppo::algo {

ZStarSolution bisect_z_star(const std::function<double(double)>& v, double z_min, double z_max, double tol) {
  if (!(tol > 0.0)) throw ContractError("bisection tolerance must be positive");
  if (!(z_min < z_max)) throw ContractError("bisection bracket needs z_min < z_max");
  auto eval = [&](double z) {
    const double r = v(z);
    if (std::isnan(r)) throw NumericalError("value is NaN during bisection");
    return r;
  };
  ZStarSolution s;
  const double v_lo = eval(z_min);
  const double v_hi = eval(z_max);
  if (v_hi > 0.0) {
    s.status = ZStatus::Infeasible;
    s.non_monotone = v_lo <= 0.0;
    s.z_star = z_max;
    s.v_at_zstar = v_hi;
    s.lo = z_min;
    s.hi = z_max;
    return s;
  }
  if (v_lo <= 0.0) {
    s.z_star = s.lo = s.hi = z_min;
    s.v_at_zstar = v_lo;
    return s;
  }
  double lo = z_min, hi = z_max, vh = v_hi;
  while (hi - lo > tol) {
    const double mid = 0.5 * (lo + hi);
    if (mid <= lo || mid >= hi) break;
    const double vm = eval(mid);
    if (vm <= 0.0) {
      hi = mid;
      vh = vm;
    } else {
      lo = mid;
    }
    ++s.iterations;
  }
  s.lo = lo;
  s.hi = hi;
  s.z_star = hi;
  s.v_at_zstar = vh;
  return s;
}

ZStarSolution bisect_z_star(const envkit::ReachAvoidProblem& problem, const approx::ValueModel& value,
                            const InputEncoder& encoder, const Vec& x, augment::Safety y, double z_min, double z_max,
                            double tol) {
  augment::AugmentedState s{x, y, 0.0};
  Vec in(encoder.dim());
  return bisect_z_star(
      [&](double z) {
        s.z = z;
        encoder.encode_into(problem, s, in);
        return value.predict(in);
      },
      z_min, z_max, tol);
}

int count_sign_violations(const std::function<double(double)>& v, double z_min, double z_max, int points) {
  if (points < 2) throw ContractError("a sign sweep needs at least two points");
  int violations = 0;
  bool prev_feasible = false;
  for (int i = 0; i < points; ++i) {
    const double z = z_min + (z_max - z_min) * i / (points - 1);
    const bool feasible = v(z) <= 0.0;
    if (i > 0 && prev_feasible && !feasible) ++violations;
    prev_feasible = feasible;
  }
  return violations;
}

double ZRegressor::predict(const envkit::ReachAvoidProblem& problem, const Vec& x, augment::Safety y) const {
  Vec in(obs_dim + 1);
  in.head(obs_dim) = problem.observe(x);
  in[obs_dim] = augment::as_real(y);
  return label_offset + net.predict(in);
}

ZRegressor fit_z_regressor(const envkit::ReachAvoidProblem& problem, const approx::ValueModel& value,
                           const InputEncoder& encoder, const StateSampler& sampler, const ZFitConfig& cfg,
                           ZFitReport* report) {
  if (cfg.n_samples < 2) throw ContractError("z regression needs at least two samples");
  if (!(cfg.holdout_fraction >= 0.0 && cfg.holdout_fraction < 1.0))
    throw ContractError("holdout_fraction must lie in [0, 1)");
  Rng rng(cfg.seed);
  const int obs = problem.observation_dim();
  std::vector<Vec> feats;
  std::vector<double> labels;
  int infeasible = 0;
  for (int i = 0; i < cfg.n_samples; ++i) {
    const Vec x = sampler(rng);
    const auto y = augment::shifted_indicator(problem.in_avoid(x));
    const auto sol = bisect_z_star(problem, value, encoder, x, y, encoder.z_min, encoder.z_max, cfg.tol);
    if (sol.status == ZStatus::Infeasible) {
      ++infeasible;
      continue;
    }
    Vec f(obs + 1);
    f.head(obs) = problem.observe(x);
    f[obs] = augment::as_real(y);
    feats.push_back(std::move(f));
    labels.push_back(sol.z_star);
  }
  if (infeasible * 2 > cfg.n_samples)
    throw NumericalError("more than half of the sampled states are infeasible at z_max");

  const int n = static_cast<int>(labels.size());
  const int n_hold = std::min(n - 1, static_cast<int>(std::floor(cfg.holdout_fraction * n)));
  const int n_train = n - n_hold;
  const double mean = std::accumulate(labels.begin(), labels.begin() + n_train, 0.0) / n_train;
  double var = 0.0;
  for (int i = 0; i < n_train; ++i) var += (labels[i] - mean) * (labels[i] - mean);
  const double sd = std::max(std::sqrt(var / n_train), 1e-3 * std::max(1.0, std::abs(mean)));

  approx::MlpSpec spec;
  spec.input_dim = obs + 1;
  spec.hidden = cfg.hidden;
  spec.output_dim = 1;
  ZRegressor reg{approx::ValueModel(spec, sd), obs, mean};
  reg.net.initialize(rng, 0.1);

  Mat x_all(obs + 1, n);
  Vec t_all(n);
  for (int i = 0; i < n; ++i) {
    x_all.col(i) = feats[i];
    t_all[i] = labels[i] - mean;
  }
  const int mb = std::min(cfg.minibatch_size, n_train);
  const long per_epoch = (n_train + mb - 1) / mb;
  approx::AdamConfig ac;
  ac.lr = cfg.lr;
  ac.total_steps = per_epoch * cfg.epochs;
  approx::Adam opt(reg.net.num_params(), ac);
  std::vector<int> order(n_train);
  std::iota(order.begin(), order.end(), 0);
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    for (int start = 0; start < n_train; start += mb) {
      const int len = std::min(mb, n_train - start);
      Mat in(obs + 1, len);
      Vec tgt(len);
      for (int j = 0; j < len; ++j) {
        in.col(j) = x_all.col(order[start + j]);
        tgt[j] = t_all[order[start + j]];
      }
      auto vl = value_loss(reg.net, reg.net.params(), in, tgt);
      opt.step(reg.net.params(), vl.grad);
    }
  }

  if (report) {
    const Vec pred = reg.net.predict(x_all);
    std::vector<double> err(n);
    for (int i = 0; i < n; ++i) err[i] = std::abs(pred[i] - t_all[i]);
    report->labelled = n;
    report->infeasible = infeasible;
    report->train_mae = std::accumulate(err.begin(), err.begin() + n_train, 0.0) / n_train;
    report->heldout_mae = n_hold > 0 ? std::accumulate(err.begin() + n_train, err.end(), 0.0) / n_hold : 0.0;
    std::vector<double> tr(err.begin(), err.begin() + n_train);
    std::nth_element(tr.begin(), tr.begin() + tr.size() / 2, tr.end());
    report->train_median_abs_error = tr[tr.size() / 2];
  }
  return reg;
}

approx::Checkpoint to_checkpoint(const ZRegressor& reg, const std::string& config_hash) {
  auto c = approx::to_checkpoint(reg.net, "zmap", config_hash);
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", reg.label_offset);
  c.meta["label_offset"] = buf;
  c.meta["obs_dim"] = std::to_string(reg.obs_dim);
  std::string hidden;
  for (int l = 0; l + 1 < reg.net.net().num_layers(); ++l) hidden += (l ? "," : "") + std::to_string(reg.net.net().out_dim(l));
  c.meta["hidden"] = hidden;
  return c;
}

ZRegressor zregressor_from_checkpoint(const approx::Checkpoint& ckpt) {
  if (ckpt.kind != "zmap") throw ContractError("checkpoint kind '" + ckpt.kind + "' is not a z map");
  try {
    const int obs = std::stoi(ckpt.meta.at("obs_dim"));
    approx::MlpSpec spec;
    spec.input_dim = obs + 1;
    spec.output_dim = 1;
    spec.hidden.clear();
    const std::string& h = ckpt.meta.at("hidden");
    for (std::size_t pos = 0; pos < h.size();) {
      const auto comma = h.find(',', pos);
      spec.hidden.push_back(std::stoi(h.substr(pos, comma - pos)));
      if (comma == std::string::npos) break;
      pos = comma + 1;
    }
    ZRegressor reg{approx::ValueModel(spec, std::stod(ckpt.meta.at("scale"))), obs,
                   std::stod(ckpt.meta.at("label_offset"))};
    approx::load_into(ckpt, reg.net);
    return reg;
  } catch (const std::out_of_range&) {
    throw ContractError("z map checkpoint is missing metadata");
  }
}

}  // namespace rcppo::algo
