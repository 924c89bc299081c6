#include "rcppo/envkit.hpp"

namespace rcppo::envkit {

ControlNoise::ControlNoise(ProblemPtr base, NoiseWrapperConfig cfg)
    : base_(std::move(base)), cfg_(cfg), rng_(cfg.seed) {
  if (!base_) throw ContractError("control-noise wrapper needs a base problem");
  if (!(cfg_.noise_half_width >= 0.0)) throw ContractError("noise half-width must be nonnegative");
}

ControlNoise::ControlNoise(const ControlNoise& other)
    : ReachAvoidProblem(other), base_(other.base_->clone()), cfg_(other.cfg_), rng_(other.rng_) {}

Transition ControlNoise::transition(const Vec& x, const Vec& u) {
  Vec perturbed = u;
  if (cfg_.noise_half_width > 0.0) {
    std::uniform_real_distribution<double> xi(-cfg_.noise_half_width, cfg_.noise_half_width);
    for (Eigen::Index i = 0; i < perturbed.size(); ++i) perturbed[i] += xi(rng_);
  }
  return base_->transition(x, perturbed);
}

ProblemPtr wrap_with_control_noise(ProblemPtr problem, NoiseWrapperConfig cfg) {
  return std::make_unique<ControlNoise>(std::move(problem), cfg);
}

}  // namespace rcppo::envkit
