#include "rcppo/envkit.hpp"

#include <cmath>
#include <numbers>

namespace rcppo::envkit {

double angle_normalize(double theta) {
  constexpr double pi = std::numbers::pi;
  return std::fmod(std::fmod(theta + pi, 2.0 * pi) + 2.0 * pi, 2.0 * pi) - pi;
}

Pendulum::Pendulum(PendulumParams p)
    : p_(p), low_(Vec::Constant(1, -p.max_torque)), high_(Vec::Constant(1, p.max_torque)) {
  validate();
}

Vec Pendulum::dynamics(const Vec& x, const Vec& u) const {
  const double th = x[0], thdot = x[1];
  const double torque = std::clamp(u[0], -p_.max_torque, p_.max_torque);
  const double l = p_.length;
  double newthdot = thdot + (3.0 * p_.gravity / (2.0 * l) * std::sin(th) +
                             3.0 / (p_.mass * l * l) * torque) * p_.dt;
  newthdot = std::clamp(newthdot, -p_.max_speed, p_.max_speed);
  Vec out(2);
  out << angle_normalize(th + newthdot * p_.dt), newthdot;
  return out;
}

double Pendulum::cost(const Vec& /*x*/, const Vec& u) const {
  const double n = u.norm();
  return n < p_.free_torque ? 0.0 : p_.torque_cost * n * n;
}

bool Pendulum::in_goal(const Vec& x) const {
  // Upright crossing within the next integration step.
  const double th = x[0];
  const double ahead = th + x[1] * p_.dt;
  return (th < 0.0 && ahead > 0.0) || (th > 0.0 && ahead < 0.0);
}

double Pendulum::goal_margin(const Vec& x) const {
  const double th = x[0];
  if (th * (th + x[1] * p_.dt) < 0.0) return kGoalPlateau;
  return p_.goal_weight * th * th;
}

double Pendulum::avoid_margin(const Vec&) const { return -1.0; }
bool Pendulum::in_avoid(const Vec&) const { return false; }

Vec Pendulum::sample_initial(Rng& rng) const {
  // Gym reset distribution, excluding the measure-small set of states
  // that already sit on the upright crossing.
  Vec x(2);
  do {
    x << uniform(rng, -std::numbers::pi, std::numbers::pi), uniform(rng, -1.0, 1.0);
  } while (in_goal(x));
  return x;
}

Vec Pendulum::sample_state(Rng& rng) const {
  Vec x(2);
  x << uniform(rng, -std::numbers::pi, std::numbers::pi), uniform(rng, -p_.max_speed, p_.max_speed);
  return x;
}

Vec Pendulum::observe(const Vec& x) const {
  Vec o(3);
  o << std::cos(x[0]), std::sin(x[0]), x[1] / p_.max_speed;
  return o;
}

double Pendulum::goal_distance(const Vec& x) const { return std::abs(angle_normalize(x[0])); }

ProblemPtr pendulum_make(PendulumParams p) { return std::make_unique<Pendulum>(p); }

}  // namespace rcppo::envkit
