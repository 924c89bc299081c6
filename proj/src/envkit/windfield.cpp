#include "rcppo/envkit.hpp"

#include <cmath>
#include <numbers>

namespace rcppo::envkit {

std::array<double, 2> WindModel::at(double x, double y) const {
  std::array<double, 2> w{base[0] + shear * y, base[1]};
  for (const auto& v : vortices) {
    const double dx = x - v.cx, dy = y - v.cy;
    const double k = v.circulation / (2.0 * std::numbers::pi) / (dx * dx + dy * dy + v.core_radius * v.core_radius);
    w[0] += -k * dy;
    w[1] += k * dx;
  }
  return w;
}

WindFieldLite::WindFieldLite(WindFieldParams p)
    : p_(std::move(p)), low_(Vec::Constant(2, -p_.max_speed)), high_(Vec::Constant(2, p_.max_speed)) {
  validate();
}

Vec WindFieldLite::dynamics(const Vec& x, const Vec& u) const {
  const auto w = p_.wind.at(x[0], x[1]);
  Vec out(2);
  out << x[0] + p_.dt * (u[0] + w[0]), x[1] + p_.dt * (u[1] + w[1]);
  return out.cwiseMax(-p_.half_extent).cwiseMin(p_.half_extent);
}

double WindFieldLite::cost(const Vec&, const Vec& u) const { return 0.5 * u.squaredNorm(); }

bool WindFieldLite::in_goal(const Vec& x) const {
  const double dx = x[0] - p_.goal[0], dy = x[1] - p_.goal[1];
  return std::hypot(dx, dy) <= p_.goal_radius;
}

double WindFieldLite::distance_margin(const Vec& x) const {
  const double dx = x[0] - p_.goal[0], dy = x[1] - p_.goal[1];
  return 10.0 * std::sqrt(dx * dx + 10.0 * dy * dy) - 40.0;
}

double WindFieldLite::goal_margin(const Vec& x) const {
  const double dx = x[0] - p_.goal[0], dy = x[1] - p_.goal[1];
  if (dx * dx + dy * dy <= p_.goal_radius * p_.goal_radius) return kGoalPlateau;
  return distance_margin(x);
}

double WindFieldLite::avoid_margin(const Vec& x) const {
  // Largest inside-depth over all buildings; positive only strictly inside one.
  if (p_.obstacles.empty()) return -1.0;
  double h = -std::numeric_limits<double>::infinity();
  for (const auto& r : p_.obstacles) {
    const double depth = std::min({x[0] - r.x_min, r.x_max - x[0], x[1] - r.y_min, r.y_max - x[1]});
    h = std::max(h, depth);
  }
  return h;
}

bool WindFieldLite::in_avoid(const Vec& x) const {
  for (const auto& r : p_.obstacles)
    if (r.contains_strict(x[0], x[1])) return true;
  return false;
}

Vec WindFieldLite::sample_state(Rng& rng) const {
  Vec x(2);
  x << uniform(rng, -p_.half_extent, p_.half_extent), uniform(rng, -p_.half_extent, p_.half_extent);
  return x;
}

Vec WindFieldLite::sample_initial(Rng& rng) const {
  Vec x;
  do {
    x = sample_state(rng);
  } while (in_goal(x) || in_avoid(x));
  return x;
}

Vec WindFieldLite::observe(const Vec& x) const { return x / p_.half_extent; }

double WindFieldLite::goal_distance(const Vec& x) const {
  return std::hypot(x[0] - p_.goal[0], x[1] - p_.goal[1]);
}

ProblemPtr windfield_make(WindFieldParams p) {
  const double lim = 30.0;
  if (std::abs(p.goal[0]) > lim || std::abs(p.goal[1]) > lim)
    throw ContractError("windfield goal must lie within [-30, 30]^2");
  for (const auto& r : p.obstacles) {
    if (!(r.x_min < r.x_max && r.y_min < r.y_max)) throw ContractError("windfield obstacle rectangle is empty");
    if (r.x_min <= p.goal[0] && p.goal[0] <= r.x_max && r.y_min <= p.goal[1] && p.goal[1] <= r.y_max)
      throw ContractError("windfield goal lies inside an obstacle");
  }
  return std::make_unique<WindFieldLite>(std::move(p));
}

ProblemPtr windfield_make(std::array<double, 2> goal_xy) {
  WindFieldParams p;
  p.goal = goal_xy;
  return windfield_make(std::move(p));
}

}  // namespace rcppo::envkit
