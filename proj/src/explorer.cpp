#include "swarmmap/explorer.hpp"

#include <algorithm>
#include <cmath>

namespace swarmmap {

double secondary_velocity(std::optional<double> d_left,
                          std::optional<double> d_right,
                          const ExplorerConfig& cfg) {
  const bool left = d_left && *d_left <= cfg.side_wall_range;
  const bool right = d_right && *d_right <= cfg.side_wall_range;
  if (left && right) {
    // corridor: center between the walls
    return (*d_left - 0.5 * (*d_left + *d_right)) * cfg.v_stab;
  }
  if (left) {
    // hold d_wall to the left wall; positive closes the gap
    return (*d_left - cfg.d_wall) * cfg.v_stab;
  }
  if (right) {
    return (cfg.d_wall - *d_right) * cfg.v_stab;
  }
  return 0.0;
}

double primary_velocity(double d_w, double last_v, double dt,
                        const ExplorerConfig& cfg) {
  double v = d_w < cfg.d_slow ? (d_w / cfg.d_slow + 0.1) * cfg.v_exp
                              : cfg.v_exp;
  v = std::min(v, last_v + cfg.a_exp * dt);  // decreases are uncapped
  return v;
}

ObstacleDecision on_obstacle(const Vec2& primary_axis, bool left_free,
                             bool right_free, const ExplorerConfig& cfg) {
  ObstacleDecision d;
  const Vec2 left = primary_axis.perp();
  const Vec2 right = left * -1.0;
  const bool prefer_left = cfg.priority == SteeringPriority::Left;
  if (prefer_left ? left_free : right_free) {
    d.new_primary_axis = prefer_left ? left : right;
  } else if (prefer_left ? right_free : left_free) {
    d.new_primary_axis = prefer_left ? right : left;
  } else {
    d.landed = true;  // dead end: the only way out is back
  }
  return d;
}

Vec2 axis_from_heading(double heading) {
  const double c = std::cos(heading), s = std::sin(heading);
  if (std::abs(c) >= std::abs(s)) return {c >= 0.0 ? 1.0 : -1.0, 0.0};
  return {0.0, s >= 0.0 ? 1.0 : -1.0};
}

}  // namespace swarmmap
