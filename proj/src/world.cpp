#include "swarmmap/world.hpp"

#include <algorithm>
#include <fstream>
#include <limits>
#include <sstream>

#include "json.hpp"

namespace swarmmap {

using nlohmann::json;

namespace {

double ray_segment(const Vec2& origin, const Vec2& dir, double max_range,
                   const Wall& w) {
  // origin + u*dir*max_range, u in [0,1], against w.a + s*(w.b-w.a), s in [0,1]
  const Vec2 r = dir * max_range;
  const Vec2 e = w.b - w.a;
  const double denom = r.cross(e);
  if (std::abs(denom) < 1e-12) return -1.0;  // parallel
  const Vec2 ao = w.a - origin;
  const double u = ao.cross(e) / denom;
  const double s = ao.cross(r) / denom;
  if (u < 0.0 || u > 1.0 || s < 0.0 || s > 1.0) return -1.0;
  return u * max_range;
}

void validate(const World& w) {
  for (size_t i = 0; i < w.walls.size(); ++i) {
    if ((w.walls[i].b - w.walls[i].a).norm_sq() == 0.0) {
      std::ostringstream os;
      os << "walls[" << i << "]: zero-length segment at (" << w.walls[i].a.x
         << ", " << w.walls[i].a.y << ")";
      throw WorldFormatError(os.str());
    }
  }
  for (size_t i = 0; i < w.starts.size(); ++i) {
    const Vec2 p = w.starts[i].position();
    if (!w.bounds.contains(p)) {
      std::ostringstream os;
      os << "starts[" << i << "]: pose (" << p.x << ", " << p.y
         << ") outside bounds";
      throw WorldFormatError(os.str());
    }
    if (!w.walls.empty() && distance_to_walls(w, p) < 1e-6) {
      std::ostringstream os;
      os << "starts[" << i << "]: pose lies on a wall";
      throw WorldFormatError(os.str());
    }
  }
}

}  // namespace

World load_world(const std::string& json_text) {
  json doc;
  try {
    doc = json::parse(json_text);
  } catch (const json::parse_error& e) {
    throw WorldFormatError(std::string("world JSON: ") + e.what());
  }
  World w;
  try {
    for (const auto& seg : doc.at("walls")) {
      if (!seg.is_array() || seg.size() != 4)
        throw WorldFormatError("walls: each entry must be [x1,y1,x2,y2]");
      w.walls.push_back(
          {{seg[0].get<double>(), seg[1].get<double>()},
           {seg[2].get<double>(), seg[3].get<double>()}});
    }
    for (const auto& s : doc.at("starts")) {
      if (!s.is_array() || s.size() != 3)
        throw WorldFormatError("starts: each entry must be [x,y,psi_deg]");
      w.starts.push_back({s[0].get<double>(), s[1].get<double>(),
                          wrap_angle(deg2rad(s[2].get<double>()))});
    }
    const auto& b = doc.at("bounds");
    if (!b.is_array() || b.size() != 4)
      throw WorldFormatError("bounds: must be [xmin,ymin,xmax,ymax]");
    w.bounds = {b[0].get<double>(), b[1].get<double>(), b[2].get<double>(),
                b[3].get<double>()};
  } catch (const json::exception& e) {
    throw WorldFormatError(std::string("world JSON: ") + e.what());
  }
  validate(w);
  return w;
}

World load_world_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw WorldFormatError("cannot open world file: " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  return load_world(buf.str());
}

std::string world_to_json(const World& w) {
  json doc;
  doc["walls"] = json::array();
  for (const auto& wall : w.walls)
    doc["walls"].push_back({wall.a.x, wall.a.y, wall.b.x, wall.b.y});
  doc["starts"] = json::array();
  for (const auto& s : w.starts)
    doc["starts"].push_back({s.x, s.y, rad2deg(s.psi)});
  doc["bounds"] = {w.bounds.xmin, w.bounds.ymin, w.bounds.xmax, w.bounds.ymax};
  return doc.dump(2);
}

std::optional<double> ray_cast(const World& world, const Vec2& origin,
                               double angle, double max_range) {
  const Vec2 dir{std::cos(angle), std::sin(angle)};
  double best = std::numeric_limits<double>::infinity();
  for (const auto& w : world.walls) {
    const double d = ray_segment(origin, dir, max_range, w);
    if (d >= 0.0 && d < best) best = d;
  }
  if (best == std::numeric_limits<double>::infinity()) return std::nullopt;
  return best;
}

double distance_to_walls(const World& world, const Vec2& p) {
  double best = std::numeric_limits<double>::infinity();
  for (const auto& w : world.walls) {
    const Vec2 e = w.b - w.a;
    double t = (p - w.a).dot(e) / e.norm_sq();
    t = std::clamp(t, 0.0, 1.0);
    best = std::min(best, distance(p, w.a + e * t));
  }
  return best;
}

StepResult step(DroneState& state, const World& world, double dt,
                const NoiseModel& noise, Rng& rng) {
  StepResult result;
  const Vec2 v_cmd = state.world_velocity();
  Vec2 motion = v_cmd * dt;

  // Clamp the true motion at the first wall hit, pulled back a hair so the
  // pose never ends up inside a wall.
  const double len = motion.norm();
  if (len > 0.0 && !world.walls.empty()) {
    const double angle = std::atan2(motion.y, motion.x);
    const auto hit = ray_cast(world, state.true_pose.position(), angle, len);
    if (hit) {
      result.collided = true;
      const Vec2 dir = motion * (1.0 / len);
      const double clamped = std::max(0.0, *hit - 1e-6);
      result.collision_point =
          state.true_pose.position() + dir * *hit;
      motion = dir * clamped;
    }
  }

  state.true_pose.x += motion.x;
  state.true_pose.y += motion.y;
  state.true_pose.psi =
      wrap_angle(state.true_pose.psi + state.yaw_rate_cmd * dt);

  // Odometry: realized velocity, scaled by the bias, plus Gaussian noise.
  const Vec2 v_real = motion * (dt > 0.0 ? 1.0 / dt : 0.0);
  std::normal_distribution<double> gauss(0.0, 1.0);
  const double sx =
      noise.velocity_noise_std + noise.velocity_noise_rel * std::abs(v_real.x);
  const double sy =
      noise.velocity_noise_std + noise.velocity_noise_rel * std::abs(v_real.y);
  const double vx_est = v_real.x * noise.velocity_scale_bias + gauss(rng) * sx;
  const double vy_est = v_real.y * noise.velocity_scale_bias + gauss(rng) * sy;
  const bool spinning = std::abs(state.yaw_rate_cmd) > 0.1;
  const double syaw =
      noise.yaw_noise_std * (spinning ? noise.spin_yaw_noise_multiplier : 1.0);
  const double yaw_est = state.yaw_rate_cmd + gauss(rng) * syaw;

  state.est_pose.x += vx_est * dt;
  state.est_pose.y += vy_est * dt;
  state.est_pose.psi = wrap_angle(state.est_pose.psi + yaw_est * dt);

  state.clock += dt;
  return result;
}

}  // namespace swarmmap
