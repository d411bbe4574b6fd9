#pragma once

#include <optional>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

#include "swarmmap/geometry.hpp"

namespace swarmmap {

struct Wall {
  Vec2 a;
  Vec2 b;
};

struct Rect {
  double xmin = 0.0, ymin = 0.0, xmax = 0.0, ymax = 0.0;
  bool contains(const Vec2& p) const {
    return p.x >= xmin && p.x <= xmax && p.y >= ymin && p.y <= ymax;
  }
};

// Maze environment: wall segments plus per-drone start poses.
struct World {
  std::vector<Wall> walls;
  std::vector<Pose2D> starts;
  Rect bounds;
};

class WorldFormatError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Parses and validates the maze JSON document:
//   { "walls": [[x1,y1,x2,y2],...], "starts": [[x,y,psi_deg],...],
//     "bounds": [xmin,ymin,xmax,ymax] }
// Throws WorldFormatError with field context on malformed input, and on
// geometric violations (zero-length segment, start outside bounds or on a
// wall).
World load_world(const std::string& json_text);
World load_world_file(const std::string& path);
std::string world_to_json(const World& w);

// Distance to the nearest wall hit along the ray, or nullopt if nothing is
// intersected within max_range. Parallel rays are rejected with epsilon
// 1e-12 on the determinant.
std::optional<double> ray_cast(const World& world, const Vec2& origin,
                               double angle, double max_range);

double distance_to_walls(const World& world, const Vec2& p);

// Odometry and sensor error model. velocity_noise_std is an additive per-axis
// velocity noise; velocity_noise_rel scales with the commanded speed and is
// what makes drift grow with flight velocity. All knobs are calibration
// choices exposed through the mission config.
struct NoiseModel {
  double velocity_scale_bias = 1.005;
  double velocity_noise_std = 0.01;        // m/s per axis
  double velocity_noise_rel = 0.12;        // per unit commanded speed
  double yaw_noise_std = 0.0005;           // rad/s; gyro-grade in cruise
  double spin_yaw_noise_multiplier = 6.0;  // applies while |yaw rate| > 0.1
  double range_noise_std = 0.02;           // meters, per ToF pixel
  double pixel_dropout_prob = 0.03;

  static NoiseModel none() { return {1.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0}; }
};

using Rng = std::mt19937_64;

struct DroneState {
  Pose2D true_pose;
  Pose2D est_pose;
  Vec2 primary_axis{1.0, 0.0};  // unit, world-axis aligned
  double v_pri = 0.0;           // commanded velocity along primary axis
  double v_sec = 0.0;           // commanded velocity along secondary axis
  double yaw_rate_cmd = 0.0;
  double clock = 0.0;

  // secondary axis = primary rotated +90 degrees (body-left of primary)
  Vec2 secondary_axis() const { return primary_axis.perp(); }
  Vec2 world_velocity() const {
    return primary_axis * v_pri + secondary_axis() * v_sec;
  }
};

struct StepResult {
  bool collided = false;
  Vec2 collision_point;
};

inline constexpr double kTickRate = 15.0;  // sensor-limited engine rate, Hz
inline constexpr double kTickDt = 1.0 / kTickRate;

// Advances one drone by dt. The true pose integrates the commanded velocity
// exactly, clamped at walls; the estimated pose integrates the realized
// velocity scaled by the odometry bias plus Gaussian noise. Deterministic
// for a fixed rng state.
StepResult step(DroneState& state, const World& world, double dt,
                const NoiseModel& noise, Rng& rng);

}  // namespace swarmmap
