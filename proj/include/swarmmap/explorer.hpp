#pragma once

#include <cstdint>
#include <optional>

#include "swarmmap/geometry.hpp"

namespace swarmmap {

enum class SteeringPriority : uint8_t { Left, Right };

struct ExplorerConfig {
  double v_exp = 0.8;        // nominal exploration speed, m/s
  double v_stab = 2.0;       // wall-holding proportional gain, 1/s
  double d_wall = 0.5;       // target wall distance, m
  double d_slow = 0.75;      // slow-down distance to a waypoint, m
  double a_exp = 0.5;        // acceleration cap, m/s^2
  double waypoint_spacing = 1.0;
  double side_wall_range = 1.0;  // a wall further away is "no wall"
  double forward_obstacle_threshold = 0.6;
  double arrival_tolerance = 0.05;
  SteeringPriority priority = SteeringPriority::Left;
  double initial_heading = 0.0;  // radians; multiple of 90 degrees
};

enum class ExplorerPhase : uint8_t { Exploring, Scanning, Landed };

struct ExplorerState {
  Vec2 primary_axis{1.0, 0.0};
  Vec2 next_waypoint;
  double last_velocity = 0.0;
  ExplorerPhase phase = ExplorerPhase::Exploring;
};

// Wall-holding velocity along the secondary axis; positive moves toward
// body-left (the direction of primary_axis rotated +90 degrees). Distances
// are the minimum valid reading of the corresponding side sensor, or nullopt
// when nothing is in range.
double secondary_velocity(std::optional<double> d_left,
                          std::optional<double> d_right,
                          const ExplorerConfig& cfg);

// Proportional waypoint-approach speed with the acceleration cap applied to
// increases only.
double primary_velocity(double d_w, double last_v, double dt,
                        const ExplorerConfig& cfg);

struct ObstacleDecision {
  bool landed = false;
  Vec2 new_primary_axis;
};

// Reaction to a blocked exploration direction: turn toward the priority side
// when it is free, otherwise the other side; a dead end means landing.
ObstacleDecision on_obstacle(const Vec2& primary_axis, bool left_free,
                             bool right_free, const ExplorerConfig& cfg);

// Snaps a heading to the nearest world axis direction.
Vec2 axis_from_heading(double heading);

}  // namespace swarmmap
