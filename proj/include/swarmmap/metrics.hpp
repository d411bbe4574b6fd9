#pragma once

#include <span>
#include <vector>

#include "swarmmap/geometry.hpp"
#include "swarmmap/world.hpp"

namespace swarmmap {

// Pose estimation RMSE over x,y only (the reduced pose representation).
// Throws std::invalid_argument on length mismatch or empty input.
double rmse_poses(std::span<const Pose2D> estimates,
                  std::span<const Pose2D> ground_truth);

// Distance from a point to a wall: perpendicular distance to the line when
// the projection falls within the segment, otherwise distance to the
// nearest endpoint.
double point_to_wall_distance(const Vec2& p, const Wall& w);

// Mapping RMSE: per point the minimum wall distance, root-mean-squared.
// Throws std::invalid_argument on an empty cloud or empty wall list.
double rmse_map(std::span<const Vec2> points, std::span<const Wall> walls);

}  // namespace swarmmap
