#include "swarmmap/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace swarmmap {

double rmse_poses(std::span<const Pose2D> estimates,
                  std::span<const Pose2D> ground_truth) {
  if (estimates.size() != ground_truth.size())
    throw std::invalid_argument("rmse_poses: length mismatch");
  if (estimates.empty())
    throw std::invalid_argument("rmse_poses: empty input");
  double sum = 0.0;
  for (size_t i = 0; i < estimates.size(); ++i) {
    const double dx = estimates[i].x - ground_truth[i].x;
    const double dy = estimates[i].y - ground_truth[i].y;
    sum += dx * dx + dy * dy;
  }
  return std::sqrt(sum / double(estimates.size()));
}

double point_to_wall_distance(const Vec2& p, const Wall& w) {
  const Vec2 e = w.b - w.a;
  const double len2 = e.norm_sq();
  if (len2 == 0.0) return distance(p, w.a);
  const double t = (p - w.a).dot(e) / len2;
  if (t < 0.0) return distance(p, w.a);
  if (t > 1.0) return distance(p, w.b);
  return distance(p, w.a + e * t);
}

double rmse_map(std::span<const Vec2> points, std::span<const Wall> walls) {
  if (walls.empty()) throw std::invalid_argument("rmse_map: no walls");
  if (points.empty()) throw std::invalid_argument("rmse_map: empty cloud");
  double sum = 0.0;
  for (const auto& p : points) {
    double best = std::numeric_limits<double>::infinity();
    for (const auto& w : walls)
      best = std::min(best, point_to_wall_distance(p, w));
    sum += best * best;
  }
  return std::sqrt(sum / double(points.size()));
}

}  // namespace swarmmap
