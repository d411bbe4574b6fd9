#include "swarmmap/grid.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <stdexcept>

namespace swarmmap {

int OccupancyGrid::count(CellState s) const {
  int n = 0;
  for (const auto c : cells)
    if (c == s) ++n;
  return n;
}

OccupancyGrid to_occupancy_grid(const MapPointCloud& cloud, double resolution,
                                int min_hits) {
  if (resolution <= 0.0)
    throw std::invalid_argument("to_occupancy_grid: resolution must be > 0");
  OccupancyGrid g;
  g.resolution = resolution;
  if (cloud.points.empty()) return g;

  double xmin = cloud.points[0].x, xmax = xmin;
  double ymin = cloud.points[0].y, ymax = ymin;
  auto extend = [&](const Vec2& p) {
    xmin = std::min(xmin, p.x);
    xmax = std::max(xmax, p.x);
    ymin = std::min(ymin, p.y);
    ymax = std::max(ymax, p.y);
  };
  for (const auto& p : cloud.points) extend(p);
  for (const auto& p : cloud.source_position) extend(p);

  g.origin = {xmin - resolution, ymin - resolution};
  g.width = int(std::ceil((xmax - g.origin.x) / resolution)) + 1;
  g.height = int(std::ceil((ymax - g.origin.y) / resolution)) + 1;
  g.cells.assign(size_t(g.width) * g.height, CellState::Unknown);

  auto cell_of = [&](const Vec2& p) {
    return std::pair<int, int>{int(std::floor((p.x - g.origin.x) / resolution)),
                               int(std::floor((p.y - g.origin.y) / resolution))};
  };

  std::vector<int> hits(g.cells.size(), 0);
  for (const auto& p : cloud.points) {
    const auto [cx, cy] = cell_of(p);
    if (g.in_bounds(cx, cy)) ++hits[size_t(cy) * g.width + cx];
  }
  for (size_t i = 0; i < g.cells.size(); ++i)
    if (hits[i] >= min_hits) g.cells[i] = CellState::Occupied;

  // Free-space carving: amanatides-woo style grid walk from each source to
  // its point, marking traversed hit-free cells.
  const bool have_sources = cloud.source_position.size() == cloud.points.size();
  if (have_sources) {
    for (size_t i = 0; i < cloud.points.size(); ++i) {
      const Vec2 from = cloud.source_position[i];
      const Vec2 to = cloud.points[i];
      const auto [tx, ty] = cell_of(to);
      Vec2 d = to - from;
      const double len = d.norm();
      if (len == 0.0) continue;
      d = d * (1.0 / len);
      double t = 0.0;
      auto [cx, cy] = cell_of(from);
      const int step_x = d.x > 0 ? 1 : -1;
      const int step_y = d.y > 0 ? 1 : -1;
      auto boundary_t = [&](int c, double o, double dir, double org) {
        const double edge = org + (c + (dir > 0 ? 1 : 0)) * resolution;
        return dir != 0.0 ? (edge - o) / dir : 1e30;
      };
      double t_max_x = boundary_t(cx, from.x, d.x, g.origin.x);
      double t_max_y = boundary_t(cy, from.y, d.y, g.origin.y);
      const double t_dx = d.x != 0.0 ? resolution / std::abs(d.x) : 1e30;
      const double t_dy = d.y != 0.0 ? resolution / std::abs(d.y) : 1e30;
      while (t < len) {
        if (cx == tx && cy == ty) break;  // never carve the hit cell
        if (g.in_bounds(cx, cy)) {
          const size_t idx = size_t(cy) * g.width + cx;
          if (hits[idx] == 0) g.cells[idx] = CellState::Free;
        }
        if (t_max_x < t_max_y) {
          t = t_max_x;
          t_max_x += t_dx;
          cx += step_x;
        } else {
          t = t_max_y;
          t_max_y += t_dy;
          cy += step_y;
        }
      }
    }
  }
  return g;
}

std::string grid_to_pgm(const OccupancyGrid& grid) {
  std::ostringstream os;
  os << "P5\n" << grid.width << " " << grid.height << "\n255\n";
  // top row first
  for (int cy = grid.height - 1; cy >= 0; --cy) {
    for (int cx = 0; cx < grid.width; ++cx) {
      const CellState s = grid.at(cx, cy);
      const uint8_t v = s == CellState::Occupied ? 0
                        : s == CellState::Free   ? 255
                                                 : 128;
      os.put(char(v));
    }
  }
  return os.str();
}

OccupancyGrid grid_from_pgm(const std::string& pgm, double resolution,
                            Vec2 origin) {
  std::istringstream is(pgm);
  std::string magic;
  int w = 0, h = 0, maxval = 0;
  is >> magic >> w >> h >> maxval;
  if (magic != "P5" || w <= 0 || h <= 0 || maxval != 255)
    throw std::invalid_argument("grid_from_pgm: not a P5/255 PGM");
  is.get();  // single whitespace after the header
  OccupancyGrid g;
  g.resolution = resolution;
  g.origin = origin;
  g.width = w;
  g.height = h;
  g.cells.assign(size_t(w) * h, CellState::Unknown);
  for (int cy = h - 1; cy >= 0; --cy) {
    for (int cx = 0; cx < w; ++cx) {
      const int v = is.get();
      if (v < 0) throw std::invalid_argument("grid_from_pgm: truncated data");
      g.at(cx, cy) = v == 0     ? CellState::Occupied
                     : v == 255 ? CellState::Free
                                : CellState::Unknown;
    }
  }
  return g;
}

}  // namespace swarmmap
