#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "swarmmap/geometry.hpp"
#include "swarmmap/pose_id.hpp"

namespace swarmmap {

enum class CellState : uint8_t { Unknown = 0, Free = 1, Occupied = 2 };

struct OccupancyGrid {
  double resolution = 0.1;  // meters per cell
  Vec2 origin;              // world position of cell (0,0)'s corner
  int width = 0;
  int height = 0;
  std::vector<CellState> cells;  // row-major, y outer

  CellState at(int cx, int cy) const { return cells[size_t(cy) * width + cx]; }
  CellState& at(int cx, int cy) { return cells[size_t(cy) * width + cx]; }
  bool in_bounds(int cx, int cy) const {
    return cx >= 0 && cx < width && cy >= 0 && cy < height;
  }
  int count(CellState s) const;

  bool operator==(const OccupancyGrid&) const = default;
};

// Merged dense map: 2D points with the pose each one was observed from.
struct MapPointCloud {
  std::vector<Vec2> points;
  std::vector<PoseId> source;       // per point
  std::vector<Vec2> source_position;  // per point, for free-space carving
};

// Occupancy conversion: a cell is OCCUPIED once min_hits points fall inside;
// cells crossed by a source->point ray that collected no hits become FREE;
// the rest stays UNKNOWN. Adding points never un-occupies a cell.
OccupancyGrid to_occupancy_grid(const MapPointCloud& cloud, double resolution,
                                int min_hits);

// PGM encoding: 0 = occupied, 255 = free, 128 = unknown (binary P5).
std::string grid_to_pgm(const OccupancyGrid& grid);
OccupancyGrid grid_from_pgm(const std::string& pgm, double resolution = 0.1,
                            Vec2 origin = {});

}  // namespace swarmmap
