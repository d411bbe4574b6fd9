#pragma once

#include <map>
#include <string>
#include <vector>

#include "swarmmap/geometry.hpp"
#include "swarmmap/grid.hpp"
#include "swarmmap/pose_id.hpp"
#include "swarmmap/sensing.hpp"
#include "swarmmap/world.hpp"

namespace swarmmap {

struct TrajectorySample {
  double t = 0.0;
  int drone = 0;
  Pose2D true_pose;
  Pose2D est_pose;
};

// Header: t,drone,true_x,true_y,true_psi,est_x,est_y,est_psi
std::string trajectories_csv(const std::vector<TrajectorySample>& samples);

// Header: pose_id,x,y with pose ids formatted as drone:index.
std::string cloud_csv(const MapPointCloud& cloud);
std::string scan_csv(const Scan& scan);
MapPointCloud cloud_from_csv(const std::string& text);

// Walls, one trajectory polyline per drone, and the map cloud overlay.
std::string overview_svg(const World& world,
                         const std::map<int, std::vector<Vec2>>& trajectories,
                         const MapPointCloud& cloud);

void write_text_file(const std::string& path, const std::string& content);
std::string read_text_file(const std::string& path);

std::string format_pose_id(PoseId id);
PoseId parse_pose_id(const std::string& text);

}  // namespace swarmmap
