#include "swarmmap/exporters.hpp"

#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace swarmmap {

namespace {

std::string num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.9g", v);
  return buf;
}

}  // namespace

std::string format_pose_id(PoseId id) {
  return std::to_string(int(id.drone)) + ":" + std::to_string(id.index);
}

PoseId parse_pose_id(const std::string& text) {
  const auto colon = text.find(':');
  if (colon == std::string::npos)
    throw std::invalid_argument("pose id must be drone:index");
  return {uint8_t(std::stoi(text.substr(0, colon))),
          uint32_t(std::stoul(text.substr(colon + 1)))};
}

std::string trajectories_csv(const std::vector<TrajectorySample>& samples) {
  std::ostringstream os;
  os << "t,drone,true_x,true_y,true_psi,est_x,est_y,est_psi\n";
  for (const auto& s : samples) {
    os << num(s.t) << ',' << s.drone << ',' << num(s.true_pose.x) << ','
       << num(s.true_pose.y) << ',' << num(s.true_pose.psi) << ','
       << num(s.est_pose.x) << ',' << num(s.est_pose.y) << ','
       << num(s.est_pose.psi) << '\n';
  }
  return os.str();
}

std::string cloud_csv(const MapPointCloud& cloud) {
  std::ostringstream os;
  os << "pose_id,x,y\n";
  for (size_t i = 0; i < cloud.points.size(); ++i) {
    os << format_pose_id(cloud.source[i]) << ',' << num(cloud.points[i].x)
       << ',' << num(cloud.points[i].y) << '\n';
  }
  return os.str();
}

std::string scan_csv(const Scan& scan) {
  std::ostringstream os;
  os << "pose_id,x,y\n";
  for (const auto& p : scan.points) {
    os << format_pose_id(scan.pose_id) << ',' << num(p.x) << ',' << num(p.y)
       << '\n';
  }
  return os.str();
}

MapPointCloud cloud_from_csv(const std::string& text) {
  MapPointCloud cloud;
  std::istringstream is(text);
  std::string line;
  if (!std::getline(is, line))
    throw std::invalid_argument("cloud CSV: empty");
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    const auto c1 = line.find(',');
    const auto c2 = line.find(',', c1 + 1);
    if (c1 == std::string::npos || c2 == std::string::npos)
      throw std::invalid_argument("cloud CSV: bad row: " + line);
    cloud.source.push_back(parse_pose_id(line.substr(0, c1)));
    cloud.points.push_back({std::stod(line.substr(c1 + 1, c2 - c1 - 1)),
                            std::stod(line.substr(c2 + 1))});
  }
  return cloud;
}

std::string overview_svg(const World& world,
                         const std::map<int, std::vector<Vec2>>& trajectories,
                         const MapPointCloud& cloud) {
  const double pad = 0.5;
  const double x0 = world.bounds.xmin - pad, y0 = world.bounds.ymin - pad;
  const double w = world.bounds.xmax - world.bounds.xmin + 2 * pad;
  const double h = world.bounds.ymax - world.bounds.ymin + 2 * pad;
  const double scale = 100.0;  // px per meter
  auto X = [&](double x) { return num((x - x0) * scale); };
  auto Y = [&](double y) { return num((y0 + h - y) * scale); };  // y up

  static const char* kColors[] = {"#1f77b4", "#ff7f0e", "#2ca02c", "#d62728",
                                  "#9467bd", "#8c564b"};
  std::ostringstream os;
  os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << num(w * scale)
     << "\" height=\"" << num(h * scale) << "\">\n";
  os << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  for (const auto& p : cloud.points) {
    os << "<circle cx=\"" << X(p.x) << "\" cy=\"" << Y(p.y)
       << "\" r=\"1.5\" fill=\"#999999\"/>\n";
  }
  for (const auto& wall : world.walls) {
    os << "<line x1=\"" << X(wall.a.x) << "\" y1=\"" << Y(wall.a.y)
       << "\" x2=\"" << X(wall.b.x) << "\" y2=\"" << Y(wall.b.y)
       << "\" stroke=\"black\" stroke-width=\"3\"/>\n";
  }
  for (const auto& [drone, path] : trajectories) {
    os << "<polyline fill=\"none\" stroke=\""
       << kColors[size_t(drone) % 6] << "\" stroke-width=\"2\" points=\"";
    for (const auto& p : path) os << X(p.x) << ',' << Y(p.y) << ' ';
    os << "\"/>\n";
  }
  os << "</svg>\n";
  return os.str();
}

void write_text_file(const std::string& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open for writing: " + path);
  out << content;
  if (!out) throw std::runtime_error("write failed: " + path);
}

std::string read_text_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open: " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

}  // namespace swarmmap
