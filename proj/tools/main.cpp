#include <filesystem>
#include <iostream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"
#include "swarmmap/exporters.hpp"
#include "swarmmap/grid.hpp"
#include "swarmmap/icp.hpp"
#include "swarmmap/metrics.hpp"
#include "swarmmap/mission.hpp"
#include "swarmmap/net.hpp"
#include "swarmmap/pose_graph.hpp"
#include "swarmmap/world.hpp"

namespace {

using namespace swarmmap;
using nlohmann::json;

std::vector<int> parse_int_list(const std::string& text) {
  std::vector<int> out;
  size_t pos = 0;
  while (pos < text.size()) {
    size_t comma = text.find(',', pos);
    if (comma == std::string::npos) comma = text.size();
    out.push_back(std::stoi(text.substr(pos, comma - pos)));
    pos = comma + 1;
  }
  return out;
}

int cmd_simulate(const std::string& mission_path, const std::string& out_dir) {
  const std::string text = read_text_file(mission_path);
  const std::string base =
      std::filesystem::path(mission_path).parent_path().string();
  Simulation sim(mission_from_json(text, base));
  sim.run();
  if (!out_dir.empty()) sim.write_outputs(out_dir);
  const auto& rep = sim.report();
  std::cout << "mission_time_s=" << rep.mission_time
            << " closures=" << rep.closures
            << " collisions=" << rep.collisions
            << " final_main=" << int(rep.final_main)
            << " slam_ran=" << (rep.slam_ran ? 1 : 0) << "\n";
  if (!sim.complete()) {
    std::cerr << json{{"error", "mission hit max_sim_time before finishing"}}
                     .dump()
              << "\n";
    return 1;
  }
  return 0;
}

int cmd_icp_bench(const std::string& sizes, int repeats, uint64_t seed,
                  int iterations, const std::string& out) {
  const auto report = icp_runtime_profile(parse_int_list(sizes), repeats, seed,
                                          iterations);
  std::ostringstream os;
  os << "size,ms_mean,ms_std\n";
  for (const auto& row : report.rows)
    os << row.size << ',' << row.ms_mean << ',' << row.ms_std << '\n';
  os << "# quadratic fit: " << report.fit_a << "*x^2 + " << report.fit_b
     << "*x + " << report.fit_c << "  R^2=" << report.r_squared << '\n';
  os << "# memory model at 480 points: "
     << IcpBenchReport::memory_model_bytes(480) << " bytes (two scans)\n";
  if (out.empty())
    std::cout << os.str();
  else
    write_text_file(out, os.str());
  return 0;
}

int cmd_slam_bench(const std::string& poses, const std::string& constraints,
                   int repeats, uint64_t seed) {
  const auto rows = slam_runtime_profile(parse_int_list(poses),
                                         parse_int_list(constraints), repeats,
                                         seed);
  std::cout << "poses,constraints,ms\n";
  for (const auto& r : rows)
    std::cout << r.poses << ',' << r.constraints << ',' << r.ms << '\n';
  return 0;
}

int cmd_eval(const std::string& graph_path, const std::string& world_path,
             const std::string& cloud_path) {
  const PoseGraph graph = PoseGraph::from_json(read_text_file(graph_path));
  const World world = load_world_file(world_path);

  json out;
  // ground truth per node is carried in sim-exported graph dumps
  const json doc = json::parse(read_text_file(graph_path));
  std::vector<Pose2D> est, gt;
  for (const auto& n : doc.at("nodes")) {
    if (!n.contains("gt")) continue;
    est.push_back({n["x"].get<double>(), n["y"].get<double>(),
                   n["psi"].get<double>()});
    gt.push_back({n["gt"][0].get<double>(), n["gt"][1].get<double>(),
                  n["gt"][2].get<double>()});
  }
  if (!est.empty()) out["rmse_poses"] = rmse_poses(est, gt);
  out["nodes"] = graph.nodes().size();
  out["edges"] = graph.edges().size();

  if (!cloud_path.empty()) {
    const MapPointCloud cloud = cloud_from_csv(read_text_file(cloud_path));
    out["rmse_map"] = rmse_map(cloud.points, world.walls);
    out["points"] = cloud.points.size();
  }
  std::cout << out.dump(2) << "\n";
  return 0;
}

int cmd_export(const std::string& cloud_path, const std::string& world_path,
               const std::string& graph_path, const std::string& grid_out,
               const std::string& svg_out, double resolution, int min_hits) {
  MapPointCloud cloud = cloud_from_csv(read_text_file(cloud_path));
  if (!graph_path.empty()) {
    const PoseGraph graph = PoseGraph::from_json(read_text_file(graph_path));
    cloud.source_position.clear();
    for (const auto& id : cloud.source) {
      cloud.source_position.push_back(
          graph.has_node(id) ? graph.node(id).position() : Vec2{});
    }
  }
  if (!grid_out.empty())
    write_text_file(grid_out,
                    grid_to_pgm(to_occupancy_grid(cloud, resolution, min_hits)));
  if (!svg_out.empty()) {
    const World world = load_world_file(world_path);
    write_text_file(svg_out, overview_svg(world, {}, cloud));
  }
  return 0;
}

int cmd_bandwidth(int agents, double spacing, double psm, double velocity) {
  const auto b = required_bandwidth(agents, spacing, psm, velocity);
  const double channel = 64100.0;
  std::cout << "agents=" << agents << " spacing_m=" << spacing
            << " p_sm=" << psm << " velocity_mps=" << velocity << "\n";
  std::cout << "bytes_per_meter=" << b.bytes_per_meter
            << " bits_per_meter=" << b.bits_per_meter
            << " bits_per_second=" << b.bits_per_second << "\n";
  std::cout << "pose rate assumption: one pose per " << spacing
            << " m per drone at " << velocity << " m/s\n";
  std::cout << "channel=" << channel << " bit/s -> "
            << (b.bits_per_second <= channel ? "SUPPORTED" : "EXCEEDED")
            << "\n";
  return b.bits_per_second <= channel ? 0 : 2;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"swarmmap: multi-drone ToF mapping simulator"};
  app.require_subcommand(1);

  std::string mission_path, out_dir;
  auto* simulate = app.add_subcommand("simulate", "run a mission file");
  simulate->add_option("--mission", mission_path, "mission JSON")->required();
  simulate->add_option("--out", out_dir, "output directory");

  std::string sizes = "32,64,96,128,160,192,224,256,288,320,352,384,416,448,480";
  int repeats = 5;
  uint64_t seed = 1;
  int iterations = 10;
  std::string bench_out;
  auto* icp_bench = app.add_subcommand("icp-bench", "ICP runtime profile");
  icp_bench->add_option("--sizes", sizes, "comma-separated scan sizes");
  icp_bench->add_option("--repeats", repeats);
  icp_bench->add_option("--seed", seed);
  icp_bench->add_option("--iterations", iterations);
  icp_bench->add_option("--out", bench_out, "write CSV here");

  std::string poses = "16,48,80,112,144,176";
  std::string constraints = "1,32";
  auto* slam_bench = app.add_subcommand("slam-bench", "SLAM runtime profile");
  slam_bench->add_option("--poses", poses);
  slam_bench->add_option("--constraints", constraints);
  slam_bench->add_option("--repeats", repeats);
  slam_bench->add_option("--seed", seed);

  std::string graph_path, world_path, cloud_path;
  auto* eval = app.add_subcommand("eval", "metrics for a graph/cloud");
  eval->add_option("--graph", graph_path)->required();
  eval->add_option("--world", world_path)->required();
  eval->add_option("--cloud", cloud_path);

  std::string grid_out, svg_out;
  double resolution = 0.1;
  int min_hits = 3;
  auto* exp = app.add_subcommand("export", "grid/SVG from saved artifacts");
  exp->add_option("--cloud", cloud_path)->required();
  exp->add_option("--world", world_path);
  exp->add_option("--graph", graph_path);
  exp->add_option("--grid", grid_out, "PGM output path");
  exp->add_option("--svg", svg_out, "SVG output path");
  exp->add_option("--resolution", resolution);
  exp->add_option("--min-hits", min_hits);

  int agents = 20;
  double spacing = 1.0, psm = 0.1, velocity = 0.8;
  auto* bw = app.add_subcommand("bandwidth", "required swarm bandwidth");
  bw->add_option("--agents", agents);
  bw->add_option("--spacing", spacing);
  bw->add_option("--psm", psm);
  bw->add_option("--velocity", velocity);

  CLI11_PARSE(app, argc, argv);

  try {
    if (simulate->parsed()) return cmd_simulate(mission_path, out_dir);
    if (icp_bench->parsed())
      return cmd_icp_bench(sizes, repeats, seed, iterations, bench_out);
    if (slam_bench->parsed())
      return cmd_slam_bench(poses, constraints, repeats, seed);
    if (eval->parsed()) return cmd_eval(graph_path, world_path, cloud_path);
    if (exp->parsed())
      return cmd_export(cloud_path, world_path, graph_path, grid_out, svg_out,
                        resolution, min_hits);
    if (bw->parsed()) return cmd_bandwidth(agents, spacing, psm, velocity);
  } catch (const std::exception& e) {
    std::cerr << nlohmann::json{{"error", e.what()}}.dump() << "\n";
    return 1;
  }
  return 0;
}
