#pragma once

#include <map>
#include <memory>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "swarmmap/explorer.hpp"
#include "swarmmap/exporters.hpp"
#include "swarmmap/grid.hpp"
#include "swarmmap/icp.hpp"
#include "swarmmap/net.hpp"
#include "swarmmap/pose_graph.hpp"
#include "swarmmap/sensing.hpp"
#include "swarmmap/transport.hpp"
#include "swarmmap/world.hpp"

namespace swarmmap {

struct DroneSpec {
  uint8_t address = 0;
  Pose2D start;
  ExplorerConfig explorer;
  int max_poses = -1;   // land after this many poses; <0 explores until a
                        // dead end
  bool bridge = false;  // grounded relay: a network peer that never flies
};

enum class SlamTrigger : uint8_t { EndOfMission, EveryKClosures };

struct MissionConfig {
  World world;
  std::vector<DroneSpec> drones;
  uint8_t main_address = 0;
  uint64_t seed = 1;
  NoiseModel noise;
  double loss_prob = 0.0;
  SlamTrigger slam_trigger = SlamTrigger::EndOfMission;
  int slam_every_k = 8;
  double loop_closure_radius = 0.75;
  int min_index_gap = 5;  // same-drone closures only
  double icp_hover_s = 0.5;
  IcpConfig icp;
  MemoryBudget budget;
  double max_sim_time = 3600.0;
  int fail_main_at_pose = -1;  // fault injection
};

MissionConfig mission_from_json(const std::string& text,
                                const std::string& base_dir = "");

struct DroneOutcome {
  uint8_t address = 0;
  ExplorerPhase phase = ExplorerPhase::Exploring;
  bool failed = false;
  double land_time = -1.0;
  int poses = 0;
};

struct MissionReport {
  double mission_time = 0.0;  // takeoff until the last flying drone lands
  double total_time = 0.0;    // including SLAM propagation and quiescence
  int closures = 0;
  int tasks_dropped = 0;
  int collisions = 0;
  int scan_requests = 0;
  int scan_responses = 0;
  uint8_t final_main = 0;
  bool slam_ran = false;
  int slam_runs = 0;
  OptimizeReport slam_report;
  std::vector<DroneOutcome> drones;
};

// Deterministic discrete-time engine driving all agents at 15 Hz: physics,
// sensing, exploration policy, transport, and the main drone's scan-matching
// and SLAM coordination.
class Simulation {
 public:
  explicit Simulation(MissionConfig cfg);
  ~Simulation();

  void run();
  bool complete() const;
  double now() const;

  const MissionConfig& config() const;
  const MissionReport& report() const;
  const Network& network() const;
  const PoseGraph& graph_pre() const;
  const PoseGraph& graph_post() const;
  const std::map<PoseId, Pose2D>& ground_truth() const;
  const std::map<PoseId, Pose2D>& estimates_pre() const;  // as broadcast
  const std::map<PoseId, Pose2D>& pose_table(uint8_t address) const;
  std::vector<uint8_t> drone_addresses() const;
  const std::map<PoseId, Scan>& scans(uint8_t address) const;
  const std::vector<TrajectorySample>& trajectory() const;
  size_t peak_foreign_scans() const;

  MapPointCloud cloud_pre() const;
  MapPointCloud cloud_post() const;

  // RMSE of broadcast (pre-SLAM) or optimized (post-SLAM) poses vs truth.
  double pose_rmse_pre() const;
  double pose_rmse_post() const;

  void write_outputs(const std::string& dir) const;

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

}  // namespace swarmmap
