#pragma once

#include <cstdint>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "swarmmap/geometry.hpp"
#include "swarmmap/icp.hpp"
#include "swarmmap/pose_id.hpp"
#include "swarmmap/sensing.hpp"

namespace swarmmap {

enum class EdgeKind : uint8_t { Odometry, Virtual };

// Virtual (loop-closure) edges carry a 20x information weight, odometry
// edges 1x; the information matrix is the scaled identity.
inline double information_scale(EdgeKind kind) {
  return kind == EdgeKind::Virtual ? 20.0 : 1.0;
}

struct GraphEdge {
  PoseId from;
  PoseId to;
  RelativeMeasurement measurement;  // in `from`'s frame
  EdgeKind kind = EdgeKind::Odometry;
};

// Accounting model for the on-board RAM ceiling: the per-pose constant
// covers the pose estimate (24 B), the H and Cholesky diagonal blocks
// (2 x 72 B), the Gauss-Newton work vectors (48 B) and id/flags (8 B); the
// per-edge constant covers endpoint ids, the measurement, the information
// scale/kind and the linearized-residual workspace. With the 50 kB limit and
// 32 virtual constraints this rejects the 177th pose.
struct MemoryBudget {
  size_t limit_bytes = 50 * 1024;
  size_t per_pose_bytes = 224;
  size_t per_edge_bytes = 56;
};

enum class GraphStatus : uint8_t {
  Ok,
  BudgetExceeded,
  DuplicateId,
  MissingPrevious,
  UnknownNode,
  NotConverged,
  SingularSystem,
};

struct OptimizeOptions {
  int max_gn_iterations = 10;
  double step_tol = 1e-4;  // infinity norm of the update
};

struct OptimizeReport {
  GraphStatus status = GraphStatus::Ok;
  bool optimized = false;  // false for the pure-odometry no-op
  double initial_objective = 0.0;
  double final_objective = 0.0;
  int iterations = 0;
  int unknowns = 0;
};

// Pose-graph SLAM backend: nodes are pose estimates, edges relative
// measurements; Gauss-Newton minimizes sum e^T Omega e with each drone's
// first pose anchored.
class PoseGraph {
 public:
  PoseGraph() = default;
  explicit PoseGraph(MemoryBudget budget) : budget_(budget) {}

  // First pose of a drone, fixed at its known start.
  GraphStatus add_anchor(PoseId id, const Pose2D& pose);

  // Appends a pose initialized by forward-integrating the odometry from the
  // drone's previous pose, plus the odometry edge.
  GraphStatus add_pose(PoseId id, const RelativeMeasurement& odometry);

  // Loop-closure constraint from a converged ICP result. Cross-drone edges
  // merge the per-drone subgraphs into the global graph.
  GraphStatus add_virtual_edge(PoseId from, PoseId to,
                               const IcpResult& icp_result);

  OptimizeReport optimize(const OptimizeOptions& opts = {});

  bool has_node(PoseId id) const { return nodes_.count(id) != 0; }
  const Pose2D& node(PoseId id) const { return nodes_.at(id); }
  void set_node(PoseId id, const Pose2D& p) { nodes_.at(id) = p; }
  const std::map<PoseId, Pose2D>& nodes() const { return nodes_; }
  const std::vector<GraphEdge>& edges() const { return edges_; }
  const std::set<PoseId>& anchors() const { return anchors_; }
  size_t virtual_edge_count() const;
  size_t memory_usage_bytes() const;
  const MemoryBudget& budget() const { return budget_; }

  // 3 unknowns per non-anchor node.
  int solver_dimension() const {
    return 3 * int(nodes_.size() - anchors_.size());
  }

  double objective() const;

  std::string to_json(const std::map<PoseId, Pose2D>* ground_truth = nullptr,
                      int indent = 2) const;
  static PoseGraph from_json(const std::string& text);

 private:
  bool within_budget(size_t extra_poses, size_t extra_edges) const;

  std::map<PoseId, Pose2D> nodes_;
  std::vector<GraphEdge> edges_;
  std::set<PoseId> anchors_;
  MemoryBudget budget_;
};

// Re-projects stored scans by the rigid transform that takes each scan's
// original anchor pose to its optimized pose. Scans without a graph node are
// skipped and counted.
struct CorrectedCloud {
  std::vector<Vec2> points;
  std::vector<PoseId> source;  // per point
  int skipped_scans = 0;
};
CorrectedCloud apply_correction(const PoseGraph& graph,
                                const std::map<PoseId, Scan>& scans);

struct SlamBenchRow {
  int poses = 0;
  int constraints = 0;
  double ms = 0.0;
};
std::vector<SlamBenchRow> slam_runtime_profile(
    const std::vector<int>& pose_counts, const std::vector<int>& constraints,
    int repeats, uint64_t seed);

}  // namespace swarmmap
