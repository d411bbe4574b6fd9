#include "swarmmap/pose_graph.hpp"

#include <Eigen/Dense>
#include <chrono>
#include <queue>
#include <random>

#include "json.hpp"

namespace swarmmap {

using nlohmann::json;

size_t PoseGraph::virtual_edge_count() const {
  size_t n = 0;
  for (const auto& e : edges_)
    if (e.kind == EdgeKind::Virtual) ++n;
  return n;
}

size_t PoseGraph::memory_usage_bytes() const {
  return nodes_.size() * budget_.per_pose_bytes +
         edges_.size() * budget_.per_edge_bytes;
}

bool PoseGraph::within_budget(size_t extra_poses, size_t extra_edges) const {
  const size_t projected = memory_usage_bytes() +
                           extra_poses * budget_.per_pose_bytes +
                           extra_edges * budget_.per_edge_bytes;
  return projected <= budget_.limit_bytes;
}

GraphStatus PoseGraph::add_anchor(PoseId id, const Pose2D& pose) {
  if (nodes_.count(id)) return GraphStatus::DuplicateId;
  if (!within_budget(1, 0)) return GraphStatus::BudgetExceeded;
  nodes_[id] = pose.normalized();
  anchors_.insert(id);
  return GraphStatus::Ok;
}

GraphStatus PoseGraph::add_pose(PoseId id, const RelativeMeasurement& odom) {
  if (nodes_.count(id)) return GraphStatus::DuplicateId;
  const PoseId prev{id.drone, id.index - 1};
  if (id.index == 0 || !nodes_.count(prev)) return GraphStatus::MissingPrevious;
  if (!within_budget(1, 1)) return GraphStatus::BudgetExceeded;
  nodes_[id] = integrate(nodes_.at(prev), odom);
  edges_.push_back({prev, id, odom, EdgeKind::Odometry});
  return GraphStatus::Ok;
}

GraphStatus PoseGraph::add_virtual_edge(PoseId from, PoseId to,
                                        const IcpResult& icp_result) {
  if (!icp_result.converged || icp_result.status != IcpStatus::Ok)
    return GraphStatus::NotConverged;
  if (!nodes_.count(from) || !nodes_.count(to)) return GraphStatus::UnknownNode;
  if (!within_budget(0, 1)) return GraphStatus::BudgetExceeded;
  edges_.push_back(
      {from, to, to_measurement(icp_result.transform), EdgeKind::Virtual});
  return GraphStatus::Ok;
}

namespace {

// Residual of one edge: e = z - zhat with zhat translation R(psi_i)^T
// (t_j - t_i) and wrapped angle difference.
Eigen::Vector3d edge_residual(const Pose2D& xi, const Pose2D& xj,
                              const RelativeMeasurement& z) {
  const Vec2 dt = Vec2{xj.x - xi.x, xj.y - xi.y}.rotated(-xi.psi);
  return {z.dx - dt.x, z.dy - dt.y, wrap_angle(z.dpsi - (xj.psi - xi.psi))};
}

double graph_objective(const std::map<PoseId, Pose2D>& nodes,
                       const std::vector<GraphEdge>& edges) {
  double f = 0.0;
  for (const auto& e : edges) {
    const auto r = edge_residual(nodes.at(e.from), nodes.at(e.to),
                                 e.measurement);
    f += information_scale(e.kind) * r.squaredNorm();
  }
  return f;
}

bool connected_from_anchors(const std::map<PoseId, Pose2D>& nodes,
                            const std::vector<GraphEdge>& edges,
                            const std::set<PoseId>& anchors) {
  std::map<PoseId, std::vector<PoseId>> adj;
  for (const auto& e : edges) {
    adj[e.from].push_back(e.to);
    adj[e.to].push_back(e.from);
  }
  std::set<PoseId> seen(anchors.begin(), anchors.end());
  std::queue<PoseId> frontier;
  for (const auto& a : anchors) frontier.push(a);
  while (!frontier.empty()) {
    const PoseId u = frontier.front();
    frontier.pop();
    for (const auto& v : adj[u]) {
      if (seen.insert(v).second) frontier.push(v);
    }
  }
  return seen.size() == nodes.size();
}

}  // namespace

double PoseGraph::objective() const {
  return graph_objective(nodes_, edges_);
}

OptimizeReport PoseGraph::optimize(const OptimizeOptions& opts) {
  OptimizeReport report;

  // With odometry edges only, the forward-integrated poses already agree
  // with every measurement; return them untouched.
  if (virtual_edge_count() == 0) {
    report.initial_objective = report.final_objective = objective();
    return report;
  }
  if (!connected_from_anchors(nodes_, edges_, anchors_)) {
    report.status = GraphStatus::SingularSystem;
    return report;
  }

  // Free-node index map; 3 unknowns per non-anchor node.
  std::map<PoseId, int> offset;
  int dim = 0;
  for (const auto& [id, pose] : nodes_) {
    (void)pose;
    if (!anchors_.count(id)) {
      offset[id] = dim;
      dim += 3;
    }
  }
  report.unknowns = dim;
  report.initial_objective = objective();
  report.final_objective = report.initial_objective;
  if (dim == 0) return report;

  auto working = nodes_;
  double current_objective = report.initial_objective;

  for (int it = 0; it < opts.max_gn_iterations; ++it) {
    Eigen::MatrixXd H = Eigen::MatrixXd::Zero(dim, dim);
    Eigen::VectorXd b = Eigen::VectorXd::Zero(dim);

    for (const auto& e : edges_) {
      const Pose2D& xi = working.at(e.from);
      const Pose2D& xj = working.at(e.to);
      const Eigen::Vector3d r = edge_residual(xi, xj, e.measurement);
      const double w = information_scale(e.kind);

      const double c = std::cos(xi.psi), s = std::sin(xi.psi);
      // d/dpsi_i of R(psi_i)^T
      Eigen::Matrix2d Rt, dRt;
      Rt << c, s, -s, c;
      dRt << -s, c, -c, -s;
      const Eigen::Vector2d dt(xj.x - xi.x, xj.y - xi.y);

      Eigen::Matrix3d Ji = Eigen::Matrix3d::Zero();
      Ji.block<2, 2>(0, 0) = Rt;
      Ji.block<2, 1>(0, 2) = -dRt * dt;
      Ji(2, 2) = 1.0;
      Eigen::Matrix3d Jj = Eigen::Matrix3d::Zero();
      Jj.block<2, 2>(0, 0) = -Rt;
      Jj(2, 2) = -1.0;

      const bool fi = anchors_.count(e.from) == 0;
      const bool fj = anchors_.count(e.to) == 0;
      const int oi = fi ? offset.at(e.from) : -1;
      const int oj = fj ? offset.at(e.to) : -1;
      if (fi) {
        H.block<3, 3>(oi, oi) += w * Ji.transpose() * Ji;
        b.segment<3>(oi) += w * Ji.transpose() * r;
      }
      if (fj) {
        H.block<3, 3>(oj, oj) += w * Jj.transpose() * Jj;
        b.segment<3>(oj) += w * Jj.transpose() * r;
      }
      if (fi && fj) {
        H.block<3, 3>(oi, oj) += w * Ji.transpose() * Jj;
        H.block<3, 3>(oj, oi) += w * Jj.transpose() * Ji;
      }
    }

    Eigen::LDLT<Eigen::MatrixXd> ldlt(H);
    if (ldlt.info() != Eigen::Success) {
      report.status = GraphStatus::SingularSystem;
      break;
    }
    const Eigen::VectorXd delta = ldlt.solve(-b);
    if (!delta.allFinite()) {
      report.status = GraphStatus::SingularSystem;
      break;
    }

    // Plain Gauss-Newton step, halved (up to 5 times) if the objective
    // would increase.
    double alpha = 1.0;
    std::map<PoseId, Pose2D> candidate;
    double cand_objective = 0.0;
    bool accepted = false;
    for (int h = 0; h <= 5; ++h) {
      candidate = working;
      for (const auto& [id, off] : offset) {
        Pose2D& p = candidate.at(id);
        p.x += alpha * delta(off);
        p.y += alpha * delta(off + 1);
        p.psi = wrap_angle(p.psi + alpha * delta(off + 2));
      }
      cand_objective = graph_objective(candidate, edges_);
      if (cand_objective <= current_objective) {
        accepted = true;
        break;
      }
      alpha *= 0.5;
    }
    if (!accepted) break;

    working = std::move(candidate);
    current_objective = cand_objective;
    report.iterations = it + 1;
    report.optimized = true;
    if ((alpha * delta).lpNorm<Eigen::Infinity>() < opts.step_tol) break;
  }

  if (report.status == GraphStatus::Ok && report.optimized) {
    nodes_ = std::move(working);
    report.final_objective = current_objective;
  }
  return report;
}

std::string PoseGraph::to_json(const std::map<PoseId, Pose2D>* ground_truth,
                               int indent) const {
  json doc;
  doc["nodes"] = json::array();
  for (const auto& [id, p] : nodes_) {
    json n = {{"drone", id.drone},
              {"index", id.index},
              {"x", p.x},
              {"y", p.y},
              {"psi", p.psi}};
    if (ground_truth) {
      const auto it = ground_truth->find(id);
      if (it != ground_truth->end())
        n["gt"] = {it->second.x, it->second.y, it->second.psi};
    }
    doc["nodes"].push_back(std::move(n));
  }
  doc["edges"] = json::array();
  for (const auto& e : edges_) {
    doc["edges"].push_back(
        {{"from", {e.from.drone, e.from.index}},
         {"to", {e.to.drone, e.to.index}},
         {"dx", e.measurement.dx},
         {"dy", e.measurement.dy},
         {"dpsi", e.measurement.dpsi},
         {"kind", e.kind == EdgeKind::Virtual ? "virtual" : "odometry"}});
  }
  doc["anchors"] = json::array();
  for (const auto& a : anchors_) doc["anchors"].push_back({a.drone, a.index});
  return doc.dump(indent);
}

PoseGraph PoseGraph::from_json(const std::string& text) {
  const json doc = json::parse(text);
  PoseGraph g;
  for (const auto& n : doc.at("nodes")) {
    const PoseId id{n.at("drone").get<uint8_t>(), n.at("index").get<uint32_t>()};
    g.nodes_[id] = {n.at("x").get<double>(), n.at("y").get<double>(),
                    n.at("psi").get<double>()};
  }
  for (const auto& e : doc.at("edges")) {
    GraphEdge edge;
    edge.from = {e.at("from")[0].get<uint8_t>(), e.at("from")[1].get<uint32_t>()};
    edge.to = {e.at("to")[0].get<uint8_t>(), e.at("to")[1].get<uint32_t>()};
    edge.measurement = {e.at("dx").get<double>(), e.at("dy").get<double>(),
                        e.at("dpsi").get<double>()};
    edge.kind = e.at("kind").get<std::string>() == "virtual"
                    ? EdgeKind::Virtual
                    : EdgeKind::Odometry;
    g.edges_.push_back(edge);
  }
  if (doc.contains("anchors")) {
    for (const auto& a : doc.at("anchors"))
      g.anchors_.insert({a[0].get<uint8_t>(), a[1].get<uint32_t>()});
  }
  return g;
}

CorrectedCloud apply_correction(const PoseGraph& graph,
                                const std::map<PoseId, Scan>& scans) {
  CorrectedCloud out;
  for (const auto& [id, scan] : scans) {
    if (!graph.has_node(id)) {
      ++out.skipped_scans;
      continue;
    }
    const Transform2D fix =
        compose(Transform2D::from_pose(graph.node(id)),
                Transform2D::from_pose(scan.anchor_pose).inverse());
    for (const auto& p : scan.points) {
      out.points.push_back(fix.apply(p));
      out.source.push_back(id);
    }
  }
  return out;
}

std::vector<SlamBenchRow> slam_runtime_profile(
    const std::vector<int>& pose_counts, const std::vector<int>& constraints,
    int repeats, uint64_t seed) {
  std::vector<SlamBenchRow> rows;
  Rng rng(seed);
  std::normal_distribution<double> gauss(0.0, 1.0);
  std::uniform_real_distribution<double> uni(0.0, 1.0);

  for (int poses : pose_counts) {
    for (int ncon : constraints) {
      double total_ms = 0.0;
      for (int rep = 0; rep < repeats; ++rep) {
        // Random-walk chain with noisy loop-closure constraints between
        // well-separated pairs.
        PoseGraph g({SIZE_MAX, 0, 0});
        std::vector<Pose2D> truth(poses);
        truth[0] = {0, 0, 0};
        g.add_anchor({0, 0}, truth[0]);
        for (int i = 1; i < poses; ++i) {
          const RelativeMeasurement z{1.0, 0.0, uni(rng) - 0.5};
          truth[i] = integrate(truth[i - 1], z);
          RelativeMeasurement noisy = z;
          noisy.dx += 0.02 * gauss(rng);
          noisy.dy += 0.02 * gauss(rng);
          noisy.dpsi = wrap_angle(noisy.dpsi + 0.01 * gauss(rng));
          g.add_pose({0, uint32_t(i)}, noisy);
        }
        for (int c = 0; c < ncon && poses > 8; ++c) {
          const int i = int(uni(rng) * (poses - 8));
          const int j = i + 6 + int(uni(rng) * (poses - i - 7));
          IcpResult fake;
          fake.converged = true;
          fake.transform = to_transform(relative_pose(truth[i], truth[j]));
          g.add_virtual_edge({0, uint32_t(i)}, {0, uint32_t(j)}, fake);
        }
        const auto t0 = std::chrono::steady_clock::now();
        g.optimize();
        const auto t1 = std::chrono::steady_clock::now();
        total_ms += std::chrono::duration<double, std::milli>(t1 - t0).count();
      }
      rows.push_back({poses, ncon, total_ms / repeats});
    }
  }
  return rows;
}

}  // namespace swarmmap
