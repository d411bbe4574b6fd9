#include "swarmmap/mission.hpp"

#include <algorithm>
#include <filesystem>
#include <sstream>
#include <stdexcept>

#include "json.hpp"
#include "swarmmap/metrics.hpp"

namespace swarmmap {

using nlohmann::json;

namespace {

uint64_t drone_seed(uint64_t mission_seed, uint8_t address) {
  return mission_seed ^ (0x9E3779B97F4A7C15ull * (address + 1));
}

}  // namespace

MissionConfig mission_from_json(const std::string& text,
                                const std::string& base_dir) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::parse_error& e) {
    throw std::invalid_argument(std::string("mission JSON: ") + e.what());
  }
  MissionConfig cfg;
  try {
    if (doc.at("world").is_string()) {
      std::filesystem::path p = doc["world"].get<std::string>();
      if (p.is_relative() && !base_dir.empty())
        p = std::filesystem::path(base_dir) / p;
      cfg.world = load_world_file(p.string());
    } else {
      cfg.world = load_world(doc["world"].dump());
    }
    cfg.main_address = doc.at("main").get<uint8_t>();
    cfg.seed = doc.value("seed", uint64_t(1));
    cfg.loss_prob = doc.value("loss_prob", 0.0);
    cfg.loop_closure_radius = doc.value("loop_closure_radius", 0.75);
    cfg.min_index_gap = doc.value("min_index_gap", 5);
    cfg.icp_hover_s = doc.value("icp_hover_s", 0.5);
    cfg.max_sim_time = doc.value("max_sim_time", 3600.0);
    cfg.fail_main_at_pose = doc.value("fail_main_at_pose", -1);
    if (doc.contains("slam_trigger")) {
      const auto t = doc["slam_trigger"].get<std::string>();
      if (t == "end_of_mission") {
        cfg.slam_trigger = SlamTrigger::EndOfMission;
      } else if (t == "every_k_closures") {
        cfg.slam_trigger = SlamTrigger::EveryKClosures;
      } else {
        throw std::invalid_argument("mission: unknown slam_trigger " + t);
      }
    }
    cfg.slam_every_k = doc.value("slam_every_k", 8);
    if (doc.contains("noise")) {
      const auto& n = doc["noise"];
      NoiseModel& m = cfg.noise;
      m.velocity_scale_bias = n.value("velocity_scale_bias", m.velocity_scale_bias);
      m.velocity_noise_std = n.value("velocity_noise_std", m.velocity_noise_std);
      m.velocity_noise_rel = n.value("velocity_noise_rel", m.velocity_noise_rel);
      m.yaw_noise_std = n.value("yaw_noise_std", m.yaw_noise_std);
      m.spin_yaw_noise_multiplier =
          n.value("spin_yaw_noise_multiplier", m.spin_yaw_noise_multiplier);
      m.range_noise_std = n.value("range_noise_std", m.range_noise_std);
      m.pixel_dropout_prob = n.value("pixel_dropout_prob", m.pixel_dropout_prob);
    }
    if (doc.contains("icp")) {
      const auto& n = doc["icp"];
      cfg.icp.max_iterations = n.value("max_iterations", cfg.icp.max_iterations);
      cfg.icp.convergence_tol = n.value("convergence_tol", cfg.icp.convergence_tol);
      cfg.icp.gating_radius = n.value("gating_radius", cfg.icp.gating_radius);
      cfg.icp.min_correspondences =
          n.value("min_correspondences", cfg.icp.min_correspondences);
    }
    for (const auto& d : doc.at("drones")) {
      DroneSpec spec;
      spec.address = d.at("address").get<uint8_t>();
      const auto& s = d.at("start");
      const double heading = deg2rad(d.value("heading_deg", 0.0));
      spec.start = {s[0].get<double>(), s[1].get<double>(), wrap_angle(heading)};
      spec.explorer.initial_heading = wrap_angle(heading);
      spec.explorer.v_exp = d.value("v_exp", 0.8);
      const auto prio = d.value("priority", std::string("left"));
      spec.explorer.priority =
          prio == "right" ? SteeringPriority::Right : SteeringPriority::Left;
      spec.max_poses = d.value("max_poses", -1);
      spec.bridge = d.value("bridge", false);
      cfg.drones.push_back(spec);
    }
  } catch (const json::exception& e) {
    throw std::invalid_argument(std::string("mission JSON: ") + e.what());
  }
  return cfg;
}

namespace {

void validate_config(const MissionConfig& cfg) {
  if (cfg.drones.empty())
    throw std::invalid_argument("mission: no drones configured");
  std::set<uint8_t> addrs;
  bool main_found = false;
  for (const auto& d : cfg.drones) {
    if (d.address >= kBroadcastAddress)
      throw std::invalid_argument("mission: drone address must be < 0xF");
    if (!addrs.insert(d.address).second)
      throw std::invalid_argument("mission: duplicate drone address");
    if (d.address == cfg.main_address) {
      main_found = true;
      if (d.bridge)
        throw std::invalid_argument("mission: bridge cannot be the main drone");
    }
    const double quarter = std::abs(
        std::remainder(d.explorer.initial_heading, kPi / 2.0));
    if (!d.bridge && quarter > 1e-9)
      throw std::invalid_argument(
          "mission: initial heading must be a multiple of 90 degrees");
  }
  if (!main_found)
    throw std::invalid_argument("mission: main address not in drone list");
}

}  // namespace

struct Simulation::Impl {
  struct Drone {
    DroneSpec spec;
    DroneState state;
    ExplorerState explorer;
    Rng rng{0};
    bool failed = false;
    double land_time = -1.0;

    int scan_tick = -1;  // -1: not scanning
    ScanAccumulator scan_acc;
    PoseId scan_id;

    uint32_t next_pose_index = 0;
    Pose2D prev_pose_est;

    std::map<PoseId, Scan> own_scans;
    std::map<PoseId, Pose2D> table;
    std::set<uint8_t> dead_peers;
    uint8_t current_main = 0;
    double busy_until = 0.0;

    // scan requests we owe an answer to, possibly waiting for our own scan
    // acquisition to finish
    std::vector<std::pair<uint8_t, PoseId>> pending_responses;

    bool flying() const { return !spec.bridge; }
  };

  struct ClosureTask {
    PoseId trigger;
    PoseId match;
    std::optional<Scan> trigger_scan;
    std::optional<Scan> match_scan;
  };

  MissionConfig cfg;
  SensorGeometry geom = SensorGeometry::standard();
  Network net;
  std::vector<Drone> drones;  // ascending address
  uint64_t tick_count = 0;
  bool slam_done = false;
  bool finished = false;

  // acting main state
  uint8_t acting_main = 0;
  PoseGraph graph;
  std::vector<ClosureTask> tasks;
  std::set<std::pair<PoseId, PoseId>> tasked;
  std::map<PoseId, Scan> foreign_scans;
  std::optional<std::pair<PoseId, uint64_t>> tsr_in_flight;
  double tsr_issue_time = 0.0;
  std::vector<PoseId> tsr_queue;
  int closures_since_slam = 0;

  // evaluation records
  std::map<PoseId, Pose2D> gt_poses;
  std::map<PoseId, Pose2D> est_pre;
  PoseGraph graph_pre_snapshot;
  PoseGraph graph_post_snapshot;
  std::vector<TrajectorySample> samples;
  MissionReport rep;
  size_t peak_foreign = 0;

  explicit Impl(MissionConfig c)
      : cfg(std::move(c)), net(ChannelModel{cfg.loss_prob, 64100.0, cfg.seed}) {
    validate_config(cfg);
    graph = PoseGraph(cfg.budget);
    acting_main = cfg.main_address;

    std::vector<DroneSpec> specs = cfg.drones;
    std::sort(specs.begin(), specs.end(),
              [](const DroneSpec& a, const DroneSpec& b) {
                return a.address < b.address;
              });
    std::vector<uint8_t> addrs;
    for (const auto& s : specs) addrs.push_back(s.address);
    for (const auto& s : specs) {
      Drone d;
      d.spec = s;
      d.rng = Rng(drone_seed(cfg.seed, s.address));
      d.state.true_pose = s.start;
      d.state.est_pose = s.start;
      d.explorer.primary_axis = axis_from_heading(s.explorer.initial_heading);
      d.explorer.next_waypoint = s.start.position();  // first pose at takeoff
      d.current_main = cfg.main_address;
      if (s.bridge) d.explorer.phase = ExplorerPhase::Landed;
      net.add_node(s.address).set_peers(addrs);
      drones.push_back(std::move(d));
    }
  }

  double now() const { return double(tick_count) * kTickDt; }

  Drone* find(uint8_t address) {
    for (auto& d : drones)
      if (d.spec.address == address) return &d;
    return nullptr;
  }

  bool is_acting_main(const Drone& d) const {
    return d.spec.address == acting_main && !d.failed;
  }

  // ---- sensing helpers -------------------------------------------------

  std::optional<double> direction_distance(const SensorCapture& cap,
                                           const Drone& d,
                                           const Vec2& axis) const {
    const double target = std::atan2(axis.y, axis.x);
    int best = 0;
    double best_err = 1e9;
    for (int i = 0; i < 4; ++i) {
      const double err =
          std::abs(wrap_angle(d.state.true_pose.psi + geom.beta[i] - target));
      if (err < best_err) {
        best_err = err;
        best = i;
      }
    }
    return min_sensor_distance(cap, best);
  }

  static bool side_free(std::optional<double> dist, const ExplorerConfig& e) {
    return !dist || *dist >= e.side_wall_range;
  }

  // ---- drone behavior ----------------------------------------------------

  void land(Drone& d) {
    d.explorer.phase = ExplorerPhase::Landed;
    d.land_time = now();
    d.state.v_pri = 0.0;
    d.state.v_sec = 0.0;
    d.state.yaw_rate_cmd = 0.0;
  }

  void fail_drone(Drone& d) {
    d.failed = true;
    net.set_failed(d.spec.address);
    d.state.v_pri = 0.0;
    d.state.v_sec = 0.0;
    d.state.yaw_rate_cmd = 0.0;
  }

  void broadcast_pose(Drone& d, PoseId id, const Pose2D& table_pose) {
    const PoseUpdateMessage pum = make_canonical_pose_update(id, table_pose);
    net.node(d.spec.address)
        .send_message(encode_pose_update(pum), kBroadcastAddress);
  }

  void on_table_insert(Drone& owner_of_table, PoseId id, const Pose2D& pose) {
    // Graph and closure work happen only on the acting main.
    if (!is_acting_main(owner_of_table)) return;
    add_to_graph(id, pose);
    consider_closures(id, pose);
  }

  void add_to_graph(PoseId id, const Pose2D& pose) {
    if (graph.has_node(id)) return;  // correction update, not a new pose
    Drone* main = find(acting_main);
    if (id.index == 0) {
      graph.add_anchor(id, pose);
      return;
    }
    const PoseId prev{id.drone, id.index - 1};
    if (!main || !main->table.count(prev)) return;
    const RelativeMeasurement z = relative_pose(main->table.at(prev), pose);
    graph.add_pose(id, z);
  }

  void consider_closures(PoseId id, const Pose2D& pose) {
    if (cfg.loop_closure_radius <= 0.0) return;
    Drone* main = find(acting_main);
    if (!main) return;
    std::optional<PoseId> best;
    double best_d = cfg.loop_closure_radius;
    for (const auto& [other, p] : main->table) {
      if (other == id) continue;
      if (other.drone == id.drone) {
        const int gap = int(id.index) - int(other.index);
        if (std::abs(gap) < cfg.min_index_gap) continue;
      }
      const double dist = distance(pose.position(), p.position());
      if (dist <= best_d) {
        best_d = dist;
        best = other;
      }
    }
    if (!best) return;
    const auto pair = std::minmax(id, *best);
    if (!tasked.insert({pair.first, pair.second}).second) return;
    tasks.push_back({id, *best, std::nullopt, std::nullopt});
  }

  // ---- message handling --------------------------------------------------

  void handle_message(Drone& d, const ReceivedMessage& rm) {
    switch (rm.message.tag) {
      case MessageTag::PoseUpdate: {
        const auto pum = decode_pose_update(rm.message);
        const Pose2D pose = pose_from_update(pum);
        const bool fresh = d.table.count(pum.id) == 0;
        d.table[pum.id] = pose;
        if (fresh) on_table_insert(d, pum.id, pose);
        break;
      }
      case MessageTag::TofScanRequest: {
        const auto tsr = decode_scan_request(rm.message);
        d.pending_responses.push_back({rm.source, tsr.id});
        break;
      }
      case MessageTag::TofScanResponse: {
        if (!is_acting_main(d)) break;
        const auto sr = decode_scan_response(rm.message);
        Scan scan;
        scan.pose_id = sr.id;
        scan.anchor_pose = d.table.count(sr.id) ? d.table.at(sr.id) : Pose2D{};
        for (const auto& off : sr.offsets)
          scan.points.push_back(scan.anchor_pose.position() + off);
        scan.low_density = int(scan.points.size()) < kLowDensityThreshold;
        foreign_scans[sr.id] = std::move(scan);
        peak_foreign = std::max(peak_foreign, foreign_scans.size());
        ++rep.scan_responses;
        if (tsr_in_flight && tsr_in_flight->first == sr.id)
          tsr_in_flight.reset();
        break;
      }
      case MessageTag::Control: {
        const auto ctl = decode_control(rm.message);
        if (ctl.command == ControlCommand::ElectMain) {
          const uint8_t new_main = ctl.params[0];
          d.current_main = new_main;
          // acting_main was already switched by the winner locally
        }
        break;
      }
    }
  }

  void handle_report(Drone& d, const DeliveryReport& r) {
    if (r.success) return;
    bool lost_main = false;
    for (uint8_t addr : r.failed_recipients) {
      if (d.dead_peers.insert(addr).second) {
        std::vector<uint8_t> live;
        for (const auto& other : drones) {
          if (other.spec.address == d.spec.address) continue;
          if (d.dead_peers.count(other.spec.address)) continue;
          live.push_back(other.spec.address);
        }
        live.push_back(d.spec.address);
        net.node(d.spec.address).set_peers(live);
      }
      if (addr == d.current_main) lost_main = true;
    }
    if (r.tag == MessageTag::TofScanRequest && is_acting_main(d)) {
      // the requested drone is unreachable; drop every task waiting on it
      if (tsr_in_flight && tsr_in_flight->second == r.message_id) {
        drop_tasks_waiting_on(tsr_in_flight->first);
        tsr_in_flight.reset();
      }
    }
    if (lost_main) elect_new_main(d);
  }

  void elect_new_main(Drone& d) {
    // Lowest-address surviving flying drone takes over.
    std::optional<uint8_t> winner;
    for (const auto& other : drones) {
      if (!other.flying()) continue;
      if (other.spec.address != d.spec.address &&
          d.dead_peers.count(other.spec.address))
        continue;
      if (other.failed && other.spec.address != d.spec.address) {
        // locally known failures only via dead_peers; engine-level failed
        // drones not yet detected are handled when their silence is noticed
      }
      if (!winner || other.spec.address < *winner)
        winner = other.spec.address;
    }
    if (!winner) return;
    d.current_main = *winner;
    if (*winner == d.spec.address && acting_main != d.spec.address)
      assume_main_role(d);
  }

  void assume_main_role(Drone& d) {
    acting_main = d.spec.address;
    d.current_main = d.spec.address;
    graph = PoseGraph(cfg.budget);
    tasks.clear();
    tasked.clear();
    foreign_scans.clear();
    tsr_in_flight.reset();
    tsr_queue.clear();
    // Rebuild the graph and the scan-match backlog from the replicated
    // table; closures the old main had created are rebuilt the same way.
    for (const auto& [id, pose] : d.table) add_to_graph(id, pose);
    for (const auto& [id, pose] : d.table) consider_closures(id, pose);
    ControlMessage ctl;
    ctl.command = ControlCommand::ElectMain;
    ctl.params[0] = d.spec.address;
    net.node(d.spec.address).send_message(encode_control(ctl), kBroadcastAddress);
  }

  void drop_tasks_waiting_on(PoseId id) {
    for (auto it = tasks.begin(); it != tasks.end();) {
      const bool needs =
          (!it->trigger_scan && it->trigger == id) ||
          (!it->match_scan && it->match == id);
      if (needs) {
        ++rep.tasks_dropped;
        it = tasks.erase(it);
      } else {
        ++it;
      }
    }
    prune_foreign_cache();
  }

  void prune_foreign_cache() {
    for (auto it = foreign_scans.begin(); it != foreign_scans.end();) {
      bool needed = false;
      for (const auto& t : tasks) {
        if ((t.trigger == it->first && !t.trigger_scan) ||
            (t.match == it->first && !t.match_scan)) {
          needed = true;
          break;
        }
      }
      if (needed)
        ++it;
      else
        it = foreign_scans.erase(it);
    }
  }

  // ---- main drone task machinery ------------------------------------------

  std::optional<Scan> scan_for(Drone& main, PoseId id) {
    if (id.drone == main.spec.address) {
      const auto it = main.own_scans.find(id);
      if (it != main.own_scans.end()) return it->second;
      return std::nullopt;  // own scan still being acquired
    }
    const auto it = foreign_scans.find(id);
    if (it != foreign_scans.end()) return it->second;
    return std::nullopt;
  }

  void request_scan(Drone& main, PoseId id) {
    if (tsr_in_flight) return;
    if (std::find(tsr_queue.begin(), tsr_queue.end(), id) == tsr_queue.end())
      return;
    tsr_queue.erase(std::find(tsr_queue.begin(), tsr_queue.end(), id));
    const uint64_t msg_id = net.node(main.spec.address)
                                .send_message(encode_scan_request({id}), id.drone);
    tsr_in_flight = {id, msg_id};
    tsr_issue_time = now();
    ++rep.scan_requests;
  }

  // Covers a responder that acknowledged the request but died before the
  // scan went out.
  static constexpr double kScanResponseTimeout = 10.0;

  void main_service_tasks(Drone& main) {
    if (tsr_in_flight && now() - tsr_issue_time > kScanResponseTimeout) {
      drop_tasks_waiting_on(tsr_in_flight->first);
      tsr_in_flight.reset();
    }
    // fill task scans from local/foreign stores
    for (auto& t : tasks) {
      if (!t.trigger_scan) t.trigger_scan = scan_for(main, t.trigger);
      if (!t.match_scan) t.match_scan = scan_for(main, t.match);
    }

    // queue the next scan fetch (one TSR outstanding at a time)
    if (!tsr_in_flight) {
      for (const auto& t : tasks) {
        for (const PoseId id : {t.trigger, t.match}) {
          const bool have =
              (id == t.trigger && t.trigger_scan) ||
              (id == t.match && t.match_scan);
          if (have || id.drone == main.spec.address) continue;
          if (foreign_scans.count(id)) continue;
          if (main.dead_peers.count(id.drone)) {
            continue;  // will be dropped below
          }
          if (std::find(tsr_queue.begin(), tsr_queue.end(), id) ==
              tsr_queue.end())
            tsr_queue.push_back(id);
        }
      }
      if (!tsr_queue.empty()) request_scan(main, tsr_queue.front());
    }

    // drop tasks that can never complete (owner known dead)
    for (auto it = tasks.begin(); it != tasks.end();) {
      const bool trigger_dead =
          !it->trigger_scan && it->trigger.drone != main.spec.address &&
          main.dead_peers.count(it->trigger.drone);
      const bool match_dead =
          !it->match_scan && it->match.drone != main.spec.address &&
          main.dead_peers.count(it->match.drone);
      if (trigger_dead || match_dead) {
        ++rep.tasks_dropped;
        it = tasks.erase(it);
      } else {
        ++it;
      }
    }

    // run at most one ICP per tick once the hover delay has elapsed
    if (now() < main.busy_until) return;
    for (auto it = tasks.begin(); it != tasks.end(); ++it) {
      if (!it->trigger_scan || !it->match_scan) continue;
      execute_closure(main, *it);
      tasks.erase(it);
      prune_foreign_cache();
      main.busy_until = now() + cfg.icp_hover_s;
      break;
    }
  }

  void execute_closure(Drone& main, const ClosureTask& t) {
    const Scan& trig = *t.trigger_scan;
    const Scan& match = *t.match_scan;
    const Transform2D t_trig = Transform2D::from_pose(trig.anchor_pose);
    const Transform2D t_match = Transform2D::from_pose(match.anchor_pose);

    std::vector<Vec2> trig_local(trig.points.size());
    const Transform2D inv_trig = t_trig.inverse();
    for (size_t i = 0; i < trig.points.size(); ++i)
      trig_local[i] = inv_trig.apply(trig.points[i]);
    std::vector<Vec2> match_local(match.points.size());
    const Transform2D inv_match = t_match.inverse();
    for (size_t i = 0; i < match.points.size(); ++i)
      match_local[i] = inv_match.apply(match.points[i]);

    // initial guess: the odometry-derived relative pose match -> trigger
    const Transform2D initial = compose(inv_match, t_trig);
    const IcpResult r = icp(trig_local, match_local, initial, cfg.icp);
    if (r.status != IcpStatus::Ok || !r.converged) return;

    if (graph.add_virtual_edge(t.match, t.trigger, r) == GraphStatus::Ok) {
      ++rep.closures;
      ++closures_since_slam;
      if (cfg.slam_trigger == SlamTrigger::EveryKClosures &&
          closures_since_slam >= cfg.slam_every_k) {
        run_slam(main);
        closures_since_slam = 0;
      }
    }
  }

  void service_scan_requests(Drone& d) {
    for (auto it = d.pending_responses.begin();
         it != d.pending_responses.end();) {
      const auto [requester, id] = *it;
      if (id.drone != d.spec.address ||
          (d.spec.max_poses >= 0 && id.index >= uint32_t(d.spec.max_poses))) {
        it = d.pending_responses.erase(it);  // not ours, nothing to send
        continue;
      }
      const auto scan_it = d.own_scans.find(id);
      if (scan_it == d.own_scans.end()) {
        ++it;  // scan still being acquired
        continue;
      }
      net.node(d.spec.address)
          .send_message(encode_scan_response(scan_it->second), requester);
      it = d.pending_responses.erase(it);
    }
  }

  // ---- SLAM -----------------------------------------------------------

  void run_slam(Drone& main) {
    graph_pre_snapshot = graph;
    rep.slam_report = graph.optimize();
    rep.slam_ran = true;
    ++rep.slam_runs;
    graph_post_snapshot = graph;

    // Broadcast a pose update for every pose the optimization moved.
    for (const auto& [id, pose] : graph.nodes()) {
      const PoseUpdateMessage pum = make_canonical_pose_update(id, pose);
      const Pose2D rounded = pose_from_update(pum);
      const auto it = main.table.find(id);
      if (it != main.table.end() && it->second.x == rounded.x &&
          it->second.y == rounded.y && it->second.psi == rounded.psi)
        continue;
      main.table[id] = rounded;
      net.node(main.spec.address)
          .send_message(encode_pose_update(pum), kBroadcastAddress);
    }
  }

  // ---- per-tick drone update ---------------------------------------------

  void pose_event(Drone& d) {
    const uint32_t index = d.next_pose_index;
    if (d.spec.address == cfg.main_address && cfg.fail_main_at_pose >= 0 &&
        int(index) == cfg.fail_main_at_pose) {
      fail_drone(d);
      return;
    }
    const PoseId id{d.spec.address, index};
    d.next_pose_index = index + 1;

    gt_poses[id] = d.state.true_pose;
    const Pose2D est = d.state.est_pose;

    // Store exactly what goes on the air so replicated tables match our own.
    const PoseUpdateMessage pum = make_canonical_pose_update(id, est);
    const Pose2D table_pose = pose_from_update(pum);
    d.table[id] = table_pose;
    est_pre[id] = table_pose;
    on_table_insert(d, id, table_pose);
    broadcast_pose(d, id, table_pose);

    d.prev_pose_est = est;

    // hover and spin for the scan
    d.scan_id = id;
    d.scan_acc.begin(est, id);
    d.scan_tick = 0;
    d.explorer.phase = ExplorerPhase::Scanning;
    d.explorer.last_velocity = 0.0;
  }

  void finish_scan(Drone& d) {
    d.own_scans[d.scan_id] = d.scan_acc.finish();
    d.scan_tick = -1;
    d.explorer.phase = ExplorerPhase::Exploring;
    if (d.spec.max_poses >= 0 && int(d.next_pose_index) >= d.spec.max_poses) {
      land(d);
      return;
    }
    d.explorer.next_waypoint = d.state.est_pose.position() +
                               d.explorer.primary_axis *
                                   d.spec.explorer.waypoint_spacing;
  }

  void update_drone(Drone& d) {
    if (d.failed || d.spec.bridge ||
        d.explorer.phase == ExplorerPhase::Landed)
      return;

    const auto capture =
        simulate_capture(cfg.world, d.state.true_pose, geom, cfg.noise, d.rng);
    const ExplorerConfig& e = d.spec.explorer;

    // a finished spin hands control back to exploration at the next tick,
    // after its last yaw command has been integrated
    if (d.explorer.phase == ExplorerPhase::Scanning &&
        d.scan_tick >= ScanSpinPlan::total_ticks()) {
      finish_scan(d);
      if (d.explorer.phase == ExplorerPhase::Landed) return;
    }

    if (d.explorer.phase == ExplorerPhase::Scanning) {
      if (ScanSpinPlan::captures_frame(d.scan_tick))
        d.scan_acc.add_frame(project_frame(d.state.est_pose, capture, geom));
      d.state.v_pri = 0.0;
      d.state.v_sec = 0.0;
      d.state.yaw_rate_cmd = ScanSpinPlan::yaw_rate(d.scan_tick);
      ++d.scan_tick;
    } else {
      const bool hovering = is_acting_main(d) && now() < d.busy_until;
      d.state.yaw_rate_cmd = 0.0;
      if (hovering) {
        d.state.v_pri = 0.0;
        d.state.v_sec = 0.0;
        d.explorer.last_velocity = 0.0;
      } else {
        const Vec2 axis = d.explorer.primary_axis;
        const auto front = direction_distance(capture, d, axis);
        const auto left = direction_distance(capture, d, axis.perp());
        const auto right = direction_distance(capture, d, axis.perp() * -1.0);

        if (front && *front < e.forward_obstacle_threshold) {
          const auto turn =
              on_obstacle(axis, side_free(left, e), side_free(right, e), e);
          if (turn.landed) {
            land(d);
          } else {
            d.explorer.primary_axis = turn.new_primary_axis;
            d.explorer.last_velocity = 0.0;
            d.explorer.next_waypoint =
                d.state.est_pose.position() +
                turn.new_primary_axis * e.waypoint_spacing;
            d.state.v_pri = 0.0;
            d.state.v_sec = 0.0;
          }
        } else {
          const Vec2 to_wp =
              d.explorer.next_waypoint - d.state.est_pose.position();
          const double along = to_wp.dot(axis);
          if (to_wp.norm() < e.arrival_tolerance ||
              along <= e.arrival_tolerance) {
            pose_event(d);
            // pose_event may fail the drone or enter scanning; commands for
            // this tick are zero either way
            d.state.v_pri = 0.0;
            d.state.v_sec = 0.0;
          } else {
            const double v =
                primary_velocity(along, d.explorer.last_velocity, kTickDt, e);
            d.explorer.last_velocity = v;
            d.state.v_pri = v;
            d.state.v_sec = secondary_velocity(left, right, e);
          }
        }
      }
    }

    if (d.failed || d.explorer.phase == ExplorerPhase::Landed) return;

    d.state.primary_axis = d.explorer.primary_axis;
    const StepResult sr =
        step(d.state, cfg.world, kTickDt, cfg.noise, d.rng);
    if (sr.collided) ++rep.collisions;
    samples.push_back({now(), d.spec.address, d.state.true_pose,
                       d.state.est_pose});
  }

  // ---- mission end ------------------------------------------------------

  bool all_flying_done() const {
    for (const auto& d : drones) {
      if (!d.flying() || d.failed) continue;
      if (d.explorer.phase != ExplorerPhase::Landed) return false;
    }
    return true;
  }

  void check_mission_end() {
    if (finished) return;
    if (!all_flying_done()) return;
    if (!net.idle()) return;

    Drone* main = find(acting_main);
    if (!main || main->failed) {
      // Watchdog: the coordinator died and nobody had traffic pending to
      // notice; the lowest-address survivor takes over.
      for (auto& d : drones) {
        if (!d.flying() || d.failed) continue;
        assume_main_role(d);
        return;  // let the election message flush, tasks rebuild
      }
      finished = true;  // nobody left alive
      return;
    }
    if (!tasks.empty() || tsr_in_flight || now() < main->busy_until) return;

    if (!slam_done) {
      slam_done = true;
      run_slam(*main);
      return;  // propagate corrections before finishing
    }
    finished = true;
  }

  void tick() {
    for (auto& d : drones) update_drone(d);
    net.tick(now());
    for (auto& d : drones) {
      if (d.failed) continue;
      for (const auto& rm : net.node(d.spec.address).take_received())
        handle_message(d, rm);
      for (const auto& r : net.node(d.spec.address).take_reports())
        handle_report(d, r);
      service_scan_requests(d);
    }
    if (Drone* main = find(acting_main); main && !main->failed)
      main_service_tasks(*main);
    check_mission_end();
    ++tick_count;
  }

  void run() {
    while (!finished && now() < cfg.max_sim_time) tick();
    rep.final_main = acting_main;
    rep.total_time = now();
    rep.mission_time = 0.0;
    rep.drones.clear();
    for (const auto& d : drones) {
      if (d.flying() && d.land_time >= 0.0)
        rep.mission_time = std::max(rep.mission_time, d.land_time);
      rep.drones.push_back({d.spec.address, d.explorer.phase, d.failed,
                            d.land_time, int(d.next_pose_index)});
    }
    if (!rep.slam_ran) {
      graph_pre_snapshot = graph;
      graph_post_snapshot = graph;
    }
  }

  std::map<PoseId, Scan> all_scans() const {
    std::map<PoseId, Scan> merged;
    for (const auto& d : drones)
      for (const auto& [id, scan] : d.own_scans) merged[id] = scan;
    return merged;
  }
};

Simulation::Simulation(MissionConfig cfg)
    : impl_(std::make_unique<Impl>(std::move(cfg))) {}
Simulation::~Simulation() = default;

void Simulation::run() { impl_->run(); }
bool Simulation::complete() const { return impl_->finished; }
double Simulation::now() const { return impl_->now(); }
const MissionConfig& Simulation::config() const { return impl_->cfg; }
const MissionReport& Simulation::report() const { return impl_->rep; }
const Network& Simulation::network() const { return impl_->net; }
const PoseGraph& Simulation::graph_pre() const {
  return impl_->graph_pre_snapshot;
}
const PoseGraph& Simulation::graph_post() const {
  return impl_->graph_post_snapshot;
}
const std::map<PoseId, Pose2D>& Simulation::ground_truth() const {
  return impl_->gt_poses;
}
const std::map<PoseId, Pose2D>& Simulation::estimates_pre() const {
  return impl_->est_pre;
}
const std::map<PoseId, Pose2D>& Simulation::pose_table(uint8_t address) const {
  for (const auto& d : impl_->drones)
    if (d.spec.address == address) return d.table;
  throw std::out_of_range("no such drone");
}
std::vector<uint8_t> Simulation::drone_addresses() const {
  std::vector<uint8_t> out;
  for (const auto& d : impl_->drones) out.push_back(d.spec.address);
  return out;
}
const std::map<PoseId, Scan>& Simulation::scans(uint8_t address) const {
  for (const auto& d : impl_->drones)
    if (d.spec.address == address) return d.own_scans;
  throw std::out_of_range("no such drone");
}
const std::vector<TrajectorySample>& Simulation::trajectory() const {
  return impl_->samples;
}
size_t Simulation::peak_foreign_scans() const { return impl_->peak_foreign; }

MapPointCloud Simulation::cloud_pre() const {
  MapPointCloud cloud;
  for (const auto& [id, scan] : impl_->all_scans()) {
    for (const auto& p : scan.points) {
      cloud.points.push_back(p);
      cloud.source.push_back(id);
      cloud.source_position.push_back(scan.anchor_pose.position());
    }
  }
  return cloud;
}

MapPointCloud Simulation::cloud_post() const {
  const auto scans = impl_->all_scans();
  const CorrectedCloud corrected =
      apply_correction(impl_->graph_post_snapshot, scans);
  MapPointCloud cloud;
  cloud.points = corrected.points;
  cloud.source = corrected.source;
  for (const auto& id : corrected.source)
    cloud.source_position.push_back(
        impl_->graph_post_snapshot.node(id).position());
  return cloud;
}

namespace {

double rmse_against(const std::map<PoseId, Pose2D>& estimates,
                    const std::map<PoseId, Pose2D>& truth) {
  std::vector<Pose2D> est, gt;
  for (const auto& [id, p] : estimates) {
    const auto it = truth.find(id);
    if (it == truth.end()) continue;
    est.push_back(p);
    gt.push_back(it->second);
  }
  return rmse_poses(est, gt);
}

}  // namespace

double Simulation::pose_rmse_pre() const {
  return rmse_against(impl_->est_pre, impl_->gt_poses);
}

double Simulation::pose_rmse_post() const {
  return rmse_against(impl_->graph_post_snapshot.nodes(), impl_->gt_poses);
}

void Simulation::write_outputs(const std::string& dir) const {
  namespace fs = std::filesystem;
  fs::create_directories(dir);
  const fs::path base(dir);

  write_text_file((base / "trajectories.csv").string(),
                  trajectories_csv(impl_->samples));
  write_text_file((base / "packets.csv").string(),
                  packet_log_csv(impl_->net.log()));
  write_text_file((base / "graph_pre.json").string(),
                  impl_->graph_pre_snapshot.to_json(&impl_->gt_poses));
  write_text_file((base / "graph_post.json").string(),
                  impl_->graph_post_snapshot.to_json(&impl_->gt_poses));

  const MapPointCloud pre = cloud_pre();
  const MapPointCloud post = cloud_post();
  write_text_file((base / "scans.csv").string(), cloud_csv(pre));
  write_text_file((base / "cloud_post.csv").string(), cloud_csv(post));
  write_text_file((base / "map_pre.pgm").string(),
                  grid_to_pgm(to_occupancy_grid(pre, 0.1, 3)));
  write_text_file((base / "map_post.pgm").string(),
                  grid_to_pgm(to_occupancy_grid(post, 0.1, 3)));

  std::map<int, std::vector<Vec2>> paths;
  for (size_t i = 0; i < impl_->samples.size(); i += 5) {
    const auto& s = impl_->samples[i];
    paths[s.drone].push_back(s.est_pose.position());
  }
  write_text_file((base / "overview.svg").string(),
                  overview_svg(impl_->cfg.world, paths, post));

  json r;
  r["mission_time"] = impl_->rep.mission_time;
  r["total_time"] = impl_->rep.total_time;
  r["closures"] = impl_->rep.closures;
  r["tasks_dropped"] = impl_->rep.tasks_dropped;
  r["collisions"] = impl_->rep.collisions;
  r["final_main"] = impl_->rep.final_main;
  r["slam_ran"] = impl_->rep.slam_ran;
  r["accounted_bytes"] = impl_->net.accounted_bytes();
  try {
    r["pose_rmse_pre"] = pose_rmse_pre();
    r["pose_rmse_post"] = pose_rmse_post();
    r["map_rmse_pre"] = rmse_map(pre.points, impl_->cfg.world.walls);
    r["map_rmse_post"] = rmse_map(post.points, impl_->cfg.world.walls);
  } catch (const std::invalid_argument&) {
    // empty mission; metrics omitted
  }
  write_text_file((base / "report.json").string(), r.dump(2));
}

}  // namespace swarmmap
