#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <algorithm>
#include <random>

#include "doctest.h"
#include "swarmmap/exporters.hpp"
#include "swarmmap/grid.hpp"
#include "swarmmap/metrics.hpp"
#include "swarmmap/sensing.hpp"
#include "test_support.hpp"

using namespace swarmmap;
namespace ts = swarmmap::testsupport;

TEST_CASE("rmse_poses examples") {
  SUBCASE("perfect estimates") {
    const std::vector<Pose2D> p{{1, 2, 0.3}, {4, 5, -0.2}};
    CHECK(rmse_poses(p, p) == doctest::Approx(0.0));
  }
  SUBCASE("single 3-4-5 offset") {
    const std::vector<Pose2D> est{{3, 4, 0}};
    const std::vector<Pose2D> gt{{0, 0, 0}};
    CHECK(rmse_poses(est, gt) == doctest::Approx(5.0));
  }
  SUBCASE("mixed errors average under the root") {
    const std::vector<Pose2D> est{{1, 0, 0}, {0, 0, 0}};
    const std::vector<Pose2D> gt{{0, 0, 0}, {0, 0, 0}};
    CHECK(rmse_poses(est, gt) == doctest::Approx(std::sqrt(0.5)));
  }
  SUBCASE("heading differences are ignored") {
    const std::vector<Pose2D> est{{1, 2, 3.0}};
    const std::vector<Pose2D> gt{{1, 2, -3.0}};
    CHECK(rmse_poses(est, gt) == doctest::Approx(0.0));
  }
  SUBCASE("length mismatch throws") {
    const std::vector<Pose2D> a{{0, 0, 0}};
    const std::vector<Pose2D> b;
    CHECK_THROWS_AS(rmse_poses(a, b), std::invalid_argument);
  }
}

TEST_CASE("rmse_poses is invariant under a common rigid transform") {
  std::mt19937 rng(2);
  std::uniform_real_distribution<double> uni(-5.0, 5.0);
  std::uniform_real_distribution<double> ang(-kPi, kPi);
  std::vector<Pose2D> est, gt;
  for (int i = 0; i < 20; ++i) {
    est.push_back({uni(rng), uni(rng), 0});
    gt.push_back({uni(rng), uni(rng), 0});
  }
  const double base = rmse_poses(est, gt);
  for (int trial = 0; trial < 20; ++trial) {
    const Transform2D T{ang(rng), {uni(rng), uni(rng)}};
    std::vector<Pose2D> est2, gt2;
    for (const auto& p : est) est2.push_back(T.apply(p));
    for (const auto& p : gt) gt2.push_back(T.apply(p));
    CHECK(rmse_poses(est2, gt2) == doctest::Approx(base).epsilon(1e-9));
  }
}

TEST_CASE("rmse_map examples") {
  const std::vector<Wall> walls{{{0, 0}, {4, 0}}, {{4, 0}, {4, 4}}};
  SUBCASE("points on the walls") {
    const std::vector<Vec2> pts{{1, 0}, {4, 2}, {4, 0}};
    CHECK(rmse_map(pts, walls) == doctest::Approx(0.0));
  }
  SUBCASE("perpendicular distance within the segment") {
    const std::vector<Vec2> pts{{2, 0.1}};
    CHECK(rmse_map(pts, walls) == doctest::Approx(0.1));
  }
  SUBCASE("endpoint rule beyond the segment") {
    // (0.3, 0.4) past the (0,0) endpoint -> 0.5
    const std::vector<Vec2> pts{{-0.3, 0.4}};
    CHECK(rmse_map(pts, walls) == doctest::Approx(0.5));
  }
  SUBCASE("empty inputs throw") {
    CHECK_THROWS_AS(rmse_map(std::vector<Vec2>{}, walls),
                    std::invalid_argument);
    CHECK_THROWS_AS(rmse_map(std::vector<Vec2>{{1, 1}}, std::vector<Wall>{}),
                    std::invalid_argument);
  }
}

TEST_CASE("rmse_map ignores wall ordering and endpoint orientation") {
  std::mt19937 rng(3);
  std::uniform_real_distribution<double> uni(-4.0, 4.0);
  std::vector<Wall> walls;
  for (int i = 0; i < 6; ++i)
    walls.push_back({{uni(rng), uni(rng)}, {uni(rng), uni(rng)}});
  std::vector<Vec2> pts;
  for (int i = 0; i < 50; ++i) pts.push_back({uni(rng), uni(rng)});
  const double base = rmse_map(pts, walls);

  std::vector<Wall> shuffled = walls;
  std::shuffle(shuffled.begin(), shuffled.end(), rng);
  for (auto& w : shuffled)
    if (uni(rng) > 0) std::swap(w.a, w.b);
  CHECK(rmse_map(pts, shuffled) == doctest::Approx(base).epsilon(1e-12));
}

TEST_CASE("occupancy grid basics") {
  SUBCASE("empty cloud yields an empty grid with nothing known") {
    const auto g = to_occupancy_grid(MapPointCloud{}, 0.1, 3);
    CHECK(g.count(CellState::Occupied) == 0);
    CHECK(g.count(CellState::Free) == 0);
  }
  SUBCASE("five coincident points occupy exactly one cell") {
    MapPointCloud cloud;
    for (int i = 0; i < 5; ++i) {
      cloud.points.push_back({1.03, 2.07});
      cloud.source.push_back({0, 0});
      cloud.source_position.push_back({0.5, 0.5});
    }
    const auto g = to_occupancy_grid(cloud, 0.1, 3);
    CHECK(g.count(CellState::Occupied) == 1);
    CHECK(g.count(CellState::Free) > 0);  // the ray carved toward the hit
  }
  SUBCASE("below min_hits stays unknown") {
    MapPointCloud cloud;
    cloud.points = {{1, 1}, {1, 1}};
    cloud.source = {{0, 0}, {0, 0}};
    cloud.source_position = {{0, 0}, {0, 0}};
    const auto g = to_occupancy_grid(cloud, 0.1, 3);
    CHECK(g.count(CellState::Occupied) == 0);
  }
  SUBCASE("resolution must be positive") {
    CHECK_THROWS_AS(to_occupancy_grid(MapPointCloud{}, 0.0, 3),
                    std::invalid_argument);
  }
}

TEST_CASE("corridor scans produce two occupied bands") {
  const World hall = ts::corridor(12.0);
  const SensorGeometry geom = SensorGeometry::standard();
  MapPointCloud cloud;
  for (int k = 0; k < 6; ++k) {
    Rng rng(k);
    const Pose2D pose{3.0 + k, 0.5, 0.0};
    const Scan s =
        acquire_scan(hall, pose, geom, NoiseModel::none(), rng, {0, uint32_t(k)});
    for (const auto& p : s.points) {
      cloud.points.push_back(p);
      cloud.source.push_back(s.pose_id);
      cloud.source_position.push_back(pose.position());
    }
  }
  const auto g = to_occupancy_grid(cloud, 0.1, 3);
  REQUIRE(g.count(CellState::Occupied) > 0);
  // every occupied cell hugs one of the walls (one cell of tolerance)
  for (int cy = 0; cy < g.height; ++cy) {
    for (int cx = 0; cx < g.width; ++cx) {
      if (g.at(cx, cy) != CellState::Occupied) continue;
      const double wy = g.origin.y + (cy + 0.5) * g.resolution;
      const bool near_wall = std::abs(wy - 0.0) <= 0.15 ||
                             std::abs(wy - 1.0) <= 0.15;
      CHECK(near_wall);
    }
  }
  // free space carved between the bands
  int free_mid = 0;
  for (int cy = 0; cy < g.height; ++cy) {
    for (int cx = 0; cx < g.width; ++cx) {
      const double wy = g.origin.y + (cy + 0.5) * g.resolution;
      if (g.at(cx, cy) == CellState::Free && wy > 0.2 && wy < 0.8) ++free_mid;
    }
  }
  CHECK(free_mid > 50);
}

TEST_CASE("occupancy is monotone in added points") {
  std::mt19937 rng(5);
  std::uniform_real_distribution<double> uni(0.0, 3.0);
  MapPointCloud cloud;
  for (int i = 0; i < 200; ++i) {
    cloud.points.push_back({uni(rng), uni(rng)});
    cloud.source.push_back({0, 0});
    cloud.source_position.push_back({1.5, 1.5});
  }
  const auto before = to_occupancy_grid(cloud, 0.1, 3);
  MapPointCloud more = cloud;
  for (int i = 0; i < 100; ++i) {
    more.points.push_back({uni(rng), uni(rng)});
    more.source.push_back({0, 0});
    more.source_position.push_back({1.5, 1.5});
  }
  const auto after = to_occupancy_grid(more, 0.1, 3);
  for (int cy = 0; cy < before.height; ++cy) {
    for (int cx = 0; cx < before.width; ++cx) {
      if (before.at(cx, cy) != CellState::Occupied) continue;
      const Vec2 center{before.origin.x + (cx + 0.5) * 0.1,
                        before.origin.y + (cy + 0.5) * 0.1};
      const int ax = int(std::floor((center.x - after.origin.x) / 0.1));
      const int ay = int(std::floor((center.y - after.origin.y) / 0.1));
      REQUIRE(after.in_bounds(ax, ay));
      CHECK(after.at(ax, ay) == CellState::Occupied);
    }
  }
}

TEST_CASE("pgm round trip") {
  SUBCASE("2x2 all free") {
    OccupancyGrid g;
    g.resolution = 0.1;
    g.width = 2;
    g.height = 2;
    g.cells.assign(4, CellState::Free);
    const std::string pgm = grid_to_pgm(g);
    CHECK(pgm.substr(0, 3) == "P5\n");
    CHECK(pgm.size() == std::string("P5\n2 2\n255\n").size() + 4);
    for (int i = 0; i < 4; ++i)
      CHECK(uint8_t(pgm[pgm.size() - 1 - i]) == 255);
    CHECK(grid_from_pgm(pgm, 0.1) == g);
  }
  SUBCASE("mixed grid survives the round trip") {
    std::mt19937 rng(7);
    OccupancyGrid g;
    g.resolution = 0.1;
    g.width = 13;
    g.height = 9;
    std::uniform_int_distribution<int> pick(0, 2);
    for (int i = 0; i < 13 * 9; ++i)
      g.cells.push_back(CellState(pick(rng)));
    CHECK(grid_from_pgm(grid_to_pgm(g), 0.1) == g);
  }
  SUBCASE("bad magic is rejected") {
    CHECK_THROWS_AS(grid_from_pgm("P2\n1 1\n255\n0"), std::invalid_argument);
  }
}

TEST_CASE("svg overview has one polyline per drone") {
  const World w = ts::square_room();
  std::map<int, std::vector<Vec2>> paths;
  paths[0] = {{1, 1}, {2, 1}, {2, 2}};
  paths[1] = {{3, 3}, {3, 2}};
  paths[2] = {{1, 3}, {2, 3}};
  MapPointCloud cloud;
  cloud.points = {{0.5, 0.5}};
  cloud.source = {{0, 0}};
  const std::string svg = overview_svg(w, paths, cloud);
  size_t count = 0, pos = 0;
  while ((pos = svg.find("<polyline", pos)) != std::string::npos) {
    ++count;
    pos += 9;
  }
  CHECK(count == 3);
  CHECK(svg.find("<circle") != std::string::npos);
  CHECK(svg.find("<line") != std::string::npos);
}

TEST_CASE("cloud csv round trip") {
  MapPointCloud cloud;
  cloud.points = {{1.25, -3.5}, {0.001, 2.0}};
  cloud.source = {{0, 1}, {2, 44}};
  const std::string csv = cloud_csv(cloud);
  CHECK(csv.substr(0, 12) == "pose_id,x,y\n");
  const MapPointCloud back = cloud_from_csv(csv);
  REQUIRE(back.points.size() == 2);
  CHECK(back.points[0].x == doctest::Approx(1.25));
  CHECK(back.points[1].y == doctest::Approx(2.0));
  CHECK(back.source[1] == PoseId{2, 44});
}

TEST_CASE("trajectory csv header matches the export contract") {
  std::vector<TrajectorySample> rows;
  rows.push_back({0.0, 0, {1, 2, 0.5}, {1.1, 2.1, 0.6}});
  const std::string csv = trajectories_csv(rows);
  CHECK(csv.find("t,drone,true_x,true_y,true_psi,est_x,est_y,est_psi\n") == 0);
  CHECK(csv.find("0,0,1,2,0.5,1.1,2.1,0.6\n") != std::string::npos);
}
