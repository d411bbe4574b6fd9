#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <cmath>

#include "doctest.h"
#include "swarmmap/explorer.hpp"
#include "swarmmap/sensing.hpp"
#include "test_support.hpp"

using namespace swarmmap;
namespace ts = swarmmap::testsupport;

TEST_CASE("secondary velocity centers in a corridor") {
  ExplorerConfig cfg;
  SUBCASE("centered means zero") {
    CHECK(secondary_velocity(0.5, 0.5, cfg) == doctest::Approx(0.0));
  }
  SUBCASE("off-center pulls back toward the middle") {
    // positive = body-left; drone sits right of center, so it moves left
    CHECK(secondary_velocity(0.6, 0.4, cfg) == doctest::Approx(0.2));
    CHECK(secondary_velocity(0.4, 0.6, cfg) == doctest::Approx(-0.2));
  }
  SUBCASE("single wall holds d_wall, signed toward the setpoint") {
    // left wall 0.7 m away: close the gap to 0.5 by moving left (positive)
    CHECK(secondary_velocity(0.7, std::nullopt, cfg) == doctest::Approx(0.4));
    CHECK(secondary_velocity(0.3, std::nullopt, cfg) == doctest::Approx(-0.4));
    CHECK(secondary_velocity(std::nullopt, 0.7, cfg) == doctest::Approx(-0.4));
  }
  SUBCASE("open space commands nothing") {
    CHECK(secondary_velocity(std::nullopt, std::nullopt, cfg) == 0.0);
    // a wall beyond the 1 m window does not count
    CHECK(secondary_velocity(1.5, std::nullopt, cfg) == 0.0);
  }
}

TEST_CASE("primary velocity follows the slow-down law with an accel cap") {
  ExplorerConfig cfg;
  cfg.v_exp = 0.8;
  SUBCASE("cruise at v_exp far from the waypoint") {
    CHECK(primary_velocity(1.0, 0.8, kTickDt, cfg) == doctest::Approx(0.8));
  }
  SUBCASE("proportional slow-down near the waypoint") {
    // d_w/d_slow = 0.5 -> (0.5 + 0.1) * 0.8
    CHECK(primary_velocity(0.375, 0.8, kTickDt, cfg) == doctest::Approx(0.48));
  }
  SUBCASE("speed-ups are capped at a_exp") {
    CHECK(primary_velocity(2.0, 0.0, 1.0 / 15.0, cfg) ==
          doctest::Approx(0.5 / 15.0));
  }
  SUBCASE("slow-downs are not capped") {
    CHECK(primary_velocity(0.075, 0.8, kTickDt, cfg) ==
          doctest::Approx((0.1 + 0.1) * 0.8));
  }
  SUBCASE("acceleration never exceeds the cap while speeding up") {
    double v = 0.0;
    for (int i = 0; i < 100; ++i) {
      const double next = primary_velocity(5.0, v, kTickDt, cfg);
      CHECK(next - v <= cfg.a_exp * kTickDt + 1e-9);
      v = next;
    }
    CHECK(v == doctest::Approx(0.8));
  }
}

TEST_CASE("obstacle handling follows the steering priority") {
  ExplorerConfig cfg;
  const Vec2 fwd{1, 0};
  SUBCASE("priority side first") {
    cfg.priority = SteeringPriority::Left;
    const auto d = on_obstacle(fwd, true, true, cfg);
    CHECK(!d.landed);
    CHECK(d.new_primary_axis.x == doctest::Approx(0.0));
    CHECK(d.new_primary_axis.y == doctest::Approx(1.0));
  }
  SUBCASE("fall back to the other side") {
    cfg.priority = SteeringPriority::Left;
    const auto d = on_obstacle(fwd, false, true, cfg);
    CHECK(!d.landed);
    CHECK(d.new_primary_axis.y == doctest::Approx(-1.0));
  }
  SUBCASE("right priority mirrors") {
    cfg.priority = SteeringPriority::Right;
    const auto d = on_obstacle(fwd, true, true, cfg);
    CHECK(d.new_primary_axis.y == doctest::Approx(-1.0));
  }
  SUBCASE("dead end lands") {
    const auto d = on_obstacle(fwd, false, false, cfg);
    CHECK(d.landed);
  }
}

TEST_CASE("axis snapping from initial headings") {
  CHECK(axis_from_heading(0.0).x == 1.0);
  CHECK(axis_from_heading(deg2rad(90.0)).y == 1.0);
  CHECK(axis_from_heading(deg2rad(180.0)).x == -1.0);
  CHECK(axis_from_heading(deg2rad(-90.0)).y == -1.0);
  CHECK(axis_from_heading(wrap_angle(deg2rad(270.0))).y == -1.0);
}

TEST_CASE("wall following converges to the corridor center") {
  // pure policy loop: sensing + secondary controller + physics, no
  // waypoints, no noise
  const World hall = ts::corridor(60.0);
  const SensorGeometry geom = SensorGeometry::standard();
  ExplorerConfig cfg;
  cfg.v_exp = 0.5;

  DroneState st;
  st.true_pose = {2.0, 0.2, 0.0};  // well off center
  st.est_pose = st.true_pose;
  st.primary_axis = {1, 0};
  Rng rng(3);

  double worst_after_settle = 0.0;
  for (int i = 0; i < 300; ++i) {  // 20 s
    const auto cap =
        simulate_capture(hall, st.true_pose, geom, NoiseModel::none(), rng);
    const auto left = min_sensor_distance(cap, 1);   // +y sensor
    const auto right = min_sensor_distance(cap, 3);  // -y sensor
    st.v_pri = cfg.v_exp;
    st.v_sec = secondary_velocity(left, right, cfg);
    step(st, hall, kTickDt, NoiseModel::none(), rng);
    if (i > 150)
      worst_after_settle =
          std::max(worst_after_settle, std::abs(st.true_pose.y - 0.5));
  }
  CHECK(worst_after_settle < 0.02);
}

TEST_CASE("single-wall following holds the target distance") {
  // only a left wall (relative to +x travel): hold 0.5 m
  World w;
  w.walls = {{{0, 1.0}, {60, 1.0}}};
  w.bounds = {0, -5, 60, 2};
  const SensorGeometry geom = SensorGeometry::standard();
  ExplorerConfig cfg;
  cfg.v_exp = 0.5;

  DroneState st;
  st.true_pose = {2.0, 0.2, 0.0};  // 0.8 from the wall
  st.est_pose = st.true_pose;
  st.primary_axis = {1, 0};
  Rng rng(4);
  for (int i = 0; i < 300; ++i) {
    const auto cap =
        simulate_capture(w, st.true_pose, geom, NoiseModel::none(), rng);
    st.v_pri = cfg.v_exp;
    st.v_sec = secondary_velocity(min_sensor_distance(cap, 1),
                                  min_sensor_distance(cap, 3), cfg);
    step(st, w, kTickDt, NoiseModel::none(), rng);
  }
  CHECK(std::abs((1.0 - st.true_pose.y) - cfg.d_wall) < 0.02);
}
