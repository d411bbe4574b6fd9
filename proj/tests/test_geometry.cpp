#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <random>

#include "doctest.h"
#include "swarmmap/geometry.hpp"

using namespace swarmmap;

namespace {

Pose2D random_pose(std::mt19937& rng) {
  std::uniform_real_distribution<double> pos(-10.0, 10.0);
  std::uniform_real_distribution<double> ang(-kPi, kPi);
  return {pos(rng), pos(rng), ang(rng)};
}

Transform2D random_transform(std::mt19937& rng) {
  std::uniform_real_distribution<double> pos(-5.0, 5.0);
  std::uniform_real_distribution<double> ang(-kPi, kPi);
  return {ang(rng), {pos(rng), pos(rng)}};
}

bool near(double a, double b, double tol = 1e-12) {
  return std::abs(a - b) <= tol;
}

}  // namespace

TEST_CASE("wrap_angle maps into (-pi, pi]") {
  CHECK(wrap_angle(0.0) == 0.0);
  CHECK(wrap_angle(kPi) == doctest::Approx(kPi));
  CHECK(wrap_angle(-kPi) == doctest::Approx(kPi));
  CHECK(wrap_angle(3 * kPi) == doctest::Approx(kPi));
  CHECK(wrap_angle(2 * kPi) == doctest::Approx(0.0));
  CHECK(wrap_angle(kPi + 0.1) == doctest::Approx(-kPi + 0.1));
  std::mt19937 rng(7);
  std::uniform_real_distribution<double> ang(-50.0, 50.0);
  for (int i = 0; i < 1000; ++i) {
    const double w = wrap_angle(ang(rng));
    CHECK(w > -kPi);
    CHECK(w <= kPi);
  }
}

TEST_CASE("compose identities") {
  const Transform2D id = Transform2D::identity();
  const Transform2D c = compose(id, id);
  CHECK(c.theta == 0.0);
  CHECK(c.t.x == 0.0);
  CHECK(c.t.y == 0.0);

  std::mt19937 rng(1);
  for (int i = 0; i < 100; ++i) {
    const Transform2D t = random_transform(rng);
    const Transform2D r = compose(t, t.inverse());
    CHECK(near(r.theta, 0.0, 1e-9));
    CHECK(near(r.t.x, 0.0, 1e-9));
    CHECK(near(r.t.y, 0.0, 1e-9));
  }
}

TEST_CASE("compose applies b then a") {
  // by hand: apply b: x -> x + (0,1); then a: R(90) x + R(90)(0,1) + (1,0)
  //        = R(90) x + (-1,0) + (1,0) = R(90) x
  const Transform2D a{deg2rad(90.0), {1.0, 0.0}};
  const Transform2D b{0.0, {0.0, 1.0}};
  const Transform2D c = compose(a, b);
  CHECK(c.theta == doctest::Approx(deg2rad(90.0)));
  CHECK(near(c.t.x, 0.0, 1e-15));
  CHECK(near(c.t.y, 0.0, 1e-15));

  // action check against direct application
  std::mt19937 rng(2);
  std::uniform_real_distribution<double> pos(-3.0, 3.0);
  for (int i = 0; i < 50; ++i) {
    const Vec2 x{pos(rng), pos(rng)};
    const Vec2 via_c = c.apply(x);
    const Vec2 direct = a.apply(b.apply(x));
    CHECK(near(via_c.x, direct.x));
    CHECK(near(via_c.y, direct.y));
  }
}

TEST_CASE("compose is associative") {
  std::mt19937 rng(3);
  for (int i = 0; i < 100; ++i) {
    const Transform2D a = random_transform(rng);
    const Transform2D b = random_transform(rng);
    const Transform2D c = random_transform(rng);
    const Transform2D left = compose(compose(a, b), c);
    const Transform2D right = compose(a, compose(b, c));
    CHECK(near(wrap_angle(left.theta - right.theta), 0.0, 1e-9));
    CHECK(near(left.t.x, right.t.x, 1e-9));
    CHECK(near(left.t.y, right.t.y, 1e-9));
  }
}

TEST_CASE("rotation matrix is orthonormal with det 1") {
  std::mt19937 rng(4);
  for (int i = 0; i < 100; ++i) {
    const auto R = random_transform(rng).rotation();
    const double det = R[0][0] * R[1][1] - R[0][1] * R[1][0];
    CHECK(near(det, 1.0, 1e-9));
    CHECK(near(R[0][0] * R[0][1] + R[1][0] * R[1][1], 0.0, 1e-9));
    CHECK(near(R[0][0] * R[0][0] + R[1][0] * R[1][0], 1.0, 1e-9));
  }
}

TEST_CASE("relative_pose examples") {
  SUBCASE("straight ahead") {
    const auto z = relative_pose({0, 0, 0}, {1, 0, 0});
    CHECK(near(z.dx, 1.0));
    CHECK(near(z.dy, 0.0));
    CHECK(near(z.dpsi, 0.0));
  }
  SUBCASE("rotated source frame") {
    // world delta (0,1) rotated by -psi_from = -90deg -> (1,0)
    const auto z = relative_pose({0, 0, kPi / 2}, {0, 1, kPi / 2});
    CHECK(near(z.dx, 1.0));
    CHECK(near(z.dy, 0.0, 1e-15));
    CHECK(near(z.dpsi, 0.0));
  }
  SUBCASE("identical poses") {
    const auto z = relative_pose({2, 3, 0.5}, {2, 3, 0.5});
    CHECK(z.dx == 0.0);
    CHECK(z.dy == 0.0);
    CHECK(z.dpsi == 0.0);
  }
}

TEST_CASE("relative_pose round-trips through integrate") {
  std::mt19937 rng(5);
  for (int i = 0; i < 500; ++i) {
    const Pose2D from = random_pose(rng);
    const Pose2D to = random_pose(rng);
    const Pose2D back = integrate(from, relative_pose(from, to));
    CHECK(near(back.x, to.x, 1e-9));
    CHECK(near(back.y, to.y, 1e-9));
    CHECK(near(wrap_angle(back.psi - to.psi), 0.0, 1e-9));
  }
}

TEST_CASE("transform_error examples") {
  SUBCASE("identical transforms") {
    std::mt19937 rng(6);
    for (int i = 0; i < 100; ++i) {
      const Transform2D t = random_transform(rng);
      const auto e = transform_error(t, t);
      CHECK(near(e.e_t, 0.0, 1e-12));
      CHECK(near(e.e_r, 0.0, 1e-7));  // acos near 1 loses precision
    }
  }
  SUBCASE("pure translation difference") {
    const Transform2D gt{0.0, {1.0, 0.0}};
    const Transform2D est{0.0, {1.032, 0.0}};
    const auto e = transform_error(est, gt);
    CHECK(e.e_t == doctest::Approx(0.032));
    CHECK(e.e_r == doctest::Approx(0.0));
  }
  SUBCASE("corner-scan error magnitudes are reproduced") {
    // e_t = 3.2 cm with a 0.0098 rad rotation error
    const Transform2D gt{0.3, {2.0, 1.0}};
    const Transform2D err{0.0098, {0.032, 0.0}};
    const Transform2D est = compose(err, gt);
    const auto e = transform_error(est, gt);
    CHECK(e.e_t == doctest::Approx(0.032));
    CHECK(e.e_r == doctest::Approx(0.0098));
  }
}

TEST_CASE("transform error range") {
  std::mt19937 rng(8);
  for (int i = 0; i < 200; ++i) {
    const auto e =
        transform_error(random_transform(rng), random_transform(rng));
    CHECK(e.e_t >= 0.0);
    CHECK(e.e_r >= 0.0);
    CHECK(e.e_r <= kPi);
  }
}

TEST_CASE("pose normalization keeps psi in range") {
  const Pose2D p{1.0, 2.0, 5.0};
  const Pose2D n = p.normalized();
  CHECK(n.psi > -kPi);
  CHECK(n.psi <= kPi);
  CHECK(n.x == 1.0);
  CHECK(n.y == 2.0);
}
