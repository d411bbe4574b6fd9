#pragma once

#include <array>
#include <cmath>

namespace swarmmap {

inline constexpr double kPi = 3.14159265358979323846;

inline double deg2rad(double d) { return d * kPi / 180.0; }
inline double rad2deg(double r) { return r * 180.0 / kPi; }

// Wraps an angle into (-pi, pi].
inline double wrap_angle(double a) {
  double r = std::fmod(a + kPi, 2.0 * kPi);
  if (r <= 0.0) r += 2.0 * kPi;
  return r - kPi;
}

struct Vec2 {
  double x = 0.0;
  double y = 0.0;

  bool operator==(const Vec2&) const = default;
  Vec2 operator+(const Vec2& o) const { return {x + o.x, y + o.y}; }
  Vec2 operator-(const Vec2& o) const { return {x - o.x, y - o.y}; }
  Vec2 operator*(double s) const { return {x * s, y * s}; }
  Vec2& operator+=(const Vec2& o) {
    x += o.x;
    y += o.y;
    return *this;
  }
  double dot(const Vec2& o) const { return x * o.x + y * o.y; }
  double cross(const Vec2& o) const { return x * o.y - y * o.x; }
  double norm_sq() const { return x * x + y * y; }
  double norm() const { return std::sqrt(norm_sq()); }
  Vec2 rotated(double angle) const {
    const double c = std::cos(angle), s = std::sin(angle);
    return {x * c - y * s, x * s + y * c};
  }
  Vec2 perp() const { return {-y, x}; }  // +90 degrees
};

inline double distance(const Vec2& a, const Vec2& b) { return (a - b).norm(); }

// Drone state (x, y, psi) in the world frame; psi wrapped to (-pi, pi].
struct Pose2D {
  double x = 0.0;
  double y = 0.0;
  double psi = 0.0;

  Vec2 position() const { return {x, y}; }
  Pose2D normalized() const { return {x, y, wrap_angle(psi)}; }
};

// Rigid transform: apply(v) = R(theta) v + t.
struct Transform2D {
  double theta = 0.0;
  Vec2 t;

  static Transform2D identity() { return {}; }
  static Transform2D from_pose(const Pose2D& p) {
    return {p.psi, {p.x, p.y}};
  }

  Vec2 apply(const Vec2& v) const { return v.rotated(theta) + t; }
  Pose2D apply(const Pose2D& p) const {
    const Vec2 q = apply(Vec2{p.x, p.y});
    return {q.x, q.y, wrap_angle(p.psi + theta)};
  }
  Transform2D inverse() const {
    const Vec2 ti = (t * -1.0).rotated(-theta);
    return {wrap_angle(-theta), ti};
  }
  std::array<std::array<double, 2>, 2> rotation() const {
    const double c = std::cos(theta), s = std::sin(theta);
    return {{{c, -s}, {s, c}}};
  }
};

// Relative motion (dx, dy, dpsi) expressed in the source pose's frame.
struct RelativeMeasurement {
  double dx = 0.0;
  double dy = 0.0;
  double dpsi = 0.0;
};

// Result applies b then a.
inline Transform2D compose(const Transform2D& a, const Transform2D& b) {
  return {wrap_angle(a.theta + b.theta), b.t.rotated(a.theta) + a.t};
}

// Relative transformation between poses, expressed in `from`'s frame.
// Forward-integrating `from` by the result reproduces `to`.
inline RelativeMeasurement relative_pose(const Pose2D& from, const Pose2D& to) {
  const Vec2 d = Vec2{to.x - from.x, to.y - from.y}.rotated(-from.psi);
  return {d.x, d.y, wrap_angle(to.psi - from.psi)};
}

inline Pose2D integrate(const Pose2D& from, const RelativeMeasurement& z) {
  const Vec2 d = Vec2{z.dx, z.dy}.rotated(from.psi);
  return {from.x + d.x, from.y + d.y, wrap_angle(from.psi + z.dpsi)};
}

inline Transform2D to_transform(const RelativeMeasurement& z) {
  return {z.dpsi, {z.dx, z.dy}};
}

inline RelativeMeasurement to_measurement(const Transform2D& t) {
  return {t.t.x, t.t.y, wrap_angle(t.theta)};
}

struct TransformError {
  double e_t = 0.0;  // translation error, meters
  double e_r = 0.0;  // rotation error, radians, in [0, pi]
};

// Error between an estimated and a ground-truth transform, computed as
// dT = T_icp * T_gt^-1 in homogeneous coordinates; e_t = |dt|,
// e_r = acos(dR_00).
inline TransformError transform_error(const Transform2D& t_icp,
                                      const Transform2D& t_gt) {
  const Transform2D d = compose(t_icp, t_gt.inverse());
  double c = std::cos(d.theta);
  if (c > 1.0) c = 1.0;
  if (c < -1.0) c = -1.0;
  return {d.t.norm(), std::acos(c)};
}

}  // namespace swarmmap
