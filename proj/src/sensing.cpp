#include "swarmmap/sensing.hpp"

#include <algorithm>

namespace swarmmap {

SensorGeometry SensorGeometry::standard() {
  SensorGeometry g;
  for (int i = 0; i < 4; ++i) {
    g.beta[i] = wrap_angle(deg2rad(90.0 * i));
    g.offset[i] = {0.01, 0.0};
  }
  const double step = deg2rad(45.0) / 8.0;
  for (int j = 0; j < 8; ++j) g.zone_angles[j] = (j - 3.5) * step;
  return g;
}

TofColumnReading reduce_matrix_column(const TofMatrix& pixels,
                                      const TofValidity& validity,
                                      int sensor, int column) {
  TofColumnReading r;
  r.sensor = sensor;
  r.zone = column;
  // center four pixels of the column
  std::array<double, 4> vals;
  int n = 0;
  for (int row = 2; row <= 5; ++row) {
    if (validity[row][column]) vals[n++] = pixels[row][column];
  }
  if (n == 0) return r;  // entire column discarded
  std::sort(vals.begin(), vals.begin() + n);
  const double median =
      (n % 2 == 1) ? vals[n / 2] : 0.5 * (vals[n / 2 - 1] + vals[n / 2]);
  r.distance = median;
  r.valid = median > 0.0 && median <= kTofMaxRange;
  return r;
}

std::optional<Vec2> project(const Pose2D& pose, const TofColumnReading& r,
                            const SensorGeometry& geom) {
  if (!r.valid) return std::nullopt;
  const double d = r.distance;
  const Vec2 sensor_frame{d + geom.offset[r.sensor].x,
                          std::tan(geom.zone_angles[r.zone]) * d +
                              geom.offset[r.sensor].y};
  return pose.position() +
         sensor_frame.rotated(pose.psi + geom.beta[r.sensor]);
}

SensorCapture simulate_capture(const World& world, const Pose2D& true_pose,
                               const SensorGeometry& geom,
                               const NoiseModel& noise, Rng& rng) {
  SensorCapture cap;
  std::normal_distribution<double> gauss(0.0, 1.0);
  std::uniform_real_distribution<double> uni(0.0, 1.0);
  for (int i = 0; i < 4; ++i) {
    const double facing = true_pose.psi + geom.beta[i];
    const Vec2 origin =
        true_pose.position() + geom.offset[i].rotated(facing);
    TofMatrix pixels{};
    TofValidity valid{};
    for (int j = 0; j < 8; ++j) {
      const double theta = geom.zone_angles[j];
      // The four center pixels of a column share the same azimuth in 2D.
      for (int row = 2; row <= 5; ++row) {
        const auto range =
            ray_cast(world, origin, facing + theta, kTofMaxRange);
        const bool dropped = uni(rng) < noise.pixel_dropout_prob;
        double r = range ? *range : -1.0;
        if (r >= 0.0 && noise.range_noise_std > 0.0)
          r += gauss(rng) * noise.range_noise_std;
        // The sensor reports the projection onto its forward axis.
        const double d = r * std::cos(theta);
        if (!dropped && r >= 0.0 && d > 0.0 && d <= kTofMaxRange) {
          pixels[row][j] = d;
          valid[row][j] = true;
        }
      }
    }
    for (int j = 0; j < 8; ++j)
      cap.columns[i][j] = reduce_matrix_column(pixels, valid, i, j);
  }
  return cap;
}

std::optional<double> min_sensor_distance(const SensorCapture& capture,
                                          int sensor) {
  std::optional<double> best;
  for (const auto& col : capture.columns[sensor]) {
    if (col.valid && (!best || col.distance < *best)) best = col.distance;
  }
  return best;
}

ScanFrame project_frame(const Pose2D& est_pose, const SensorCapture& capture,
                        const SensorGeometry& geom) {
  ScanFrame frame;
  frame.pose_at_capture = est_pose;
  for (int i = 0; i < 4; ++i) {
    for (int j = 0; j < 8; ++j) {
      if (auto p = project(est_pose, capture.columns[i][j], geom))
        frame.points.push_back(*p);
    }
  }
  return frame;
}

double ScanSpinPlan::yaw_rate(int tick) {
  const double pre_rate = -deg2rad(22.5) / (kPreTicks * kTickDt);
  if (tick < kPreTicks) return pre_rate;
  if (tick < kPreTicks + kSpinTicks)
    return deg2rad(45.0) / (kSpinTicks * kTickDt);
  return pre_rate;  // unwinds the +22.5 deg overshoot
}

bool ScanSpinPlan::captures_frame(int tick) {
  const int s = tick - kPreTicks;
  return s >= 0 && s < kSpinTicks && s % 2 == 0;
}

void ScanAccumulator::begin(const Pose2D& anchor_est, PoseId id) {
  scan_ = Scan{};
  scan_.anchor_pose = anchor_est;
  scan_.pose_id = id;
  frame_count_ = 0;
}

void ScanAccumulator::add_frame(const ScanFrame& frame) {
  scan_.points.insert(scan_.points.end(), frame.points.begin(),
                      frame.points.end());
  ++frame_count_;
}

Scan ScanAccumulator::finish() {
  scan_.frame_count = frame_count_;
  scan_.low_density = int(scan_.points.size()) < kLowDensityThreshold;
  return std::move(scan_);
}

Scan acquire_scan(const World& world, const Pose2D& pose,
                  const SensorGeometry& geom, const NoiseModel& noise,
                  Rng& rng, PoseId id) {
  DroneState st;
  st.true_pose = pose;
  st.est_pose = pose;
  ScanAccumulator acc;
  acc.begin(st.est_pose, id);
  for (int k = 0; k < ScanSpinPlan::total_ticks(); ++k) {
    if (ScanSpinPlan::captures_frame(k)) {
      const auto cap = simulate_capture(world, st.true_pose, geom, noise, rng);
      acc.add_frame(project_frame(st.est_pose, cap, geom));
    }
    st.v_pri = 0.0;
    st.v_sec = 0.0;
    st.yaw_rate_cmd = ScanSpinPlan::yaw_rate(k);
    step(st, world, kTickDt, noise, rng);
  }
  return acc.finish();
}

}  // namespace swarmmap
