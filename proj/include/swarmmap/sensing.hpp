#pragma once

#include <array>
#include <optional>
#include <vector>

#include "swarmmap/geometry.hpp"
#include "swarmmap/pose_id.hpp"
#include "swarmmap/world.hpp"

namespace swarmmap {

inline constexpr double kTofMaxRange = 4.0;  // meters
inline constexpr int kScanFrameCount = 15;
inline constexpr int kMaxScanPoints = 480;     // 15 frames x 32 points
inline constexpr int kLowDensityThreshold = 50;

// One reduced measurement: the distance a sensor column reports, which is
// the projection of the hit onto the sensor's forward axis.
struct TofColumnReading {
  int sensor = 0;  // 0..3
  int zone = 0;    // 0..7
  double distance = 0.0;
  bool valid = false;
};

// Mounting of the four ToF sensors on the airframe.
struct SensorGeometry {
  std::array<double, 4> beta{};        // rotation vs body frame, radians
  std::array<Vec2, 4> offset{};        // sensor position in body frame
  std::array<double, 8> zone_angles{}; // theta_j, radians

  // Sensors at 0/90/180/270 degrees, 1 cm forward offset, eight equal
  // zones across the 45-degree FoV (centers at +-2.8125..+-19.6875 deg).
  static SensorGeometry standard();
};

using TofMatrix = std::array<std::array<double, 8>, 8>;
using TofValidity = std::array<std::array<bool, 8>, 8>;

// Reduces one 8x8 matrix column to a single reading: median of the valid
// center-four pixels (rows 2..5); the column is discarded if none is valid.
TofColumnReading reduce_matrix_column(const TofMatrix& pixels,
                                      const TofValidity& validity,
                                      int sensor, int column);

// World-frame projection of one reading acquired at `pose`.
// Returns nullopt for invalid readings.
std::optional<Vec2> project(const Pose2D& pose, const TofColumnReading& r,
                            const SensorGeometry& geom);

// One simultaneous 4-sensor capture, already column-reduced.
struct SensorCapture {
  std::array<std::array<TofColumnReading, 8>, 4> columns{};
};

// Ray-casts the center-four pixels of every column from the true pose, with
// per-pixel range noise and dropout applied before the median reduction.
// The outer matrix rows are never consulted by the 2D pipeline and stay
// invalid.
SensorCapture simulate_capture(const World& world, const Pose2D& true_pose,
                               const SensorGeometry& geom,
                               const NoiseModel& noise, Rng& rng);

// Minimum valid reduced distance of one sensor, if any column is valid.
std::optional<double> min_sensor_distance(const SensorCapture& capture,
                                          int sensor);

struct ScanFrame {
  std::vector<Vec2> points;  // <= 32
  Pose2D pose_at_capture;
};

ScanFrame project_frame(const Pose2D& est_pose, const SensorCapture& capture,
                        const SensorGeometry& geom);

// 15 stacked scan frames captured during a 45-degree in-place yaw spin.
struct Scan {
  std::vector<Vec2> points;  // <= 480
  Pose2D anchor_pose;        // estimate right before the spin started
  PoseId pose_id;
  int frame_count = 0;
  bool low_density = false;  // fewer than 50 points (open space)
};

// Spin profile: 0.4 s yaw to -22.5 deg, 2 s spin at +22.5 deg/s capturing a
// frame every second tick (7.5 Hz), 0.4 s yaw back to the nominal heading.
struct ScanSpinPlan {
  static constexpr int kPreTicks = 6;
  static constexpr int kSpinTicks = 30;
  static constexpr int kPostTicks = 6;

  static int total_ticks() { return kPreTicks + kSpinTicks + kPostTicks; }
  static double yaw_rate(int tick);        // commanded rate at local tick
  static bool captures_frame(int tick);
};

class ScanAccumulator {
 public:
  void begin(const Pose2D& anchor_est, PoseId id);
  void add_frame(const ScanFrame& frame);
  Scan finish();
  int frames() const { return frame_count_; }

 private:
  Scan scan_;
  int frame_count_ = 0;
};

// Runs the full spin synchronously at a fixed location: the drone hovers,
// est and true headings evolve through the engine step (so yaw noise shows
// up as the usual spin artifacts), frames are projected with the estimate at
// their own capture instant.
Scan acquire_scan(const World& world, const Pose2D& pose,
                  const SensorGeometry& geom, const NoiseModel& noise,
                  Rng& rng, PoseId id = {});

}  // namespace swarmmap
