#pragma once

#include <cstdint>
#include <span>
#include <utility>
#include <vector>

#include "swarmmap/geometry.hpp"
#include "swarmmap/sensing.hpp"

namespace swarmmap {

struct IcpConfig {
  int max_iterations = 30;
  double convergence_tol = 1e-4;  // change in mean correspondence distance
  double gating_radius = 0.5;     // meters
  int min_correspondences = 30;
};

enum class IcpStatus : uint8_t {
  Ok,
  TooFewCorrespondences,
  Degenerate,  // correspondences collinear, rotation unobservable
};

struct IcpResult {
  Transform2D transform;  // maps scan P onto scan Q
  double mean_residual = 0.0;
  int iterations = 0;
  bool converged = false;
  IcpStatus status = IcpStatus::Ok;
  std::vector<double> residual_history;  // mean distance per iteration
  std::vector<double> rms_history;       // rms distance per iteration
};

using CorrespondenceList = std::vector<std::pair<int, int>>;

enum class CorrespondenceBackend : uint8_t { BruteForce, UniformGrid };

struct CorrespondenceResult {
  CorrespondenceList pairs;
  double mean_distance = 0.0;
  double rms_distance = 0.0;
  IcpStatus status = IcpStatus::Ok;
};

// Euclidean nearest neighbor in q for every point of p; pairs further apart
// than the gating radius are dropped. The uniform-grid backend must produce
// bit-identical pairings to the brute-force reference.
CorrespondenceResult correspondences(
    std::span<const Vec2> p, std::span<const Vec2> q, double gating,
    int min_correspondences,
    CorrespondenceBackend backend = CorrespondenceBackend::BruteForce);

struct RigidFitResult {
  Transform2D transform;
  IcpStatus status = IcpStatus::Ok;
};

// Closed-form minimizer of sum |q_i - (R p_i + t)|^2 over the given pairs:
// centroids subtracted, theta* = atan2(sum cross, sum dot), t* = qc - R* pc.
RigidFitResult best_rigid_transform(const CorrespondenceList& pairs,
                                    std::span<const Vec2> p,
                                    std::span<const Vec2> q);

// Point-to-point ICP: alternates correspondence search and the closed-form
// alignment until the mean residual change drops below the tolerance.
IcpResult icp(std::span<const Vec2> p, std::span<const Vec2> q,
              const Transform2D& initial, const IcpConfig& cfg = {},
              CorrespondenceBackend backend = CorrespondenceBackend::BruteForce);

inline IcpResult icp(const Scan& p, const Scan& q, const Transform2D& initial,
                     const IcpConfig& cfg = {}) {
  return icp(std::span<const Vec2>(p.points), std::span<const Vec2>(q.points),
             initial, cfg);
}

struct IcpBenchRow {
  int size = 0;
  double ms_mean = 0.0;
  double ms_std = 0.0;
  double ms_median = 0.0;  // used for the quadratic fit
};

struct IcpBenchReport {
  std::vector<IcpBenchRow> rows;
  // quadratic least-squares fit ms = a*size^2 + b*size + c over the means
  double fit_a = 0.0, fit_b = 0.0, fit_c = 0.0;
  double r_squared = 0.0;
  // two scans resident during a match, 8 bytes per 2D point
  static size_t memory_model_bytes(int size) { return 2u * size * 8u; }
};

// Wall-clock profile of the brute-force matcher at a fixed iteration count.
// Sizes must be positive; throws std::invalid_argument otherwise.
IcpBenchReport icp_runtime_profile(const std::vector<int>& sizes, int repeats,
                                   uint64_t seed, int iterations = 10);

}  // namespace swarmmap
