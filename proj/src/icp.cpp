#include "swarmmap/icp.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>
#include <random>
#include <stdexcept>
#include <unordered_map>

namespace swarmmap {

namespace {

struct Best {
  double d2 = std::numeric_limits<double>::infinity();
  int index = -1;
  void consider(double d2_cand, int idx) {
    if (d2_cand < d2 || (d2_cand == d2 && idx < index)) {
      d2 = d2_cand;
      index = idx;
    }
  }
};

CorrespondenceResult brute_force(std::span<const Vec2> p,
                                 std::span<const Vec2> q, double gating) {
  CorrespondenceResult out;
  const double gate2 = gating * gating;
  double sum = 0.0, sum_sq = 0.0;
  for (int i = 0; i < int(p.size()); ++i) {
    Best best;
    for (int j = 0; j < int(q.size()); ++j) {
      best.consider((p[i] - q[j]).norm_sq(), j);
    }
    if (best.index >= 0 && best.d2 <= gate2) {
      out.pairs.emplace_back(i, best.index);
      sum += std::sqrt(best.d2);
      sum_sq += best.d2;
    }
  }
  if (!out.pairs.empty()) {
    out.mean_distance = sum / double(out.pairs.size());
    out.rms_distance = std::sqrt(sum_sq / double(out.pairs.size()));
  }
  return out;
}

// Uniform grid with cell size = gating radius: the nearest neighbor within
// the gate is always inside the 3x3 neighborhood of the query cell.
CorrespondenceResult uniform_grid(std::span<const Vec2> p,
                                  std::span<const Vec2> q, double gating) {
  CorrespondenceResult out;
  const double cell = gating;
  const double gate2 = gating * gating;
  auto key = [cell](const Vec2& v) {
    const auto cx = int64_t(std::floor(v.x / cell));
    const auto cy = int64_t(std::floor(v.y / cell));
    return (uint64_t(cx) << 32) ^ uint64_t(uint32_t(cy));
  };
  std::unordered_map<uint64_t, std::vector<int>> grid;
  grid.reserve(q.size());
  for (int j = 0; j < int(q.size()); ++j) grid[key(q[j])].push_back(j);

  double sum = 0.0, sum_sq = 0.0;
  for (int i = 0; i < int(p.size()); ++i) {
    Best best;
    const auto cx = int64_t(std::floor(p[i].x / cell));
    const auto cy = int64_t(std::floor(p[i].y / cell));
    for (int64_t dx = -1; dx <= 1; ++dx) {
      for (int64_t dy = -1; dy <= 1; ++dy) {
        const uint64_t k =
            (uint64_t(cx + dx) << 32) ^ uint64_t(uint32_t(cy + dy));
        const auto it = grid.find(k);
        if (it == grid.end()) continue;
        for (int j : it->second) best.consider((p[i] - q[j]).norm_sq(), j);
      }
    }
    if (best.index >= 0 && best.d2 <= gate2) {
      out.pairs.emplace_back(i, best.index);
      sum += std::sqrt(best.d2);
      sum_sq += best.d2;
    }
  }
  if (!out.pairs.empty()) {
    out.mean_distance = sum / double(out.pairs.size());
    out.rms_distance = std::sqrt(sum_sq / double(out.pairs.size()));
  }
  return out;
}

}  // namespace

CorrespondenceResult correspondences(std::span<const Vec2> p,
                                     std::span<const Vec2> q, double gating,
                                     int min_correspondences,
                                     CorrespondenceBackend backend) {
  CorrespondenceResult out = backend == CorrespondenceBackend::BruteForce
                                 ? brute_force(p, q, gating)
                                 : uniform_grid(p, q, gating);
  if (int(out.pairs.size()) < min_correspondences)
    out.status = IcpStatus::TooFewCorrespondences;
  return out;
}

RigidFitResult best_rigid_transform(const CorrespondenceList& pairs,
                                    std::span<const Vec2> p,
                                    std::span<const Vec2> q) {
  RigidFitResult out;
  const double n = double(pairs.size());
  Vec2 pc, qc;
  for (const auto& [i, j] : pairs) {
    pc += p[i];
    qc += q[j];
  }
  pc = pc * (1.0 / n);
  qc = qc * (1.0 / n);

  double sum_dot = 0.0, sum_cross = 0.0;
  double sxx = 0.0, sxy = 0.0, syy = 0.0;
  for (const auto& [i, j] : pairs) {
    const Vec2 a = p[i] - pc;
    const Vec2 b = q[j] - qc;
    sum_dot += a.dot(b);
    sum_cross += a.cross(b);
    sxx += a.x * a.x;
    sxy += a.x * a.y;
    syy += a.y * a.y;
  }

  // Smallest eigenvalue of the source scatter matrix: zero means all points
  // are collinear and the rotation is unobservable.
  const double tr = sxx + syy;
  const double det = sxx * syy - sxy * sxy;
  const double disc = std::sqrt(std::max(0.0, tr * tr / 4.0 - det));
  const double lambda_min = tr / 2.0 - disc;
  if (lambda_min / std::max(1.0, n) <= 1e-9) {
    out.status = IcpStatus::Degenerate;
    return out;
  }

  const double theta = std::atan2(sum_cross, sum_dot);
  out.transform.theta = theta;
  out.transform.t = qc - pc.rotated(theta);
  return out;
}

IcpResult icp(std::span<const Vec2> p, std::span<const Vec2> q,
              const Transform2D& initial, const IcpConfig& cfg,
              CorrespondenceBackend backend) {
  IcpResult result;
  result.transform = initial;
  if (p.empty() || q.empty()) {
    result.status = IcpStatus::TooFewCorrespondences;
    return result;
  }

  std::vector<Vec2> moved(p.size());
  double prev_mean = std::numeric_limits<double>::infinity();
  for (int it = 0; it < cfg.max_iterations; ++it) {
    for (size_t i = 0; i < p.size(); ++i)
      moved[i] = result.transform.apply(p[i]);
    auto corr = correspondences(moved, q, cfg.gating_radius,
                                cfg.min_correspondences, backend);
    if (corr.status != IcpStatus::Ok) {
      result.status = corr.status;
      return result;
    }
    result.residual_history.push_back(corr.mean_distance);
    result.rms_history.push_back(corr.rms_distance);
    auto fit = best_rigid_transform(corr.pairs, moved, q);
    if (fit.status != IcpStatus::Ok) {
      result.status = fit.status;
      return result;
    }
    result.transform = compose(fit.transform, result.transform);
    result.iterations = it + 1;
    if (std::abs(prev_mean - corr.mean_distance) < cfg.convergence_tol) {
      result.converged = true;
      prev_mean = corr.mean_distance;
      break;
    }
    prev_mean = corr.mean_distance;
  }

  // Residual reported against the final transform.
  for (size_t i = 0; i < p.size(); ++i) moved[i] = result.transform.apply(p[i]);
  auto final_corr = correspondences(moved, q, cfg.gating_radius,
                                    cfg.min_correspondences, backend);
  if (final_corr.status != IcpStatus::Ok) {
    result.status = final_corr.status;
    return result;
  }
  result.mean_residual = final_corr.mean_distance;
  return result;
}

IcpBenchReport icp_runtime_profile(const std::vector<int>& sizes, int repeats,
                                   uint64_t seed, int iterations) {
  if (repeats < 1) throw std::invalid_argument("repeats must be positive");
  IcpBenchReport report;
  Rng rng(seed);
  std::uniform_real_distribution<double> uni(0.0, 4.0);

  IcpConfig cfg;
  cfg.max_iterations = iterations;
  cfg.convergence_tol = 0.0;  // fixed iteration count for clean timing
  cfg.min_correspondences = 1;
  cfg.gating_radius = 10.0;

  std::vector<std::vector<Vec2>> ps, qs;
  for (int size : sizes) {
    if (size <= 0)
      throw std::invalid_argument("scan size must be positive");
    std::vector<Vec2> p(size), q(size);
    for (int i = 0; i < size; ++i) p[i] = {uni(rng), uni(rng)};
    const Transform2D shift{deg2rad(2.0), {0.05, -0.03}};
    for (int i = 0; i < size; ++i) q[i] = shift.apply(p[i]);
    icp(p, q, Transform2D::identity(), cfg);  // warmup
    ps.push_back(std::move(p));
    qs.push_back(std::move(q));
  }

  // Repeats are interleaved across sizes so load drift hits every size of a
  // round the same way; small sizes batch until each sample is in the
  // milliseconds range.
  std::vector<std::vector<double>> ms(sizes.size());
  for (int r = 0; r < repeats; ++r) {
    for (size_t s = 0; s < sizes.size(); ++s) {
      const int inner = std::max(1, 500000 / (sizes[s] * sizes[s]));
      const auto t0 = std::chrono::steady_clock::now();
      for (int k = 0; k < inner; ++k)
        icp(ps[s], qs[s], Transform2D::identity(), cfg);
      const auto t1 = std::chrono::steady_clock::now();
      ms[s].push_back(
          std::chrono::duration<double, std::milli>(t1 - t0).count() / inner);
    }
  }
  for (size_t s = 0; s < sizes.size(); ++s) {
    double mean = 0.0;
    for (double m : ms[s]) mean += m;
    mean /= repeats;
    double var = 0.0;
    for (double m : ms[s]) var += (m - mean) * (m - mean);
    std::sort(ms[s].begin(), ms[s].end());
    report.rows.push_back({sizes[s], mean,
                           repeats > 1 ? std::sqrt(var / (repeats - 1)) : 0.0,
                           ms[s][ms[s].size() / 2]});
  }

  // Least-squares quadratic fit over (size, ms_mean) via normal equations.
  const size_t n = report.rows.size();
  if (n >= 3) {
    // fit on the medians: scheduling spikes are one-sided noise
    double s[5] = {double(n), 0, 0, 0, 0};
    double t0 = 0, t1 = 0, t2 = 0;
    for (const auto& row : report.rows) {
      const double x = row.size;
      double xp = x;
      for (int k = 1; k <= 4; ++k, xp *= x) s[k] += xp;
      t0 += row.ms_median;
      t1 += row.ms_median * x;
      t2 += row.ms_median * x * x;
    }
    // Solve the 3x3 system [s4 s3 s2; s3 s2 s1; s2 s1 s0] [a b c] = [t2 t1 t0]
    double A[3][4] = {{s[4], s[3], s[2], t2},
                      {s[3], s[2], s[1], t1},
                      {s[2], s[1], s[0], t0}};
    for (int col = 0; col < 3; ++col) {
      int piv = col;
      for (int r = col + 1; r < 3; ++r)
        if (std::abs(A[r][col]) > std::abs(A[piv][col])) piv = r;
      std::swap(A[piv], A[col]);
      for (int r = 0; r < 3; ++r) {
        if (r == col) continue;
        const double f = A[r][col] / A[col][col];
        for (int c = col; c < 4; ++c) A[r][c] -= f * A[col][c];
      }
    }
    report.fit_a = A[0][3] / A[0][0];
    report.fit_b = A[1][3] / A[1][1];
    report.fit_c = A[2][3] / A[2][2];

    const double mean_y = t0 / double(n);
    double ss_res = 0.0, ss_tot = 0.0;
    for (const auto& row : report.rows) {
      const double x = row.size;
      const double fit = report.fit_a * x * x + report.fit_b * x + report.fit_c;
      ss_res += (row.ms_median - fit) * (row.ms_median - fit);
      ss_tot += (row.ms_median - mean_y) * (row.ms_median - mean_y);
    }
    report.r_squared = ss_tot > 0.0 ? 1.0 - ss_res / ss_tot : 1.0;
  }
  return report;
}

}  // namespace swarmmap
