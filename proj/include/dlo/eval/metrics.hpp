#pragma once

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <numbers>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Geometry>

#include "dlo/io/text_formats.hpp"
#include "dlo/odometry/pipeline.hpp"

namespace dlo::eval {

using Trajectory = std::vector<TrajectoryRecord>;

struct PosePair {
  TrajectoryRecord est;
  TrajectoryRecord ref;
};

struct Association {
  std::vector<PosePair> pairs;
  std::size_t unmatched = 0;
  std::string warning;  ///< set when nothing matched
};

/**
 * @brief Matches each estimate to the reference with the nearest stamp.
 *
 * Pairs farther apart than `max_dt` are dropped. On equal distances the
 * earlier reference wins. `ref` must be sorted by stamp.
 */
inline Association associate(const Trajectory& est, const Trajectory& ref, double max_dt) {
  if (!(max_dt >= 0)) throw std::invalid_argument("associate: max_dt must be >= 0");
  Association out;
  for (const auto& e : est) {
    auto it = std::lower_bound(ref.begin(), ref.end(), e.stamp,
                               [](const TrajectoryRecord& r, double t) { return r.stamp < t; });
    const TrajectoryRecord* best = nullptr;
    if (it != ref.begin()) best = &*std::prev(it);
    if (it != ref.end() && (!best || it->stamp - e.stamp < e.stamp - best->stamp)) best = &*it;
    if (best && std::abs(best->stamp - e.stamp) <= max_dt) {
      out.pairs.push_back({e, *best});
    } else {
      ++out.unmatched;
    }
  }
  if (out.pairs.empty()) {
    out.warning = "no estimate stamps within " + std::to_string(max_dt) + " s of a reference stamp";
  }
  return out;
}

struct ApeReport {
  double max = 0.0;
  double mean = 0.0;
  double std = 0.0;
  double rmse = 0.0;
  std::size_t count = 0;
  std::vector<double> stamps;
  std::vector<double> errors;               ///< translational [m]
  std::vector<double> rotation_errors_deg;  ///< auxiliary geodesic error [deg]
  Pose alignment;                           ///< applied to the estimate
};

/// Best-fit rigid transform mapping `src` points onto `dst` (no scale).
inline Pose rigid_alignment(const std::vector<Eigen::Vector3d>& src,
                            const std::vector<Eigen::Vector3d>& dst) {
  if (src.size() != dst.size() || src.empty()) throw std::invalid_argument("rigid_alignment: size mismatch");
  const auto n = static_cast<Eigen::Index>(src.size());
  Eigen::Matrix3Xd a(3, n), b(3, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    a.col(i) = src[static_cast<std::size_t>(i)];
    b.col(i) = dst[static_cast<std::size_t>(i)];
  }
  if (n < 2) return Pose::from_translation(b.col(0) - a.col(0));
  return Pose::from_matrix(Eigen::umeyama(a, b, false));
}

/**
 * @brief Translational absolute pose error over associated pairs.
 *
 * With `align`, the estimate is first moved by the rigid transform that best
 * fits its positions to the reference positions.
 */
inline ApeReport ape(const std::vector<PosePair>& pairs, bool align) {
  if (pairs.empty()) throw std::invalid_argument("ape: no associated pose pairs");
  ApeReport r;
  if (align) {
    std::vector<Eigen::Vector3d> src, dst;
    for (const auto& p : pairs) {
      src.push_back(p.est.pose.translation);
      dst.push_back(p.ref.pose.translation);
    }
    r.alignment = rigid_alignment(src, dst);
  }
  double sum = 0.0, sum_sq = 0.0;
  for (const auto& p : pairs) {
    const Pose est = r.alignment * p.est.pose;
    const double e = (p.ref.pose.translation - est.translation).norm();
    r.stamps.push_back(p.est.stamp);
    r.errors.push_back(e);
    r.rotation_errors_deg.push_back(angular_distance(est.rotation, p.ref.pose.rotation) * 180.0 /
                                    std::numbers::pi);
    sum += e;
    sum_sq += e * e;
    r.max = std::max(r.max, e);
  }
  r.count = pairs.size();
  const double n = static_cast<double>(r.count);
  r.mean = sum / n;
  r.rmse = std::sqrt(sum_sq / n);
  r.std = std::sqrt(std::max(0.0, sum_sq / n - r.mean * r.mean));
  return r;
}

inline void write_ape_report_csv(const std::filesystem::path& path, const ApeReport& r) {
  std::string out = "max,mean,std,rmse,count\n";
  out += io::detail::fmt_exact(r.max) + "," + io::detail::fmt_exact(r.mean) + "," +
         io::detail::fmt_exact(r.std) + "," + io::detail::fmt_exact(r.rmse) + "," +
         std::to_string(r.count) + "\n";
  io::detail::write_file(path, out);
}

inline void write_per_pose_errors_csv(const std::filesystem::path& path, const ApeReport& r) {
  std::string out = "stamp,error,rotation_error_deg\n";
  for (std::size_t i = 0; i < r.errors.size(); ++i) {
    out += io::detail::fmt("%.9f", r.stamps[i]) + "," + io::detail::fmt_exact(r.errors[i]) + "," +
           io::detail::fmt_exact(r.rotation_errors_deg[i]) + "\n";
  }
  io::detail::write_file(path, out);
}

// ---------------------------------------------------------------------------
// Run counters
// ---------------------------------------------------------------------------

struct CounterTotals {
  std::size_t scans = 0;
  std::size_t dropped = 0;
  std::size_t late = 0;
  std::size_t rejected = 0;
  std::size_t source_tree_builds = 0;
  std::size_t s2s_target_tree_builds = 0;
  std::size_t s2m_target_tree_builds = 0;
  std::size_t covariance_computations = 0;
  std::size_t submap_rebuilds = 0;
  std::size_t submap_distance_evals = 0;
  std::size_t keyframes = 0;
  std::size_t s2s_iterations = 0;
  std::size_t s2m_iterations = 0;
  double wall_ms = 0.0;

  [[nodiscard]] std::size_t tree_builds() const {
    return source_tree_builds + s2s_target_tree_builds + s2m_target_tree_builds;
  }
  [[nodiscard]] double mean_wall_ms() const { return scans ? wall_ms / static_cast<double>(scans) : 0.0; }
  [[nodiscard]] double drop_rate() const {
    return scans ? static_cast<double>(dropped) / static_cast<double>(scans) : 0.0;
  }
};

struct CounterReport {
  std::vector<ScanDiagnostics> scans;
  CounterTotals totals;
};

/// Sums per-scan deltas into run totals.
inline CounterReport instrument_counters(const std::vector<ScanDiagnostics>& scans) {
  CounterReport r{scans, {}};
  auto& t = r.totals;
  for (const auto& d : scans) {
    ++t.scans;
    t.dropped += d.dropped;
    t.late += d.late;
    t.rejected += d.rejected;
    t.source_tree_builds += d.source_tree_builds;
    t.s2s_target_tree_builds += d.s2s_target_tree_builds;
    t.s2m_target_tree_builds += d.s2m_target_tree_builds;
    t.covariance_computations += d.covariance_computations;
    t.submap_rebuilds += d.submap_rebuilds;
    t.submap_distance_evals += d.submap_distance_evals;
    t.keyframes = d.keyframes;
    t.s2s_iterations += d.s2s_iterations;
    t.s2m_iterations += d.s2m_iterations;
    t.wall_ms += d.wall_ms;
  }
  return r;
}

inline constexpr const char* kCounterHeader =
    "index,stamp,dropped,late,rejected,source_tree_builds,s2s_target_tree_builds,"
    "s2m_target_tree_builds,covariance_computations,submap_rebuilds,submap_distance_evals,"
    "submap_size,keyframes,keyframe_inserted,points,s2s_iterations,s2m_iterations,spaciousness,"
    "keyframe_thresh,wall_ms";

/**
 * @brief One row per scan followed by a `total` row.
 *
 * With `include_timing` off the wall_ms column is written as 0 so the file is
 * reproducible byte for byte.
 */
inline std::string encode_counters_csv(const CounterReport& r, bool include_timing = true) {
  using io::detail::fmt;
  std::string out = std::string(kCounterHeader) + "\n";
  auto u = [](std::size_t v) { return std::to_string(v); };
  for (const auto& d : r.scans) {
    out += u(d.index) + "," + fmt("%.9f", d.stamp) + "," + u(d.dropped) + "," + u(d.late) + "," +
           u(d.rejected) + "," + u(d.source_tree_builds) + "," + u(d.s2s_target_tree_builds) + "," +
           u(d.s2m_target_tree_builds) + "," + u(d.covariance_computations) + "," +
           u(d.submap_rebuilds) + "," + u(d.submap_distance_evals) + "," + u(d.submap_size) + "," +
           u(d.keyframes) + "," + u(d.keyframe_inserted) + "," + u(d.points) + "," +
           u(d.s2s_iterations) + "," + u(d.s2m_iterations) + "," + fmt("%.6f", d.spaciousness) + "," +
           fmt("%.6f", d.keyframe_thresh) + "," + fmt("%.3f", include_timing ? d.wall_ms : 0.0) + "\n";
  }
  const auto& t = r.totals;
  out += "total,," + u(t.dropped) + "," + u(t.late) + "," + u(t.rejected) + "," +
         u(t.source_tree_builds) + "," + u(t.s2s_target_tree_builds) + "," +
         u(t.s2m_target_tree_builds) + "," + u(t.covariance_computations) + "," +
         u(t.submap_rebuilds) + "," + u(t.submap_distance_evals) + ",," + u(t.keyframes) + ",,," +
         u(t.s2s_iterations) + "," + u(t.s2m_iterations) + ",,," +
         fmt("%.3f", include_timing ? t.wall_ms : 0.0) + "\n";
  return out;
}

inline void write_counters_csv(const std::filesystem::path& path, const CounterReport& r,
                               bool include_timing = true) {
  io::detail::write_file(path, encode_counters_csv(r, include_timing));
}

}  // namespace dlo::eval
