#pragma once

#include <chrono>
#include <numbers>
#include <memory>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "dlo/geometry.hpp"
#include "dlo/keyframe_submap.hpp"
#include "dlo/nano_gicp.hpp"
#include "dlo/odometry/config.hpp"
#include "dlo/odometry/imu.hpp"
#include "dlo/odometry/spaciousness.hpp"

namespace dlo {

class ScanRejected : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Box filter, then voxel filter. Throws ScanRejected if nothing survives.
inline PointCloud preprocess(const PointCloud& raw, const OdometryConfig& cfg) {
  if (raw.empty()) throw ScanRejected("preprocess: empty input scan");
  PointCloud out = voxel_filter(box_filter(raw, cfg.box_half_extent), cfg.voxel_leaf);
  if (out.empty()) {
    throw ScanRejected("preprocess: no points outside the self-return box");
  }
  return out;
}

struct TrajectoryRecord {
  double stamp = 0.0;
  Pose pose;
};

/// Per-scan instrumentation. Counts are deltas for this scan only.
struct ScanDiagnostics {
  std::size_t index = 0;
  double stamp = 0.0;
  bool rejected = false;  ///< preprocessing left no usable points
  bool late = false;      ///< arrived before the previous scan finished
  bool dropped = false;   ///< skipped (rejected, or late with drop_late_scans)
  std::size_t source_tree_builds = 0;
  std::size_t s2s_target_tree_builds = 0;
  std::size_t s2m_target_tree_builds = 0;
  std::size_t covariance_computations = 0;
  std::size_t submap_rebuilds = 0;
  std::size_t submap_distance_evals = 0;
  std::size_t submap_size = 0;
  std::size_t s2s_iterations = 0;
  std::size_t s2m_iterations = 0;
  bool s2s_fallback = false;
  bool s2m_fallback = false;
  bool keyframe_inserted = false;
  std::size_t keyframes = 0;
  std::size_t points = 0;  ///< after preprocessing
  double spaciousness = 0.0;
  double keyframe_thresh = 0.0;
  double wall_ms = 0.0;
  std::string message;
};

struct ScanOutput {
  Pose pose;
  ScanDiagnostics diagnostics;
};

/**
 * @brief Two-stage LiDAR odometry with keyframe-space submapping.
 *
 * Per scan: preprocess, spaciousness update, gyro prior, scan-to-scan GICP,
 * propagation into the world frame, submap derivation, scan-to-map GICP,
 * keyframe update. With `recycle` on, trees and covariances move between the
 * two solver instances instead of being rebuilt:
 *  - the scan's tree and covariances are built once and serve as S2S source,
 *    S2M source, and next scan's S2S target;
 *  - the S2M target tree is rebuilt only when the submap keyframe set changes;
 *  - S2M target covariances are stitched from stored keyframe covariances.
 * With `recycle` off every tree and covariance set is recomputed from the
 * same inputs, which yields identical poses at a higher cost.
 *
 * Scans must be processed strictly in order.
 */
class Odometry {
 public:
  explicit Odometry(OdometryConfig cfg = {})
      : cfg_(std::move(cfg)), s2s_(cfg_.gicp_s2s), s2m_(cfg_.gicp_s2m) {
    cfg_.validate();
  }

  [[nodiscard]] const OdometryConfig& config() const { return cfg_; }
  [[nodiscard]] const Pose& pose() const { return pose_; }
  [[nodiscard]] const KeyframeDb& keyframes() const { return db_; }
  [[nodiscard]] const std::vector<TrajectoryRecord>& trajectory() const { return trajectory_; }
  [[nodiscard]] const std::vector<ScanDiagnostics>& diagnostics() const { return diagnostics_; }
  [[nodiscard]] const SpaciousnessState& spaciousness() const { return spaciousness_; }
  [[nodiscard]] const Eigen::Vector3d& gyro_bias() const { return gyro_bias_; }
  [[nodiscard]] const NanoGicp& s2s() const { return s2s_; }
  [[nodiscard]] const NanoGicp& s2m() const { return s2m_; }
  [[nodiscard]] const Submap& submap() const { return submap_; }
  [[nodiscard]] PointCloud map() const { return db_.map_cloud(); }

  /**
   * @brief Gyro bias and optional initial attitude from a stationary window.
   *
   * Must be called before the first scan. The bias is estimated only when
   * use_imu is set; the attitude only when gravity_align is set.
   */
  void initialize_imu(std::span<const ImuMeasurement> stationary) {
    if (!trajectory_.empty()) throw std::logic_error("initialize_imu: scans already processed");
    if (cfg_.use_imu) gyro_bias_ = calibrate_gyro_bias(stationary, cfg_.imu_calib_time);
    if (cfg_.gravity_align) pose_ = gravity_align(stationary);
  }

  void set_initial_pose(const Pose& p) {
    if (!trajectory_.empty()) throw std::logic_error("set_initial_pose: scans already processed");
    pose_ = p;
  }

  /**
   * @brief Processes one scan.
   *
   * `imu` may hold any sorted span of measurements; only those between the
   * previous and current scan stamps are integrated. Rejected (and dropped)
   * scans hold the pose and do not advance the pipeline.
   */
  ScanOutput process_scan(const PointCloud& raw, std::span<const ImuMeasurement> imu = {}) {
    using Clock = std::chrono::steady_clock;
    const auto start = Clock::now();

    ScanDiagnostics d;
    d.index = diagnostics_.size();
    d.stamp = raw.stamp;
    // Offline replay: scan i arrives at i * sensor_period.
    const double arrival = static_cast<double>(d.index) * cfg_.sensor_period;
    d.late = busy_until_ && arrival + kStampTolerance < *busy_until_;

    if (d.late && cfg_.drop_late_scans) {
      d.dropped = true;
      d.message = "late scan dropped";
      return finish(d, start, false);
    }

    std::shared_ptr<const PointCloud> scan;
    try {
      auto pre = preprocess(raw, cfg_);
      if (pre.size() < std::max(cfg_.gicp_s2s.k_correspondences, cfg_.gicp_s2m.k_correspondences)) {
        throw ScanRejected("preprocess: too few points (" + std::to_string(pre.size()) + ")");
      }
      scan = std::make_shared<const PointCloud>(std::move(pre));
    } catch (const ScanRejected& e) {
      d.rejected = true;
      d.dropped = true;
      d.message = e.what();
      return finish(d, start, true);
    }
    d.points = scan->size();
    spaciousness_ = compute_spaciousness(*scan, spaciousness_, cfg_.alpha, cfg_.beta);
    d.spaciousness = spaciousness_.m;
    d.keyframe_thresh = current_keyframe_threshold();

    if (trajectory_.empty()) {
      first_scan(scan, d);
    } else {
      next_scan(scan, imu, d);
    }
    trajectory_.push_back({raw.stamp, pose_});
    prev_stamp_ = raw.stamp;
    d.keyframes = db_.size();
    return finish(d, start, true);
  }

 private:
  [[nodiscard]] double current_keyframe_threshold() const {
    return cfg_.fixed_keyframe_thresh > 0.0 ? cfg_.fixed_keyframe_thresh
                                            : keyframe_threshold(spaciousness_.m);
  }

  void first_scan(const std::shared_ptr<const PointCloud>& scan, ScanDiagnostics& d) {
    s2s_.set_source(scan);
    ++d.source_tree_builds;
    ++d.covariance_computations;
    if (cfg_.recycle) s2s_.reuse_source_as_target(s2s_);
    prev_scan_ = scan;
    db_.insert(pose_, *scan, *s2s_.source().covariances);
    last_keyframe_pose_ = pose_;
    d.keyframe_inserted = true;
  }

  void next_scan(const std::shared_ptr<const PointCloud>& scan,
                 std::span<const ImuMeasurement> imu, ScanDiagnostics& d) {
    // Prior.
    Pose prior;
    if (cfg_.use_imu) prior = integrate_gyro(imu, prev_stamp_, scan->stamp, gyro_bias_);

    // Scan-to-scan.
    s2s_.set_source(scan);
    ++d.source_tree_builds;
    ++d.covariance_computations;
    if (!cfg_.recycle) {
      s2s_.set_target(prev_scan_);
      ++d.s2s_target_tree_builds;
      ++d.covariance_computations;
    }
    const AlignmentResult s2s = s2s_.align(prior);
    d.s2s_iterations = s2s.iterations;
    Pose relative = s2s.pose;
    if (!s2s.converged) {
      relative = prior;
      d.s2s_fallback = true;
      d.message += "s2s: " + s2s.diagnostic + "; ";
    }
    const Pose propagated = compose(pose_, relative);

    // Scan-to-map.
    if (cfg_.recycle) {
      s2m_.share_source(s2s_);
    } else {
      s2m_.set_source(scan);
      ++d.source_tree_builds;
      ++d.covariance_computations;
    }
    update_submap(d);
    const AlignmentResult s2m = s2m_.align(propagated);
    d.s2m_iterations = s2m.iterations;
    Pose world = s2m.pose;
    if (!s2m.converged) {
      world = propagated;
      d.s2m_fallback = true;
      d.message += "s2m: " + s2m.diagnostic + "; ";
    }
    pose_ = world;

    // Keyframes and map.
    const double moved = (pose_.translation - last_keyframe_pose_.translation).norm();
    const double turned = angular_distance(pose_.rotation, last_keyframe_pose_.rotation);
    if (moved > current_keyframe_threshold() ||
        turned > cfg_.rot_keyframe_thresh * std::numbers::pi / 180.0) {
      db_.insert(pose_, *scan, *s2s_.source().covariances);
      last_keyframe_pose_ = pose_;
      d.keyframe_inserted = true;
    }

    // Next scan-to-scan target.
    if (cfg_.recycle) s2s_.reuse_source_as_target(s2s_);
    prev_scan_ = scan;
  }

  // Submap around the previous pose estimate.
  void update_submap(ScanDiagnostics& d) {
    const Point3 position = trajectory_.back().pose.translation;
    std::size_t evals = 0;
    bool changed = false;
    if (cfg_.submap_mode == SubmapMode::keyframe) {
      auto ids = db_.submap_ids(position, cfg_.submap_knn, cfg_.submap_hull, &evals);
      changed = !submap_.cloud || ids != submap_.ids;
      if (changed || !cfg_.recycle) submap_ = db_.assemble(std::move(ids));
    } else {
      Submap next = db_.radius_submap(position, cfg_.submap_radius, &evals);
      if (next.cloud->size() < cfg_.gicp_s2m.k_correspondences) {
        // Nothing within the radius yet: fall back to the newest keyframe.
        next = db_.assemble({db_.size() - 1});
      }
      changed = !submap_.cloud || next.selection_key != submap_.selection_key;
      if (changed || !cfg_.recycle) submap_ = std::move(next);
    }
    d.submap_distance_evals = evals;
    d.submap_size = submap_.cloud->size();
    if (changed) ++d.submap_rebuilds;
    if (changed || !cfg_.recycle) {
      s2m_.set_target(submap_.cloud, submap_.covariances);
      ++d.s2m_target_tree_builds;
    }
  }

  ScanOutput finish(ScanDiagnostics& d, std::chrono::steady_clock::time_point start,
                    bool occupied_sensor) {
    d.wall_ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start)
                    .count();
    // Real-time model: a scan that starts on time keeps the pipeline busy
    // for its wall time; late scans would have been skipped.
    if (occupied_sensor && !d.late) {
      busy_until_ = static_cast<double>(d.index) * cfg_.sensor_period + d.wall_ms * 1e-3;
    }
    diagnostics_.push_back(d);
    return {pose_, d};
  }

  OdometryConfig cfg_;
  NanoGicp s2s_;
  NanoGicp s2m_;
  KeyframeDb db_;
  Submap submap_;
  Pose pose_;
  Pose last_keyframe_pose_;
  SpaciousnessState spaciousness_;
  Eigen::Vector3d gyro_bias_ = Eigen::Vector3d::Zero();
  std::shared_ptr<const PointCloud> prev_scan_;
  double prev_stamp_ = 0.0;
  std::optional<double> busy_until_;
  std::vector<TrajectoryRecord> trajectory_;
  std::vector<ScanDiagnostics> diagnostics_;
};

}  // namespace dlo
