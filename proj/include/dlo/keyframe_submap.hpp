#pragma once

#include <algorithm>
#include <cstdint>
#include <memory>
#include <optional>
#include <stdexcept>
#include <vector>

#include "dlo/convex_hull.hpp"
#include "dlo/geometry.hpp"
#include "dlo/kdtree.hpp"
#include "dlo/nano_gicp.hpp"

namespace dlo {

/// A stored (pose, scan, covariances) snapshot. Scan and covariances are in
/// the world frame.
struct Keyframe {
  std::size_t id = 0;
  Pose pose;
  std::shared_ptr<const PointCloud> scan;
  std::shared_ptr<const CovarianceSet> covariances;
};

/// Keyframes contributing to a scan-to-map target, and their stitched data.
struct Submap {
  std::vector<std::size_t> ids;  ///< ascending, unique
  std::shared_ptr<const PointCloud> cloud;
  std::shared_ptr<const CovarianceSet> covariances;
  /// Fingerprint of the selected points; for keyframe submaps this depends on
  /// `ids` only.
  std::uint64_t selection_key = 0;
};

/// True iff the contributing keyframe sets differ.
inline bool submap_changed(const Submap& prev, const Submap& next) {
  return prev.ids != next.ids;
}

namespace detail {
inline std::uint64_t fnv1a(std::uint64_t h, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) {
    h ^= (v >> (8 * i)) & 0xffu;
    h *= 1099511628211ULL;
  }
  return h;
}
inline std::uint64_t ids_key(const std::vector<std::size_t>& ids) {
  std::uint64_t h = 1469598103934665603ULL;
  for (auto id : ids) h = fnv1a(h, id);
  return h;
}
}  // namespace detail

/**
 * @brief Keyframe database searched in keyframe space.
 *
 * Alongside the keyframes, a cloud of keyframe positions is maintained;
 * submaps are derived by searching that small cloud instead of the map.
 *
 * One writer (insert) at a time; queries must not overlap with insertion.
 */
class KeyframeDb {
 public:
  static constexpr std::size_t kTreeThreshold = 64;

  [[nodiscard]] std::size_t size() const { return keyframes_.size(); }
  [[nodiscard]] bool empty() const { return keyframes_.empty(); }
  [[nodiscard]] const std::vector<Keyframe>& keyframes() const { return keyframes_; }
  [[nodiscard]] const Keyframe& operator[](std::size_t id) const { return keyframes_.at(id); }
  [[nodiscard]] const PointCloud& positions() const { return positions_; }

  /// Stores a body-frame scan and its covariances at `pose`; returns the id.
  std::size_t insert(const Pose& pose, const PointCloud& body_scan,
                     const CovarianceSet& body_covariances) {
    if (body_covariances.size() != body_scan.size()) {
      throw std::invalid_argument("KeyframeDb::insert: covariance count != scan size");
    }
    Keyframe kf;
    kf.id = keyframes_.size();
    kf.pose = pose;
    kf.scan = std::make_shared<const PointCloud>(transform_cloud(body_scan, pose));
    kf.covariances = std::make_shared<const CovarianceSet>(
        rotate_covariances(body_covariances, pose.rotation_matrix()));
    map_points_ += kf.scan->size();
    keyframes_.push_back(std::move(kf));
    positions_.points.push_back(pose.translation);
    hull_.reset();
    position_tree_.reset();
    return keyframes_.back().id;
  }

  /// Total number of points over all keyframe scans (the map size).
  [[nodiscard]] std::size_t map_size() const { return map_points_; }

  /// The map: concatenation of all keyframe scans in id order.
  [[nodiscard]] PointCloud map_cloud() const {
    PointCloud map;
    map.points.reserve(map_points_);
    for (const auto& kf : keyframes_) append(map, *kf.scan);
    return map;
  }

  /**
   * @brief Ids of the min(K, n) keyframes nearest to `position`, nearest first.
   *
   * Linear scan for small databases, kd-tree over keyframe positions above
   * kTreeThreshold. `distance_evals` accumulates distance computations.
   */
  [[nodiscard]] std::vector<std::size_t> knn_keyframes(const Point3& position, std::size_t k,
                                                       std::size_t* distance_evals = nullptr) const {
    std::vector<std::size_t> ids;
    if (empty() || k == 0) return ids;
    if (size() > kTreeThreshold) {
      if (!position_tree_) position_tree_ = std::make_shared<const KdTree>(positions_);
      for (const auto& n : position_tree_->knn(position, k, distance_evals)) ids.push_back(n.index);
      return ids;
    }
    std::vector<std::pair<double, std::size_t>> d;
    d.reserve(size());
    for (std::size_t i = 0; i < size(); ++i) {
      d.emplace_back((positions_[i] - position).squaredNorm(), i);
    }
    if (distance_evals) *distance_evals += size();
    const std::size_t m = std::min(k, d.size());
    std::partial_sort(d.begin(), d.begin() + static_cast<std::ptrdiff_t>(m), d.end());
    for (std::size_t i = 0; i < m; ++i) ids.push_back(d[i].second);
    return ids;
  }

  /// Ids of keyframes whose positions are vertices of the position hull.
  [[nodiscard]] const std::vector<std::size_t>& hull_ids() const {
    if (!hull_) hull_ = convex_hull_vertices(positions_.points);
    return *hull_;
  }

  /// The L hull keyframes nearest to `position`, nearest first.
  [[nodiscard]] std::vector<std::size_t> convex_hull_keyframes(const Point3& position, std::size_t l,
                                                               std::size_t* distance_evals = nullptr) const {
    std::vector<std::size_t> ids;
    if (empty() || l == 0) return ids;
    const auto& hull = hull_ids();
    std::vector<std::pair<double, std::size_t>> d;
    d.reserve(hull.size());
    for (auto id : hull) d.emplace_back((positions_[id] - position).squaredNorm(), id);
    if (distance_evals) *distance_evals += hull.size();
    const std::size_t m = std::min(l, d.size());
    std::partial_sort(d.begin(), d.begin() + static_cast<std::ptrdiff_t>(m), d.end());
    for (std::size_t i = 0; i < m; ++i) ids.push_back(d[i].second);
    return ids;
  }

  /// knn(K) united with hull-nearest(L), deduplicated and ascending.
  [[nodiscard]] std::vector<std::size_t> submap_ids(const Point3& position, std::size_t k,
                                                    std::size_t l,
                                                    std::size_t* distance_evals = nullptr) const {
    auto ids = knn_keyframes(position, k, distance_evals);
    const auto hull = convex_hull_keyframes(position, l, distance_evals);
    ids.insert(ids.end(), hull.begin(), hull.end());
    std::sort(ids.begin(), ids.end());
    ids.erase(std::unique(ids.begin(), ids.end()), ids.end());
    return ids;
  }

  /// Concatenates member scans and their stored covariances in id order.
  [[nodiscard]] Submap assemble(std::vector<std::size_t> ids) const {
    Submap s;
    auto cloud = std::make_shared<PointCloud>();
    auto covs = std::make_shared<CovarianceSet>();
    std::size_t total = 0;
    for (auto id : ids) total += keyframes_.at(id).scan->size();
    cloud->points.reserve(total);
    covs->matrices.reserve(total);
    for (auto id : ids) {
      const auto& kf = keyframes_[id];
      append(*cloud, *kf.scan);
      covs->matrices.insert(covs->matrices.end(), kf.covariances->matrices.begin(),
                            kf.covariances->matrices.end());
      covs->degenerate_count += kf.covariances->degenerate_count;
    }
    s.selection_key = detail::ids_key(ids);
    s.ids = std::move(ids);
    s.cloud = std::move(cloud);
    s.covariances = std::move(covs);
    return s;
  }

  [[nodiscard]] Submap build_submap(const Point3& position, std::size_t k, std::size_t l,
                                    std::size_t* distance_evals = nullptr) const {
    if (empty()) throw std::logic_error("build_submap: empty keyframe database");
    return assemble(submap_ids(position, k, l, distance_evals));
  }

  /**
   * @brief Point-space submap: every map point within `radius` of `position`.
   *
   * Used for comparing submapping strategies; costs one distance computation
   * per map point. Covariances are the stored per-keyframe ones, so only the
   * point selection differs from the keyframe submap.
   */
  [[nodiscard]] Submap radius_submap(const Point3& position, double radius,
                                     std::size_t* distance_evals = nullptr) const {
    Submap s;
    auto cloud = std::make_shared<PointCloud>();
    auto covs = std::make_shared<CovarianceSet>();
    const double r2 = radius * radius;
    std::uint64_t key = 1469598103934665603ULL;
    for (const auto& kf : keyframes_) {
      bool used = false;
      for (std::size_t i = 0; i < kf.scan->size(); ++i) {
        if (((*kf.scan)[i] - position).squaredNorm() <= r2) {
          cloud->points.push_back((*kf.scan)[i]);
          covs->matrices.push_back((*kf.covariances)[i]);
          key = detail::fnv1a(detail::fnv1a(key, kf.id), i);
          used = true;
        }
      }
      if (used) s.ids.push_back(kf.id);
    }
    if (distance_evals) *distance_evals += map_points_;
    s.selection_key = key;
    s.cloud = std::move(cloud);
    s.covariances = std::move(covs);
    return s;
  }

 private:
  std::vector<Keyframe> keyframes_;
  PointCloud positions_;
  std::size_t map_points_ = 0;
  mutable std::optional<std::vector<std::size_t>> hull_;
  mutable std::shared_ptr<const KdTree> position_tree_;
};

}  // namespace dlo
