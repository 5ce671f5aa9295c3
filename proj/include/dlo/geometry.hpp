#pragma once

#include <Eigen/Core>
#include <Eigen/Geometry>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <tuple>
#include <unordered_map>
#include <utility>
#include <vector>

namespace dlo {

// ============================================================================
// Core types
// ============================================================================

/// 3D point in meters. All components are expected to be finite.
using Point3 = Eigen::Vector3d;

/// Unit quaternion. Construction order is (w, x, y, z).
using Quaternion = Eigen::Quaterniond;

inline bool is_finite(const Point3& p) {
  return std::isfinite(p.x()) && std::isfinite(p.y()) && std::isfinite(p.z());
}

/// Timestamped, ordered set of points.
struct PointCloud {
  std::vector<Point3> points;
  double stamp = 0.0;

  PointCloud() = default;
  explicit PointCloud(std::vector<Point3> pts, double t = 0.0)
      : points(std::move(pts)), stamp(t) {}

  [[nodiscard]] std::size_t size() const { return points.size(); }
  [[nodiscard]] bool empty() const { return points.empty(); }
  const Point3& operator[](std::size_t i) const { return points[i]; }
  Point3& operator[](std::size_t i) { return points[i]; }

  auto begin() const { return points.begin(); }
  auto end() const { return points.end(); }
};

inline void append(PointCloud& dst, const PointCloud& src) {
  dst.points.insert(dst.points.end(), src.points.begin(), src.points.end());
}

// ============================================================================
// Rigid transforms
// ============================================================================

/**
 * @brief Rigid transform in SE(3): p' = R p + t.
 *
 * Rotation is kept as a unit quaternion; every operation producing a new
 * pose renormalizes it.
 */
struct Pose {
  Quaternion rotation = Quaternion::Identity();
  Eigen::Vector3d translation = Eigen::Vector3d::Zero();

  Pose() = default;
  Pose(const Quaternion& q, const Eigen::Vector3d& t)
      : rotation(q.normalized()), translation(t) {}

  static Pose identity() { return {}; }

  static Pose from_rotation(const Quaternion& q) {
    return {q, Eigen::Vector3d::Zero()};
  }
  static Pose from_translation(const Eigen::Vector3d& t) {
    return {Quaternion::Identity(), t};
  }
  static Pose from_matrix(const Eigen::Matrix4d& m) {
    return {Quaternion(Eigen::Matrix3d(m.topLeftCorner<3, 3>())),
            m.topRightCorner<3, 1>()};
  }

  [[nodiscard]] Eigen::Matrix3d rotation_matrix() const {
    return rotation.toRotationMatrix();
  }

  [[nodiscard]] Eigen::Matrix4d matrix() const {
    Eigen::Matrix4d m = Eigen::Matrix4d::Identity();
    m.topLeftCorner<3, 3>() = rotation_matrix();
    m.topRightCorner<3, 1>() = translation;
    return m;
  }

  [[nodiscard]] Point3 apply(const Point3& p) const {
    return rotation * p + translation;
  }

  [[nodiscard]] Pose inverse() const {
    const Quaternion qi = rotation.conjugate();
    return {qi, -(qi * translation)};
  }
};

/// Applies b first, then a.
inline Pose compose(const Pose& a, const Pose& b) {
  return {a.rotation * b.rotation, a.rotation * b.translation + a.translation};
}

inline Pose operator*(const Pose& a, const Pose& b) { return compose(a, b); }

inline Pose inverse(const Pose& p) { return p.inverse(); }

/// Geodesic angle of a rotation, in radians, in [0, pi].
inline double rotation_angle(const Quaternion& q) {
  const double w = std::min(1.0, std::abs(q.normalized().w()));
  return 2.0 * std::acos(w);
}

/// Geodesic angle between two rotations.
inline double angular_distance(const Quaternion& a, const Quaternion& b) {
  return rotation_angle(a.conjugate() * b);
}

inline Quaternion axis_angle(const Eigen::Vector3d& axis, double angle) {
  return Quaternion(Eigen::AngleAxisd(angle, axis.normalized()));
}

inline Quaternion yaw_rotation(double yaw) {
  return axis_angle(Eigen::Vector3d::UnitZ(), yaw);
}

/// SO(3) exponential map of a rotation vector.
inline Quaternion so3_exp(const Eigen::Vector3d& omega) {
  const double theta = omega.norm();
  if (theta < 1e-12) {
    return Quaternion(1.0, 0.5 * omega.x(), 0.5 * omega.y(), 0.5 * omega.z())
        .normalized();
  }
  return Quaternion(Eigen::AngleAxisd(theta, omega / theta));
}

/// SO(3) logarithm: rotation vector with norm in [0, pi].
inline Eigen::Vector3d so3_log(const Quaternion& q_in) {
  Quaternion q = q_in.normalized();
  if (q.w() < 0) q.coeffs() = -q.coeffs();
  const double vnorm = q.vec().norm();
  if (vnorm < 1e-12) return 2.0 * q.vec();
  const double theta = 2.0 * std::atan2(vnorm, q.w());
  return q.vec() * (theta / vnorm);
}

inline Eigen::Matrix3d skew(const Eigen::Vector3d& v) {
  Eigen::Matrix3d s;
  s << 0, -v.z(), v.y(), v.z(), 0, -v.x(), -v.y(), v.x(), 0;
  return s;
}

// ============================================================================
// Cloud operations
// ============================================================================

/// p' = R p + t for every point; count, order and stamp are preserved.
inline PointCloud transform_cloud(const PointCloud& cloud, const Pose& pose) {
  PointCloud out;
  out.stamp = cloud.stamp;
  out.points.reserve(cloud.size());
  const Eigen::Matrix3d r = pose.rotation_matrix();
  for (const auto& p : cloud.points) {
    out.points.emplace_back(r * p + pose.translation);
  }
  return out;
}

/// Self-return removal: drops every point with |x|,|y|,|z| <= half_extent.
inline PointCloud box_filter(const PointCloud& cloud, double half_extent) {
  if (!(half_extent > 0.0)) {
    throw std::invalid_argument("box_filter: half_extent must be positive");
  }
  PointCloud out;
  out.stamp = cloud.stamp;
  out.points.reserve(cloud.size());
  for (const auto& p : cloud.points) {
    const bool inside = std::abs(p.x()) <= half_extent &&
                        std::abs(p.y()) <= half_extent &&
                        std::abs(p.z()) <= half_extent;
    if (!inside) out.points.push_back(p);
  }
  return out;
}

using VoxelIndex = std::tuple<std::int64_t, std::int64_t, std::int64_t>;

inline VoxelIndex voxel_index(const Point3& p, double leaf) {
  return {static_cast<std::int64_t>(std::floor(p.x() / leaf)),
          static_cast<std::int64_t>(std::floor(p.y() / leaf)),
          static_cast<std::int64_t>(std::floor(p.z() / leaf))};
}

namespace detail {
struct VoxelIndexHash {
  std::size_t operator()(const VoxelIndex& v) const noexcept {
    std::uint64_t h = 1469598103934665603ULL;
    for (std::int64_t c : {std::get<0>(v), std::get<1>(v), std::get<2>(v)}) {
      h ^= static_cast<std::uint64_t>(c) + 0x9e3779b97f4a7c15ULL + (h << 6) +
           (h >> 2);
    }
    return static_cast<std::size_t>(h);
  }
};
}  // namespace detail

/**
 * @brief Voxel grid downsampling with centroid reduction.
 *
 * Point p falls in voxel floor(p / leaf) per axis. One centroid per occupied
 * voxel is emitted, ordered lexicographically by voxel index.
 */
inline PointCloud voxel_filter(const PointCloud& cloud, double leaf) {
  if (!(leaf > 0.0)) {
    throw std::invalid_argument("voxel_filter: leaf must be positive");
  }
  struct Accum {
    Eigen::Vector3d sum = Eigen::Vector3d::Zero();
    std::size_t count = 0;
  };
  std::unordered_map<VoxelIndex, std::size_t, detail::VoxelIndexHash> slots;
  slots.reserve(cloud.size());
  std::vector<std::pair<VoxelIndex, Accum>> voxels;
  for (const auto& p : cloud.points) {
    const VoxelIndex idx = voxel_index(p, leaf);
    auto [it, inserted] = slots.try_emplace(idx, voxels.size());
    if (inserted) voxels.emplace_back(idx, Accum{});
    auto& acc = voxels[it->second].second;
    acc.sum += p;
    ++acc.count;
  }
  std::sort(voxels.begin(), voxels.end(),
            [](const auto& a, const auto& b) { return a.first < b.first; });

  PointCloud out;
  out.stamp = cloud.stamp;
  out.points.reserve(voxels.size());
  for (const auto& [idx, acc] : voxels) {
    out.points.emplace_back(acc.sum / static_cast<double>(acc.count));
  }
  return out;
}

}  // namespace dlo
