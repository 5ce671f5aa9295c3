#pragma once

#include <algorithm>
#include <cmath>
#include <span>
#include <stdexcept>
#include <vector>

#include "dlo/geometry.hpp"

namespace dlo {

struct ImuMeasurement {
  double stamp = 0.0;                                ///< [s]
  Eigen::Vector3d gyro = Eigen::Vector3d::Zero();    ///< [rad/s]
  Eigen::Vector3d accel = Eigen::Vector3d::Zero();   ///< [m/s^2]
};

/// Stamps closer than this are treated as equal when selecting windows.
inline constexpr double kStampTolerance = 1e-9;

/// Measurements with t_begin <= stamp <= t_end; input must be sorted by stamp.
inline std::span<const ImuMeasurement> imu_window(std::span<const ImuMeasurement> imu,
                                                  double t_begin, double t_end) {
  auto lo = std::lower_bound(imu.begin(), imu.end(), t_begin - kStampTolerance,
                             [](const ImuMeasurement& m, double t) { return m.stamp < t; });
  auto hi = std::upper_bound(lo, imu.end(), t_end + kStampTolerance,
                             [](double t, const ImuMeasurement& m) { return t < m.stamp; });
  return {lo, hi};
}

/**
 * @brief Rotation between two scans from gyro measurements.
 *
 * Each debiased sample is held until the next one (zero-order hold) and the
 * interval [t_prev, t_now] is integrated exactly at its ends: the rate in
 * effect at t_prev is the latest sample at or before it (or the first sample
 * when none precedes it). Over each hold q' = q (x) [0, w] / 2 is solved in
 * closed form, q <- q Exp(w dt). The result carries zero translation. With no
 * measurement inside the interval the identity is returned.
 */
inline Pose integrate_gyro(std::span<const ImuMeasurement> imu, double t_prev, double t_now,
                           const Eigen::Vector3d& bias = Eigen::Vector3d::Zero()) {
  if (imu_window(imu, t_prev, t_now).empty() || !(t_now > t_prev)) return Pose::identity();
  Quaternion q = Quaternion::Identity();
  auto step = [&](const Eigen::Vector3d& gyro, double dt) {
    q = (q * so3_exp((gyro - bias) * dt)).normalized();
  };
  auto it = std::upper_bound(imu.begin(), imu.end(), t_prev + kStampTolerance,
                             [](double t, const ImuMeasurement& m) { return t < m.stamp; });
  Eigen::Vector3d held = it == imu.begin() ? it->gyro : std::prev(it)->gyro;
  double t = t_prev;
  for (; it != imu.end() && it->stamp < t_now - kStampTolerance; ++it) {
    step(held, it->stamp - t);
    t = it->stamp;
    held = it->gyro;
  }
  step(held, t_now - t);
  return Pose::from_rotation(q);
}

/// Per-axis mean gyro over a stationary window of at least `min_duration` seconds.
inline Eigen::Vector3d calibrate_gyro_bias(std::span<const ImuMeasurement> imu,
                                           double min_duration = 1.0) {
  if (imu.empty() || imu.back().stamp - imu.front().stamp < min_duration - kStampTolerance) {
    throw std::invalid_argument("calibrate_gyro_bias: calibration window shorter than " +
                                std::to_string(min_duration) + " s");
  }
  Eigen::Vector3d sum = Eigen::Vector3d::Zero();
  for (const auto& m : imu) sum += m.gyro;
  return sum / static_cast<double>(imu.size());
}

/**
 * @brief Initial attitude from the mean accelerometer reading at rest.
 *
 * Returns R = Ry(pitch) Rx(roll), yaw fixed at zero, such that R maps the
 * mean accelerometer direction onto +z.
 */
inline Pose gravity_align(std::span<const ImuMeasurement> imu) {
  Eigen::Vector3d mean = Eigen::Vector3d::Zero();
  for (const auto& m : imu) mean += m.accel;
  if (!imu.empty()) mean /= static_cast<double>(imu.size());
  if (imu.empty() || mean.norm() < 1e-3) {
    throw std::invalid_argument("gravity_align: mean acceleration is near zero");
  }
  const double roll = std::atan2(mean.y(), mean.z());
  const double pitch = std::atan2(-mean.x(), std::hypot(mean.y(), mean.z()));
  const Quaternion q = axis_angle(Eigen::Vector3d::UnitY(), pitch) *
                       axis_angle(Eigen::Vector3d::UnitX(), roll);
  return Pose::from_rotation(q);
}

}  // namespace dlo
