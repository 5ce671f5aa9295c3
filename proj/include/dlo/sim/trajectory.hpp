#pragma once

#include <cmath>
#include <stdexcept>
#include <string>
#include <vector>

#include "dlo/geometry.hpp"

namespace dlo::sim {

inline constexpr double kGravity = 9.81;  ///< [m/s^2]

/**
 * @brief One piece of a planar trajectory.
 *
 * straight: `length` [m] horizontally at `speed` [m/s], rising `climb` [m].
 * arc: turn by `angle` [rad] (positive is left) at `yaw_rate` [rad/s] on a
 *      circle of `radius` [m]; radius 0 turns in place.
 * pause: hold still for `duration` [s].
 */
struct Segment {
  enum class Kind { straight, arc, pause };
  Kind kind = Kind::pause;
  double length = 0.0;
  double speed = 0.0;
  double climb = 0.0;
  double radius = 0.0;
  double angle = 0.0;
  double yaw_rate = 0.0;
  double duration = 0.0;

  static Segment straight(double length, double speed, double climb = 0.0) {
    Segment s;
    s.kind = Kind::straight;
    s.length = length;
    s.speed = speed;
    s.climb = climb;
    return s;
  }
  static Segment arc(double radius, double angle, double yaw_rate) {
    Segment s;
    s.kind = Kind::arc;
    s.radius = radius;
    s.angle = angle;
    s.yaw_rate = yaw_rate;
    return s;
  }
  static Segment pause(double duration) {
    Segment s;
    s.duration = duration;
    return s;
  }

  [[nodiscard]] double time() const {
    switch (kind) {
      case Kind::straight: return length / speed;
      case Kind::arc: return std::abs(angle) / yaw_rate;
      case Kind::pause: return duration;
    }
    return 0.0;
  }

  void validate() const {
    auto finite = [](double v) { return std::isfinite(v); };
    bool ok = finite(length) && finite(speed) && finite(climb) && finite(radius) &&
              finite(angle) && finite(yaw_rate) && finite(duration);
    switch (kind) {
      case Kind::straight: ok = ok && length > 0 && speed > 0; break;
      case Kind::arc: ok = ok && radius >= 0 && angle != 0 && yaw_rate > 0; break;
      case Kind::pause: ok = ok && duration > 0; break;
    }
    if (!ok) throw std::invalid_argument("Segment: invalid parameters");
  }
};

inline bool operator==(const Segment& a, const Segment& b) {
  return a.kind == b.kind && a.length == b.length && a.speed == b.speed && a.climb == b.climb &&
         a.radius == b.radius && a.angle == b.angle && a.yaw_rate == b.yaw_rate &&
         a.duration == b.duration;
}

/// Kinematic state of the body at an instant; orientation is yaw only.
struct MotionState {
  Eigen::Vector3d position = Eigen::Vector3d::Zero();
  double yaw = 0.0;
  Eigen::Vector3d velocity = Eigen::Vector3d::Zero();
  Eigen::Vector3d acceleration = Eigen::Vector3d::Zero();
  double yaw_rate = 0.0;

  [[nodiscard]] Pose pose() const {
    return {Quaternion(Eigen::AngleAxisd(yaw, Eigen::Vector3d::UnitZ())), position};
  }
};

/// Piecewise trajectory; segments join with continuous position and heading.
struct TrajectorySpec {
  Eigen::Vector3d start_position = Eigen::Vector3d::Zero();
  double start_yaw = 0.0;
  std::vector<Segment> segments;
  double scan_rate = 10.0;  ///< [Hz]
  double imu_rate = 100.0;  ///< [Hz]

  void validate() const {
    if (!start_position.allFinite() || !std::isfinite(start_yaw)) {
      throw std::invalid_argument("TrajectorySpec: non-finite start");
    }
    if (!(scan_rate > 0) || !(imu_rate > 0)) throw std::invalid_argument("TrajectorySpec: rates must be positive");
    if (segments.empty()) throw std::invalid_argument("TrajectorySpec: no segments");
    for (const auto& s : segments) s.validate();
  }

  [[nodiscard]] double duration() const {
    double t = 0.0;
    for (const auto& s : segments) t += s.time();
    return t;
  }

  /// State at time `t`, clamped to [0, duration()].
  [[nodiscard]] MotionState state_at(double t) const {
    MotionState st;
    st.position = start_position;
    st.yaw = start_yaw;
    double t0 = 0.0;
    for (std::size_t i = 0; i < segments.size(); ++i) {
      const Segment& s = segments[i];
      const double T = s.time();
      const bool last = i + 1 == segments.size();
      if (t < t0 + T || last) {
        return advance(s, st, std::clamp(t - t0, 0.0, T));
      }
      st = advance(s, st, T);
      t0 += T;
    }
    return st;
  }

  /// Heading at time `t`; used for interval-averaged gyro rates.
  [[nodiscard]] double yaw_at(double t) const { return state_at(t).yaw; }

 private:
  static MotionState advance(const Segment& s, const MotionState& start, double tau) {
    MotionState st;
    st.position = start.position;
    st.yaw = start.yaw;
    const Eigen::Vector3d heading(std::cos(start.yaw), std::sin(start.yaw), 0.0);
    switch (s.kind) {
      case Segment::Kind::pause:
        break;
      case Segment::Kind::straight: {
        const double vz = s.climb * s.speed / s.length;
        st.velocity = s.speed * heading + Eigen::Vector3d(0, 0, vz);
        st.position = start.position + tau * st.velocity;
        break;
      }
      case Segment::Kind::arc: {
        const double sign = s.angle > 0 ? 1.0 : -1.0;
        const double w = sign * s.yaw_rate;
        st.yaw = start.yaw + w * tau;
        st.yaw_rate = w;
        const double r = s.radius;
        const Eigen::Vector3d centre =
            start.position + sign * r * Eigen::Vector3d(-std::sin(start.yaw), std::cos(start.yaw), 0.0);
        st.position = centre + sign * r * Eigen::Vector3d(std::sin(st.yaw), -std::cos(st.yaw), 0.0);
        st.velocity = r * s.yaw_rate * Eigen::Vector3d(std::cos(st.yaw), std::sin(st.yaw), 0.0);
        st.acceleration = r * w * w * sign * Eigen::Vector3d(-std::sin(st.yaw), std::cos(st.yaw), 0.0);
        break;
      }
    }
    return st;
  }
};

}  // namespace dlo::sim
