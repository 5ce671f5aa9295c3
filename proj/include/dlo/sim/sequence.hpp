#pragma once

#include <cmath>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <stdexcept>
#include <string>
#include <vector>

#include "dlo/io/point_cloud_io.hpp"
#include "dlo/io/text_formats.hpp"
#include "dlo/odometry/imu.hpp"
#include "dlo/odometry/pipeline.hpp"
#include "dlo/sim/environment.hpp"
#include "dlo/sim/trajectory.hpp"

namespace dlo::sim {

/// Optional IMU corruption; all zero by default.
struct ImuNoise {
  double gyro_sigma = 0.0;   ///< [rad/s]
  Eigen::Vector3d gyro_bias = Eigen::Vector3d::Zero();
  double accel_sigma = 0.0;  ///< [m/s^2]

  void validate() const {
    if (!(gyro_sigma >= 0) || !(accel_sigma >= 0) || !gyro_bias.allFinite()) {
      throw std::invalid_argument("ImuNoise: sigmas must be >= 0");
    }
  }
};

inline bool operator==(const ImuNoise& a, const ImuNoise& b) {
  return a.gyro_sigma == b.gyro_sigma && a.gyro_bias == b.gyro_bias && a.accel_sigma == b.accel_sigma;
}

struct SyntheticSequence {
  std::vector<PointCloud> scans;  ///< sensor frame, stamped
  std::vector<ImuMeasurement> imu;
  std::vector<TrajectoryRecord> ground_truth;  ///< one record per scan
};

class OutOfBounds : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Number of samples k / rate that fall in [0, duration).
inline std::size_t sample_count(double duration, double rate) {
  const double n = duration * rate;
  const double r = std::round(n);
  return static_cast<std::size_t>(std::abs(n - r) < 1e-9 ? r : std::ceil(n));
}

/**
 * @brief Scans and IMU samples along `traj`.
 *
 * Scans are taken at k / scan_rate and IMU samples at i / imu_rate over
 * [0, duration). Each gyro sample is the mean body rate over the interval to
 * the next sample, so zero-order-hold integration reproduces the heading.
 */
inline SyntheticSequence generate_sequence(const Environment& env, const TrajectorySpec& traj,
                                           const SensorModel& sensor, std::uint64_t seed,
                                           const ImuNoise& noise = {}) {
  traj.validate();
  sensor.validate();
  noise.validate();
  const double T = traj.duration();
  const Aabb& box = env.bounds();
  auto check = [&](const MotionState& st, double t) {
    if (!box.contains(st.position)) {
      char buf[160];
      std::snprintf(buf, sizeof(buf), "trajectory leaves the environment at t=%.3f s (%.3f, %.3f, %.3f)",
                    t, st.position.x(), st.position.y(), st.position.z());
      throw OutOfBounds(buf);
    }
  };

  SyntheticSequence seq;
  const std::size_t n_imu = sample_count(T, traj.imu_rate);
  Gaussian imu_rng(mix_seed(seed ^ 0x1ED5EEDULL));
  seq.imu.reserve(n_imu);
  for (std::size_t i = 0; i < n_imu; ++i) {
    const double t = static_cast<double>(i) / traj.imu_rate;
    const double t_next = std::min(static_cast<double>(i + 1) / traj.imu_rate, T);
    const MotionState st = traj.state_at(t);
    check(st, t);
    ImuMeasurement m;
    m.stamp = t;
    const double rate = t_next > t ? (traj.yaw_at(t_next) - st.yaw) / (t_next - t) : st.yaw_rate;
    m.gyro = Eigen::Vector3d(0, 0, rate) + noise.gyro_bias;
    const Eigen::Matrix3d R = st.pose().rotation_matrix();
    m.accel = R.transpose() * (st.acceleration + Eigen::Vector3d(0, 0, kGravity));
    if (noise.gyro_sigma > 0) {
      for (int a = 0; a < 3; ++a) m.gyro[a] += noise.gyro_sigma * imu_rng();
    }
    if (noise.accel_sigma > 0) {
      for (int a = 0; a < 3; ++a) m.accel[a] += noise.accel_sigma * imu_rng();
    }
    seq.imu.push_back(m);
  }

  const std::size_t n_scans = sample_count(T, traj.scan_rate);
  seq.scans.reserve(n_scans);
  for (std::size_t k = 0; k < n_scans; ++k) {
    const double t = static_cast<double>(k) / traj.scan_rate;
    const MotionState st = traj.state_at(t);
    check(st, t);
    const Pose pose = st.pose();
    PointCloud scan = raycast_scan(env, pose, sensor, mix_seed(seed + 0x5CA9ULL * (k + 1)));
    scan.stamp = t;
    seq.scans.push_back(std::move(scan));
    seq.ground_truth.push_back({t, pose});
  }
  return seq;
}

inline constexpr const char* kImuFile = "imu.csv";
inline constexpr const char* kGroundTruthFile = "ground_truth.tum";

/// Writes manifest.csv, scans/NNNNNN.ply, imu.csv and ground_truth.tum into `dir`.
inline void write_sequence(const std::filesystem::path& dir, const SyntheticSequence& seq) {
  std::filesystem::create_directories(dir / "scans");
  std::vector<io::ScanEntry> entries;
  entries.reserve(seq.scans.size());
  for (std::size_t k = 0; k < seq.scans.size(); ++k) {
    char name[32];
    std::snprintf(name, sizeof(name), "scans/%06zu.ply", k);
    io::write_ply(dir / name, seq.scans[k]);
    entries.push_back({seq.scans[k].stamp, name});
  }
  io::write_scan_manifest(dir, entries);
  io::write_imu_csv(dir / kImuFile, seq.imu);
  io::write_trajectory_tum(dir / kGroundTruthFile, seq.ground_truth);
}

}  // namespace dlo::sim
