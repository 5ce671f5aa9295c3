#pragma once

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "dlo/io/point_cloud_io.hpp"
#include "dlo/odometry/imu.hpp"
#include "dlo/odometry/pipeline.hpp"

namespace dlo::io {

namespace detail {

inline std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (true) {
    const auto comma = line.find(',', start);
    std::string field = line.substr(start, comma == std::string::npos ? std::string::npos : comma - start);
    const auto b = field.find_first_not_of(" \t\r");
    const auto e = field.find_last_not_of(" \t\r");
    out.push_back(b == std::string::npos ? std::string{} : field.substr(b, e - b + 1));
    if (comma == std::string::npos) break;
    start = comma + 1;
  }
  return out;
}

inline std::vector<std::string> read_lines(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  std::vector<std::string> lines;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    lines.push_back(line);
  }
  return lines;
}

inline std::string fmt(const char* f, double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), f, v);
  return buf;
}

/// Shortest text that parses back to exactly `v`.
inline std::string fmt_exact(double v) { return fmt("%.17g", v); }

}  // namespace detail

// ============================================================================
// IMU CSV
// ============================================================================

inline constexpr const char* kImuHeader = "stamp,gx,gy,gz,ax,ay,az";

/// Reads `stamp,gx,gy,gz,ax,ay,az` rows; stamps must be strictly increasing.
inline std::vector<ImuMeasurement> read_imu_csv(const std::filesystem::path& path) {
  const auto lines = detail::read_lines(path);
  if (lines.empty() || detail::split_csv(lines[0]) != detail::split_csv(kImuHeader)) {
    throw ParseError(path.string() + ": header: expected '" + kImuHeader + "'");
  }
  std::vector<ImuMeasurement> out;
  for (std::size_t r = 1; r < lines.size(); ++r) {
    if (lines[r].find_first_not_of(" \t") == std::string::npos) continue;
    const auto row = std::to_string(r);
    const auto f = detail::split_csv(lines[r]);
    if (f.size() != 7) {
      throw ParseError(path.string() + ": row " + row + ": expected 7 columns, found " +
                       std::to_string(f.size()));
    }
    double v[7];
    for (int i = 0; i < 7; ++i) {
      if (!detail::parse_double(f[i], v[i]) || !std::isfinite(v[i])) {
        throw ParseError(path.string() + ": row " + row + ": non-numeric field '" + f[i] + "'");
      }
    }
    if (!out.empty() && v[0] <= out.back().stamp) {
      throw ParseError(path.string() + ": row " + row + ": stamp " + f[0] +
                       " is not after the previous one");
    }
    ImuMeasurement m;
    m.stamp = v[0];
    m.gyro = {v[1], v[2], v[3]};
    m.accel = {v[4], v[5], v[6]};
    out.push_back(m);
  }
  return out;
}

inline void write_imu_csv(const std::filesystem::path& path, const std::vector<ImuMeasurement>& imu) {
  std::string out = std::string(kImuHeader) + "\n";
  for (const auto& m : imu) {
    out += detail::fmt_exact(m.stamp);
    for (int i = 0; i < 3; ++i) out += "," + detail::fmt_exact(m.gyro[i]);
    for (int i = 0; i < 3; ++i) out += "," + detail::fmt_exact(m.accel[i]);
    out += '\n';
  }
  detail::write_file(path, out);
}

// ============================================================================
// TUM trajectories
// ============================================================================

/// One `stamp tx ty tz qx qy qz qw` row; the quaternion is written x y z w.
inline std::string format_tum_row(const TrajectoryRecord& r) {
  const Quaternion& q = r.pose.rotation;
  const Eigen::Vector3d& t = r.pose.translation;
  std::string row = detail::fmt("%.9f", r.stamp);
  for (double v : {t.x(), t.y(), t.z(), q.x(), q.y(), q.z(), q.w()}) row += " " + detail::fmt_exact(v);
  return row;
}

inline std::string encode_tum(const std::vector<TrajectoryRecord>& records) {
  std::string out;
  for (const auto& r : records) out += format_tum_row(r) + "\n";
  return out;
}

inline void write_trajectory_tum(const std::filesystem::path& path,
                                 const std::vector<TrajectoryRecord>& records) {
  detail::write_file(path, encode_tum(records));
}

/// Reads TUM rows; `#` lines are comments. Quaternions are renormalized.
inline std::vector<TrajectoryRecord> read_trajectory_tum(const std::filesystem::path& path) {
  const auto lines = detail::read_lines(path);
  std::vector<TrajectoryRecord> out;
  for (std::size_t r = 0; r < lines.size(); ++r) {
    const auto tok = detail::split_ws(lines[r]);
    if (tok.empty() || tok[0][0] == '#') continue;
    const auto row = std::to_string(r + 1);
    if (tok.size() != 8) {
      throw ParseError(path.string() + ": line " + row + ": expected 8 columns, found " +
                       std::to_string(tok.size()));
    }
    double v[8];
    for (int i = 0; i < 8; ++i) {
      if (!detail::parse_double(tok[i], v[i]) || !std::isfinite(v[i])) {
        throw ParseError(path.string() + ": line " + row + ": non-numeric field '" + tok[i] + "'");
      }
    }
    Quaternion q(v[7], v[4], v[5], v[6]);
    if (q.norm() < 1e-9) throw ParseError(path.string() + ": line " + row + ": zero quaternion");
    q.normalize();
    out.push_back({v[0], Pose(q, Eigen::Vector3d(v[1], v[2], v[3]))});
  }
  return out;
}

// ============================================================================
// Scan sequences
// ============================================================================

struct ScanEntry {
  double stamp = 0.0;
  std::string filename;  ///< relative to the sequence directory
};

/// A directory of per-scan cloud files indexed by `manifest.csv` (`stamp,filename`).
struct ScanSequence {
  std::filesystem::path directory;
  std::vector<ScanEntry> scans;

  PointCloud load(std::size_t i) const {
    PointCloud c = read_cloud(directory / scans.at(i).filename);
    c.stamp = scans[i].stamp;
    return c;
  }
};

inline constexpr const char* kManifestName = "manifest.csv";

inline ScanSequence read_scan_manifest(const std::filesystem::path& dir) {
  const auto path = dir / kManifestName;
  const auto lines = detail::read_lines(path);
  if (lines.empty() || detail::split_csv(lines[0]) != std::vector<std::string>{"stamp", "filename"}) {
    throw ParseError(path.string() + ": header: expected 'stamp,filename'");
  }
  ScanSequence seq{dir, {}};
  for (std::size_t r = 1; r < lines.size(); ++r) {
    if (lines[r].find_first_not_of(" \t") == std::string::npos) continue;
    const auto row = std::to_string(r);
    const auto f = detail::split_csv(lines[r]);
    double stamp = 0;
    if (f.size() != 2) throw ParseError(path.string() + ": row " + row + ": expected 2 columns");
    if (!detail::parse_double(f[0], stamp)) {
      throw ParseError(path.string() + ": row " + row + ": non-numeric stamp '" + f[0] + "'");
    }
    if (f[1].empty()) throw ParseError(path.string() + ": row " + row + ": empty filename");
    if (!seq.scans.empty() && stamp <= seq.scans.back().stamp) {
      throw ParseError(path.string() + ": row " + row + ": stamps must be strictly increasing");
    }
    seq.scans.push_back({stamp, f[1]});
  }
  return seq;
}

inline void write_scan_manifest(const std::filesystem::path& dir, const std::vector<ScanEntry>& scans) {
  std::string out = "stamp,filename\n";
  for (const auto& s : scans) out += detail::fmt("%.9f", s.stamp) + "," + s.filename + "\n";
  detail::write_file(dir / kManifestName, out);
}

}  // namespace dlo::io
