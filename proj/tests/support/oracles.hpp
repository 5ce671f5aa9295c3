#pragma once

// Independent reference implementations used only by the test suites.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numbers>
#include <random>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "dlo/geometry.hpp"
#include "dlo/sim/environment.hpp"

namespace oracle {

// ---------------------------------------------------------------------------
// Random generators
// ---------------------------------------------------------------------------

class Rng {
 public:
  explicit Rng(std::uint64_t seed) : eng_(seed) {}
  double uniform(double lo = 0.0, double hi = 1.0) {
    return lo + (hi - lo) * (static_cast<double>(eng_() >> 11) * 0x1.0p-53);
  }
  std::size_t index(std::size_t n) { return static_cast<std::size_t>(eng_() % n); }
  double normal() {
    double u1 = 0.0;
    while (u1 == 0.0) u1 = uniform();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * uniform());
  }
  Eigen::Vector3d vec(double lo, double hi) { return {uniform(lo, hi), uniform(lo, hi), uniform(lo, hi)}; }
  Eigen::Vector3d unit() {
    Eigen::Vector3d v;
    do {
      v = vec(-1.0, 1.0);
    } while (v.norm() < 1e-3 || v.norm() > 1.0);
    return v.normalized();
  }
  dlo::Quaternion rotation(double max_angle) {
    return dlo::Quaternion(Eigen::AngleAxisd(uniform(0.0, max_angle), unit()));
  }
  dlo::Pose pose(double max_trans, double max_angle) {
    Eigen::Vector3d t = unit() * uniform(0.0, max_trans);
    return {rotation(max_angle), t};
  }
  dlo::PointCloud cloud(std::size_t n, double lo, double hi) {
    dlo::PointCloud c;
    for (std::size_t i = 0; i < n; ++i) c.points.push_back(vec(lo, hi));
    return c;
  }
  std::mt19937_64& engine() { return eng_; }

 private:
  std::mt19937_64 eng_;
};

// ---------------------------------------------------------------------------
// Geometry
// ---------------------------------------------------------------------------

inline Eigen::Matrix4d homogeneous(const dlo::Pose& p) {
  Eigen::Matrix4d m = Eigen::Matrix4d::Identity();
  const Eigen::Quaterniond& q = p.rotation;
  const double w = q.w(), x = q.x(), y = q.y(), z = q.z();
  m(0, 0) = 1 - 2 * (y * y + z * z);
  m(0, 1) = 2 * (x * y - z * w);
  m(0, 2) = 2 * (x * z + y * w);
  m(1, 0) = 2 * (x * y + z * w);
  m(1, 1) = 1 - 2 * (x * x + z * z);
  m(1, 2) = 2 * (y * z - x * w);
  m(2, 0) = 2 * (x * z - y * w);
  m(2, 1) = 2 * (y * z + x * w);
  m(2, 2) = 1 - 2 * (x * x + y * y);
  m(0, 3) = p.translation.x();
  m(1, 3) = p.translation.y();
  m(2, 3) = p.translation.z();
  return m;
}

inline Eigen::Vector3d apply_h(const Eigen::Matrix4d& m, const Eigen::Vector3d& p) {
  return (m * p.homogeneous()).head<3>();
}

// ---------------------------------------------------------------------------
// Nearest neighbours
// ---------------------------------------------------------------------------

/// Full scan sorted by (distance, index).
inline std::vector<std::pair<std::size_t, double>> brute_knn(const std::vector<Eigen::Vector3d>& pts,
                                                             const Eigen::Vector3d& q, std::size_t k) {
  std::vector<std::pair<std::size_t, double>> all;
  all.reserve(pts.size());
  for (std::size_t i = 0; i < pts.size(); ++i) all.emplace_back(i, (pts[i] - q).norm());
  std::sort(all.begin(), all.end(), [](const auto& a, const auto& b) {
    return a.second < b.second || (a.second == b.second && a.first < b.first);
  });
  all.resize(std::min(k, all.size()));
  return all;
}

/// Unbiased sample covariance (n - 1 denominator).
inline Eigen::Matrix3d sample_covariance(const std::vector<Eigen::Vector3d>& pts) {
  Eigen::Vector3d mean = Eigen::Vector3d::Zero();
  for (const auto& p : pts) mean += p;
  mean /= static_cast<double>(pts.size());
  Eigen::Matrix3d c = Eigen::Matrix3d::Zero();
  for (const auto& p : pts) c += (p - mean) * (p - mean).transpose();
  return c / static_cast<double>(pts.size() - 1);
}

// ---------------------------------------------------------------------------
// Convex hull membership by linear programming
// ---------------------------------------------------------------------------

/**
 * Phase-one simplex: is there lambda >= 0 with sum lambda = 1 and
 * sum lambda_j p_j = target over the given points? Uses a dense tableau with
 * Bland's rule; artificial variables carry the initial basis.
 */
inline bool in_convex_hull(const std::vector<Eigen::Vector3d>& pts, const Eigen::Vector3d& target,
                           double tol = 1e-9) {
  const std::size_t n = pts.size();
  const std::size_t m = 4;
  if (n == 0) return false;
  const std::size_t cols = n + m + 1;  // lambdas, artificials, rhs
  std::vector<std::vector<double>> t(m + 1, std::vector<double>(cols, 0.0));
  for (std::size_t r = 0; r < m; ++r) {
    double rhs = r < 3 ? target[static_cast<Eigen::Index>(r)] : 1.0;
    for (std::size_t j = 0; j < n; ++j) t[r][j] = r < 3 ? pts[j][static_cast<Eigen::Index>(r)] : 1.0;
    if (rhs < 0) {
      rhs = -rhs;
      for (std::size_t j = 0; j < n; ++j) t[r][j] = -t[r][j];
    }
    t[r][n + r] = 1.0;
    t[r][cols - 1] = rhs;
  }
  std::vector<std::size_t> basis(m);
  for (std::size_t r = 0; r < m; ++r) basis[r] = n + r;
  // Objective row: minimize sum of artificials, expressed in reduced costs.
  for (std::size_t j = 0; j < cols; ++j) {
    double s = 0.0;
    for (std::size_t r = 0; r < m; ++r) s += t[r][j];
    t[m][j] = (j >= n && j < n + m) ? 0.0 : -s;
  }
  for (int guard = 0; guard < 10000; ++guard) {
    std::size_t enter = cols;
    for (std::size_t j = 0; j < n + m; ++j) {
      if (t[m][j] < -1e-12) {
        enter = j;
        break;
      }
    }
    if (enter == cols) break;
    std::size_t leave = m;
    double best = std::numeric_limits<double>::infinity();
    for (std::size_t r = 0; r < m; ++r) {
      if (t[r][enter] > 1e-12) {
        const double ratio = t[r][cols - 1] / t[r][enter];
        if (ratio < best - 1e-15 || (leave < m && std::abs(ratio - best) <= 1e-15 && basis[r] < basis[leave])) {
          best = ratio;
          leave = r;
        }
      }
    }
    if (leave == m) break;
    const double piv = t[leave][enter];
    for (auto& v : t[leave]) v /= piv;
    for (std::size_t r = 0; r <= m; ++r) {
      if (r == leave) continue;
      const double f = t[r][enter];
      if (f == 0.0) continue;
      for (std::size_t j = 0; j < cols; ++j) t[r][j] -= f * t[leave][j];
    }
    basis[leave] = enter;
  }
  const double infeasibility = -t[m][cols - 1];
  return infeasibility <= tol * (1.0 + target.norm());
}

/// Indices of points that are not convex combinations of the other points.
inline std::vector<std::size_t> hull_vertices_lp(const std::vector<Eigen::Vector3d>& pts) {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < pts.size(); ++i) {
    std::vector<Eigen::Vector3d> others;
    for (std::size_t j = 0; j < pts.size(); ++j) {
      if (j != i) others.push_back(pts[j]);
    }
    if (!in_convex_hull(others, pts[i])) out.push_back(i);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Rotations
// ---------------------------------------------------------------------------

/// exp of the rotation vector via Rodrigues' formula.
inline Eigen::Matrix3d rodrigues(const Eigen::Vector3d& w) {
  const double th = w.norm();
  if (th < 1e-15) return Eigen::Matrix3d::Identity();
  const Eigen::Vector3d k = w / th;
  Eigen::Matrix3d K;
  K << 0, -k.z(), k.y(), k.z(), 0, -k.x(), -k.y(), k.x(), 0;
  return Eigen::Matrix3d::Identity() + std::sin(th) * K + (1 - std::cos(th)) * K * K;
}

/// Geodesic angle between rotation matrices.
inline double rotation_distance(const Eigen::Matrix3d& a, const Eigen::Matrix3d& b) {
  const double c = std::clamp(((a.transpose() * b).trace() - 1.0) / 2.0, -1.0, 1.0);
  return std::acos(c);
}

// ---------------------------------------------------------------------------
// Scenes
// ---------------------------------------------------------------------------

/// Random box room with crates: at least three non-parallel plane families.
inline dlo::sim::Environment random_room(Rng& rng) {
  dlo::sim::Environment env;
  const double hx = rng.uniform(6, 12), hy = rng.uniform(5, 10), h = rng.uniform(3, 5);
  env.add_room({-hx, -hy, -1.5}, {hx, hy, h - 1.5});
  const int crates = 4 + static_cast<int>(rng.index(5));
  for (int i = 0; i < crates; ++i) {
    const double cx = rng.uniform(-hx + 1.5, hx - 1.5), cy = rng.uniform(-hy + 1.5, hy - 1.5);
    if (std::hypot(cx, cy) < 2.0) continue;
    const double sx = rng.uniform(0.3, 1.2), sy = rng.uniform(0.3, 1.2);
    env.add_block({cx - sx, cy - sy, -1.5}, {cx + sx, cy + sy, -1.5 + rng.uniform(0.5, 2.5)});
  }
  return env;
}

}  // namespace oracle
