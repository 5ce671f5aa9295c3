#pragma once

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <array>
#include <limits>
#include <set>
#include <utility>
#include <vector>

#include "dlo/geometry.hpp"

namespace dlo {

namespace detail {

struct HullFace {
  std::array<std::size_t, 3> v;
  Eigen::Vector3d normal;  // unit, outward
  double offset;           // normal . x = offset on the plane
};

inline HullFace make_face(const std::vector<Point3>& pts, std::size_t a, std::size_t b,
                          std::size_t c, const Eigen::Vector3d& interior) {
  Eigen::Vector3d n = (pts[b] - pts[a]).cross(pts[c] - pts[a]);
  const double len = n.norm();
  if (len > 0) n /= len;
  HullFace f{{a, b, c}, n, n.dot(pts[a])};
  if (f.normal.dot(interior) > f.offset) {
    std::swap(f.v[1], f.v[2]);
    f.normal = -f.normal;
    f.offset = -f.offset;
  }
  return f;
}

inline std::vector<std::size_t> hull_3d(const std::vector<Point3>& pts, double eps) {
  const std::size_t n = pts.size();
  // Initial tetrahedron from well-separated points.
  std::size_t i0 = 0;
  for (std::size_t i = 1; i < n; ++i) {
    if (pts[i].x() < pts[i0].x()) i0 = i;
  }
  std::size_t i1 = i0;
  double best = -1;
  for (std::size_t i = 0; i < n; ++i) {
    const double d = (pts[i] - pts[i0]).squaredNorm();
    if (d > best) best = d, i1 = i;
  }
  std::size_t i2 = i0;
  best = -1;
  const Eigen::Vector3d dir = (pts[i1] - pts[i0]).normalized();
  for (std::size_t i = 0; i < n; ++i) {
    const double d = (pts[i] - pts[i0]).cross(dir).squaredNorm();
    if (d > best) best = d, i2 = i;
  }
  std::size_t i3 = i0;
  best = -1;
  const Eigen::Vector3d pn = (pts[i1] - pts[i0]).cross(pts[i2] - pts[i0]).normalized();
  for (std::size_t i = 0; i < n; ++i) {
    const double d = std::abs(pn.dot(pts[i] - pts[i0]));
    if (d > best) best = d, i3 = i;
  }
  const Eigen::Vector3d interior = 0.25 * (pts[i0] + pts[i1] + pts[i2] + pts[i3]);

  std::vector<HullFace> faces{make_face(pts, i0, i1, i2, interior),
                              make_face(pts, i0, i1, i3, interior),
                              make_face(pts, i0, i2, i3, interior),
                              make_face(pts, i1, i2, i3, interior)};

  std::vector<char> visible;
  std::set<std::pair<std::size_t, std::size_t>> edges;
  for (std::size_t p = 0; p < n; ++p) {
    if (p == i0 || p == i1 || p == i2 || p == i3) continue;
    visible.assign(faces.size(), 0);
    bool any = false;
    for (std::size_t f = 0; f < faces.size(); ++f) {
      if (faces[f].normal.dot(pts[p]) - faces[f].offset > eps) {
        visible[f] = 1;
        any = true;
      }
    }
    if (!any) continue;

    edges.clear();
    for (std::size_t f = 0; f < faces.size(); ++f) {
      if (!visible[f]) continue;
      const auto& v = faces[f].v;
      for (int e = 0; e < 3; ++e) edges.emplace(v[e], v[(e + 1) % 3]);
    }
    std::vector<HullFace> next;
    next.reserve(faces.size() + edges.size());
    for (std::size_t f = 0; f < faces.size(); ++f) {
      if (!visible[f]) next.push_back(faces[f]);
    }
    for (const auto& [a, b] : edges) {
      if (edges.count({b, a})) continue;  // interior edge of the visible region
      next.push_back(make_face(pts, a, b, p, interior));
    }
    faces = std::move(next);
  }

  std::vector<std::size_t> out;
  for (const auto& f : faces) out.insert(out.end(), f.v.begin(), f.v.end());
  std::sort(out.begin(), out.end());
  out.erase(std::unique(out.begin(), out.end()), out.end());
  return out;
}

// Andrew's monotone chain; collinear boundary points are excluded.
inline std::vector<std::size_t> hull_2d(const std::vector<Eigen::Vector2d>& pts, double eps) {
  std::vector<std::size_t> order(pts.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    if (pts[a].x() != pts[b].x()) return pts[a].x() < pts[b].x();
    if (pts[a].y() != pts[b].y()) return pts[a].y() < pts[b].y();
    return a < b;
  });
  auto cross = [&](std::size_t o, std::size_t a, std::size_t b) {
    const Eigen::Vector2d u = pts[a] - pts[o];
    const Eigen::Vector2d v = pts[b] - pts[o];
    // Signed distance of b from the line o-a.
    return (u.x() * v.y() - u.y() * v.x()) / std::max(u.norm(), 1e-300);
  };
  std::vector<std::size_t> hull(2 * order.size());
  std::size_t k = 0;
  for (std::size_t i = 0; i < order.size(); ++i) {
    while (k >= 2 && cross(hull[k - 2], hull[k - 1], order[i]) <= eps) --k;
    hull[k++] = order[i];
  }
  for (std::size_t i = order.size() - 1, t = k + 1; i-- > 0;) {
    while (k >= t && cross(hull[k - 2], hull[k - 1], order[i]) <= eps) --k;
    hull[k++] = order[i];
  }
  hull.resize(k > 1 ? k - 1 : k);
  std::sort(hull.begin(), hull.end());
  hull.erase(std::unique(hull.begin(), hull.end()), hull.end());
  return hull;
}

}  // namespace detail

/**
 * @brief Indices of the extreme points (hull vertices) of a point set.
 *
 * Degenerate inputs are resolved by dimension:
 *  - fewer than 4 points: every point is returned;
 *  - collinear (within tolerance): the two endpoints;
 *  - coplanar (within tolerance): the 2D hull in the best-fit plane;
 *  - otherwise: incremental 3D hull.
 * The tolerance is `rel_tol` times the largest extent of the set. Points on
 * a hull face or edge but not at a corner are not vertices. Output is sorted.
 */
inline std::vector<std::size_t> convex_hull_vertices(const std::vector<Point3>& pts,
                                                     double rel_tol = 1e-3) {
  const std::size_t n = pts.size();
  std::vector<std::size_t> all(n);
  for (std::size_t i = 0; i < n; ++i) all[i] = i;
  if (n < 4) return all;

  Eigen::Vector3d mean = Eigen::Vector3d::Zero();
  for (const auto& p : pts) mean += p;
  mean /= static_cast<double>(n);
  Eigen::Matrix3d cov = Eigen::Matrix3d::Zero();
  for (const auto& p : pts) cov += (p - mean) * (p - mean).transpose();
  Eigen::SelfAdjointEigenSolver<Eigen::Matrix3d> eig(cov);
  const Eigen::Matrix3d axes = eig.eigenvectors();  // ascending variance

  Eigen::Vector3d lo = Eigen::Vector3d::Constant(std::numeric_limits<double>::infinity());
  Eigen::Vector3d hi = -lo;
  for (const auto& p : pts) {
    const Eigen::Vector3d c = axes.transpose() * (p - mean);
    lo = lo.cwiseMin(c);
    hi = hi.cwiseMax(c);
  }
  const Eigen::Vector3d extent = hi - lo;
  const double span = extent.maxCoeff();
  if (span <= 0.0) return {0};  // all points coincide
  const double tol = rel_tol * span;

  if (extent[0] <= tol && extent[1] <= tol) {
    // Collinear: extremes along the principal axis, lowest index on ties.
    std::size_t imin = 0, imax = 0;
    double cmin = axes.col(2).dot(pts[0] - mean), cmax = cmin;
    for (std::size_t i = 1; i < n; ++i) {
      const double c = axes.col(2).dot(pts[i] - mean);
      if (c < cmin) cmin = c, imin = i;
      if (c > cmax) cmax = c, imax = i;
    }
    std::vector<std::size_t> out{imin, imax};
    std::sort(out.begin(), out.end());
    out.erase(std::unique(out.begin(), out.end()), out.end());
    return out;
  }
  if (extent[0] <= tol) {
    std::vector<Eigen::Vector2d> flat;
    flat.reserve(n);
    for (const auto& p : pts) {
      flat.emplace_back(axes.col(2).dot(p - mean), axes.col(1).dot(p - mean));
    }
    return detail::hull_2d(flat, 1e-9 * span);
  }
  return detail::hull_3d(pts, 1e-9 * span);
}

}  // namespace dlo
