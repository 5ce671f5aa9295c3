#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numbers>
#include <optional>
#include <random>
#include <stdexcept>
#include <vector>

#include "dlo/geometry.hpp"

namespace dlo::sim {

/**
 * @brief Axis-aligned rectangle given as a zero-thickness box.
 *
 * Exactly one axis has min == max; that axis is the panel normal.
 */
struct Panel {
  Eigen::Vector3d min = Eigen::Vector3d::Zero();
  Eigen::Vector3d max = Eigen::Vector3d::Zero();

  [[nodiscard]] int normal_axis() const {
    for (int a = 0; a < 3; ++a) {
      if (min[a] == max[a]) return a;
    }
    return -1;
  }

  void validate() const {
    if (!min.allFinite() || !max.allFinite()) throw std::invalid_argument("Panel: non-finite bounds");
    int flat = 0;
    for (int a = 0; a < 3; ++a) {
      if (min[a] > max[a]) throw std::invalid_argument("Panel: min exceeds max");
      if (min[a] == max[a]) ++flat;
    }
    if (flat != 1) throw std::invalid_argument("Panel: must be flat along exactly one axis with positive area");
  }

  /// Distance from `p` to the panel's rectangle.
  [[nodiscard]] double distance(const Point3& p) const {
    return (p - p.cwiseMax(min).cwiseMin(max)).norm();
  }
};

inline bool operator==(const Panel& a, const Panel& b) { return a.min == b.min && a.max == b.max; }

struct Aabb {
  Eigen::Vector3d min = Eigen::Vector3d::Constant(std::numeric_limits<double>::infinity());
  Eigen::Vector3d max = Eigen::Vector3d::Constant(-std::numeric_limits<double>::infinity());

  void grow(const Aabb& o) {
    min = min.cwiseMin(o.min);
    max = max.cwiseMax(o.max);
  }
  [[nodiscard]] bool contains(const Point3& p) const {
    return (p.array() > min.array()).all() && (p.array() < max.array()).all();
  }
};

/// Slab test; returns the entry distance if the ray meets the box within [0, t_max].
inline std::optional<double> ray_box(const Point3& o, const Eigen::Vector3d& d, const Aabb& box,
                                     double t_max) {
  double t0 = 0.0, t1 = t_max;
  for (int a = 0; a < 3; ++a) {
    if (d[a] == 0.0) {
      if (o[a] < box.min[a] || o[a] > box.max[a]) return std::nullopt;
      continue;
    }
    double ta = (box.min[a] - o[a]) / d[a];
    double tb = (box.max[a] - o[a]) / d[a];
    if (ta > tb) std::swap(ta, tb);
    t0 = std::max(t0, ta);
    t1 = std::min(t1, tb);
    if (t0 > t1) return std::nullopt;
  }
  return t0;
}

/// Ray/panel intersection distance along unit direction `d`, if any.
inline std::optional<double> ray_panel(const Point3& o, const Eigen::Vector3d& d, const Panel& p) {
  const int a = p.normal_axis();
  if (d[a] == 0.0) return std::nullopt;
  const double t = (p.min[a] - o[a]) / d[a];
  if (!(t > 0.0)) return std::nullopt;
  for (int b = 0; b < 3; ++b) {
    if (b == a) continue;
    const double x = o[b] + t * d[b];
    if (x < p.min[b] || x > p.max[b]) return std::nullopt;
  }
  return t;
}

/// Static world of axis-aligned panels with a bounding-volume hierarchy for ray casts.
class Environment {
 public:
  Environment() = default;
  explicit Environment(std::vector<Panel> panels) : panels_(std::move(panels)) {
    for (const auto& p : panels_) p.validate();
    rebuild();
  }

  void add_panel(const Panel& p) {
    p.validate();
    panels_.push_back(p);
    rebuild();
  }

  /// Six inward-facing walls of a box-shaped room.
  void add_room(const Eigen::Vector3d& lo, const Eigen::Vector3d& hi) { add_box_faces(lo, hi); }

  /// Six faces of a solid block (pillar, crate, step).
  void add_block(const Eigen::Vector3d& lo, const Eigen::Vector3d& hi) { add_box_faces(lo, hi); }

  [[nodiscard]] const std::vector<Panel>& panels() const { return panels_; }
  [[nodiscard]] bool empty() const { return panels_.empty(); }
  [[nodiscard]] const Aabb& bounds() const { return bounds_; }

  struct Hit {
    double distance;
    std::size_t panel;
  };

  /// Nearest panel hit within `max_range`; ties resolve to the lower panel index.
  [[nodiscard]] std::optional<Hit> cast(const Point3& o, const Eigen::Vector3d& d,
                                        double max_range) const {
    std::optional<Hit> best;
    if (nodes_.empty()) return best;
    double limit = max_range;
    std::size_t stack[64];
    std::size_t top = 0;
    stack[top++] = 0;
    while (top > 0) {
      const Node& n = nodes_[stack[--top]];
      if (!ray_box(o, d, n.box, limit)) continue;
      if (n.count > 0) {
        for (std::size_t i = n.first; i < n.first + n.count; ++i) {
          const std::size_t pi = order_[i];
          const auto t = ray_panel(o, d, panels_[pi]);
          if (!t || *t > limit) continue;
          if (!best || *t < best->distance || (*t == best->distance && pi < best->panel)) {
            best = Hit{*t, pi};
            limit = *t;
          }
        }
      } else {
        stack[top++] = n.left;
        stack[top++] = n.right;
      }
    }
    return best;
  }

 private:
  struct Node {
    Aabb box;
    std::size_t left = 0, right = 0;
    std::size_t first = 0, count = 0;  ///< leaf when count > 0
  };
  static constexpr std::size_t kLeafSize = 4;

  void add_box_faces(const Eigen::Vector3d& lo, const Eigen::Vector3d& hi) {
    for (int a = 0; a < 3; ++a) {
      for (double v : {lo[a], hi[a]}) {
        Panel p{lo, hi};
        p.min[a] = p.max[a] = v;
        p.validate();
        panels_.push_back(p);
      }
    }
    rebuild();
  }

  void rebuild() {
    nodes_.clear();
    order_.resize(panels_.size());
    for (std::size_t i = 0; i < order_.size(); ++i) order_[i] = i;
    bounds_ = Aabb{};
    for (const auto& p : panels_) bounds_.grow({p.min, p.max});
    if (!panels_.empty()) build(0, panels_.size(), 0);
  }

  std::size_t build(std::size_t first, std::size_t last, int depth) {
    Node node;
    for (std::size_t i = first; i < last; ++i) node.box.grow({panels_[order_[i]].min, panels_[order_[i]].max});
    const std::size_t id = nodes_.size();
    nodes_.push_back(node);
    if (last - first <= kLeafSize || depth > 40) {
      nodes_[id].first = first;
      nodes_[id].count = last - first;
      return id;
    }
    Eigen::Vector3d extent = node.box.max - node.box.min;
    int axis = 0;
    extent.maxCoeff(&axis);
    const std::size_t mid = (first + last) / 2;
    auto centre = [&](std::size_t i) { return panels_[i].min[axis] + panels_[i].max[axis]; };
    std::nth_element(order_.begin() + first, order_.begin() + mid, order_.begin() + last,
                     [&](std::size_t a, std::size_t b) {
                       return centre(a) < centre(b) || (centre(a) == centre(b) && a < b);
                     });
    const std::size_t l = build(first, mid, depth + 1);
    const std::size_t r = build(mid, last, depth + 1);
    nodes_[id].left = l;
    nodes_[id].right = r;
    return id;
  }

  std::vector<Panel> panels_;
  std::vector<std::size_t> order_;
  std::vector<Node> nodes_;
  Aabb bounds_;
};

/// Spinning multi-beam LiDAR geometry.
struct SensorModel {
  std::size_t channels = 16;
  std::size_t azimuth_steps = 1024;
  double vertical_fov_deg = 15.0;  ///< beams span [-fov, +fov]
  double max_range = 100.0;        ///< [m]
  double range_noise = 0.0;        ///< Gaussian sigma [m]

  void validate() const {
    if (channels == 0 || azimuth_steps == 0 || !(vertical_fov_deg > 0) || !(max_range > 0) ||
        !(range_noise >= 0)) {
      throw std::invalid_argument("SensorModel: parameters must be positive, noise >= 0");
    }
  }

  /// Unit beam direction in the sensor frame.
  [[nodiscard]] Eigen::Vector3d direction(std::size_t channel, std::size_t step) const {
    const double fov = vertical_fov_deg * std::numbers::pi / 180.0;
    const double elev = channels == 1 ? 0.0
                                      : -fov + 2.0 * fov * static_cast<double>(channel) /
                                                   static_cast<double>(channels - 1);
    const double az = 2.0 * std::numbers::pi * static_cast<double>(step) /
                      static_cast<double>(azimuth_steps);
    return {std::cos(elev) * std::cos(az), std::cos(elev) * std::sin(az), std::sin(elev)};
  }
};

inline bool operator==(const SensorModel& a, const SensorModel& b) {
  return a.channels == b.channels && a.azimuth_steps == b.azimuth_steps &&
         a.vertical_fov_deg == b.vertical_fov_deg && a.max_range == b.max_range &&
         a.range_noise == b.range_noise;
}

/// splitmix64 finalizer; used to derive independent RNG streams from one seed.
inline std::uint64_t mix_seed(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

/// Standard normal deviate from a 64-bit engine (Box-Muller; stdlib-independent).
class Gaussian {
 public:
  explicit Gaussian(std::uint64_t seed) : rng_(seed) {}
  double operator()() {
    if (spare_) {
      const double v = *spare_;
      spare_.reset();
      return v;
    }
    double u1 = 0.0;
    while (u1 == 0.0) u1 = uniform();
    const double u2 = uniform();
    const double r = std::sqrt(-2.0 * std::log(u1));
    spare_ = r * std::sin(2.0 * std::numbers::pi * u2);
    return r * std::cos(2.0 * std::numbers::pi * u2);
  }
  double uniform() { return static_cast<double>(rng_() >> 11) * 0x1.0p-53; }

 private:
  std::mt19937_64 rng_;
  std::optional<double> spare_;
};

/**
 * @brief Simulated scan at `pose` (sensor to world).
 *
 * One ray per (channel, azimuth) in that order; rays that miss or exceed the
 * maximum range are omitted. Points are in the sensor frame.
 */
inline PointCloud raycast_scan(const Environment& env, const Pose& pose, const SensorModel& sensor,
                               std::uint64_t seed) {
  sensor.validate();
  PointCloud out;
  if (env.empty()) return out;
  Gaussian noise(seed);
  const Eigen::Matrix3d R = pose.rotation_matrix();
  out.points.reserve(sensor.channels * sensor.azimuth_steps);
  for (std::size_t c = 0; c < sensor.channels; ++c) {
    for (std::size_t s = 0; s < sensor.azimuth_steps; ++s) {
      const Eigen::Vector3d d = sensor.direction(c, s);
      const auto hit = env.cast(pose.translation, R * d, sensor.max_range);
      if (!hit) continue;
      double range = hit->distance;
      if (sensor.range_noise > 0.0) range += sensor.range_noise * noise();
      if (range <= 0.0) continue;
      out.points.push_back(range * d);
    }
  }
  return out;
}

}  // namespace dlo::sim
