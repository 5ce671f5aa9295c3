#pragma once

#include <algorithm>
#include <array>
#include <cstdint>
#include <limits>
#include <numeric>
#include <optional>
#include <stdexcept>
#include <vector>

#include "dlo/geometry.hpp"

namespace dlo {

struct Neighbor {
  std::size_t index = 0;  ///< index into the indexed cloud
  double distance = 0.0;  ///< Euclidean distance to the query

  friend bool operator==(const Neighbor&, const Neighbor&) = default;
};

/**
 * @brief Static balanced kd-tree for exact nearest neighbor queries.
 *
 * Nodes split at the median of the axis with the widest spread. Results are
 * exact: ties in distance are broken by the lower point index, so every query
 * agrees with a brute-force scan.
 *
 * The tree keeps its own copy of the points, so it stays valid independent of
 * the cloud it was built from. A built tree is immutable and can be shared
 * between solver instances and queried from several threads.
 */
class KdTree {
 public:
  static constexpr std::size_t kDefaultLeafSize = 16;

  explicit KdTree(const PointCloud& cloud,
                  std::size_t leaf_size = kDefaultLeafSize)
      : KdTree(cloud.points, leaf_size) {}

  explicit KdTree(const std::vector<Point3>& points,
                  std::size_t leaf_size = kDefaultLeafSize)
      : leaf_size_(std::max<std::size_t>(1, leaf_size)) {
    if (points.empty()) {
      throw std::invalid_argument("KdTree: cannot build over an empty cloud");
    }
    std::vector<std::uint32_t> order(points.size());
    std::iota(order.begin(), order.end(), 0u);
    nodes_.reserve(2 * points.size() / leaf_size_ + 1);
    build_node(points, order, 0, order.size());

    points_.reserve(points.size());
    index_.reserve(points.size());
    slot_.resize(points.size());
    for (auto i : order) {
      slot_[i] = static_cast<std::uint32_t>(points_.size());
      points_.push_back(points[i]);
      index_.push_back(i);
    }
  }

  [[nodiscard]] std::size_t size() const { return points_.size(); }
  [[nodiscard]] std::size_t leaf_size() const { return leaf_size_; }

  /// Point by its original cloud index.
  [[nodiscard]] Point3 point(std::size_t original_index) const {
    return points_[slot_of(original_index)];
  }

  /**
   * @brief k nearest neighbors of `query`, ascending by distance.
   *
   * Returns min(k, size()) neighbors. If `distance_evals` is non-null it is
   * incremented by the number of point distances computed.
   */
  [[nodiscard]] std::vector<Neighbor> knn(const Point3& query, std::size_t k,
                                          std::size_t* distance_evals = nullptr) const {
    if (k == 0) throw std::invalid_argument("KdTree::knn: k must be >= 1");
    Heap heap(std::min(k, size()));
    std::size_t evals = 0;
    search(0, query, heap, evals);
    if (distance_evals) *distance_evals += evals;
    std::vector<Neighbor> out;
    out.reserve(heap.items.size());
    for (const auto& c : heap.items) {
      out.push_back({c.index, std::sqrt(c.d2)});
    }
    return out;
  }

  /// Nearest neighbor no farther than `max_dist` (inclusive), if any.
  [[nodiscard]] std::optional<Neighbor> nearest_within(const Point3& query,
                                                       double max_dist) const {
    if (!(max_dist > 0.0)) {
      throw std::invalid_argument("KdTree::nearest_within: max_dist must be > 0");
    }
    Candidate best{max_dist * max_dist, kNoIndex};
    nearest(0, query, best);
    if (best.index == kNoIndex) return std::nullopt;
    return Neighbor{best.index, std::sqrt(best.d2)};
  }

  /// Order-sensitive fingerprint of the tree layout and its points.
  [[nodiscard]] std::uint64_t checksum() const {
    std::uint64_t h = 1469598103934665603ULL;
    auto mix = [&h](const void* data, std::size_t n) {
      const auto* bytes = static_cast<const unsigned char*>(data);
      for (std::size_t i = 0; i < n; ++i) {
        h ^= bytes[i];
        h *= 1099511628211ULL;
      }
    };
    for (const auto& node : nodes_) mix(&node, sizeof(Node));
    for (const auto& p : points_) mix(p.data(), 3 * sizeof(double));
    mix(index_.data(), index_.size() * sizeof(std::uint32_t));
    return h;
  }

 private:
  static constexpr std::size_t kNoIndex = std::numeric_limits<std::size_t>::max();

  struct Node {
    double split = 0.0;
    std::uint32_t begin = 0;  // leaf: range into points_
    std::uint32_t end = 0;
    std::uint32_t left = 0;  // inner: child node ids
    std::uint32_t right = 0;
    std::int32_t axis = -1;  // -1 for leaves
    std::int32_t pad = 0;
  };

  struct Candidate {
    double d2;
    std::size_t index;
    bool operator<(const Candidate& o) const {
      return d2 < o.d2 || (d2 == o.d2 && index < o.index);
    }
  };

  // Sorted bounded list; k is small for every consumer here.
  struct Heap {
    explicit Heap(std::size_t cap) : capacity(cap) { items.reserve(cap + 1); }
    std::size_t capacity;
    std::vector<Candidate> items;

    [[nodiscard]] bool full() const { return items.size() == capacity; }
    [[nodiscard]] double worst() const {
      return full() ? items.back().d2 : std::numeric_limits<double>::infinity();
    }
    void offer(const Candidate& c) {
      if (full() && !(c < items.back())) return;
      auto pos = std::upper_bound(items.begin(), items.end(), c);
      items.insert(pos, c);
      if (items.size() > capacity) items.pop_back();
    }
  };

  std::uint32_t build_node(const std::vector<Point3>& pts,
                           std::vector<std::uint32_t>& order, std::size_t begin,
                           std::size_t end) {
    const auto id = static_cast<std::uint32_t>(nodes_.size());
    nodes_.emplace_back();
    if (end - begin <= leaf_size_) {
      nodes_[id].begin = static_cast<std::uint32_t>(begin);
      nodes_[id].end = static_cast<std::uint32_t>(end);
      return id;
    }
    Eigen::Vector3d lo = pts[order[begin]];
    Eigen::Vector3d hi = lo;
    for (std::size_t i = begin + 1; i < end; ++i) {
      lo = lo.cwiseMin(pts[order[i]]);
      hi = hi.cwiseMax(pts[order[i]]);
    }
    int axis = 0;
    (hi - lo).maxCoeff(&axis);
    if (hi[axis] - lo[axis] <= 0.0) {
      // All points coincide; splitting further cannot separate them.
      nodes_[id].begin = static_cast<std::uint32_t>(begin);
      nodes_[id].end = static_cast<std::uint32_t>(end);
      return id;
    }
    const std::size_t mid = begin + (end - begin) / 2;
    std::nth_element(order.begin() + static_cast<std::ptrdiff_t>(begin),
                     order.begin() + static_cast<std::ptrdiff_t>(mid),
                     order.begin() + static_cast<std::ptrdiff_t>(end),
                     [&](std::uint32_t a, std::uint32_t b) {
                       const double ca = pts[a][axis];
                       const double cb = pts[b][axis];
                       return ca < cb || (ca == cb && a < b);
                     });
    const double split = pts[order[mid]][axis];
    const std::uint32_t left = build_node(pts, order, begin, mid);
    const std::uint32_t right = build_node(pts, order, mid, end);
    Node& n = nodes_[id];
    n.axis = axis;
    n.split = split;
    n.left = left;
    n.right = right;
    n.begin = static_cast<std::uint32_t>(begin);
    n.end = static_cast<std::uint32_t>(end);
    return id;
  }

  void search(std::uint32_t id, const Point3& q, Heap& heap,
              std::size_t& evals) const {
    const Node& n = nodes_[id];
    if (n.axis < 0) {
      for (std::uint32_t i = n.begin; i < n.end; ++i) {
        ++evals;
        heap.offer({(points_[i] - q).squaredNorm(), index_[i]});
      }
      return;
    }
    const double diff = q[n.axis] - n.split;
    const std::uint32_t near_child = diff < 0 ? n.left : n.right;
    const std::uint32_t far_child = diff < 0 ? n.right : n.left;
    search(near_child, q, heap, evals);
    // Equal distance must still be visited: a tie may carry a lower index.
    if (diff * diff <= heap.worst()) search(far_child, q, heap, evals);
  }

  void nearest(std::uint32_t id, const Point3& q, Candidate& best) const {
    const Node& n = nodes_[id];
    if (n.axis < 0) {
      for (std::uint32_t i = n.begin; i < n.end; ++i) {
        const Candidate c{(points_[i] - q).squaredNorm(), index_[i]};
        if (c.d2 <= best.d2 && c < best) best = c;
      }
      return;
    }
    const double diff = q[n.axis] - n.split;
    const std::uint32_t near_child = diff < 0 ? n.left : n.right;
    const std::uint32_t far_child = diff < 0 ? n.right : n.left;
    nearest(near_child, q, best);
    if (diff * diff <= best.d2) nearest(far_child, q, best);
  }

  [[nodiscard]] std::size_t slot_of(std::size_t original_index) const {
    return slot_.at(original_index);
  }

  std::size_t leaf_size_;
  std::vector<Node> nodes_;
  std::vector<Point3> points_;       // reordered so leaves are contiguous
  std::vector<std::uint32_t> index_;  // slot -> original index
  std::vector<std::uint32_t> slot_;   // original index -> slot
};

}  // namespace dlo
