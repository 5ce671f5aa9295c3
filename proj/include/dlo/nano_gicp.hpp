#pragma once

#include <Eigen/Cholesky>
#include <Eigen/Eigenvalues>

#include <memory>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "dlo/geometry.hpp"
#include "dlo/kdtree.hpp"

namespace dlo {

using Matrix6d = Eigen::Matrix<double, 6, 6>;
using Vector6d = Eigen::Matrix<double, 6, 1>;
using Matrix36d = Eigen::Matrix<double, 3, 6>;

struct GicpConfig {
  std::size_t k_correspondences = 10;  ///< neighbors per covariance estimate
  double max_corr_dist = 1.0;          ///< correspondence gate [m]
  std::size_t max_iterations = 64;
  double trans_eps = 1e-4;  ///< convergence threshold on the step [m]
  double rot_eps = 1e-4;    ///< convergence threshold on the step [rad]
  double plane_eps = 1e-3;  ///< eigenvalue assigned to the surface normal

  void validate() const {
    if (k_correspondences < 3 || !(max_corr_dist > 0) || max_iterations == 0 ||
        !(trans_eps > 0) || !(rot_eps > 0) || !(plane_eps > 0)) {
      throw std::invalid_argument("GicpConfig: all parameters must be positive (k >= 3)");
    }
  }
};

/// One plane-regularized 3x3 covariance per point of an associated cloud.
struct CovarianceSet {
  std::vector<Eigen::Matrix3d> matrices;
  std::size_t degenerate_count = 0;  ///< neighborhoods with no spatial extent

  [[nodiscard]] std::size_t size() const { return matrices.size(); }
  const Eigen::Matrix3d& operator[](std::size_t i) const { return matrices[i]; }
};

// ============================================================================
// Covariance estimation
// ============================================================================

/// Sample covariance (n - 1 denominator) of the selected neighbors.
inline Eigen::Matrix3d neighborhood_covariance(const std::vector<Point3>& points,
                                               const std::vector<Neighbor>& neighbors) {
  Eigen::Vector3d mean = Eigen::Vector3d::Zero();
  for (const auto& n : neighbors) mean += points[n.index];
  mean /= static_cast<double>(neighbors.size());
  Eigen::Matrix3d cov = Eigen::Matrix3d::Zero();
  for (const auto& n : neighbors) {
    const Eigen::Vector3d d = points[n.index] - mean;
    cov.noalias() += d * d.transpose();
  }
  return cov / static_cast<double>(neighbors.size() - 1);
}

/**
 * @brief Replaces the spectrum of `cov` with (1, 1, plane_eps).
 *
 * The eigenvector of the smallest eigenvalue (the surface normal) receives
 * plane_eps. A covariance with no spatial extent has no normal; it becomes the
 * identity and `degenerate` is set.
 */
inline Eigen::Matrix3d plane_regularize(const Eigen::Matrix3d& cov, double plane_eps,
                                        bool* degenerate = nullptr) {
  if (!(cov.trace() > 1e-12) || !cov.allFinite()) {
    if (degenerate) *degenerate = true;
    return Eigen::Matrix3d::Identity();
  }
  if (degenerate) *degenerate = false;
  Eigen::SelfAdjointEigenSolver<Eigen::Matrix3d> eig(cov);
  const Eigen::Matrix3d& v = eig.eigenvectors();  // ascending eigenvalues
  const Eigen::Vector3d values(plane_eps, 1.0, 1.0);
  Eigen::Matrix3d out = v * values.asDiagonal() * v.transpose();
  return 0.5 * (out + out.transpose());
}

/// Per-point plane-regularized covariances from the k nearest neighbors.
inline CovarianceSet compute_covariances(const PointCloud& cloud, const KdTree& tree,
                                         const GicpConfig& cfg) {
  if (cloud.size() < cfg.k_correspondences) {
    throw std::invalid_argument("compute_covariances: cloud has " +
                                std::to_string(cloud.size()) + " points, needs at least " +
                                std::to_string(cfg.k_correspondences));
  }
  if (tree.size() != cloud.size()) {
    throw std::invalid_argument("compute_covariances: tree does not index this cloud");
  }
  CovarianceSet out;
  out.matrices.resize(cloud.size());
  for (std::size_t i = 0; i < cloud.size(); ++i) {
    const auto nbrs = tree.knn(cloud[i], cfg.k_correspondences);
    bool degenerate = false;
    out.matrices[i] = plane_regularize(neighborhood_covariance(cloud.points, nbrs),
                                       cfg.plane_eps, &degenerate);
    if (degenerate) ++out.degenerate_count;
  }
  return out;
}

/// R C R^T for every matrix, i.e. the covariances of the rotated cloud.
inline CovarianceSet rotate_covariances(const CovarianceSet& covs, const Eigen::Matrix3d& r) {
  CovarianceSet out;
  out.degenerate_count = covs.degenerate_count;
  out.matrices.reserve(covs.size());
  for (const auto& c : covs.matrices) out.matrices.emplace_back(r * c * r.transpose());
  return out;
}

// ============================================================================
// Residual model
// ============================================================================

/// d = p_target - X p_source.
inline Eigen::Vector3d correspondence_residual(const Pose& x, const Point3& source,
                                               const Point3& target) {
  return target - x.apply(source);
}

/**
 * @brief Jacobian of the residual w.r.t. a left perturbation (omega, v).
 *
 * Perturbed pose: R' = Exp(omega) R, t' = Exp(omega) t + v, so that
 * X' p = Exp(omega) (X p) + v.
 */
inline Matrix36d correspondence_jacobian(const Pose& x, const Point3& source) {
  Matrix36d j;
  j.leftCols<3>() = skew(x.apply(source));
  j.rightCols<3>() = -Eigen::Matrix3d::Identity();
  return j;
}

/// Applies the (omega, v) tangent step used by the solver.
inline Pose retract(const Pose& x, const Vector6d& delta) {
  const Quaternion dq = so3_exp(delta.head<3>());
  return {dq * x.rotation, dq * x.translation + delta.tail<3>()};
}

// ============================================================================
// Alignment
// ============================================================================

struct IterationTrace {
  double cost_before = 0.0;  ///< cost at the linearization point
  double cost_after = 0.0;   ///< cost after the accepted step, same correspondences
  double damping = 0.0;      ///< Levenberg lambda of the accepted step
  std::size_t correspondences = 0;
};

struct AlignmentResult {
  Pose pose;
  bool converged = false;
  std::size_t iterations = 0;
  double final_cost = 0.0;
  std::size_t num_correspondences = 0;
  std::vector<IterationTrace> trace;
  std::string diagnostic;
};

namespace detail {

struct Correspondence {
  std::uint32_t source;
  std::uint32_t target;
};

inline double gicp_cost(const PointCloud& source, const PointCloud& target,
                        const CovarianceSet& source_cov, const CovarianceSet& target_cov,
                        const std::vector<Correspondence>& corr, const Pose& x) {
  const Eigen::Matrix3d r = x.rotation_matrix();
  double cost = 0.0;
  for (const auto& c : corr) {
    const Eigen::Vector3d d = target[c.target] - (r * source[c.source] + x.translation);
    const Eigen::Matrix3d combined =
        target_cov[c.target] + r * source_cov[c.source] * r.transpose();
    cost += d.dot(combined.inverse() * d);
  }
  return cost;
}

}  // namespace detail

/**
 * @brief Plane-to-plane GICP between two clouds.
 *
 * Minimizes sum_i d_i^T (C_t,i + R C_s,i R^T)^{-1} d_i over SE(3) with
 * d_i = p_t,i - X p_s,i, starting from `guess`. Correspondences are searched
 * anew every iteration as single nearest neighbors within max_corr_dist.
 * Each Gauss-Newton step is accepted only if it does not increase the cost
 * over the current correspondence set; otherwise Levenberg damping is raised
 * until it does.
 *
 * The source tree is not queried here; it is part of the signature because
 * source structures travel with the source cloud between solver instances.
 */
inline AlignmentResult align(const PointCloud& source, const PointCloud& target,
                             const KdTree& /*source_tree*/, const KdTree& target_tree,
                             const CovarianceSet& source_cov, const CovarianceSet& target_cov,
                             const Pose& guess, const GicpConfig& cfg) {
  if (source_cov.size() != source.size() || target_cov.size() != target.size() ||
      target_tree.size() != target.size()) {
    throw std::invalid_argument("align: trees/covariances do not match their clouds");
  }
  constexpr int kMaxDampingTries = 12;

  AlignmentResult result;
  result.pose = guess;
  Pose x = guess;
  std::vector<detail::Correspondence> corr;
  corr.reserve(source.size());

  for (std::size_t iter = 1; iter <= cfg.max_iterations; ++iter) {
    result.iterations = iter;
    const Eigen::Matrix3d r = x.rotation_matrix();

    corr.clear();
    for (std::size_t i = 0; i < source.size(); ++i) {
      const Point3 q = r * source[i] + x.translation;
      if (auto nn = target_tree.nearest_within(q, cfg.max_corr_dist)) {
        corr.push_back({static_cast<std::uint32_t>(i), static_cast<std::uint32_t>(nn->index)});
      }
    }
    result.num_correspondences = corr.size();
    if (corr.size() < 6) {
      result.diagnostic = "too few correspondences (" + std::to_string(corr.size()) + ")";
      result.converged = false;
      break;
    }

    Matrix6d h = Matrix6d::Zero();
    Vector6d b = Vector6d::Zero();
    double cost0 = 0.0;
    for (const auto& c : corr) {
      const Point3 q = r * source[c.source] + x.translation;
      const Eigen::Vector3d d = target[c.target] - q;
      const Eigen::Matrix3d m =
          (target_cov[c.target] + r * source_cov[c.source] * r.transpose()).inverse();
      Matrix36d j;
      j.leftCols<3>() = skew(q);
      j.rightCols<3>() = -Eigen::Matrix3d::Identity();
      const Eigen::Matrix<double, 6, 3> jtm = j.transpose() * m;
      h.noalias() += jtm * j;
      b.noalias() += jtm * d;
      cost0 += d.dot(m * d);
    }

    bool accepted = false;
    bool small_step = false;
    double lambda = 0.0;
    IterationTrace step{cost0, cost0, 0.0, corr.size()};
    for (int attempt = 0; attempt < kMaxDampingTries; ++attempt) {
      const Matrix6d hd = h + lambda * Matrix6d::Identity();
      Eigen::LDLT<Matrix6d> ldlt(hd);
      Vector6d delta = Vector6d::Zero();
      bool solved = ldlt.info() == Eigen::Success;
      if (solved) {
        delta = ldlt.solve(-b);
        solved = delta.allFinite() && ldlt.isPositive();
      }
      if (solved) {
        small_step = delta.head<3>().norm() < cfg.rot_eps && delta.tail<3>().norm() < cfg.trans_eps;
        const Pose candidate = retract(x, delta);
        const double cost1 =
            detail::gicp_cost(source, target, source_cov, target_cov, corr, candidate);
        if (cost1 <= cost0) {
          x = candidate;
          step.cost_after = cost1;
          step.damping = lambda;
          accepted = true;
          break;
        }
        if (small_step) break;  // at the minimum up to rounding
      }
      lambda = lambda == 0.0 ? 1e-6 * std::max(1.0, h.diagonal().maxCoeff()) : lambda * 10.0;
    }

    result.trace.push_back(step);
    result.pose = x;
    result.final_cost = step.cost_after;
    if (small_step) {
      result.converged = true;
      break;
    }
    if (!accepted) {
      result.diagnostic = "damped step failed to decrease the cost";
      result.converged = false;
      break;
    }
  }
  if (!result.converged && result.diagnostic.empty()) {
    result.diagnostic = "reached max_iterations";
  }
  return result;
}

// ============================================================================
// Solver instance with shareable structures
// ============================================================================

/// A cloud together with the search tree and covariances derived from it.
struct ScanStructures {
  std::shared_ptr<const PointCloud> cloud;
  std::shared_ptr<const KdTree> tree;
  std::shared_ptr<const CovarianceSet> covariances;

  [[nodiscard]] bool complete() const { return cloud && tree && covariances; }
};

struct SolverStats {
  std::size_t tree_builds = 0;
  std::size_t covariance_computations = 0;
};

inline ScanStructures build_structures(std::shared_ptr<const PointCloud> cloud,
                                       const GicpConfig& cfg, SolverStats* stats = nullptr) {
  ScanStructures s;
  s.tree = std::make_shared<const KdTree>(*cloud);
  s.covariances = std::make_shared<const CovarianceSet>(compute_covariances(*cloud, *s.tree, cfg));
  s.cloud = std::move(cloud);
  if (stats) {
    ++stats->tree_builds;
    ++stats->covariance_computations;
  }
  return s;
}

/**
 * @brief GICP solver holding source and target structures.
 *
 * Structures are held through shared pointers to immutable objects, so two
 * instances (scan-to-scan and scan-to-map) can hand trees and covariances to
 * each other without recomputation.
 */
class NanoGicp {
 public:
  explicit NanoGicp(GicpConfig cfg = {}) : cfg_(cfg) { cfg_.validate(); }

  [[nodiscard]] const GicpConfig& config() const { return cfg_; }
  [[nodiscard]] const ScanStructures& source() const { return source_; }
  [[nodiscard]] const ScanStructures& target() const { return target_; }
  [[nodiscard]] const SolverStats& stats() const { return stats_; }

  /// Builds the source tree and covariances.
  void set_source(std::shared_ptr<const PointCloud> cloud) {
    source_ = build_structures(std::move(cloud), cfg_, &stats_);
  }
  /// Builds the target tree and covariances.
  void set_target(std::shared_ptr<const PointCloud> cloud) {
    target_ = build_structures(std::move(cloud), cfg_, &stats_);
  }

  void set_source(ScanStructures s) { source_ = require(std::move(s), "source"); }
  void set_target(ScanStructures s) { target_ = require(std::move(s), "target"); }

  /// Target tree is built here; covariances are supplied (e.g. scan-stitched).
  void set_target(std::shared_ptr<const PointCloud> cloud,
                  std::shared_ptr<const CovarianceSet> covariances) {
    if (covariances->size() != cloud->size()) {
      throw std::invalid_argument("NanoGicp::set_target: covariance count != cloud size");
    }
    ScanStructures s;
    s.tree = std::make_shared<const KdTree>(*cloud);
    ++stats_.tree_builds;
    s.cloud = std::move(cloud);
    s.covariances = std::move(covariances);
    target_ = std::move(s);
  }

  /// Adopts the donor's source structures as this instance's target.
  void reuse_source_as_target(const NanoGicp& donor) {
    target_ = require(donor.source_, "donor source");
  }
  /// Adopts the donor's source structures as this instance's source.
  void share_source(const NanoGicp& donor) {
    source_ = require(donor.source_, "donor source");
  }

  [[nodiscard]] AlignmentResult align(const Pose& guess) const {
    if (!source_.complete() || !target_.complete()) {
      throw std::logic_error("NanoGicp::align: source and target must be set");
    }
    return dlo::align(*source_.cloud, *target_.cloud, *source_.tree, *target_.tree,
                      *source_.covariances, *target_.covariances, guess, cfg_);
  }

 private:
  static ScanStructures require(ScanStructures s, const char* what) {
    if (!s.complete()) {
      throw std::logic_error(std::string("NanoGicp: missing ") + what + " structures");
    }
    return s;
  }

  GicpConfig cfg_;
  ScanStructures source_;
  ScanStructures target_;
  SolverStats stats_;
};

/// Scan-to-scan handoff across time: the donor's source becomes the recipient's target.
inline void swap_reuse(const NanoGicp& from, NanoGicp& to) { to.reuse_source_as_target(from); }

}  // namespace dlo
