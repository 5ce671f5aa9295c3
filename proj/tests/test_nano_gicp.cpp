#include <gtest/gtest.h>

#include <memory>

#include "dlo/nano_gicp.hpp"
#include "dlo/sim/environment.hpp"
#include "support/oracles.hpp"

using namespace dlo;

namespace {

constexpr double kDeg = std::numbers::pi / 180.0;

/// Downsampled scan of a random room: plane-rich with several normal families.
PointCloud room_cloud(std::uint64_t seed) {
  oracle::Rng rng(seed);
  const sim::Environment env = oracle::random_room(rng);
  sim::SensorModel sensor;
  sensor.azimuth_steps = 512;
  return voxel_filter(sim::raycast_scan(env, Pose::identity(), sensor, seed), 0.25);
}

struct Prepared {
  PointCloud cloud;
  std::unique_ptr<KdTree> tree;
  CovarianceSet covs;
};

Prepared prepare(PointCloud c, const GicpConfig& cfg = {}) {
  Prepared p{std::move(c), nullptr, {}};
  p.tree = std::make_unique<KdTree>(p.cloud);
  p.covs = compute_covariances(p.cloud, *p.tree, cfg);
  return p;
}

AlignmentResult run(const Prepared& s, const Prepared& t, const Pose& guess, const GicpConfig& cfg = {}) {
  return align(s.cloud, t.cloud, *s.tree, *t.tree, s.covs, t.covs, guess, cfg);
}

double rot_err(const Pose& a, const Pose& b) { return angular_distance(a.rotation, b.rotation); }

}  // namespace

// ---------------------------------------------------------------------------
// Covariances
// ---------------------------------------------------------------------------

TEST(Covariances, PlanarSamplesHaveVerticalNormals) {
  oracle::Rng rng(1);
  PointCloud c;
  for (int i = 0; i < 500; ++i) c.points.push_back({rng.uniform(-5, 5), rng.uniform(-5, 5), 0.0});
  const KdTree tree(c);
  const GicpConfig cfg;
  const CovarianceSet covs = compute_covariances(c, tree, cfg);
  ASSERT_EQ(covs.size(), c.size());
  EXPECT_EQ(covs.degenerate_count, 0u);
  for (const auto& m : covs.matrices) {
    Eigen::SelfAdjointEigenSolver<Eigen::Matrix3d> eig(m);
    const Eigen::Vector3d normal = eig.eigenvectors().col(0);
    EXPECT_NEAR(eig.eigenvalues()[0], cfg.plane_eps, 1e-9);
    EXPECT_LT(std::acos(std::min(1.0, std::abs(normal.z()))), 1.0 * kDeg);
  }
}

TEST(Covariances, IdenticalNeighborsTakeDegeneratePath) {
  PointCloud c;
  for (int i = 0; i < 12; ++i) c.points.push_back({1, 2, 3});
  const KdTree tree(c);
  const CovarianceSet covs = compute_covariances(c, tree, GicpConfig{});
  EXPECT_EQ(covs.degenerate_count, c.size());
  for (const auto& m : covs.matrices) EXPECT_TRUE(m.allFinite());
}

TEST(Covariances, RawMatchesBruteForceSampleCovariance) {
  oracle::Rng rng(2);
  PointCloud c;
  for (int i = 0; i < 800; ++i) {
    const double x = rng.uniform(-3, 3), y = rng.uniform(-3, 3);
    c.points.push_back({x, y, 0.3 * std::sin(x) + 0.2 * std::cos(1.5 * y)});
  }
  const KdTree tree(c);
  for (std::size_t i = 0; i < c.size(); i += 7) {
    const auto nbrs = tree.knn(c[i], 10);
    const Eigen::Matrix3d got = neighborhood_covariance(c.points, nbrs);
    std::vector<Eigen::Vector3d> sel;
    for (const auto& [idx, d] : oracle::brute_knn(c.points, c[i], 10)) sel.push_back(c[idx]);
    const Eigen::Matrix3d want = oracle::sample_covariance(sel);
    EXPECT_LT((got - want).cwiseAbs().maxCoeff(), 1e-10);
  }
}

TEST(Covariances, RegularizedSpectrumIsPlaneModel) {
  const PointCloud c = room_cloud(3);
  const GicpConfig cfg;
  const KdTree tree(c);
  const CovarianceSet covs = compute_covariances(c, tree, cfg);
  ASSERT_EQ(covs.size(), c.size());
  for (const auto& m : covs.matrices) {
    EXPECT_LT((m - m.transpose()).cwiseAbs().maxCoeff(), 1e-12);
    const Eigen::Vector3d ev = Eigen::SelfAdjointEigenSolver<Eigen::Matrix3d>(m).eigenvalues();
    EXPECT_NEAR(ev[0], cfg.plane_eps, 1e-9);
    EXPECT_NEAR(ev[1], 1.0, 1e-9);
    EXPECT_NEAR(ev[2], 1.0, 1e-9);
  }
}

TEST(Covariances, TooSmallCloudIsRejected) {
  oracle::Rng rng(4);
  const PointCloud c = rng.cloud(5, -1, 1);
  const KdTree tree(c);
  EXPECT_THROW(compute_covariances(c, tree, GicpConfig{}), std::invalid_argument);
}

TEST(Covariances, RotationMatchesRecomputation) {
  oracle::Rng rng(5);
  const PointCloud c = room_cloud(5);
  const Pose p = rng.pose(0.0, std::numbers::pi);
  const KdTree t0(c);
  const CovarianceSet base = compute_covariances(c, t0, GicpConfig{});
  const PointCloud rotated = transform_cloud(c, p);
  const KdTree t1(rotated);
  const CovarianceSet fresh = compute_covariances(rotated, t1, GicpConfig{});
  const CovarianceSet moved = rotate_covariances(base, p.rotation_matrix());
  std::size_t close = 0;
  for (std::size_t i = 0; i < c.size(); ++i) {
    if ((fresh[i] - moved[i]).cwiseAbs().maxCoeff() < 1e-6) ++close;
  }
  // Neighbor ties can resolve differently after rotation; nearly all must agree.
  EXPECT_GT(static_cast<double>(close), 0.99 * static_cast<double>(c.size()));
}

// ---------------------------------------------------------------------------
// Residual model
// ---------------------------------------------------------------------------

TEST(Residual, JacobianMatchesCentralDifferences) {
  oracle::Rng rng(6);
  for (int trial = 0; trial < 100; ++trial) {
    const Pose x = rng.pose(10.0, std::numbers::pi);
    const Point3 ps = rng.vec(-20, 20), pt = rng.vec(-20, 20);
    const Matrix36d analytic = correspondence_jacobian(x, ps);
    Matrix36d numeric;
    const double h = 1e-6;
    for (int j = 0; j < 6; ++j) {
      Vector6d e = Vector6d::Zero();
      e[j] = h;
      numeric.col(j) = (correspondence_residual(retract(x, e), ps, pt) -
                        correspondence_residual(retract(x, -e), ps, pt)) /
                       (2 * h);
    }
    const double scale = std::max(1.0, analytic.cwiseAbs().maxCoeff());
    EXPECT_LT((analytic - numeric).cwiseAbs().maxCoeff() / scale, 1e-5) << "trial " << trial;
  }
}

TEST(Residual, RetractOfZeroIsIdentityStep) {
  oracle::Rng rng(7);
  const Pose x = rng.pose(5, 1);
  const Pose y = retract(x, Vector6d::Zero());
  EXPECT_LT((y.translation - x.translation).norm(), 1e-15);
  EXPECT_LT(rot_err(x, y), 1e-12);
}

// ---------------------------------------------------------------------------
// Alignment
// ---------------------------------------------------------------------------

TEST(Align, SelfAlignmentStaysAtIdentity) {
  const Prepared c = prepare(room_cloud(8));
  const AlignmentResult r = run(c, c, Pose::identity());
  EXPECT_TRUE(r.converged);
  EXPECT_LE(r.iterations, 2u);
  EXPECT_LT(r.pose.translation.norm(), 1e-6);
  EXPECT_LT(rotation_angle(r.pose.rotation), 1e-5);
}

TEST(Align, RecoversKnownTransform) {
  oracle::Rng rng(9);
  for (int trial = 0; trial < 5; ++trial) {
    const Prepared target = prepare(room_cloud(100 + trial));
    const Pose p = rng.pose(0.5, 10 * kDeg);
    const Prepared source = prepare(transform_cloud(target.cloud, p));
    const AlignmentResult r = run(source, target, Pose::identity());
    const Pose want = inverse(p);
    EXPECT_TRUE(r.converged) << r.diagnostic;
    EXPECT_LT((r.pose.translation - want.translation).norm(), 1e-3) << "trial " << trial;
    EXPECT_LT(rot_err(r.pose, want), 0.1 * kDeg) << "trial " << trial;
  }
}

TEST(Align, CostNeverIncreasesAcrossIterations) {
  oracle::Rng rng(10);
  for (int trial = 0; trial < 5; ++trial) {
    const Prepared target = prepare(room_cloud(200 + trial));
    const Prepared source = prepare(transform_cloud(target.cloud, rng.pose(0.8, 15 * kDeg)));
    const AlignmentResult r = run(source, target, Pose::identity());
    ASSERT_FALSE(r.trace.empty());
    for (const auto& step : r.trace) EXPECT_LE(step.cost_after, step.cost_before);
    EXPECT_GE(r.final_cost, 0.0);
    EXPECT_LE(r.iterations, GicpConfig{}.max_iterations);
  }
}

TEST(Align, ExactGuessCostsNoMoreThanIdentityGuess) {
  oracle::Rng rng(11);
  const Prepared target = prepare(room_cloud(11));
  const Pose p = rng.pose(0.4, 8 * kDeg);
  const Prepared source = prepare(transform_cloud(target.cloud, p));
  const AlignmentResult from_identity = run(source, target, Pose::identity());
  const AlignmentResult from_exact = run(source, target, inverse(p));
  EXPECT_TRUE(from_exact.converged);
  EXPECT_LE(from_exact.final_cost, from_identity.final_cost);
}

TEST(Align, IsEquivariantUnderRigidMotion) {
  oracle::Rng rng(12);
  for (int trial = 0; trial < 4; ++trial) {
    const PointCloud t = room_cloud(300 + trial);
    const PointCloud s = transform_cloud(t, rng.pose(0.4, 8 * kDeg));
    const Pose q = rng.pose(20.0, std::numbers::pi);
    const AlignmentResult base = run(prepare(s), prepare(t), Pose::identity());
    const AlignmentResult moved =
        run(prepare(transform_cloud(s, q)), prepare(transform_cloud(t, q)), Pose::identity());
    const Pose expected = q * base.pose * inverse(q);
    EXPECT_LT((moved.pose.translation - expected.translation).norm(), 1e-3);
    EXPECT_LT(rot_err(moved.pose, expected), 0.1 * kDeg);
  }
}

TEST(Align, TooFewCorrespondencesIsNotConverged) {
  PointCloud a, b;
  for (int i = 0; i < 20; ++i) {
    a.points.push_back({static_cast<double>(i), 0.1 * (i % 3), 0.05 * (i % 5)});
    b.points.push_back({static_cast<double>(i) + 100.0, 0.1 * (i % 3), 0.05 * (i % 5)});
  }
  const AlignmentResult r = run(prepare(a), prepare(b), Pose::identity());
  EXPECT_FALSE(r.converged);
  EXPECT_NE(r.diagnostic.find("too few correspondences"), std::string::npos);
}

TEST(Align, MismatchedStructuresAreRejected) {
  const Prepared a = prepare(room_cloud(13));
  CovarianceSet shorter = a.covs;
  shorter.matrices.pop_back();
  EXPECT_THROW(align(a.cloud, a.cloud, *a.tree, *a.tree, shorter, a.covs, Pose::identity(), GicpConfig{}),
               std::invalid_argument);
}

// ---------------------------------------------------------------------------
// Structure sharing between instances
// ---------------------------------------------------------------------------

TEST(SwapReuse, TargetAdoptsDonorSourceObjects) {
  GicpConfig cfg;
  NanoGicp donor(cfg), recipient(cfg);
  donor.set_source(std::make_shared<const PointCloud>(room_cloud(14)));
  swap_reuse(donor, recipient);
  EXPECT_EQ(recipient.target().tree.get(), donor.source().tree.get());
  EXPECT_EQ(recipient.target().covariances.get(), donor.source().covariances.get());
  EXPECT_EQ(recipient.target().tree->checksum(), donor.source().tree->checksum());
  EXPECT_EQ(recipient.stats().tree_builds, 0u);
  EXPECT_EQ(recipient.stats().covariance_computations, 0u);
}

TEST(SwapReuse, RecycledTreeAnswersLikeFreshTree) {
  oracle::Rng rng(15);
  auto cloud = std::make_shared<const PointCloud>(room_cloud(15));
  NanoGicp donor, recipient;
  donor.set_source(cloud);
  swap_reuse(donor, recipient);
  const KdTree fresh(*cloud);
  EXPECT_EQ(fresh.checksum(), recipient.target().tree->checksum());
  for (int i = 0; i < 100; ++i) {
    const Point3 q = rng.vec(-10, 10);
    EXPECT_EQ(recipient.target().tree->knn(q, 10), fresh.knn(q, 10));
  }
}

TEST(SwapReuse, RecycledAlignmentIsBitEqualToRecomputed) {
  oracle::Rng rng(16);
  auto target = std::make_shared<const PointCloud>(room_cloud(16));
  auto source = std::make_shared<const PointCloud>(transform_cloud(*target, rng.pose(0.3, 5 * kDeg)));
  NanoGicp previous, recycled, explicit_build;
  previous.set_source(target);
  recycled.set_source(source);
  swap_reuse(previous, recycled);
  explicit_build.set_source(source);
  explicit_build.set_target(target);
  const AlignmentResult a = recycled.align(Pose::identity());
  const AlignmentResult b = explicit_build.align(Pose::identity());
  EXPECT_EQ(a.pose.translation, b.pose.translation);
  EXPECT_EQ(a.pose.rotation.coeffs(), b.pose.rotation.coeffs());
  EXPECT_EQ(a.iterations, b.iterations);
}

TEST(SwapReuse, MissingDonorStructuresIsAnError) {
  NanoGicp donor, recipient;
  EXPECT_THROW(swap_reuse(donor, recipient), std::logic_error);
  EXPECT_THROW((void)recipient.align(Pose::identity()), std::logic_error);
}

TEST(NanoGicp, StatsCountBuilds) {
  NanoGicp g;
  auto c = std::make_shared<const PointCloud>(room_cloud(17));
  g.set_source(c);
  g.set_target(c);
  EXPECT_EQ(g.stats().tree_builds, 2u);
  EXPECT_EQ(g.stats().covariance_computations, 2u);
  g.set_target(c, g.source().covariances);
  EXPECT_EQ(g.stats().tree_builds, 3u);
  EXPECT_EQ(g.stats().covariance_computations, 2u);
}

TEST(GicpConfig, RejectsNonPositive) {
  GicpConfig cfg;
  cfg.max_corr_dist = 0;
  EXPECT_THROW(NanoGicp{cfg}, std::invalid_argument);
}
