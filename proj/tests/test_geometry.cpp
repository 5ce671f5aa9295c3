#include <gtest/gtest.h>

#include <map>
#include <set>
#include <tuple>

#include "dlo/geometry.hpp"
#include "support/oracles.hpp"

using dlo::Point3;
using dlo::PointCloud;
using dlo::Pose;
using dlo::Quaternion;

namespace {

constexpr double kPi = std::numbers::pi;

Pose rz(double angle, Eigen::Vector3d t = Eigen::Vector3d::Zero()) {
  return {Quaternion(Eigen::AngleAxisd(angle, Eigen::Vector3d::UnitZ())), t};
}

void expect_pose_near(const Pose& a, const Pose& b, double tol) {
  EXPECT_LT((a.translation - b.translation).norm(), tol);
  EXPECT_LT(dlo::angular_distance(a.rotation, b.rotation), tol);
}

}  // namespace

TEST(Compose, IdentityOfIdentities) {
  const Pose p = dlo::compose(Pose::identity(), Pose::identity());
  EXPECT_EQ(p.translation, Eigen::Vector3d::Zero());
  EXPECT_DOUBLE_EQ(p.rotation.w(), 1.0);
}

TEST(Compose, WithInverseIsIdentity) {
  oracle::Rng rng(1);
  for (int i = 0; i < 100; ++i) {
    const Pose p = rng.pose(50.0, kPi);
    expect_pose_near(dlo::compose(p, dlo::inverse(p)), Pose::identity(), 1e-9);
    expect_pose_near(dlo::compose(dlo::inverse(p), p), Pose::identity(), 1e-9);
  }
}

TEST(Compose, QuarterTurnsMatchMatrixOracle) {
  const Pose a = rz(kPi / 2, {1, 0, 0});
  const Pose b = rz(kPi / 2);
  const Pose c = dlo::compose(a, b);
  const Eigen::Matrix4d expected = oracle::homogeneous(a) * oracle::homogeneous(b);
  EXPECT_TRUE(c.matrix().isApprox(expected, 1e-12));
  expect_pose_near(c, rz(kPi, {1, 0, 0}), 1e-12);
}

TEST(Compose, RandomPairsMatchMatrixOracle) {
  oracle::Rng rng(2);
  for (int i = 0; i < 200; ++i) {
    const Pose a = rng.pose(10, kPi), b = rng.pose(10, kPi);
    const Eigen::Matrix4d expected = oracle::homogeneous(a) * oracle::homogeneous(b);
    EXPECT_LT((dlo::compose(a, b).matrix() - expected).cwiseAbs().maxCoeff(), 1e-12);
    EXPECT_NEAR(dlo::compose(a, b).rotation.norm(), 1.0, 1e-12);
  }
}

TEST(Compose, IsAssociative) {
  oracle::Rng rng(3);
  for (int i = 0; i < 200; ++i) {
    const Pose a = rng.pose(20, kPi), b = rng.pose(20, kPi), c = rng.pose(20, kPi);
    expect_pose_near(dlo::compose(dlo::compose(a, b), c), dlo::compose(a, dlo::compose(b, c)), 1e-9);
  }
}

TEST(Pose, ConstructorNormalizesQuaternion) {
  const Pose p(Quaternion(2.0, 0.0, 0.0, 0.0), Eigen::Vector3d::Zero());
  EXPECT_NEAR(p.rotation.norm(), 1.0, 1e-9);
}

TEST(TransformCloud, IdentityKeepsCloud) {
  oracle::Rng rng(4);
  const PointCloud c = rng.cloud(50, -5, 5);
  const PointCloud out = dlo::transform_cloud(c, Pose::identity());
  ASSERT_EQ(out.size(), c.size());
  for (std::size_t i = 0; i < c.size(); ++i) EXPECT_EQ(out[i], c[i]);
}

TEST(TransformCloud, QuarterTurnAboutZ) {
  PointCloud c;
  c.points.push_back({1, 0, 0});
  const PointCloud out = dlo::transform_cloud(c, rz(kPi / 2));
  EXPECT_LT((out[0] - Point3(0, 1, 0)).norm(), 1e-12);
}

TEST(TransformCloud, MatchesHomogeneousOracle) {
  oracle::Rng rng(5);
  for (int trial = 0; trial < 20; ++trial) {
    const PointCloud c = rng.cloud(100, -20, 20);
    const Pose p = rng.pose(30, kPi);
    const Eigen::Matrix4d m = oracle::homogeneous(p);
    const PointCloud out = dlo::transform_cloud(c, p);
    ASSERT_EQ(out.size(), c.size());
    for (std::size_t i = 0; i < c.size(); ++i) {
      EXPECT_LT((out[i] - oracle::apply_h(m, c[i])).cwiseAbs().maxCoeff(), 1e-12);
    }
  }
}

TEST(TransformCloud, RoundTripThroughInverse) {
  oracle::Rng rng(6);
  for (int trial = 0; trial < 20; ++trial) {
    const PointCloud c = rng.cloud(100, -50, 50);
    const Pose p = rng.pose(100, kPi);
    const PointCloud back = dlo::transform_cloud(dlo::transform_cloud(c, p), dlo::inverse(p));
    for (std::size_t i = 0; i < c.size(); ++i) {
      EXPECT_LT((back[i] - c[i]).cwiseAbs().maxCoeff(), 1e-9);
    }
  }
}

TEST(BoxFilter, SplitsInsideAndOutside) {
  PointCloud c;
  c.points = {{0.2, 0, 0}, {2, 0, 0}};
  const PointCloud out = dlo::box_filter(c, 0.5);
  ASSERT_EQ(out.size(), 1u);
  EXPECT_EQ(out[0], Point3(2, 0, 0));
}

TEST(BoxFilter, EmptyStaysEmpty) { EXPECT_TRUE(dlo::box_filter(PointCloud{}, 0.5).empty()); }

TEST(BoxFilter, BoundaryIsRemoved) {
  PointCloud c;
  c.points = {{0.5, 0, 0}, {-0.5, 0.5, -0.5}, {0.5000001, 0, 0}};
  const PointCloud out = dlo::box_filter(c, 0.5);
  ASSERT_EQ(out.size(), 1u);
  EXPECT_EQ(out[0], Point3(0.5000001, 0, 0));
}

TEST(BoxFilter, MatchesPredicateOracleAndIsIdempotent) {
  oracle::Rng rng(7);
  const PointCloud c = rng.cloud(2000, -1.5, 1.5);
  const double h = 0.5;
  const PointCloud out = dlo::box_filter(c, h);
  std::vector<Point3> expected;
  for (const auto& p : c.points) {
    const bool inside = std::abs(p.x()) <= h && std::abs(p.y()) <= h && std::abs(p.z()) <= h;
    if (!inside) expected.push_back(p);
  }
  ASSERT_EQ(out.size(), expected.size());
  for (std::size_t i = 0; i < expected.size(); ++i) EXPECT_EQ(out[i], expected[i]);
  const PointCloud twice = dlo::box_filter(out, h);
  EXPECT_EQ(twice.points, out.points);
}

TEST(BoxFilter, RejectsNonPositiveExtent) {
  EXPECT_THROW(dlo::box_filter(PointCloud{}, 0.0), std::invalid_argument);
}

TEST(VoxelFilter, SameVoxelCentroid) {
  PointCloud c;
  c.points = {{0.01, 0, 0}, {0.02, 0, 0}};
  const PointCloud out = dlo::voxel_filter(c, 0.25);
  ASSERT_EQ(out.size(), 1u);
  EXPECT_NEAR(out[0].x(), 0.015, 1e-15);
  EXPECT_EQ(out[0].y(), 0.0);
}

TEST(VoxelFilter, DistinctVoxelsKept) {
  PointCloud c;
  c.points = {{0.1, 0.1, 0.1}, {0.4, 0.1, 0.1}};
  EXPECT_EQ(dlo::voxel_filter(c, 0.25).size(), 2u);
}

TEST(VoxelFilter, CountMatchesHashSetOracle) {
  oracle::Rng rng(8);
  const PointCloud c = rng.cloud(1000, 0.0, 1.0);
  std::set<std::tuple<long, long, long>> voxels;
  for (const auto& p : c.points) {
    voxels.insert({static_cast<long>(std::floor(p.x() / 0.25)), static_cast<long>(std::floor(p.y() / 0.25)),
                   static_cast<long>(std::floor(p.z() / 0.25))});
  }
  EXPECT_EQ(dlo::voxel_filter(c, 0.25).size(), voxels.size());
}

TEST(VoxelFilter, CentroidsMatchGroupedMeansInIndexOrder) {
  oracle::Rng rng(9);
  const PointCloud c = rng.cloud(3000, -2.0, 2.0);
  std::map<std::tuple<long, long, long>, std::pair<Eigen::Vector3d, int>> groups;
  for (const auto& p : c.points) {
    auto [it, fresh] = groups.try_emplace(
        {static_cast<long>(std::floor(p.x() / 0.5)), static_cast<long>(std::floor(p.y() / 0.5)),
         static_cast<long>(std::floor(p.z() / 0.5))},
        Eigen::Vector3d::Zero(), 0);
    auto& g = it->second;
    g.first += p;
    ++g.second;
  }
  const PointCloud out = dlo::voxel_filter(c, 0.5);
  ASSERT_EQ(out.size(), groups.size());
  std::size_t i = 0;
  for (const auto& [key, g] : groups) {
    EXPECT_LT((out[i] - g.first / g.second).norm(), 1e-12);
    ++i;
  }
}

TEST(VoxelFilter, IdempotentOnInteriorData) {
  // Points jittered around voxel centres keep their centroids strictly inside.
  oracle::Rng rng(10);
  PointCloud c;
  for (int i = 0; i < 2000; ++i) {
    const Eigen::Vector3d cell(static_cast<double>(rng.index(20)), static_cast<double>(rng.index(20)),
                               static_cast<double>(rng.index(20)));
    c.points.push_back((cell + Eigen::Vector3d::Constant(0.5) + rng.vec(-0.3, 0.3)) * 0.25);
  }
  const PointCloud once = dlo::voxel_filter(c, 0.25);
  EXPECT_EQ(dlo::voxel_filter(once, 0.25).size(), once.size());
}

TEST(VoxelFilter, IsDeterministicUnderInputPermutation) {
  oracle::Rng rng(11);
  PointCloud c = rng.cloud(500, -3, 3);
  const PointCloud a = dlo::voxel_filter(c, 1.0);
  std::reverse(c.points.begin(), c.points.end());
  const PointCloud b = dlo::voxel_filter(c, 1.0);
  ASSERT_EQ(a.size(), b.size());
  for (std::size_t i = 0; i < a.size(); ++i) EXPECT_LT((a[i] - b[i]).norm(), 1e-12);
}

TEST(VoxelFilter, RejectsNonPositiveLeaf) {
  EXPECT_THROW(dlo::voxel_filter(PointCloud{}, 0.0), std::invalid_argument);
}

TEST(Rotation, ExpLogRoundTrip) {
  oracle::Rng rng(12);
  for (int i = 0; i < 200; ++i) {
    const Eigen::Vector3d w = rng.unit() * rng.uniform(0.0, kPi - 1e-3);
    EXPECT_LT((dlo::so3_log(dlo::so3_exp(w)) - w).norm(), 1e-9);
    EXPECT_LT((dlo::so3_exp(w).toRotationMatrix() - oracle::rodrigues(w)).cwiseAbs().maxCoeff(), 1e-12);
  }
}

TEST(Rotation, SkewMatchesCrossProduct) {
  oracle::Rng rng(13);
  const Eigen::Vector3d a = rng.vec(-1, 1), b = rng.vec(-1, 1);
  EXPECT_LT((dlo::skew(a) * b - a.cross(b)).norm(), 1e-15);
}
