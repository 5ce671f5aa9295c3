#include <gtest/gtest.h>

#include "dlo/odometry/imu.hpp"
#include "dlo/sim/scenarios.hpp"
#include "support/oracles.hpp"
#include "support/temp_dir.hpp"

using namespace dlo;
using namespace dlo::sim;

namespace {

constexpr double kDeg = std::numbers::pi / 180.0;

/// Distance from p to the nearest panel, computed without the BVH.
double nearest_panel_distance(const Environment& env, const Point3& p) {
  double best = std::numeric_limits<double>::infinity();
  for (const auto& panel : env.panels()) {
    const Point3 clamped = p.cwiseMax(panel.min).cwiseMin(panel.max);
    best = std::min(best, (p - clamped).norm());
  }
  return best;
}

/// First-hit distance by testing every panel.
std::optional<double> brute_cast(const Environment& env, const Point3& o, const Eigen::Vector3d& d, double max_range) {
  std::optional<double> best;
  for (const auto& panel : env.panels()) {
    int axis = 0;
    for (int a = 0; a < 3; ++a) {
      if (panel.min[a] == panel.max[a]) axis = a;
    }
    if (d[axis] == 0.0) continue;
    const double t = (panel.min[axis] - o[axis]) / d[axis];
    if (!(t > 0.0) || t > max_range) continue;
    const Point3 q = o + t * d;
    bool inside = true;
    for (int a = 0; a < 3; ++a) {
      if (a != axis && (q[a] < panel.min[a] || q[a] > panel.max[a])) inside = false;
    }
    if (inside && (!best || t < *best)) best = t;
  }
  return best;
}

TrajectorySpec simple(std::vector<Segment> segs, Eigen::Vector3d start = {0, 0, 1}, double yaw = 0.0) {
  TrajectorySpec t;
  t.start_position = start;
  t.start_yaw = yaw;
  t.segments = std::move(segs);
  return t;
}

Environment big_room() {
  Environment env;
  env.add_room({-100, -100, -5}, {100, 100, 10});
  return env;
}

}  // namespace

// ---------------------------------------------------------------------------
// Ray casting
// ---------------------------------------------------------------------------

TEST(Raycast, CubeRoomForwardRay) {
  Environment env;
  env.add_room({-5, -5, -5}, {5, 5, 5});
  SensorModel sensor;
  sensor.channels = 1;
  sensor.azimuth_steps = 4;
  const PointCloud c = raycast_scan(env, Pose::identity(), sensor, 0);
  ASSERT_EQ(c.size(), 4u);
  EXPECT_LT((c[0] - Point3(5, 0, 0)).norm(), 1e-12);
  EXPECT_LT((c[1] - Point3(0, 5, 0)).norm(), 1e-12);
}

TEST(Raycast, EmptyEnvironment) { EXPECT_TRUE(raycast_scan(Environment{}, Pose::identity(), SensorModel{}, 1).empty()); }

TEST(Raycast, PointsLieOnPanels) {
  oracle::Rng rng(1);
  for (int trial = 0; trial < 5; ++trial) {
    const Environment env = oracle::random_room(rng);
    const Pose pose(rng.rotation(0.3), Eigen::Vector3d(rng.uniform(-1, 1), rng.uniform(-1, 1), 0.0));
    const PointCloud c = raycast_scan(env, pose, SensorModel{}, 7);
    ASSERT_GT(c.size(), 1000u);
    const PointCloud world = transform_cloud(c, pose);
    for (const auto& p : world.points) ASSERT_LT(nearest_panel_distance(env, p), 1e-9);
  }
}

TEST(Raycast, BvhMatchesExhaustiveSearch) {
  oracle::Rng rng(2);
  const Environment env = oracle::random_room(rng);
  for (int i = 0; i < 2000; ++i) {
    const Point3 o(rng.uniform(-1, 1), rng.uniform(-1, 1), rng.uniform(-0.5, 0.5));
    const Eigen::Vector3d d = rng.unit();
    const auto got = env.cast(o, d, 100.0);
    const auto want = brute_cast(env, o, d, 100.0);
    ASSERT_EQ(got.has_value(), want.has_value());
    if (got) {
      EXPECT_NEAR(got->distance, *want, 1e-12);
    }
  }
}

TEST(Raycast, MaxRangeOmitsFarHits) {
  Environment env;
  env.add_room({-50, -50, -50}, {50, 50, 50});
  SensorModel sensor;
  sensor.max_range = 10;
  EXPECT_TRUE(raycast_scan(env, Pose::identity(), sensor, 0).empty());
}

TEST(Raycast, NoiseIsSeededAndDeterministic) {
  const ScenarioSpec s = room_scenario();
  SensorModel noisy = s.sensor;
  noisy.range_noise = 0.02;
  const Pose pose = Pose::from_translation({0, 2, 1.5});
  const PointCloud a = raycast_scan(s.environment, pose, noisy, 5);
  const PointCloud b = raycast_scan(s.environment, pose, noisy, 5);
  const PointCloud c = raycast_scan(s.environment, pose, noisy, 6);
  EXPECT_EQ(a.points, b.points);
  EXPECT_NE(a.points, c.points);
}

TEST(Environment, RejectsDegeneratePanels) {
  Environment env;
  EXPECT_THROW(env.add_panel({{0, 0, 0}, {1, 1, 1}}), std::invalid_argument);
  EXPECT_THROW(env.add_panel({{0, 0, 0}, {0, 0, 1}}), std::invalid_argument);
  EXPECT_NO_THROW(env.add_panel({{0, 0, 0}, {0, 1, 1}}));
}

TEST(SensorModel, RejectsBadParameters) {
  SensorModel s;
  s.range_noise = -1;
  EXPECT_THROW(s.validate(), std::invalid_argument);
  s = {};
  s.channels = 0;
  EXPECT_THROW(s.validate(), std::invalid_argument);
}

// ---------------------------------------------------------------------------
// Sequences
// ---------------------------------------------------------------------------

TEST(Sequence, PauseOnlyGivesIdenticalScansAndZeroGyro) {
  const ScenarioSpec s = room_scenario();
  TrajectorySpec t = simple({Segment::pause(1.0)}, {0, 2, 1.5});
  const SyntheticSequence seq = generate_sequence(s.environment, t, s.sensor, 3);
  ASSERT_EQ(seq.scans.size(), 10u);
  for (const auto& scan : seq.scans) EXPECT_EQ(scan.points, seq.scans[0].points);
  for (const auto& m : seq.imu) EXPECT_EQ(m.gyro, Eigen::Vector3d::Zero());
}

TEST(Sequence, ArcGyroEqualsTurnRate) {
  const Environment env = big_room();
  for (double angle : {90 * kDeg, -135 * kDeg}) {
    const TrajectorySpec t = simple({Segment::arc(3.0, angle, 0.7)});
    const SyntheticSequence seq = generate_sequence(env, t, SensorModel{}, 1);
    ASSERT_FALSE(seq.imu.empty());
    const double rate = angle > 0 ? 0.7 : -0.7;
    for (const auto& m : seq.imu) {
      EXPECT_NEAR(m.gyro.z(), rate, 1e-9);
      EXPECT_EQ(m.gyro.x(), 0.0);
    }
  }
}

TEST(Sequence, ArcMatchesFiniteDifferenceOfTrajectory) {
  // Heading and speed along an arc derived from the parametric positions.
  const TrajectorySpec t = simple({Segment::arc(2.0, 180 * kDeg, 0.5)}, {1, 2, 1}, 0.3);
  const double h = 1e-5;
  for (double s = 0.1; s < t.duration() - 0.1; s += 0.37) {
    const Point3 v = (t.state_at(s + h).position - t.state_at(s - h).position) / (2 * h);
    EXPECT_NEAR(v.norm(), 1.0, 1e-6);
    EXPECT_NEAR(std::atan2(v.y(), v.x()), std::remainder(t.state_at(s).yaw, 2 * std::numbers::pi), 1e-6);
    const double yaw_rate = (t.state_at(s + h).yaw - t.state_at(s - h).yaw) / (2 * h);
    EXPECT_NEAR(yaw_rate, 0.5, 1e-6);
  }
}

TEST(Sequence, StraightFiftyMetresCounts) {
  Environment env;
  env.add_room({-5, -3, 0}, {60, 3, 3});
  const TrajectorySpec t = simple({Segment::straight(50, 1.0)}, {0, 0, 1.2});
  const SyntheticSequence seq = generate_sequence(env, t, SensorModel{}, 1);
  EXPECT_EQ(seq.scans.size(), 500u);
  EXPECT_EQ(seq.imu.size(), 5000u);
  EXPECT_EQ(seq.ground_truth.size(), 500u);
  EXPECT_NEAR(seq.ground_truth.back().pose.translation.x(), 49.9, 1e-9);
}

TEST(Sequence, SegmentsJoinContinuously) {
  const TrajectorySpec t = simple({Segment::straight(3, 1.5, 0.5), Segment::arc(1.0, 90 * kDeg, 0.8),
                                   Segment::pause(0.5), Segment::arc(0.0, -45 * kDeg, 0.4), Segment::straight(2, 1.0)});
  double t0 = 0.0;
  for (const auto& s : t.segments) {
    t0 += s.time();
    const MotionState before = t.state_at(t0 - 1e-9), after = t.state_at(t0 + 1e-9);
    EXPECT_LT((before.position - after.position).norm(), 1e-7);
    EXPECT_NEAR(before.yaw, after.yaw, 1e-7);
  }
}

TEST(Sequence, IntegratedGyroReproducesRelativeRotation) {
  const ScenarioSpec s = spin_scenario();
  const SyntheticSequence seq = s.generate(4);
  for (std::size_t k = 1; k < seq.scans.size(); ++k) {
    const double t0 = seq.ground_truth[k - 1].stamp, t1 = seq.ground_truth[k].stamp;
    const Pose rel = integrate_gyro(seq.imu, t0, t1);
    const Quaternion want = seq.ground_truth[k - 1].pose.rotation.inverse() * seq.ground_truth[k].pose.rotation;
    EXPECT_LT(angular_distance(rel.rotation, want), 1e-4) << "window " << k;
  }
}

TEST(Sequence, AccelerometerSeesGravityAtRest) {
  const ScenarioSpec s = room_scenario();
  const SyntheticSequence seq = s.generate(1);
  for (const auto& m : seq.imu) {
    if (m.stamp >= 1.0) break;
    EXPECT_LT((m.accel - Eigen::Vector3d(0, 0, kGravity)).norm(), 1e-12);
  }
}

TEST(Sequence, ImuNoiseAndBiasAreApplied) {
  ScenarioSpec s = room_scenario();
  s.trajectory.segments = {Segment::pause(2.0)};
  s.imu_noise.gyro_bias = {0.01, 0.0, -0.02};
  s.imu_noise.gyro_sigma = 0.001;
  const SyntheticSequence seq = s.generate(2);
  Eigen::Vector3d mean = Eigen::Vector3d::Zero();
  for (const auto& m : seq.imu) mean += m.gyro;
  mean /= static_cast<double>(seq.imu.size());
  EXPECT_LT((mean - s.imu_noise.gyro_bias).norm(), 3 * 0.001 * std::sqrt(3.0 / seq.imu.size()) + 1e-12);
}

TEST(Sequence, LeavingTheEnvironmentIsAnError) {
  Environment env;
  env.add_room({-5, -5, 0}, {5, 5, 3});
  const TrajectorySpec t = simple({Segment::straight(20, 2.0)}, {0, 0, 1});
  EXPECT_THROW(generate_sequence(env, t, SensorModel{}, 1), OutOfBounds);
}

TEST(Sequence, DeterministicBytesUnderFixedSeed) {
  ScenarioSpec s = room_scenario();
  s.sensor.range_noise = 0.01;
  s.imu_noise.gyro_sigma = 0.002;
  s.trajectory.segments = {Segment::pause(0.3), Segment::straight(1, 1.0)};
  test::TempDir a, b;
  write_sequence(a.path(), s.generate(9));
  write_sequence(b.path(), s.generate(9));
  for (const auto& entry : std::filesystem::recursive_directory_iterator(a.path())) {
    if (!entry.is_regular_file()) continue;
    const auto rel = std::filesystem::relative(entry.path(), a.path());
    EXPECT_EQ(io::detail::read_file(entry.path()), io::detail::read_file(b.path() / rel)) << rel;
  }
  const auto manifest = io::read_scan_manifest(a.path());
  EXPECT_EQ(manifest.scans.size(), 13u);
  EXPECT_EQ(io::read_imu_csv(a / kImuFile).size(), 130u);
  EXPECT_EQ(io::read_trajectory_tum(a / kGroundTruthFile).size(), 13u);
}

// ---------------------------------------------------------------------------
// Scenarios
// ---------------------------------------------------------------------------

TEST(Scenarios, AllBuiltinsStayInsideTheirEnvironment) {
  for (const auto& name : scenario_names()) {
    const auto s = builtin_scenario(name);
    ASSERT_TRUE(s.has_value()) << name;
    const TrajectorySpec& t = s->trajectory;
    for (double time = 0.0; time <= t.duration(); time += 0.05) {
      const Point3 p = t.state_at(time).position;
      ASSERT_TRUE(s->environment.bounds().contains(p)) << name << " t=" << time;
      // The sensor never passes through a panel.
      ASSERT_GT(nearest_panel_distance(s->environment, p), 0.2) << name << " t=" << time;
    }
  }
  EXPECT_FALSE(builtin_scenario("nope").has_value());
}

TEST(Scenarios, JsonRoundTrip) {
  test::TempDir dir;
  for (const auto& name : scenario_names()) {
    ScenarioSpec s = *builtin_scenario(name);
    s.imu_noise.gyro_bias = {1e-3, 2e-3, 3e-3};
    save_scenario(dir / (name + ".json"), s);
    const ScenarioSpec back = load_scenario(dir / (name + ".json"));
    EXPECT_EQ(back.name, s.name);
    EXPECT_EQ(back.environment.panels(), s.environment.panels());
    EXPECT_EQ(back.trajectory.segments, s.trajectory.segments);
    EXPECT_EQ(back.trajectory.start_position, s.trajectory.start_position);
    EXPECT_EQ(back.sensor, s.sensor);
    EXPECT_EQ(back.imu_noise, s.imu_noise);
  }
}

TEST(Scenarios, MalformedJsonIsAnError) {
  test::TempDir dir;
  std::ofstream(dir / "bad.json") << "{\"name\": \"x\", \"panels\": 3}";
  EXPECT_THROW(load_scenario(dir / "bad.json"), std::invalid_argument);
}
