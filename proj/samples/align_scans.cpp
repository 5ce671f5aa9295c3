// Registers two simulated scans of the same room with NanoGICP.

#include <cstdio>
#include <memory>
#include <numbers>

#include <dlo/dlo.hpp>

int main() {
  using namespace dlo;

  sim::Environment env;
  env.add_room({-8, -6, -1.5}, {8, 6, 2.5});
  env.add_block({3, 2, -1.5}, {4, 3.5, 0.5});
  env.add_block({-5, -4, -1.5}, {-4, -2, 1.0});

  const Pose moved(axis_angle({0, 0, 1}, 8 * std::numbers::pi / 180), {0.4, -0.2, 0.05});
  const PointCloud target = voxel_filter(sim::raycast_scan(env, Pose::identity(), sim::SensorModel{}, 1), 0.25);
  const PointCloud source = voxel_filter(sim::raycast_scan(env, moved, sim::SensorModel{}, 2), 0.25);

  NanoGicp gicp;
  gicp.set_source(std::make_shared<const PointCloud>(source));
  gicp.set_target(std::make_shared<const PointCloud>(target));
  const AlignmentResult r = gicp.align(Pose::identity());

  std::printf("%zu -> %zu points, %zu iterations, converged %s\n", source.size(), target.size(), r.iterations,
              r.converged ? "yes" : "no");
  std::printf("estimate t = [%.4f %.4f %.4f], yaw %.3f deg\n", r.pose.translation.x(), r.pose.translation.y(),
              r.pose.translation.z(), rotation_angle(r.pose.rotation) * 180 / std::numbers::pi);
  std::printf("truth    t = [%.4f %.4f %.4f], yaw %.3f deg\n", moved.translation.x(), moved.translation.y(),
              moved.translation.z(), rotation_angle(moved.rotation) * 180 / std::numbers::pi);
}
