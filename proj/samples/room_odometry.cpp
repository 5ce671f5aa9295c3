// Runs the odometry pipeline over a synthetic room sequence and reports APE.

#include <cstdio>
#include <string>

#include <dlo/dlo.hpp>

int main(int argc, char** argv) {
  using namespace dlo;

  const std::string name = argc > 1 ? argv[1] : "room";
  const auto spec = sim::builtin_scenario(name);
  if (!spec) {
    std::fprintf(stderr, "unknown scenario '%s'\n", name.c_str());
    return 2;
  }
  const sim::SyntheticSequence seq = spec->generate(1);

  OdometryConfig cfg;
  Odometry odom(cfg);
  std::vector<ImuMeasurement> still;
  for (const auto& m : seq.imu) {
    if (m.stamp <= seq.scans.front().stamp + cfg.imu_calib_time) still.push_back(m);
  }
  odom.initialize_imu(still);
  odom.set_initial_pose(seq.ground_truth.front().pose);

  for (const auto& scan : seq.scans) {
    const ScanOutput out = odom.process_scan(scan, seq.imu);
    const auto& d = out.diagnostics;
    if (d.index % 50 == 0) {
      std::printf("scan %4zu  spaciousness %6.2f m  threshold %5.2f m  keyframes %3zu\n", d.index, d.spaciousness,
                  d.keyframe_thresh, d.keyframes);
    }
  }

  const auto pairs = eval::associate(odom.trajectory(), seq.ground_truth, 1e-6).pairs;
  const eval::ApeReport ape = eval::ape(pairs, false);
  std::printf("%s: %zu scans, %zu keyframes, APE rmse %.3f m, max %.3f m\n", name.c_str(), seq.scans.size(),
              odom.keyframes().size(), ape.rmse, ape.max);
}
