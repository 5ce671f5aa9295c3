#include <iostream>

#include "CLI11.hpp"
#include "commands.hpp"

int main(int argc, char** argv) {
  using namespace dlo::cli;
  CLI::App app{"Direct LiDAR odometry: run, simulate, evaluate and benchmark"};
  app.require_subcommand(1);
  app.set_version_flag("--version", DLO_VERSION);

  OdomOptions odom;
  std::string replay;
  auto* c_odom = app.add_subcommand("odom", "Run the odometry pipeline over a scan sequence");
  c_odom->add_option("input", odom.input, "Sequence directory containing manifest.csv");
  c_odom->add_option("-o,--output", odom.output, "Output directory")->required();
  c_odom->add_option("-c,--config", odom.config, "Configuration file (key = value)");
  c_odom->add_flag("--no-imu", odom.no_imu, "Disable the gyro prior");
  c_odom->add_flag("--no-recycle", odom.no_recycle, "Rebuild every tree and covariance set");
  c_odom->add_option("--submap", odom.submap, "Submap strategy: keyframe or radius")
      ->check(CLI::IsMember({"keyframe", "radius"}));
  c_odom->add_option("--radius", odom.radius, "Radius for --submap radius [m]");
  c_odom->add_option("--keyframe-thresh", odom.keyframe_thresh, "adaptive or fixed:<m>");
  c_odom->add_option("--initial-pose", odom.initial_pose, "TUM file whose first pose seeds the estimate");
  c_odom->add_flag("!--no-timing", odom.timing, "Write zero wall times so counters.csv is reproducible");
  c_odom->add_option("--replay", replay, "Re-run the odometry recorded in a run_manifest.json")
      ->excludes("input");

  SynthOptions synth;
  auto* c_synth = app.add_subcommand("synth", "Generate a synthetic LiDAR/IMU sequence");
  c_synth->add_option("scenario", synth.scenario, "Built-in scenario name or JSON spec file")->required();
  c_synth->add_option("-o,--output", synth.output, "Output directory")->required();
  c_synth->add_option("--seed", synth.seed, "Noise seed")->capture_default_str();
  c_synth->add_option("--save-spec", synth.save_spec, "Also write the resolved scenario spec as JSON");

  EvalOptions ev;
  auto* c_eval = app.add_subcommand("eval", "Absolute pose error between two TUM trajectories");
  c_eval->add_option("estimate", ev.estimate, "Estimated trajectory (TUM)")->required();
  c_eval->add_option("reference", ev.reference, "Reference trajectory (TUM)")->required();
  c_eval->add_flag("--align", ev.align, "Rigidly align the estimate to the reference first");
  c_eval->add_option("--max-dt", ev.max_dt, "Stamp association gate [s]")->capture_default_str();
  c_eval->add_option("-o,--output", ev.output, "Directory for ape_report.csv and per_pose_errors.csv");

  BenchOptions bench;
  auto* c_bench = app.add_subcommand("bench", "Time pairwise alignment with and without structure reuse");
  c_bench->add_option("source", bench.source, "Source scan (PLY or PCD)")->required();
  c_bench->add_option("target", bench.target, "Target scan (PLY or PCD)")->required();
  c_bench->add_option("-n,--repetitions", bench.repetitions, "Repetitions per mode")->capture_default_str();
  c_bench->add_option("-o,--output", bench.output, "CSV file with one row per repetition and mode");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitInput;
  }

  if (c_odom->parsed()) {
    if (!replay.empty()) return cmd_replay(replay, odom.output, std::cout, std::cerr);
    if (odom.input.empty()) {
      std::cerr << "error: odom needs an input directory or --replay\n";
      return kExitInput;
    }
    return cmd_odom(odom, std::cout, std::cerr);
  }
  if (c_synth->parsed()) return cmd_synth(synth, std::cout, std::cerr);
  if (c_eval->parsed()) return cmd_eval(ev, std::cout, std::cerr);
  return cmd_bench(bench, std::cout, std::cerr);
}
