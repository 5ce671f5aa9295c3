#pragma once

#include <algorithm>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <memory>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "dlo/dlo.hpp"
#include "json.hpp"

#ifndef DLO_VERSION
#define DLO_VERSION "0.0.0"
#endif

namespace dlo::cli {

namespace fs = std::filesystem;
using nlohmann::json;

inline constexpr int kExitOk = 0;
inline constexpr int kExitInput = 2;
inline constexpr int kExitPipeline = 3;

inline constexpr const char* kRunManifest = "run_manifest.json";
inline constexpr const char* kTrajectoryFile = "trajectory.tum";
inline constexpr const char* kMapFile = "map.ply";
inline constexpr const char* kCountersFile = "counters.csv";
inline constexpr const char* kApeReportFile = "ape_report.csv";
inline constexpr const char* kPerPoseFile = "per_pose_errors.csv";

/// Bad arguments or unreadable inputs; maps to exit code 2.
class InputError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Runs `fn`, translating exceptions into the exit-code contract.
template <typename Fn>
int guarded(std::ostream& err, Fn&& fn) {
  try {
    return fn();
  } catch (const InputError& e) {
    err << "error: " << e.what() << '\n';
    return kExitInput;
  } catch (const io::ParseError& e) {
    err << "error: " << e.what() << '\n';
    return kExitInput;
  } catch (const ConfigError& e) {
    err << "error: " << e.what() << '\n';
    return kExitInput;
  } catch (const nlohmann::json::exception& e) {
    err << "error: " << e.what() << '\n';
    return kExitInput;
  } catch (const std::exception& e) {
    err << "pipeline failure: " << e.what() << '\n';
    return kExitPipeline;
  }
}

inline json pose_json(const std::optional<Pose>& p) {
  if (!p) return nullptr;
  const auto& t = p->translation;
  const auto& q = p->rotation;
  return json::array({t.x(), t.y(), t.z(), q.x(), q.y(), q.z(), q.w()});
}

/// Inverse of pose_json; stored values are taken verbatim so replays are bit-exact.
inline std::optional<Pose> json_pose(const json& j) {
  if (j.is_null()) return std::nullopt;
  if (!j.is_array() || j.size() != 7) throw InputError("pose must be [tx,ty,tz,qx,qy,qz,qw]");
  Pose p;
  p.translation = {j[0].get<double>(), j[1].get<double>(), j[2].get<double>()};
  p.rotation = Quaternion(j[6].get<double>(), j[3].get<double>(), j[4].get<double>(), j[5].get<double>());
  return p;
}

inline std::string absolute_string(const fs::path& p) {
  return p.empty() ? std::string() : fs::absolute(p).lexically_normal().string();
}

inline void write_json(const fs::path& path, const json& j) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw InputError("cannot write " + path.string());
  out << j.dump(2) << '\n';
}

inline json read_json(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InputError("cannot open " + path.string());
  try {
    return json::parse(in);
  } catch (const json::parse_error& e) {
    throw InputError(path.string() + ": " + e.what());
  }
}

// ---------------------------------------------------------------------------
// odom
// ---------------------------------------------------------------------------

struct OdomOptions {
  fs::path input;  ///< sequence directory with manifest.csv
  fs::path config;
  fs::path output;
  bool no_imu = false;
  bool no_recycle = false;
  std::string submap = "keyframe";
  std::optional<double> radius;
  std::string keyframe_thresh = "adaptive";
  fs::path initial_pose;  ///< TUM file; its first record seeds the pose
  bool timing = true;     ///< write measured wall times into counters.csv
};

/// Config file (if any) with the command-line overrides applied.
inline OdometryConfig resolve_config(const OdomOptions& o) {
  OdometryConfig cfg;
  if (!o.config.empty()) {
    std::ifstream in(o.config);
    if (!in) throw InputError("cannot open config " + o.config.string());
    cfg = parse_config(in);
  }
  if (o.no_imu) cfg.use_imu = false;
  if (o.no_recycle) cfg.recycle = false;
  if (o.submap == "keyframe") {
    cfg.submap_mode = SubmapMode::keyframe;
  } else if (o.submap == "radius") {
    cfg.submap_mode = SubmapMode::radius;
  } else {
    throw InputError("--submap must be 'keyframe' or 'radius', got '" + o.submap + "'");
  }
  if (o.radius) cfg.submap_radius = *o.radius;
  if (o.keyframe_thresh == "adaptive") {
    cfg.fixed_keyframe_thresh = 0.0;
  } else if (o.keyframe_thresh.rfind("fixed:", 0) == 0) {
    const std::string v = o.keyframe_thresh.substr(6);
    std::size_t used = 0;
    double m = 0;
    try {
      m = std::stod(v, &used);
    } catch (const std::exception&) {
      used = 0;
    }
    if (used != v.size() || !(m > 0)) throw InputError("--keyframe-thresh fixed:<m> needs a positive distance");
    cfg.fixed_keyframe_thresh = m;
  } else {
    throw InputError("--keyframe-thresh must be 'adaptive' or 'fixed:<m>'");
  }
  try {
    cfg.validate();
  } catch (const std::invalid_argument& e) {
    throw InputError(e.what());
  }
  return cfg;
}

/// IMU samples inside the stationary calibration window that opens with the first scan.
inline std::vector<ImuMeasurement> calibration_window(const std::vector<ImuMeasurement>& imu,
                                                      double first_stamp, double length) {
  std::vector<ImuMeasurement> out;
  for (const auto& m : imu) {
    if (m.stamp <= first_stamp + length + 1e-9) out.push_back(m);
  }
  return out;
}

struct OdomRun {
  std::vector<TrajectoryRecord> trajectory;
  std::vector<ScanDiagnostics> diagnostics;
  PointCloud map;
};

/**
 * @brief Feeds `count` scans from `scan_at` through a fresh pipeline.
 *
 * The IMU is calibrated on the window starting at the first scan stamp when
 * the configuration uses it. Without `initial` the pipeline starts at the
 * identity, or at the gravity-aligned attitude when that is enabled.
 */
template <typename ScanAt>
OdomRun run_odometry(const OdometryConfig& cfg, std::size_t count, ScanAt&& scan_at,
                     const std::vector<ImuMeasurement>& imu, const std::optional<Pose>& initial) {
  Odometry odom(cfg);
  if (count == 0) throw InputError("sequence has no scans");
  PointCloud first = scan_at(std::size_t{0});
  if (cfg.use_imu || cfg.gravity_align) {
    const auto window = calibration_window(imu, first.stamp, cfg.imu_calib_time);
    try {
      odom.initialize_imu(window);
    } catch (const std::invalid_argument& e) {
      throw InputError(std::string("IMU initialization: ") + e.what());
    }
  }
  if (initial) odom.set_initial_pose(*initial);
  const std::span<const ImuMeasurement> imu_span(imu);
  odom.process_scan(first, cfg.use_imu ? imu_span : std::span<const ImuMeasurement>{});
  for (std::size_t k = 1; k < count; ++k) {
    odom.process_scan(scan_at(k), cfg.use_imu ? imu_span : std::span<const ImuMeasurement>{});
  }
  return {odom.trajectory(), odom.diagnostics(), odom.map()};
}

/// Seed recorded by `synth` next to a generated sequence, if any.
inline json sequence_seed(const fs::path& input) {
  const fs::path m = input / kRunManifest;
  if (!fs::exists(m)) return nullptr;
  const json j = read_json(m);
  return j.contains("seed") ? j["seed"] : json(nullptr);
}

inline int odom_with(const OdometryConfig& cfg, const fs::path& input, const fs::path& output,
                     const std::optional<Pose>& initial, const json& provenance, bool timing,
                     std::ostream& log) {
  if (!fs::is_directory(input)) throw InputError("input sequence directory not found: " + input.string());
  const io::ScanSequence seq = io::read_scan_manifest(input);
  std::vector<ImuMeasurement> imu;
  const fs::path imu_path = input / sim::kImuFile;
  if (fs::exists(imu_path)) {
    imu = io::read_imu_csv(imu_path);
  } else if (cfg.use_imu) {
    throw InputError("missing " + imu_path.string() + " (use --no-imu to run without it)");
  }

  fs::create_directories(output);
  json manifest = provenance;
  manifest["tool"] = "dlo";
  manifest["version"] = DLO_VERSION;
  manifest["command"] = "odom";
  manifest["seed"] = sequence_seed(input);
  manifest["inputs"]["sequence"] = absolute_string(input);
  manifest["config"] = json::array();
  std::istringstream lines(config_to_string(cfg));
  for (std::string line; std::getline(lines, line);) manifest["config"].push_back(line);
  manifest["initial_pose"] = pose_json(initial);
  manifest["timing"] = timing;
  manifest["outputs"] = {{"trajectory", kTrajectoryFile},
                         {"map", kMapFile},
                         {"counters", kCountersFile},
                         {"manifest", kRunManifest}};
  write_json(output / kRunManifest, manifest);

  for (const auto& s : seq.scans) {
    if (!fs::exists(input / s.filename)) throw InputError("missing scan file " + (input / s.filename).string());
  }
  const OdomRun run = run_odometry(cfg, seq.scans.size(), [&](std::size_t i) { return seq.load(i); },
                                   imu, initial);
  io::write_trajectory_tum(output / kTrajectoryFile, run.trajectory);
  io::write_ply(output / kMapFile, run.map);
  const eval::CounterReport counters = eval::instrument_counters(run.diagnostics);
  eval::write_counters_csv(output / kCountersFile, counters, timing);

  const auto& t = counters.totals;
  log << "scans " << t.scans << ", keyframes " << t.keyframes << ", dropped " << t.dropped
      << ", tree builds " << t.tree_builds() << ", covariance computations "
      << t.covariance_computations << ", mean " << t.mean_wall_ms() << " ms/scan\n";
  return kExitOk;
}

inline std::optional<Pose> initial_pose_from(const fs::path& tum) {
  if (tum.empty()) return std::nullopt;
  if (!fs::exists(tum)) throw InputError("initial pose file not found: " + tum.string());
  const auto records = io::read_trajectory_tum(tum);
  if (records.empty()) throw InputError(tum.string() + ": no poses");
  return records.front().pose;
}

inline int cmd_odom(const OdomOptions& o, std::ostream& log, std::ostream& err) {
  return guarded(err, [&] {
    const OdometryConfig cfg = resolve_config(o);
    json provenance;
    provenance["inputs"]["config"] = o.config.empty() ? json(nullptr) : json(absolute_string(o.config));
    provenance["inputs"]["initial_pose"] =
        o.initial_pose.empty() ? json(nullptr) : json(absolute_string(o.initial_pose));
    return odom_with(cfg, o.input, o.output, initial_pose_from(o.initial_pose), provenance, o.timing, log);
  });
}

/// Re-runs the odometry recorded in an earlier run manifest into `output`.
inline int cmd_replay(const fs::path& manifest_path, const fs::path& output, std::ostream& log,
                      std::ostream& err) {
  return guarded(err, [&] {
    const json m = read_json(manifest_path);
    if (m.value("command", "") != "odom") throw InputError(manifest_path.string() + ": not an odom run manifest");
    std::string text;
    for (const auto& line : m.at("config")) text += line.get<std::string>() + "\n";
    const OdometryConfig cfg = parse_config_string(text);
    json provenance;
    provenance["inputs"] = m.at("inputs");
    provenance["replayed_from"] = absolute_string(manifest_path);
    return odom_with(cfg, m.at("inputs").at("sequence").get<std::string>(), output,
                     json_pose(m.at("initial_pose")), provenance, m.value("timing", true), log);
  });
}

// ---------------------------------------------------------------------------
// synth
// ---------------------------------------------------------------------------

struct SynthOptions {
  std::string scenario;  ///< built-in name or path to a JSON spec
  fs::path output;
  std::uint64_t seed = 1;
  fs::path save_spec;  ///< also write the resolved spec here
};

inline sim::ScenarioSpec resolve_scenario(const std::string& what) {
  if (auto s = sim::builtin_scenario(what)) return *s;
  const fs::path p(what);
  if (p.extension() == ".json" || fs::exists(p)) {
    if (!fs::exists(p)) throw InputError("scenario spec not found: " + what);
    try {
      return sim::load_scenario(p);
    } catch (const std::invalid_argument& e) {
      throw InputError(e.what());
    }
  }
  std::string names;
  for (const auto& n : sim::scenario_names()) names += (names.empty() ? "" : ", ") + n;
  throw InputError("unknown scenario '" + what + "' (built-in: " + names + ")");
}

inline int cmd_synth(const SynthOptions& o, std::ostream& log, std::ostream& err) {
  return guarded(err, [&] {
    const sim::ScenarioSpec spec = resolve_scenario(o.scenario);
    fs::create_directories(o.output);
    json manifest;
    manifest["tool"] = "dlo";
    manifest["version"] = DLO_VERSION;
    manifest["command"] = "synth";
    manifest["seed"] = o.seed;
    manifest["scenario"] = sim::scenario_to_json(spec);
    manifest["outputs"] = {{"manifest", io::kManifestName},
                           {"imu", sim::kImuFile},
                           {"ground_truth", sim::kGroundTruthFile}};
    write_json(o.output / kRunManifest, manifest);
    if (!o.save_spec.empty()) sim::save_scenario(o.save_spec, spec);

    sim::SyntheticSequence seq;
    try {
      seq = spec.generate(o.seed);
    } catch (const sim::OutOfBounds& e) {
      throw InputError(e.what());
    } catch (const std::invalid_argument& e) {
      throw InputError(e.what());
    }
    sim::write_sequence(o.output, seq);
    log << spec.name << ": " << seq.scans.size() << " scans, " << seq.imu.size() << " IMU samples\n";
    return kExitOk;
  });
}

// ---------------------------------------------------------------------------
// eval
// ---------------------------------------------------------------------------

struct EvalOptions {
  fs::path estimate;
  fs::path reference;
  bool align = false;
  double max_dt = 0.01;
  fs::path output;  ///< report directory; nothing is written when empty
};

inline int cmd_eval(const EvalOptions& o, std::ostream& log, std::ostream& err) {
  return guarded(err, [&] {
    for (const auto& p : {o.estimate, o.reference}) {
      if (!fs::exists(p)) throw InputError("file not found: " + p.string());
    }
    if (!(o.max_dt >= 0)) throw InputError("--max-dt must be >= 0");
    const auto est = io::read_trajectory_tum(o.estimate);
    const auto ref = io::read_trajectory_tum(o.reference);
    const eval::Association a = eval::associate(est, ref, o.max_dt);
    if (a.pairs.empty()) throw InputError(a.warning);
    const eval::ApeReport r = eval::ape(a.pairs, o.align);
    log << "pairs " << r.count << " (unmatched " << a.unmatched << ")\n"
        << io::detail::fmt("max %.6f", r.max) << io::detail::fmt("  mean %.6f", r.mean)
        << io::detail::fmt("  std %.6f", r.std) << io::detail::fmt("  rmse %.6f", r.rmse) << '\n';
    if (!o.output.empty()) {
      fs::create_directories(o.output);
      eval::write_ape_report_csv(o.output / kApeReportFile, r);
      eval::write_per_pose_errors_csv(o.output / kPerPoseFile, r);
    }
    return kExitOk;
  });
}

// ---------------------------------------------------------------------------
// bench
// ---------------------------------------------------------------------------

struct BenchOptions {
  fs::path source;
  fs::path target;
  std::size_t repetitions = 100;
  fs::path output;  ///< CSV path; nothing is written when empty
};

inline constexpr const char* kBenchHeader =
    "mode,repetition,build_ms,align_ms,total_ms,iterations,tree_builds,covariance_computations";

struct BenchRow {
  std::string mode;
  std::size_t repetition = 0;
  double build_ms = 0;
  double align_ms = 0;
  std::size_t iterations = 0;
  std::size_t tree_builds = 0;
  std::size_t covariance_computations = 0;
};

/**
 * @brief Times scan-to-scan alignment with and without structure reuse.
 *
 * In `reuse` mode the target structures come from the previous solver's
 * source, so each repetition builds only the source side. In `rebuild` mode
 * both sides are built every repetition.
 */
inline std::vector<BenchRow> run_bench(const PointCloud& source, const PointCloud& target,
                                       std::size_t repetitions, const GicpConfig& gicp = {}) {
  using Clock = std::chrono::steady_clock;
  auto ms = [](Clock::duration d) { return std::chrono::duration<double, std::milli>(d).count(); };
  const auto src = std::make_shared<const PointCloud>(source);
  const auto tgt = std::make_shared<const PointCloud>(target);

  NanoGicp donor(gicp);
  donor.set_source(tgt);

  std::vector<BenchRow> rows;
  for (std::size_t r = 0; r < repetitions; ++r) {
    for (const bool reuse : {true, false}) {
      NanoGicp solver(gicp);
      const auto t0 = Clock::now();
      solver.set_source(src);
      if (reuse) {
        swap_reuse(donor, solver);
      } else {
        solver.set_target(tgt);
      }
      const auto t1 = Clock::now();
      const AlignmentResult res = solver.align(Pose::identity());
      const auto t2 = Clock::now();
      rows.push_back({reuse ? "reuse" : "rebuild", r, ms(t1 - t0), ms(t2 - t1), res.iterations,
                      solver.stats().tree_builds, solver.stats().covariance_computations});
    }
  }
  return rows;
}

inline std::string encode_bench_csv(const std::vector<BenchRow>& rows) {
  using io::detail::fmt;
  std::string out = std::string(kBenchHeader) + "\n";
  for (const auto& r : rows) {
    out += r.mode + "," + std::to_string(r.repetition) + "," + fmt("%.4f", r.build_ms) + "," +
           fmt("%.4f", r.align_ms) + "," + fmt("%.4f", r.build_ms + r.align_ms) + "," +
           std::to_string(r.iterations) + "," + std::to_string(r.tree_builds) + "," +
           std::to_string(r.covariance_computations) + "\n";
  }
  return out;
}

struct TimingSummary {
  double mean = 0, median = 0, p95 = 0;
};

/// Nearest-rank percentiles over the total per-repetition time.
inline TimingSummary summarize(std::vector<double> v) {
  TimingSummary s;
  if (v.empty()) return s;
  std::sort(v.begin(), v.end());
  for (double x : v) s.mean += x;
  s.mean /= static_cast<double>(v.size());
  auto rank = [&](double q) {
    const auto k = static_cast<std::size_t>(std::ceil(q * static_cast<double>(v.size())));
    return v[std::clamp<std::size_t>(k, 1, v.size()) - 1];
  };
  s.median = rank(0.5);
  s.p95 = rank(0.95);
  return s;
}

inline int cmd_bench(const BenchOptions& o, std::ostream& log, std::ostream& err) {
  return guarded(err, [&] {
    if (o.repetitions == 0) throw InputError("--repetitions must be >= 1");
    for (const auto& p : {o.source, o.target}) {
      if (!fs::exists(p)) throw InputError("file not found: " + p.string());
    }
    const OdometryConfig cfg;
    PointCloud source, target;
    try {
      source = preprocess(io::read_cloud(o.source), cfg);
      target = preprocess(io::read_cloud(o.target), cfg);
    } catch (const ScanRejected& e) {
      throw InputError(e.what());
    }
    const auto rows = run_bench(source, target, o.repetitions, cfg.gicp_s2s);
    if (!o.output.empty()) {
      if (o.output.has_parent_path()) fs::create_directories(o.output.parent_path());
      io::detail::write_file(o.output, encode_bench_csv(rows));
    }
    for (const char* mode : {"reuse", "rebuild"}) {
      std::vector<double> total;
      double iters = 0;
      std::size_t builds = 0;
      for (const auto& r : rows) {
        if (r.mode != mode) continue;
        total.push_back(r.build_ms + r.align_ms);
        iters += static_cast<double>(r.iterations);
        builds += r.tree_builds;
      }
      const TimingSummary s = summarize(total);
      log << mode << io::detail::fmt(": mean %.3f ms", s.mean) << io::detail::fmt(", median %.3f ms", s.median)
          << io::detail::fmt(", p95 %.3f ms", s.p95)
          << io::detail::fmt(", iterations %.2f", iters / static_cast<double>(total.size()))
          << ", tree builds " << builds << '\n';
    }
    return kExitOk;
  });
}

}  // namespace dlo::cli
