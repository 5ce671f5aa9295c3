#pragma once

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <numbers>
#include <optional>
#include <random>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "json.hpp"

#include "dlo/sim/environment.hpp"
#include "dlo/sim/sequence.hpp"
#include "dlo/sim/trajectory.hpp"

namespace dlo::sim {

/// Everything needed to regenerate a synthetic sequence, apart from the seed.
struct ScenarioSpec {
  std::string name;
  Environment environment;
  TrajectorySpec trajectory;
  SensorModel sensor;
  ImuNoise imu_noise;

  [[nodiscard]] SyntheticSequence generate(std::uint64_t seed) const {
    return generate_sequence(environment, trajectory, sensor, seed, imu_noise);
  }
};

namespace detail {

inline constexpr double kDeg = std::numbers::pi / 180.0;

/// Uniform draws in [lo, hi) from a fixed stream; keeps scenarios stdlib-independent.
class Layout {
 public:
  explicit Layout(std::uint64_t seed) : rng_(seed) {}
  double uniform(double lo, double hi) {
    return lo + (hi - lo) * (static_cast<double>(rng_() >> 11) * 0x1.0p-53);
  }

 private:
  std::mt19937_64 rng_;
};

/// Pillars along a wall running parallel to x at y = wall_y, protruding by `depth`
/// towards `inward` (+1 or -1), between x0 and x1 at irregular spacing.
inline void wall_pillars_x(Environment& env, Layout& rng, double x0, double x1, double wall_y,
                           double inward, double z0, double z1, double depth = 0.4) {
  double x = x0 + rng.uniform(1.0, 4.0);
  while (x + 1.0 < x1) {
    const double w = rng.uniform(0.3, 0.9);
    const double d = depth * rng.uniform(0.6, 1.4);
    const double ya = wall_y, yb = wall_y + inward * d;
    env.add_block({x, std::min(ya, yb), z0}, {x + w, std::max(ya, yb), z1});
    x += w + rng.uniform(2.5, 7.0);
  }
}

/// Same as wall_pillars_x for a wall parallel to y at x = wall_x.
inline void wall_pillars_y(Environment& env, Layout& rng, double y0, double y1, double wall_x,
                           double inward, double z0, double z1, double depth = 0.4) {
  double y = y0 + rng.uniform(1.0, 4.0);
  while (y + 1.0 < y1) {
    const double w = rng.uniform(0.3, 0.9);
    const double d = depth * rng.uniform(0.6, 1.4);
    const double xa = wall_x, xb = wall_x + inward * d;
    env.add_block({std::min(xa, xb), y, z0}, {std::max(xa, xb), y + w, z1});
    y += w + rng.uniform(2.5, 7.0);
  }
}

/// Ceiling cross-beams spanning y0..y1 between x0 and x1 at irregular spacing.
inline void ceiling_beams_x(Environment& env, Layout& rng, double x0, double x1, double y0,
                            double y1, double ceiling) {
  double x = x0 + rng.uniform(0.5, 2.0);
  while (x + 0.5 < x1) {
    const double w = rng.uniform(0.2, 0.5);
    env.add_block({x, y0, ceiling - rng.uniform(0.25, 0.5)}, {x + w, y1, ceiling});
    x += w + rng.uniform(1.5, 4.0);
  }
}

/// Same as ceiling_beams_x for beams spanning x0..x1, spaced along y.
inline void ceiling_beams_y(Environment& env, Layout& rng, double y0, double y1, double x0,
                            double x1, double ceiling) {
  double y = y0 + rng.uniform(0.5, 2.0);
  while (y + 0.5 < y1) {
    const double w = rng.uniform(0.2, 0.5);
    env.add_block({x0, y, ceiling - rng.uniform(0.25, 0.5)}, {x1, y + w, ceiling});
    y += w + rng.uniform(1.5, 4.0);
  }
}

/// Crates of varying height along a wall parallel to x at y = wall_y.
inline void wall_crates_x(Environment& env, Layout& rng, double x0, double x1, double wall_y,
                          double inward, double floor) {
  double x = x0 + rng.uniform(0.5, 3.0);
  while (x + 1.0 < x1) {
    const double w = rng.uniform(0.4, 1.2);
    const double d = rng.uniform(0.3, 0.7);
    const double ya = wall_y, yb = wall_y + inward * d;
    env.add_block({x, std::min(ya, yb), floor}, {x + w, std::max(ya, yb), floor + rng.uniform(0.3, 1.0)});
    x += w + rng.uniform(2.0, 6.0);
  }
}

}  // namespace detail

/// 20 m x 14 m room with crates; short closed loop.
inline ScenarioSpec room_scenario() {
  ScenarioSpec s;
  s.name = "room";
  Environment& env = s.environment;
  env.add_room({-10, -7, 0}, {10, 7, 4});
  env.add_block({-6, 4.5, 0}, {-4.5, 6, 1.2});
  env.add_block({3, -5, 0}, {5, -4, 2.0});
  env.add_block({6, 3, 0}, {7, 6, 3.0});
  env.add_block({-1, -0.5, 0}, {0.5, 0.5, 0.8});
  env.add_block({-9.6, -6.6, 0}, {-8.8, -4.0, 2.5});
  auto& tr = s.trajectory;
  tr.start_position = {-4, -3, 1.2};
  tr.segments = {Segment::pause(1.0),   Segment::straight(8, 1.0),  Segment::arc(1.5, 90 * detail::kDeg, 0.6),
                 Segment::straight(3, 1.0), Segment::arc(1.5, 90 * detail::kDeg, 0.6),
                 Segment::straight(8, 1.0), Segment::arc(1.5, 90 * detail::kDeg, 0.6),
                 Segment::straight(3, 1.0)};
  return s;
}

/// Straight 4 m wide corridor, 200 m of travel, irregular wall pillars.
inline ScenarioSpec corridor_scenario() {
  ScenarioSpec s;
  s.name = "corridor";
  Environment& env = s.environment;
  env.add_room({-6, -2, 0}, {206, 2, 3});
  detail::Layout rng(7);
  detail::wall_pillars_x(env, rng, -6, 206, -2, +1, 0, 3);
  detail::wall_pillars_x(env, rng, -6, 206, 2, -1, 0, 3);
  detail::ceiling_beams_x(env, rng, -6, 206, -2, 2, 3);
  detail::wall_crates_x(env, rng, -6, 206, -2, +1, 0);
  detail::wall_crates_x(env, rng, -6, 206, 2, -1, 0);
  auto& tr = s.trajectory;
  tr.start_position = {0, 0, 1.2};
  tr.segments = {Segment::pause(1.0), Segment::straight(200, 2.0)};
  return s;
}

/// Rectangular ring corridor around a 96 m x 46 m core; about 297 m closed loop.
inline ScenarioSpec loop_scenario() {
  ScenarioSpec s;
  s.name = "loop";
  Environment& env = s.environment;
  env.add_room({-2, -2, 0}, {102, 52, 3});
  env.add_block({2, 2, 0}, {98, 48, 3});
  detail::Layout rng(11);
  detail::wall_pillars_x(env, rng, 2, 98, -2, +1, 0, 3);
  detail::wall_pillars_x(env, rng, 2, 98, 52, -1, 0, 3);
  detail::wall_pillars_x(env, rng, 4, 96, 2, -1, 0, 3);
  detail::wall_pillars_x(env, rng, 4, 96, 48, +1, 0, 3);
  detail::wall_pillars_y(env, rng, 2, 48, -2, +1, 0, 3);
  detail::wall_pillars_y(env, rng, 2, 48, 102, -1, 0, 3);
  detail::wall_pillars_y(env, rng, 4, 46, 2, -1, 0, 3);
  detail::wall_pillars_y(env, rng, 4, 46, 98, +1, 0, 3);
  auto& tr = s.trajectory;
  tr.start_position = {10, 0, 1.2};
  const double v = 2.0, r = 2.0, turn = 90 * detail::kDeg;
  tr.segments = {Segment::pause(1.0),       Segment::straight(88, v), Segment::arc(r, turn, v / r),
                 Segment::straight(46, v),  Segment::arc(r, turn, v / r),
                 Segment::straight(96, v),  Segment::arc(r, turn, v / r),
                 Segment::straight(46, v),  Segment::arc(r, turn, v / r),
                 Segment::straight(8, v)};
  return s;
}

/**
 * @brief Wide hall that funnels into a narrow corridor descending in steps.
 *
 * The hall is 100 m x 60 m x 10 m; the corridor is 3 m wide and drops 0.25 m
 * every 5 m over 50 m.
 */
inline ScenarioSpec ramp_scenario() {
  ScenarioSpec s;
  s.name = "ramp";
  Environment& env = s.environment;
  const double hw = 1.5, step_len = 5.0, drop = 0.25, height = 2.5;
  const int steps = 10;
  // Hall: floor, ceiling, three full walls and an east wall with a doorway.
  env.add_panel({{-50, -30, 0}, {50, 30, 0}});
  env.add_panel({{-50, -30, 10}, {50, 30, 10}});
  env.add_panel({{-50, -30, 0}, {-50, 30, 10}});
  env.add_panel({{-50, -30, 0}, {50, -30, 10}});
  env.add_panel({{-50, 30, 0}, {50, 30, 10}});
  env.add_panel({{50, -30, 0}, {50, -hw, 10}});
  env.add_panel({{50, hw, 0}, {50, 30, 10}});
  env.add_panel({{50, -hw, height}, {50, hw, 10}});
  env.add_block({-30, 12, 0}, {-28, 14, 10});
  env.add_block({-10, -18, 0}, {-8, -16, 10});
  env.add_block({10, 15, 0}, {12, 17, 10});
  env.add_block({28, -12, 0}, {30, -10, 10});
  env.add_block({-20, -4, 0}, {-18.5, -2.5, 1.5});
  env.add_block({20, 3, 0}, {21.5, 4.5, 1.5});
  detail::Layout rng(5);
  for (int j = 0; j < steps; ++j) {
    const double x0 = 50 + step_len * j, x1 = x0 + step_len;
    const double floor = -drop * j, ceil = floor + height;
    env.add_panel({{x0, -hw, floor}, {x1, hw, floor}});
    env.add_panel({{x0, -hw, ceil}, {x1, hw, ceil}});
    env.add_panel({{x0, -hw, floor}, {x1, -hw, ceil}});
    env.add_panel({{x0, hw, floor}, {x1, hw, ceil}});
    if (j > 0) {
      env.add_panel({{x0, -hw, floor}, {x0, hw, floor + drop}});
      env.add_panel({{x0, -hw, ceil}, {x0, hw, ceil + drop}});
    }
    const double px = x0 + rng.uniform(0.5, 3.5);
    const double side = (j % 2 == 0) ? -hw : hw;
    const double d = rng.uniform(0.2, 0.4);
    env.add_block({px, side < 0 ? -hw : hw - d, floor}, {px + 0.5, side < 0 ? -hw + d : hw, ceil});
  }
  const double end_floor = -drop * (steps - 1);
  env.add_panel({{50 + step_len * steps, -hw, end_floor}, {50 + step_len * steps, hw, end_floor + height}});
  auto& tr = s.trajectory;
  tr.start_position = {-40, 0, 1.5};
  tr.segments = {Segment::pause(3.0), Segment::straight(89, 2.0),
                 Segment::straight(48, 1.0, -drop * (steps - 1) * 48.0 / 50.0)};
  return s;
}

/// Room traversal with fast in-place and tight turns (about 90 deg/s).
inline ScenarioSpec spin_scenario() {
  ScenarioSpec s = room_scenario();
  s.name = "spin";
  auto& tr = s.trajectory;
  const double w = 90 * detail::kDeg;
  tr.start_position = {-4, -3, 1.2};
  tr.segments = {Segment::pause(1.0),         Segment::arc(0.0, 360 * detail::kDeg, w),
                 Segment::straight(6, 1.0),   Segment::arc(0.5, 180 * detail::kDeg, w),
                 Segment::arc(0.0, -270 * detail::kDeg, w), Segment::straight(2, 1.0),
                 Segment::arc(1.0, -270 * detail::kDeg, w), Segment::straight(2, 1.0)};
  return s;
}

inline std::vector<std::string> scenario_names() { return {"room", "corridor", "loop", "ramp", "spin"}; }

inline std::optional<ScenarioSpec> builtin_scenario(const std::string& name) {
  if (name == "room") return room_scenario();
  if (name == "corridor") return corridor_scenario();
  if (name == "loop") return loop_scenario();
  if (name == "ramp") return ramp_scenario();
  if (name == "spin") return spin_scenario();
  return std::nullopt;
}

// ---------------------------------------------------------------------------
// JSON
// ---------------------------------------------------------------------------

namespace detail {

using nlohmann::json;

inline json vec_json(const Eigen::Vector3d& v) { return json::array({v.x(), v.y(), v.z()}); }

inline Eigen::Vector3d json_vec(const json& j) {
  if (!j.is_array() || j.size() != 3) throw std::invalid_argument("expected a 3-element array");
  return {j[0].get<double>(), j[1].get<double>(), j[2].get<double>()};
}

inline const char* kind_name(Segment::Kind k) {
  switch (k) {
    case Segment::Kind::straight: return "straight";
    case Segment::Kind::arc: return "arc";
    case Segment::Kind::pause: return "pause";
  }
  return "";
}

}  // namespace detail

inline nlohmann::json scenario_to_json(const ScenarioSpec& s) {
  using detail::json;
  json panels = json::array();
  for (const auto& p : s.environment.panels()) {
    panels.push_back({{"min", detail::vec_json(p.min)}, {"max", detail::vec_json(p.max)}});
  }
  json segments = json::array();
  for (const auto& g : s.trajectory.segments) {
    json j = {{"type", detail::kind_name(g.kind)}};
    switch (g.kind) {
      case Segment::Kind::straight:
        j["length"] = g.length;
        j["speed"] = g.speed;
        j["climb"] = g.climb;
        break;
      case Segment::Kind::arc:
        j["radius"] = g.radius;
        j["angle"] = g.angle;
        j["yaw_rate"] = g.yaw_rate;
        break;
      case Segment::Kind::pause:
        j["duration"] = g.duration;
        break;
    }
    segments.push_back(j);
  }
  const auto& t = s.trajectory;
  return {
      {"name", s.name},
      {"panels", panels},
      {"trajectory",
       {{"start_position", detail::vec_json(t.start_position)},
        {"start_yaw", t.start_yaw},
        {"scan_rate", t.scan_rate},
        {"imu_rate", t.imu_rate},
        {"segments", segments}}},
      {"sensor",
       {{"channels", s.sensor.channels},
        {"azimuth_steps", s.sensor.azimuth_steps},
        {"vertical_fov_deg", s.sensor.vertical_fov_deg},
        {"max_range", s.sensor.max_range},
        {"range_noise", s.sensor.range_noise}}},
      {"imu_noise",
       {{"gyro_sigma", s.imu_noise.gyro_sigma},
        {"gyro_bias", detail::vec_json(s.imu_noise.gyro_bias)},
        {"accel_sigma", s.imu_noise.accel_sigma}}},
  };
}

/// Parses a scenario; missing sensor, noise and rate fields take their defaults.
inline ScenarioSpec scenario_from_json(const nlohmann::json& j) {
  ScenarioSpec s;
  try {
    s.name = j.value("name", std::string("custom"));
    std::vector<Panel> panels;
    for (const auto& p : j.at("panels")) panels.push_back({detail::json_vec(p.at("min")), detail::json_vec(p.at("max"))});
    s.environment = Environment(std::move(panels));
    const auto& t = j.at("trajectory");
    s.trajectory.start_position = detail::json_vec(t.at("start_position"));
    s.trajectory.start_yaw = t.value("start_yaw", 0.0);
    s.trajectory.scan_rate = t.value("scan_rate", 10.0);
    s.trajectory.imu_rate = t.value("imu_rate", 100.0);
    for (const auto& g : t.at("segments")) {
      const std::string type = g.at("type").get<std::string>();
      if (type == "straight") {
        s.trajectory.segments.push_back(
            Segment::straight(g.at("length").get<double>(), g.at("speed").get<double>(), g.value("climb", 0.0)));
      } else if (type == "arc") {
        s.trajectory.segments.push_back(Segment::arc(g.at("radius").get<double>(), g.at("angle").get<double>(),
                                                     g.at("yaw_rate").get<double>()));
      } else if (type == "pause") {
        s.trajectory.segments.push_back(Segment::pause(g.at("duration").get<double>()));
      } else {
        throw std::invalid_argument("unknown segment type '" + type + "'");
      }
    }
    if (j.contains("sensor")) {
      const auto& c = j["sensor"];
      s.sensor.channels = c.value("channels", s.sensor.channels);
      s.sensor.azimuth_steps = c.value("azimuth_steps", s.sensor.azimuth_steps);
      s.sensor.vertical_fov_deg = c.value("vertical_fov_deg", s.sensor.vertical_fov_deg);
      s.sensor.max_range = c.value("max_range", s.sensor.max_range);
      s.sensor.range_noise = c.value("range_noise", s.sensor.range_noise);
    }
    if (j.contains("imu_noise")) {
      const auto& n = j["imu_noise"];
      s.imu_noise.gyro_sigma = n.value("gyro_sigma", 0.0);
      if (n.contains("gyro_bias")) s.imu_noise.gyro_bias = detail::json_vec(n["gyro_bias"]);
      s.imu_noise.accel_sigma = n.value("accel_sigma", 0.0);
    }
    s.trajectory.validate();
    s.sensor.validate();
    s.imu_noise.validate();
  } catch (const nlohmann::json::exception& e) {
    throw std::invalid_argument(std::string("scenario spec: ") + e.what());
  }
  return s;
}

inline ScenarioSpec load_scenario(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw std::invalid_argument(path.string() + ": " + e.what());
  }
  return scenario_from_json(j);
}

inline void save_scenario(const std::filesystem::path& path, const ScenarioSpec& s) {
  io::detail::write_file(path, scenario_to_json(s).dump(2) + "\n");
}

}  // namespace dlo::sim
