#pragma once

#include <cmath>
#include <functional>
#include <istream>
#include <map>
#include <sstream>
#include <stdexcept>
#include <string>

#include "dlo/nano_gicp.hpp"

namespace dlo {

enum class SubmapMode { keyframe, radius };

inline const char* to_string(SubmapMode m) { return m == SubmapMode::keyframe ? "keyframe" : "radius"; }

/// Pipeline parameters. Field names double as configuration file keys.
struct OdometryConfig {
  double voxel_leaf = 0.25;       ///< [m]
  double box_half_extent = 0.5;   ///< [m] self-return box, removal inclusive
  double alpha = 0.95;            ///< spaciousness smoothing, previous value
  double beta = 0.05;             ///< spaciousness smoothing, new sample
  double rot_keyframe_thresh = 30.0;  ///< [deg]
  double fixed_keyframe_thresh = 0.0; ///< [m]; 0 selects the adaptive threshold
  std::size_t submap_knn = 10;    ///< K nearest keyframes
  std::size_t submap_hull = 10;   ///< L nearest convex-hull keyframes
  SubmapMode submap_mode = SubmapMode::keyframe;
  double submap_radius = 10.0;    ///< [m] radius mode only
  bool use_imu = true;
  bool gravity_align = false;
  double imu_calib_time = 1.0;    ///< [s] stationary window for the gyro bias
  bool recycle = true;            ///< share trees/covariances between solvers
  double sensor_period = 0.1;     ///< [s] used for late-scan accounting
  bool drop_late_scans = false;   ///< actually skip late scans (timing dependent)
  GicpConfig gicp_s2s{};
  GicpConfig gicp_s2m = [] {
    GicpConfig c;
    c.max_corr_dist = 0.5;
    return c;
  }();

  void validate() const {
    auto positive = [](double v) { return v > 0.0 && std::isfinite(v); };
    if (!positive(voxel_leaf) || !positive(box_half_extent) || !positive(rot_keyframe_thresh) ||
        !positive(submap_radius) || !positive(sensor_period) || !(imu_calib_time > 0.0) ||
        fixed_keyframe_thresh < 0.0) {
      throw std::invalid_argument("OdometryConfig: thresholds must be positive");
    }
    if (!(alpha >= 0.0 && beta > 0.0) || std::abs(alpha + beta - 1.0) > 1e-12) {
      throw std::invalid_argument("OdometryConfig: alpha + beta must equal 1");
    }
    if (submap_knn + submap_hull == 0) {
      throw std::invalid_argument("OdometryConfig: submap needs at least one keyframe");
    }
    gicp_s2s.validate();
    gicp_s2m.validate();
  }
};

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

namespace detail {

template <typename Fn>
void for_each_config_field(OdometryConfig& c, Fn&& fn) {
  fn("voxel_leaf", c.voxel_leaf);
  fn("box_half_extent", c.box_half_extent);
  fn("alpha", c.alpha);
  fn("beta", c.beta);
  fn("rot_keyframe_thresh", c.rot_keyframe_thresh);
  fn("fixed_keyframe_thresh", c.fixed_keyframe_thresh);
  fn("submap_knn", c.submap_knn);
  fn("submap_hull", c.submap_hull);
  fn("submap_mode", c.submap_mode);
  fn("submap_radius", c.submap_radius);
  fn("use_imu", c.use_imu);
  fn("gravity_align", c.gravity_align);
  fn("imu_calib_time", c.imu_calib_time);
  fn("recycle", c.recycle);
  fn("sensor_period", c.sensor_period);
  fn("drop_late_scans", c.drop_late_scans);
  for (auto [prefix, g] : {std::pair<const char*, GicpConfig*>{"gicp_s2s.", &c.gicp_s2s},
                           std::pair<const char*, GicpConfig*>{"gicp_s2m.", &c.gicp_s2m}}) {
    const std::string p = prefix;
    fn(p + "k_correspondences", g->k_correspondences);
    fn(p + "max_corr_dist", g->max_corr_dist);
    fn(p + "max_iterations", g->max_iterations);
    fn(p + "trans_eps", g->trans_eps);
    fn(p + "rot_eps", g->rot_eps);
    fn(p + "plane_eps", g->plane_eps);
  }
}

inline void parse_value(const std::string& text, double& out) {
  std::size_t used = 0;
  out = std::stod(text, &used);
  if (used != text.size() || !std::isfinite(out)) throw std::invalid_argument(text);
}
inline void parse_value(const std::string& text, std::size_t& out) {
  if (text.empty() || text[0] == '-') throw std::invalid_argument(text);
  std::size_t used = 0;
  out = std::stoull(text, &used);
  if (used != text.size()) throw std::invalid_argument(text);
}
inline void parse_value(const std::string& text, bool& out) {
  if (text == "true" || text == "1") out = true;
  else if (text == "false" || text == "0") out = false;
  else throw std::invalid_argument(text);
}
inline void parse_value(const std::string& text, SubmapMode& out) {
  if (text == "keyframe") out = SubmapMode::keyframe;
  else if (text == "radius") out = SubmapMode::radius;
  else throw std::invalid_argument(text);
}

inline std::string format_value(double v) {
  std::ostringstream os;
  os.precision(17);
  os << v;
  return os.str();
}
inline std::string format_value(std::size_t v) { return std::to_string(v); }
inline std::string format_value(bool v) { return v ? "true" : "false"; }
inline std::string format_value(SubmapMode v) { return to_string(v); }

inline std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

}  // namespace detail

/**
 * @brief Reads a flat `key = value` configuration.
 *
 * One pair per line, `#` starts a comment, blank lines are ignored. Keys not
 * listed in the config are rejected. Values start from `base`.
 */
inline OdometryConfig parse_config(std::istream& in, OdometryConfig base = {}) {
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    line = detail::trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw ConfigError("config line " + std::to_string(lineno) + ": expected key = value");
    }
    const std::string key = detail::trim(line.substr(0, eq));
    const std::string value = detail::trim(line.substr(eq + 1));
    bool found = false;
    detail::for_each_config_field(base, [&](const std::string& name, auto& field) {
      if (name != key) return;
      found = true;
      try {
        detail::parse_value(value, field);
      } catch (const std::exception&) {
        throw ConfigError("config line " + std::to_string(lineno) + ": bad value '" + value +
                          "' for " + key);
      }
    });
    if (!found) {
      throw ConfigError("config line " + std::to_string(lineno) + ": unknown key '" + key + "'");
    }
  }
  try {
    base.validate();
  } catch (const std::invalid_argument& e) {
    throw ConfigError(e.what());
  }
  return base;
}

inline OdometryConfig parse_config_string(const std::string& text, OdometryConfig base = {}) {
  std::istringstream in(text);
  return parse_config(in, std::move(base));
}

/// Serializes every field in `key = value` form, readable by parse_config.
inline std::string config_to_string(OdometryConfig cfg) {
  std::ostringstream os;
  detail::for_each_config_field(cfg, [&](const std::string& name, auto& field) {
    os << name << " = " << detail::format_value(field) << '\n';
  });
  return os.str();
}

}  // namespace dlo
