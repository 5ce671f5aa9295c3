#pragma once

#include <algorithm>
#include <stdexcept>
#include <vector>

#include "dlo/geometry.hpp"

namespace dlo {

/// Median distance of the points from the sensor origin. For an even count
/// the lower-middle element (index (n - 1) / 2 after sorting) is used.
inline double median_range(const PointCloud& cloud) {
  if (cloud.empty()) throw std::invalid_argument("median_range: empty cloud");
  std::vector<double> r;
  r.reserve(cloud.size());
  for (const auto& p : cloud.points) r.push_back(p.norm());
  const auto mid = r.begin() + static_cast<std::ptrdiff_t>((r.size() - 1) / 2);
  std::nth_element(r.begin(), mid, r.end());
  return *mid;
}

struct SpaciousnessState {
  double m = 0.0;       ///< smoothed spaciousness [m]
  double last_M = 0.0;  ///< latest median range [m]
};

/// m <- alpha m + beta M with M the median range of `cloud`.
inline SpaciousnessState compute_spaciousness(const PointCloud& cloud, SpaciousnessState state,
                                              double alpha = 0.95, double beta = 0.05) {
  state.last_M = median_range(cloud);
  state.m = alpha * state.m + beta * state.last_M;
  return state;
}

/// Translational keyframe threshold [m] for a spaciousness value [m].
inline double keyframe_threshold(double m) {
  if (m > 20.0) return 10.0;
  if (m > 10.0) return 5.0;
  if (m > 5.0) return 1.0;
  return 0.5;
}

}  // namespace dlo
