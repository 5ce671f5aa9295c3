#pragma once

#include "dlo/geometry.hpp"
#include "dlo/kdtree.hpp"
#include "dlo/nano_gicp.hpp"
#include "dlo/convex_hull.hpp"
#include "dlo/keyframe_submap.hpp"
#include "dlo/odometry/config.hpp"
#include "dlo/odometry/imu.hpp"
#include "dlo/odometry/spaciousness.hpp"
#include "dlo/odometry/pipeline.hpp"
#include "dlo/io/point_cloud_io.hpp"
#include "dlo/io/text_formats.hpp"
#include "dlo/sim/environment.hpp"
#include "dlo/sim/trajectory.hpp"
#include "dlo/sim/sequence.hpp"
#include "dlo/sim/scenarios.hpp"
#include "dlo/eval/metrics.hpp"
