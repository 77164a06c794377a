#pragma once

#include "palmgrasp/geometry.hpp"
#include "palmgrasp/random.hpp"

namespace palmgrasp {

/// Contact pose ranges per feature class: X, Y in [-12, 12] mm, yaw over the
/// class's symmetry range, contact depth 3 +/- 1 mm.
struct PoseRanges {
    double half_width = kWorkspaceHalfWidth;  // mm
    double reference_depth = 3.0;             // mm
    double depth_jitter = 1.0;                // mm
    /// Edged objects only: extends the sampled edge distance beyond the
    /// workspace to (half_width + flat_extension], covering flat-surface contacts.
    double flat_extension = 0.0;
};

/// Object pose in the palm frame (z = 0) that places the contacted feature at
/// a uniformly random label within `ranges`.
Pose random_feature_pose(const ShapeSpec& shape, Rng& rng, const PoseRanges& ranges = {});

/// Object pose in the palm frame (z = 0) realizing the given label. Fields a
/// class does not use are ignored; `along` slides the object along the edge
/// (prisms) and is clamped so the labelled edge stays the nearest one.
Pose place_feature(const ShapeSpec& shape, double x, double y, double yaw, double along = 0.0);

}  // namespace palmgrasp
