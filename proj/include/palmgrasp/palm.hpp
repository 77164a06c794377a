#pragma once

#include <cmath>

#include "palmgrasp/errors.hpp"

namespace palmgrasp {

/// Half-width of the palm-frame perceptual workspace (X, Y in [-12, 12] mm).
inline constexpr double kWorkspaceHalfWidth = 12.0;

/// Dome-shaped tactile skin at the palm. The dome faces down; its apex is the
/// palm pose origin and the skin rises by sag(r) at in-plane radius r.
struct PalmGeometry {
    double skin_diameter = 40.0;       // mm
    double dome_radius = 41.5;         // mm, radius of curvature
    double membrane_thickness = 5.0;   // mm
    double max_depth = 4.0;            // mm, thickness minus 1 mm protection margin
    int n_rings = 6;

    double skin_radius() const { return 0.5 * skin_diameter; }

    double sag(double r) const { return dome_radius - std::sqrt(dome_radius * dome_radius - r * r); }

    /// 1 + 6 + 12 + ... + 6n.
    int marker_count() const { return 1 + 3 * n_rings * (n_rings + 1); }

    void validate() const {
        if (!(skin_diameter > 0) || !(dome_radius > 0) || !(membrane_thickness > 1.0))
            throw InvalidConfig("palm geometry dimensions must be positive (thickness > 1 mm)");
        if (2.0 * dome_radius < skin_diameter)
            throw InvalidConfig("dome radius too small for the skin diameter");
        if (max_depth != membrane_thickness - 1.0)
            throw InvalidConfig("max_depth must equal membrane_thickness - 1");
        if (n_rings < 1) throw InvalidConfig("n_rings must be >= 1");
    }

    static PalmGeometry with_thickness(double thickness) {
        PalmGeometry g;
        g.membrane_thickness = thickness;
        g.max_depth = thickness - 1.0;
        return g;
    }
};

}  // namespace palmgrasp
