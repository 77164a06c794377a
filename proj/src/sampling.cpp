#include "palmgrasp/sampling.hpp"

#include <algorithm>
#include <cmath>

namespace palmgrasp {

Pose place_feature(const ShapeSpec& shape, double x, double y, double yaw, double along) {
    switch (shape.shape_class()) {
        case ShapeClass::Hemisphere: return {x, y, 0.0, 0.0};
        case ShapeClass::Ellipsoid: return {x, y, 0.0, fold90(yaw)};
        case ShapeClass::LateralCylinder: {
            const double phi = fold90(yaw);
            const Vec2 n(-std::sin(deg2rad(phi)), std::cos(deg2rad(phi)));
            const Vec2 c = y * n;
            return {c.x(), c.y(), 0.0, phi};
        }
        case ShapeClass::EdgedFlat: {
            const double theta = wrap180(yaw);
            const Vec2 u(std::cos(deg2rad(theta)), std::sin(deg2rad(theta)));
            if (const auto* d = std::get_if<EdgedDisk>(&shape.variant())) {
                const Vec2 c = (x - 0.5 * d->diameter) * u;
                return {c.x(), c.y(), 0.0, 0.0};
            }
            const auto& b = std::get<EdgedPrism>(shape.variant());
            // Label the local +X face; its outward normal maps to `theta`.
            const double hx = 0.5 * b.width, hy = 0.5 * b.depth;
            const double slack = std::max(0.0, hy - std::max(x, 0.0) - 1.0);
            const Vec2 p(hx - x, std::clamp(along, -slack, slack));  // palm centre, object frame
            const Vec2 c = -rotate(p, theta);
            return {c.x(), c.y(), 0.0, theta};
        }
    }
    return {};
}

Pose random_feature_pose(const ShapeSpec& shape, Rng& rng, const PoseRanges& r) {
    const double w = r.half_width;
    switch (shape.shape_class()) {
        case ShapeClass::Hemisphere: {
            const double x = rng.uniform(-w, w);
            const double y = rng.uniform(-w, w);
            return place_feature(shape, x, y, 0.0);
        }
        case ShapeClass::Ellipsoid: {
            const double x = rng.uniform(-w, w);
            const double y = rng.uniform(-w, w);
            const double yaw = rng.uniform(-90.0, 90.0);
            return place_feature(shape, x, y, yaw);
        }
        case ShapeClass::LateralCylinder: {
            const double y = rng.uniform(-w, w);
            const double yaw = rng.uniform(-90.0, 90.0);
            return place_feature(shape, 0.0, y, yaw);
        }
        case ShapeClass::EdgedFlat: {
            const double x = rng.uniform(-w, w + r.flat_extension);
            const double yaw = rng.uniform(-180.0, 180.0);
            const double along = rng.uniform(-1.0, 1.0);
            double slack = 0.0;
            if (const auto* b = std::get_if<EdgedPrism>(&shape.variant()))
                slack = std::max(0.0, 0.5 * b->depth - std::max(x, 0.0) - 1.0);
            return place_feature(shape, x, 0.0, yaw, along * slack);
        }
    }
    return {};
}

}  // namespace palmgrasp
