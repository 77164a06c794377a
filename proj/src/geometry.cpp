#include "palmgrasp/geometry.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <istream>
#include <limits>
#include <sstream>

#include "palmgrasp/errors.hpp"

namespace palmgrasp {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

template <class... Ts>
struct overloaded : Ts... {
    using Ts::operator()...;
};
template <class... Ts>
overloaded(Ts...) -> overloaded<Ts...>;

double length2(double a, double b) { return std::hypot(a, b); }

// ---- point/ellipse and point/ellipsoid distance ---------------------------
//
// Closest-point projection onto an axis-aligned ellipse/ellipsoid with
// e0 >= e1 (>= e2) and the query point in the first quadrant/octant. The
// root of F(s) = sum (r_i z_i / (s + r_i))^2 - 1 is found by safeguarded
// Newton; F is convex and decreasing to the right of -min(r_i), so Newton
// started at the left bracket end approaches the root monotonically.

constexpr int kMaxRootIterations = 50;
constexpr double kRootTolerance = 1e-9;

template <std::size_t N>
double solve_secular(const std::array<double, N>& r, const std::array<double, N>& z, double lo, double hi) {
    auto eval = [&](double s, double& f, double& df) {
        f = -1.0;
        df = 0.0;
        for (std::size_t i = 0; i < N; ++i) {
            const double q = r[i] * z[i] / (s + r[i]);
            f += q * q;
            df += -2.0 * q * q / (s + r[i]);
        }
    };
    double s = lo;
    for (int it = 0; it < kMaxRootIterations; ++it) {
        double f, df;
        eval(s, f, df);
        if (f == 0.0) return s;
        if (f > 0.0) lo = std::max(lo, s);
        else hi = std::min(hi, s);
        double next = (df < 0.0) ? s - f / df : 0.5 * (lo + hi);
        if (!(next > lo && next < hi)) next = 0.5 * (lo + hi);
        if (std::abs(next - s) <= kRootTolerance * std::max(1.0, std::abs(s))) return next;
        s = next;
    }
    return s;
}

// Distance from (y0, y1), y >= 0, to the ellipse with semi-axes e0 >= e1.
double distance_point_ellipse(double e0, double e1, double y0, double y1) {
    if (y1 > 0.0) {
        if (y0 > 0.0) {
            const double z0 = y0 / e0, z1 = y1 / e1;
            const double g = z0 * z0 + z1 * z1 - 1.0;
            if (g == 0.0) return 0.0;
            const double r0 = (e0 / e1) * (e0 / e1);
            const double lo = z1 - 1.0;
            const double hi = g < 0.0 ? 0.0 : length2(r0 * z0, z1) - 1.0;
            const double s = solve_secular<2>({r0, 1.0}, {z0, z1}, lo, hi);
            const double x0 = r0 * y0 / (s + r0);
            const double x1 = y1 / (s + 1.0);
            return length2(x0 - y0, x1 - y1);
        }
        return std::abs(y1 - e1);
    }
    const double numer0 = e0 * y0;
    const double denom0 = e0 * e0 - e1 * e1;
    if (numer0 < denom0) {
        const double xde0 = numer0 / denom0;
        const double x0 = e0 * xde0;
        const double x1 = e1 * std::sqrt(1.0 - xde0 * xde0);
        return length2(x0 - y0, x1);
    }
    return std::abs(y0 - e0);
}

// Distance from y >= 0 to the ellipsoid with semi-axes e0 >= e1 >= e2.
double distance_point_ellipsoid(double e0, double e1, double e2, double y0, double y1, double y2) {
    if (y2 > 0.0) {
        if (y1 > 0.0) {
            if (y0 > 0.0) {
                const double z0 = y0 / e0, z1 = y1 / e1, z2 = y2 / e2;
                const double g = z0 * z0 + z1 * z1 + z2 * z2 - 1.0;
                if (g == 0.0) return 0.0;
                const double r0 = (e0 / e2) * (e0 / e2);
                const double r1 = (e1 / e2) * (e1 / e2);
                const double lo = z2 - 1.0;
                const double hi =
                    g < 0.0 ? 0.0 : std::sqrt(r0 * z0 * r0 * z0 + r1 * z1 * r1 * z1 + z2 * z2) - 1.0;
                const double s = solve_secular<3>({r0, r1, 1.0}, {z0, z1, z2}, lo, hi);
                const double x0 = r0 * y0 / (s + r0);
                const double x1 = r1 * y1 / (s + r1);
                const double x2 = y2 / (s + 1.0);
                return (Vec3(x0, x1, x2) - Vec3(y0, y1, y2)).norm();
            }
            return distance_point_ellipse(e1, e2, y1, y2);
        }
        if (y0 > 0.0) return distance_point_ellipse(e0, e2, y0, y2);
        return std::abs(y2 - e2);
    }
    const double denom0 = e0 * e0 - e2 * e2;
    const double denom1 = e1 * e1 - e2 * e2;
    const double numer0 = e0 * y0;
    const double numer1 = e1 * y1;
    if (numer0 < denom0 && numer1 < denom1) {
        const double xde0 = numer0 / denom0;
        const double xde1 = numer1 / denom1;
        const double discr = 1.0 - xde0 * xde0 - xde1 * xde1;
        if (discr > 0.0) {
            const double x0 = e0 * xde0, x1 = e1 * xde1, x2 = e2 * std::sqrt(discr);
            return (Vec3(x0 - y0, x1 - y1, x2)).norm();
        }
    }
    return distance_point_ellipse(e0, e1, y0, y1);
}

double ellipsoid_sdf(const Ellipsoid& e, const Vec3& p) {
    std::array<std::pair<double, double>, 3> ax{{{e.a, std::abs(p.x())}, {e.b, std::abs(p.y())}, {e.c, std::abs(p.z())}}};
    std::sort(ax.begin(), ax.end(), [](const auto& l, const auto& r) { return l.first > r.first; });
    const double d =
        distance_point_ellipsoid(ax[0].first, ax[1].first, ax[2].first, ax[0].second, ax[1].second, ax[2].second);
    const double q = (p.x() / e.a) * (p.x() / e.a) + (p.y() / e.b) * (p.y() / e.b) + (p.z() / e.c) * (p.z() / e.c);
    return q < 1.0 ? -d : d;
}

double box_sdf(const Vec3& p, const Vec3& half) {
    const Vec3 q = p.cwiseAbs() - half;
    return q.cwiseMax(0.0).norm() + std::min(q.maxCoeff(), 0.0);
}

// Capped cylinder given radial distance and axial coordinate relative to its centre.
double capped_cylinder_sdf(double radial, double axial, double radius, double half_length) {
    const double dr = radial - radius;
    const double da = std::abs(axial) - half_length;
    return std::min(std::max(dr, da), 0.0) + length2(std::max(dr, 0.0), std::max(da, 0.0));
}

// Ray exits for an inside point. Each returns +inf when the ray never
// crosses that boundary.
constexpr double kInf = std::numeric_limits<double>::infinity();

// Larger root of a t^2 + 2 b t + c = 0 with c <= 0 (point inside the quadric).
double quadric_exit(double a, double b, double c) {
    if (a <= 0.0) return kInf;
    return (-b + std::sqrt(std::max(0.0, b * b - a * c))) / a;
}

double slab_exit(double p, double d, double lo, double hi) {
    if (d > 0.0) return (hi - p) / d;
    if (d < 0.0) return (lo - p) / d;
    return kInf;
}

double ellipsoid_exit(const Vec3& p, const Vec3& d, const Vec3& axes) {
    const Vec3 ps = p.cwiseQuotient(axes), ds = d.cwiseQuotient(axes);
    return quadric_exit(ds.squaredNorm(), ps.dot(ds), ps.squaredNorm() - 1.0);
}

// Infinite circular cylinder through the given axis point along a unit axis.
double cylinder_exit(const Vec3& p, const Vec3& d, const Vec3& axis_point, const Vec3& axis, double r) {
    const Vec3 q = p - axis_point;
    const Vec3 qp = q - q.dot(axis) * axis, dp = d - d.dot(axis) * axis;
    return quadric_exit(dp.squaredNorm(), qp.dot(dp), qp.squaredNorm() - r * r);
}

void require_positive(std::initializer_list<double> dims) {
    for (double d : dims)
        if (!(d > 0.0) || !std::isfinite(d)) throw InvalidShape("shape dimensions must be finite and > 0");
}

// Ties on an inner prism point go to the X faces.
struct EdgeFeature {
    Vec2 normal;      // outward, object frame
    double distance;  // positive when the palm centre is over the face
};

EdgeFeature nearest_edge(const ShapeSpec& shape, const Vec2& p) {
    return std::visit(
        overloaded{
            [&](const EdgedDisk& d) -> EdgeFeature {
                const double r = p.norm();
                const Vec2 n = r > 0.0 ? Vec2(p / r) : Vec2(1.0, 0.0);
                return {n, 0.5 * d.diameter - r};
            },
            [&](const EdgedPrism& b) -> EdgeFeature {
                const double hx = 0.5 * b.width, hy = 0.5 * b.depth;
                if (std::abs(p.x()) <= hx && std::abs(p.y()) <= hy) {
                    const double dx = hx - std::abs(p.x());
                    const double dy = hy - std::abs(p.y());
                    if (dx <= dy) return {Vec2(p.x() < 0.0 ? -1.0 : 1.0, 0.0), dx};
                    return {Vec2(0.0, p.y() < 0.0 ? -1.0 : 1.0), dy};
                }
                const Vec2 q(std::clamp(p.x(), -hx, hx), std::clamp(p.y(), -hy, hy));
                const Vec2 v = p - q;
                const double dist = v.norm();
                return {v / dist, -dist};
            },
            [](const auto&) -> EdgeFeature { throw InvalidShape("shape has no edges"); },
        },
        shape.variant());
}

}  // namespace

double wrap180(double deg) {
    double r = deg - 360.0 * std::floor((deg + 180.0) / 360.0);
    if (r <= -180.0) r += 360.0;
    if (r > 180.0) r -= 360.0;
    return r;
}

double fold90(double deg) {
    double r = deg - 180.0 * std::floor((deg + 90.0) / 180.0);
    if (r <= -90.0) r += 180.0;
    if (r > 90.0) r -= 180.0;
    return r;
}

double fold45(double deg) {
    double r = deg - 90.0 * std::floor((deg + 45.0) / 90.0);
    if (r <= -45.0) r += 90.0;
    if (r > 45.0) r -= 90.0;
    return r;
}

Vec2 rotate(const Vec2& v, double yaw_deg) {
    const double c = std::cos(deg2rad(yaw_deg)), s = std::sin(deg2rad(yaw_deg));
    return {c * v.x() - s * v.y(), s * v.x() + c * v.y()};
}

bool Pose::finite() const {
    return std::isfinite(x) && std::isfinite(y) && std::isfinite(z) && std::isfinite(yaw);
}

Pose Pose::normalized() const { return {x, y, z, wrap180(yaw)}; }

Pose relative_pose(const Pose& object, const Pose& palm) {
    const Vec2 d = rotate(object.xy() - palm.xy(), -palm.yaw);
    return {d.x(), d.y(), object.z - palm.z, wrap180(object.yaw - palm.yaw)};
}

Pose compose(const Pose& palm, const Pose& relative) {
    const Vec2 w = palm.xy() + rotate(relative.xy(), palm.yaw);
    return {w.x(), w.y(), palm.z + relative.z, wrap180(palm.yaw + relative.yaw)};
}

std::string_view to_string(ShapeClass c) {
    switch (c) {
        case ShapeClass::Hemisphere: return "hemisphere";
        case ShapeClass::Ellipsoid: return "ellipsoid";
        case ShapeClass::LateralCylinder: return "lateral_cylinder";
        case ShapeClass::EdgedFlat: return "edged_flat";
    }
    return "?";
}

ShapeClass shape_class_from_string(std::string_view s) {
    for (auto c : {ShapeClass::Hemisphere, ShapeClass::Ellipsoid, ShapeClass::LateralCylinder, ShapeClass::EdgedFlat})
        if (to_string(c) == s) return c;
    throw CatalogParseError("unknown shape class '" + std::string(s) + "'");
}

ShapeSpec::ShapeSpec(Variant v) : v_(std::move(v)) {
    std::visit(overloaded{
                   [](const Hemisphere& h) { require_positive({h.diameter}); },
                   [](const Ellipsoid& e) {
                       require_positive({e.a, e.b, e.c});
                       if (e.a < e.b) throw InvalidShape("ellipsoid requires a >= b (major axis along local X)");
                   },
                   [](const LateralCylinder& c) { require_positive({c.diameter, c.length}); },
                   [](const EdgedPrism& b) { require_positive({b.width, b.depth, b.height}); },
                   [](const EdgedDisk& d) { require_positive({d.diameter, d.height}); },
               },
               v_);
}

ShapeSpec ShapeSpec::parse(std::string_view name, std::span<const double> d) {
    auto need = [&](std::size_t n) {
        if (d.size() != n)
            throw CatalogParseError(std::string(name) + " expects " + std::to_string(n) + " dimensions, got " +
                                    std::to_string(d.size()));
    };
    try {
        if (name == "Hemisphere") return need(1), ShapeSpec(Hemisphere{d[0]});
        if (name == "Ellipsoid") return need(3), ShapeSpec(Ellipsoid{d[0], d[1], d[2]});
        if (name == "LateralCylinder") return need(2), ShapeSpec(LateralCylinder{d[0], d[1]});
        if (name == "EdgedPrism") return need(3), ShapeSpec(EdgedPrism{d[0], d[1], d[2]});
        if (name == "EdgedDisk") return need(2), ShapeSpec(EdgedDisk{d[0], d[1]});
    } catch (const InvalidShape& e) {
        throw CatalogParseError(std::string(name) + ": " + e.what());
    }
    throw CatalogParseError("unknown shape variant '" + std::string(name) + "'");
}

ShapeClass ShapeSpec::shape_class() const {
    return std::visit(overloaded{
                          [](const Hemisphere&) { return ShapeClass::Hemisphere; },
                          [](const Ellipsoid&) { return ShapeClass::Ellipsoid; },
                          [](const LateralCylinder&) { return ShapeClass::LateralCylinder; },
                          [](const auto&) { return ShapeClass::EdgedFlat; },
                      },
                      v_);
}

std::string_view ShapeSpec::variant_name() const {
    static constexpr std::array<std::string_view, 5> names{"Hemisphere", "Ellipsoid", "LateralCylinder",
                                                           "EdgedPrism", "EdgedDisk"};
    return names[v_.index()];
}

std::vector<double> ShapeSpec::dimensions() const {
    return std::visit(overloaded{
                          [](const Hemisphere& h) { return std::vector<double>{h.diameter}; },
                          [](const Ellipsoid& e) { return std::vector<double>{e.a, e.b, e.c}; },
                          [](const LateralCylinder& c) { return std::vector<double>{c.diameter, c.length}; },
                          [](const EdgedPrism& b) { return std::vector<double>{b.width, b.depth, b.height}; },
                          [](const EdgedDisk& d) { return std::vector<double>{d.diameter, d.height}; },
                      },
                      v_);
}

double ShapeSpec::height() const {
    return std::visit(overloaded{
                          [](const Hemisphere& h) { return 0.5 * h.diameter; },
                          [](const Ellipsoid& e) { return e.c; },
                          [](const LateralCylinder& c) { return c.diameter; },
                          [](const EdgedPrism& b) { return b.height; },
                          [](const EdgedDisk& d) { return d.height; },
                      },
                      v_);
}

bool operator==(const ShapeSpec& a, const ShapeSpec& b) {
    return a.v_.index() == b.v_.index() && a.dimensions() == b.dimensions();
}

double sdf(const ShapeSpec& shape, const Vec3& p) {
    return std::visit(overloaded{
                          [&](const Hemisphere& h) { return std::max(p.norm() - 0.5 * h.diameter, -p.z()); },
                          [&](const Ellipsoid& e) { return std::max(ellipsoid_sdf(e, p), -p.z()); },
                          [&](const LateralCylinder& c) {
                              const double r = 0.5 * c.diameter;
                              return capped_cylinder_sdf(length2(p.y(), p.z() - r), p.x(), r, 0.5 * c.length);
                          },
                          [&](const EdgedPrism& b) {
                              return box_sdf(p - Vec3(0, 0, 0.5 * b.height),
                                             Vec3(0.5 * b.width, 0.5 * b.depth, 0.5 * b.height));
                          },
                          [&](const EdgedDisk& d) {
                              return capped_cylinder_sdf(length2(p.x(), p.y()), p.z() - 0.5 * d.height,
                                                         0.5 * d.diameter, 0.5 * d.height);
                          },
                      },
                      shape.variant());
}

double exit_distance(const ShapeSpec& shape, const Vec3& p, const Vec3& d) {
    if (sdf(shape, p) >= 0.0) return 0.0;
    const double t = std::visit(
        overloaded{
            [&](const Hemisphere& h) {
                const double r = 0.5 * h.diameter;
                return std::min(ellipsoid_exit(p, d, Vec3(r, r, r)), slab_exit(p.z(), d.z(), 0.0, kInf));
            },
            [&](const Ellipsoid& e) {
                return std::min(ellipsoid_exit(p, d, Vec3(e.a, e.b, e.c)), slab_exit(p.z(), d.z(), 0.0, kInf));
            },
            [&](const LateralCylinder& c) {
                const double r = 0.5 * c.diameter, hl = 0.5 * c.length;
                return std::min(cylinder_exit(p, d, Vec3(0, 0, r), Vec3::UnitX(), r), slab_exit(p.x(), d.x(), -hl, hl));
            },
            [&](const EdgedPrism& b) {
                return std::min({slab_exit(p.x(), d.x(), -0.5 * b.width, 0.5 * b.width),
                                 slab_exit(p.y(), d.y(), -0.5 * b.depth, 0.5 * b.depth),
                                 slab_exit(p.z(), d.z(), 0.0, b.height)});
            },
            [&](const EdgedDisk& k) {
                return std::min(cylinder_exit(p, d, Vec3::Zero(), Vec3::UnitZ(), 0.5 * k.diameter),
                                slab_exit(p.z(), d.z(), 0.0, k.height));
            },
        },
        shape.variant());
    return std::max(0.0, t);
}

double sdf_world(const ShapeSpec& shape, const Pose& pose, const Vec3& p) {
    const Vec2 local = rotate(Vec2(p.x() - pose.x, p.y() - pose.y), -pose.yaw);
    return sdf(shape, Vec3(local.x(), local.y(), p.z() - pose.z));
}

std::optional<double> surface_height(const ShapeSpec& shape, const Vec2& q) {
    return std::visit(overloaded{
                          [&](const Hemisphere& h) -> std::optional<double> {
                              const double r = 0.5 * h.diameter;
                              const double s = r * r - q.squaredNorm();
                              if (s < 0.0) return std::nullopt;
                              return std::sqrt(s);
                          },
                          [&](const Ellipsoid& e) -> std::optional<double> {
                              const double s = 1.0 - (q.x() / e.a) * (q.x() / e.a) - (q.y() / e.b) * (q.y() / e.b);
                              if (s < 0.0) return std::nullopt;
                              return e.c * std::sqrt(s);
                          },
                          [&](const LateralCylinder& c) -> std::optional<double> {
                              const double r = 0.5 * c.diameter;
                              if (std::abs(q.x()) > 0.5 * c.length || std::abs(q.y()) > r) return std::nullopt;
                              return r + std::sqrt(r * r - q.y() * q.y());
                          },
                          [&](const EdgedPrism& b) -> std::optional<double> {
                              if (std::abs(q.x()) > 0.5 * b.width || std::abs(q.y()) > 0.5 * b.depth)
                                  return std::nullopt;
                              return b.height;
                          },
                          [&](const EdgedDisk& d) -> std::optional<double> {
                              if (q.norm() > 0.5 * d.diameter) return std::nullopt;
                              return d.height;
                          },
                      },
                      shape.variant());
}

std::optional<double> fold_yaw(ShapeClass c, double yaw) {
    switch (c) {
        case ShapeClass::Hemisphere: return std::nullopt;
        case ShapeClass::Ellipsoid:
        case ShapeClass::LateralCylinder: return fold90(yaw);
        case ShapeClass::EdgedFlat: return wrap180(yaw);
    }
    return std::nullopt;
}

FeatureLabel feature_label(const ShapeSpec& shape, const Pose& rel, double margin) {
    FeatureLabel out;
    out.shape_class = shape.shape_class();
    switch (out.shape_class) {
        case ShapeClass::Hemisphere:
            out.x = rel.x;
            out.y = rel.y;
            break;
        case ShapeClass::Ellipsoid:
            out.x = rel.x;
            out.y = rel.y;
            out.yaw = fold90(rel.yaw);
            break;
        case ShapeClass::LateralCylinder: {
            const double phi = fold90(rel.yaw);
            const Vec2 n(-std::sin(deg2rad(phi)), std::cos(deg2rad(phi)));
            out.y = rel.xy().dot(n);
            out.yaw = phi;
            break;
        }
        case ShapeClass::EdgedFlat: {
            // Palm centre in the object frame.
            const Vec2 p = rotate(-rel.xy(), -rel.yaw);
            const EdgeFeature e = nearest_edge(shape, p);
            const Vec2 n_palm = rotate(e.normal, rel.yaw);
            out.x = e.distance;
            out.yaw = wrap180(rad2deg(std::atan2(n_palm.y(), n_palm.x())));
            break;
        }
    }
    const double limit = kWorkspaceHalfWidth + margin;
    if ((out.x && std::abs(*out.x) > limit) || (out.y && std::abs(*out.y) > limit))
        throw FeatureOutOfWorkspace("feature lies outside the palm workspace");
    return out;
}

FeatureLabel relative_feature_pose(const ShapeSpec& shape, const Pose& object_pose, const Pose& palm_pose,
                                   double margin) {
    return feature_label(shape, relative_pose(object_pose, palm_pose), margin);
}

double dome_overlap(const ShapeSpec& shape, const Pose& rel, const PalmGeometry& palm) {
    const double rs = palm.skin_radius();
    auto f = [&](const Vec2& q) {
        if (q.squaredNorm() > rs * rs) return kNegInf;
        const auto h = surface_height(shape, rotate(q - rel.xy(), -rel.yaw));
        if (!h) return kNegInf;
        return *h - palm.sag(q.norm());
    };

    // Coarse grid, then pattern search around the best sample. The grid
    // contains the apex so aligned contacts are evaluated exactly there.
    constexpr double kGrid = 0.5;
    const int n = static_cast<int>(std::floor(rs / kGrid));
    Vec2 best_q(0.0, 0.0);
    double best = f(best_q);
    for (int i = -n; i <= n; ++i) {
        for (int j = -n; j <= n; ++j) {
            const Vec2 q(i * kGrid, j * kGrid);
            const double v = f(q);
            if (v > best) best = v, best_q = q;
        }
    }
    if (best == kNegInf) return kNegInf;

    static const std::array<Vec2, 8> dirs{Vec2(1, 0),  Vec2(-1, 0), Vec2(0, 1),   Vec2(0, -1),
                                          Vec2(1, 1),  Vec2(1, -1), Vec2(-1, 1), Vec2(-1, -1)};
    for (double step = kGrid; step > 1e-10; step *= 0.5) {
        bool improved = true;
        while (improved) {
            improved = false;
            for (const auto& d : dirs) {
                const Vec2 q = best_q + step * d;
                const double v = f(q);
                if (v > best) {
                    best = v, best_q = q;
                    improved = true;
                }
            }
        }
    }
    return best;
}

double contact_depth(const ShapeSpec& shape, const Pose& object_pose, const PalmGeometry& palm,
                     const Pose& palm_pose) {
    const Pose rel = relative_pose(object_pose, palm_pose);
    return rel.z + dome_overlap(shape, rel, palm);
}

GraspError grasp_error(const ShapeSpec& shape, const Pose& rel) {
    switch (shape.shape_class()) {
        case ShapeClass::Hemisphere: return {rel.xy(), 0.0};
        case ShapeClass::Ellipsoid: return {rel.xy(), fold90(rel.yaw)};
        case ShapeClass::LateralCylinder: {
            const double phi = fold90(rel.yaw);
            const Vec2 n(-std::sin(deg2rad(phi)), std::cos(deg2rad(phi)));
            return {rel.xy().dot(n) * n, phi};
        }
        case ShapeClass::EdgedFlat:
            if (std::holds_alternative<EdgedDisk>(shape.variant())) return {rel.xy(), 0.0};
            return {rel.xy(), fold45(rel.yaw)};
    }
    return {Vec2::Zero(), 0.0};
}

std::vector<CatalogEntry> parse_catalog(std::istream& in) {
    std::vector<CatalogEntry> out;
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
        std::istringstream ls(line);
        std::string split, id, variant;
        if (!(ls >> split)) continue;
        if (!(ls >> id >> variant))
            throw CatalogParseError("line " + std::to_string(lineno) + ": expected <split> <id> <Variant> <dims>");
        if (split != "train" && split != "test")
            throw CatalogParseError("line " + std::to_string(lineno) + ": split must be train or test");
        std::vector<double> dims;
        std::string tok;
        while (ls >> tok) {
            try {
                std::size_t used = 0;
                dims.push_back(std::stod(tok, &used));
                if (used != tok.size()) throw std::invalid_argument(tok);
            } catch (const std::exception&) {
                throw CatalogParseError("line " + std::to_string(lineno) + ": bad dimension '" + tok + "'");
            }
        }
        try {
            out.push_back({split, id, ShapeSpec::parse(variant, dims)});
        } catch (const CatalogParseError& e) {
            throw CatalogParseError("line " + std::to_string(lineno) + ": " + e.what());
        }
    }
    return out;
}

std::string format_catalog_line(const CatalogEntry& e) {
    std::ostringstream os;
    os << e.split << ' ' << e.object_id << ' ' << e.shape.variant_name();
    for (double d : e.shape.dimensions()) os << ' ' << d;
    return os.str();
}

std::vector<CatalogEntry> default_catalog() {
    // Ellipsoids are egg-like: b = c = 0.6 a.
    auto ellipsoid = [](double major) {
        const double a = 0.5 * major;
        return ShapeSpec(Ellipsoid{a, 0.6 * a, 0.6 * a});
    };
    return {
        {"train", "hemisphere_40", Hemisphere{40}},
        {"train", "hemisphere_50", Hemisphere{50}},
        {"train", "hemisphere_60", Hemisphere{60}},
        {"train", "ellipsoid_60", ellipsoid(60)},
        {"train", "ellipsoid_80", ellipsoid(80)},
        {"train", "ellipsoid_100", ellipsoid(100)},
        {"train", "cylinder_30", LateralCylinder{30, 120}},
        {"train", "cylinder_40", LateralCylinder{40, 120}},
        {"train", "cylinder_50", LateralCylinder{50, 120}},
        {"train", "disk_50", EdgedDisk{50, 30}},
        {"train", "disk_70", EdgedDisk{70, 30}},
        {"train", "cuboid_60", EdgedPrism{60, 60, 30}},
        {"test", "hemisphere_45", Hemisphere{45}},
        {"test", "hemisphere_55", Hemisphere{55}},
        {"test", "cylinder_35", LateralCylinder{35, 120}},
        {"test", "cylinder_45", LateralCylinder{45, 120}},
        {"test", "ellipsoid_70", ellipsoid(70)},
        {"test", "ellipsoid_90", ellipsoid(90)},
        {"test", "disk_60", EdgedDisk{60, 30}},
        {"test", "disk_80", EdgedDisk{80, 30}},
    };
}

}  // namespace palmgrasp
