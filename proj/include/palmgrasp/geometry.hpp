#pragma once

#include <Eigen/Core>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <type_traits>
#include <variant>
#include <vector>

#include "palmgrasp/palm.hpp"

namespace palmgrasp {

using Vec2 = Eigen::Vector2d;
using Vec3 = Eigen::Vector3d;

inline constexpr double kPi = 3.14159265358979323846;
inline double deg2rad(double d) { return d * kPi / 180.0; }
inline double rad2deg(double r) { return r * 180.0 / kPi; }

/// Wraps an angle in degrees to (-180, 180].
double wrap180(double deg);
/// Folds an angle in degrees into (-90, 90] (180-degree symmetry).
double fold90(double deg);
/// Folds into (-45, 45] (90-degree symmetry).
double fold45(double deg);

Vec2 rotate(const Vec2& v, double yaw_deg);

/// Rigid pose with 4 DOF: translation plus rotation about the vertical axis.
struct Pose {
    double x = 0.0;    // mm
    double y = 0.0;    // mm
    double z = 0.0;    // mm
    double yaw = 0.0;  // degrees, (-180, 180]

    Vec2 xy() const { return {x, y}; }
    bool finite() const;
    /// Same pose with yaw wrapped to (-180, 180].
    Pose normalized() const;

    friend bool operator==(const Pose&, const Pose&) = default;
};

/// Pose of `object` expressed in the frame of `palm` (palm apex at origin).
Pose relative_pose(const Pose& object, const Pose& palm);
/// Inverse of relative_pose: world pose of an object given its palm-frame pose.
Pose compose(const Pose& palm, const Pose& relative);

struct Hemisphere {
    double diameter;
};
/// Semi-axes a (local X), b (local Y), c (vertical); a >= b.
struct Ellipsoid {
    double a, b, c;
};
/// Cylinder lying on its side with its axis along local X.
struct LateralCylinder {
    double diameter, length;
};
struct EdgedPrism {
    double width, depth, height;
};
struct EdgedDisk {
    double diameter, height;
};

enum class ShapeClass { Hemisphere, Ellipsoid, LateralCylinder, EdgedFlat };

std::string_view to_string(ShapeClass c);
ShapeClass shape_class_from_string(std::string_view s);

/// Parametric rigid object resting on the table. Local frame: origin at the
/// base centre, z up; all dimensions in mm.
class ShapeSpec {
public:
    using Variant = std::variant<Hemisphere, Ellipsoid, LateralCylinder, EdgedPrism, EdgedDisk>;

    ShapeSpec(Variant v);  // NOLINT(google-explicit-constructor)
    template <class T>
        requires std::is_constructible_v<Variant, T>
    ShapeSpec(T alternative) : ShapeSpec(Variant(std::move(alternative))) {}  // NOLINT

    static ShapeSpec parse(std::string_view variant_name, std::span<const double> dims);

    const Variant& variant() const { return v_; }
    ShapeClass shape_class() const;
    std::string_view variant_name() const;
    std::vector<double> dimensions() const;
    /// Highest point of the object in its local frame.
    double height() const;

    friend bool operator==(const ShapeSpec& a, const ShapeSpec& b);

private:
    Variant v_;
};

/// Signed distance from a point in the object's local frame to its surface.
double sdf(const ShapeSpec& shape, const Vec3& p);
/// Signed distance for a point in world coordinates with the object at `pose`.
double sdf_world(const ShapeSpec& shape, const Pose& pose, const Vec3& p);

/// Distance along unit direction `d` from `p` (object local frame) to where
/// the ray leaves the object; 0 when `p` is outside.
double exit_distance(const ShapeSpec& shape, const Vec3& p, const Vec3& d);

/// Height of the upper surface above local (x, y), if the object covers it.
std::optional<double> surface_height(const ShapeSpec& shape, const Vec2& xy);

/// Ground-truth label of the contacted feature in the palm frame. Which fields
/// are present depends on the class (no yaw for hemispheres, no x for lateral
/// cylinders, no y for edges).
struct FeatureLabel {
    ShapeClass shape_class = ShapeClass::Hemisphere;
    std::optional<double> x, y, yaw;

    friend bool operator==(const FeatureLabel&, const FeatureLabel&) = default;
};

/// Folds a yaw into the symmetry range of a feature class; nullopt for hemispheres.
std::optional<double> fold_yaw(ShapeClass c, double yaw);

/// Labels the feature under the palm. Throws FeatureOutOfWorkspace when |x| or
/// |y| exceeds the 12 mm half-width by more than `margin`.
FeatureLabel relative_feature_pose(const ShapeSpec& shape, const Pose& object_pose, const Pose& palm_pose,
                                   double margin = 0.0);
/// Same, with the object already expressed in the palm frame.
FeatureLabel feature_label(const ShapeSpec& shape, const Pose& relative, double margin = 0.0);

/// Maximum over the undeformed dome of (object surface height - dome height),
/// for the object at `relative` with z = 0. -infinity if nothing lies under the
/// skin. contact depth = relative.z + dome_overlap.
double dome_overlap(const ShapeSpec& shape, const Pose& relative, const PalmGeometry& palm);

/// Vertical penetration of the object past the undeformed skin; negative gap
/// when separated.
double contact_depth(const ShapeSpec& shape, const Pose& object_pose, const PalmGeometry& palm,
                     const Pose& palm_pose);

/// Offset (palm frame, mm) from palm centre to the grasp target, and the yaw
/// (degrees) the palm should rotate by to align with it.
struct GraspError {
    Vec2 offset;
    double yaw;
};
GraspError grasp_error(const ShapeSpec& shape, const Pose& relative);

struct CatalogEntry {
    std::string split;  // "train" or "test"
    std::string object_id;
    ShapeSpec shape;
};

/// One object per line: `<split> <object_id> <Variant> <dims mm...>`; `#` starts a comment.
std::vector<CatalogEntry> parse_catalog(std::istream& in);
std::string format_catalog_line(const CatalogEntry& e);
/// The built-in catalog: 12 training objects and 8 test objects.
std::vector<CatalogEntry> default_catalog();

}  // namespace palmgrasp
