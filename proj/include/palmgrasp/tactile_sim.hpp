#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <vector>

#include "palmgrasp/geometry.hpp"
#include "palmgrasp/palm.hpp"

namespace palmgrasp {

/// Marker (pin) positions and displacements in the palm frame: origin at the
/// dome apex, z pointing up into the sensor.
struct MarkerField {
    std::vector<Vec3> positions;
    std::vector<Vec3> displacement;

    std::size_t size() const { return positions.size(); }
    Vec3 displaced(std::size_t i) const { return positions[i] + displacement[i]; }

    friend bool operator==(const MarkerField&, const MarkerField&) = default;
};

/// Skin deformation model: each marker inside the object is pushed straight up
/// onto the object's surface, plus an in-plane push away from indented
/// neighbours weighted by a Gaussian truncated smoothly at 3 sigma, plus a
/// whole-skin stretch radiating from the contact centroid that scales with
/// peak indentation.
struct MembraneConfig {
    double spread_sigma = 4.0;  // mm
    double spread_gain = 0.4;   // lateral push per mm of neighbour indentation
    double stretch_gain = 0.08;  // peak stretch per mm of indentation
    double stretch_length = 10.0;  // mm from the centroid where stretch peaks
};

struct RenderConfig {
    int width = 240;
    int height = 240;
    double px_per_mm = 240.0 / 44.0;
    double disc_radius_px = 4.0;
    int subsamples = 4;  // per axis, for coverage anti-aliasing
};

/// 8-bit grayscale image, row-major.
struct TactileImage {
    int width = 0;
    int height = 0;
    std::vector<std::uint8_t> pixels;

    std::uint8_t at(int row, int col) const { return pixels[static_cast<std::size_t>(row) * width + col]; }

    friend bool operator==(const TactileImage&, const TactileImage&) = default;
};

MarkerField rest_markers(const PalmGeometry& geom);

/// Deforms the rest field for an object at `relative` (object pose in the palm
/// frame). Throws OverIndentation if the contact depth exceeds the membrane
/// thickness.
MarkerField deform_markers(const MarkerField& rest, const ShapeSpec& shape, const Pose& relative,
                           const PalmGeometry& geom, const MembraneConfig& membrane = {});

TactileImage render(const MarkerField& markers, const RenderConfig& cfg = {});

/// Calibrated Hertz-style normal force in newtons: 8 N at 5 mm.
double normal_force(double depth_mm);

void write_pgm(std::ostream& out, const TactileImage& img);
TactileImage read_pgm(std::istream& in);
void write_pgm(const std::filesystem::path& path, const TactileImage& img);
TactileImage read_pgm(const std::filesystem::path& path);

/// CSV columns: marker_id,x,y,z,dx,dy,dz (shortest round-trip decimal).
void write_marker_csv(std::ostream& out, const MarkerField& field);
MarkerField read_marker_csv(std::istream& in);

struct Observation {
    MarkerField markers;
    TactileImage image;
    double depth = 0.0;  // ground truth, for logging only
};

/// Immutable simulation context: palm, membrane and render settings plus the
/// cached rest field and rest image.
class TactileSimulator {
public:
    explicit TactileSimulator(PalmGeometry palm = {}, MembraneConfig membrane = {}, RenderConfig render_cfg = {});

    const PalmGeometry& palm() const { return palm_; }
    const MembraneConfig& membrane() const { return membrane_; }
    const RenderConfig& render_config() const { return render_; }
    const MarkerField& rest() const { return rest_; }
    const TactileImage& rest_image() const { return rest_image_; }

    /// Observation for an object at `relative` in the palm frame.
    Observation sense(const ShapeSpec& shape, const Pose& relative) const;
    MarkerField markers(const ShapeSpec& shape, const Pose& relative) const;

    /// Palm-frame object pose giving the requested contact depth, keeping the
    /// in-plane part of `relative`.
    Pose at_depth(const ShapeSpec& shape, Pose relative, double depth) const;

private:
    PalmGeometry palm_;
    MembraneConfig membrane_;
    RenderConfig render_;
    MarkerField rest_;
    TactileImage rest_image_;
};

}  // namespace palmgrasp
