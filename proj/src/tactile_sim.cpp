#include "palmgrasp/tactile_sim.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>
#include <string>

#include "palmgrasp/errors.hpp"

namespace palmgrasp {

MarkerField rest_markers(const PalmGeometry& geom) {
    geom.validate();
    // Hexagonal rings with the outer ring's corners half a pitch inside the rim.
    const double pitch = geom.skin_radius() / (geom.n_rings + 0.5);
    std::vector<Vec2> planar{Vec2::Zero()};
    for (int k = 1; k <= geom.n_rings; ++k) {
        for (int side = 0; side < 6; ++side) {
            const Vec2 c0 = k * pitch * Vec2(std::cos(deg2rad(60.0 * side)), std::sin(deg2rad(60.0 * side)));
            const Vec2 c1 =
                k * pitch * Vec2(std::cos(deg2rad(60.0 * (side + 1))), std::sin(deg2rad(60.0 * (side + 1))));
            for (int t = 0; t < k; ++t) planar.push_back(c0 + (static_cast<double>(t) / k) * (c1 - c0));
        }
    }
    MarkerField f;
    f.positions.reserve(planar.size());
    for (const auto& q : planar) f.positions.emplace_back(q.x(), q.y(), geom.sag(q.norm()));
    f.displacement.assign(planar.size(), Vec3::Zero());
    return f;
}

MarkerField deform_markers(const MarkerField& rest, const ShapeSpec& shape, const Pose& rel,
                           const PalmGeometry& geom, const MembraneConfig& membrane) {
    const double depth = rel.z + dome_overlap(shape, rel, geom);
    if (depth > geom.membrane_thickness)
        throw OverIndentation("contact depth " + std::to_string(depth) + " mm exceeds the membrane thickness");

    const std::size_t n = rest.size();
    std::vector<double> indent(n, 0.0);
    double max_indent = 0.0;
    const Vec3 up = Vec3::UnitZ();
    for (std::size_t i = 0; i < n; ++i) {
        const Vec3& p = rest.positions[i];
        const Vec2 local = rotate(Vec2(p.x(), p.y()) - rel.xy(), -rel.yaw);
        const double d = exit_distance(shape, Vec3(local.x(), local.y(), p.z() - rel.z), up);
        if (d > 0.0) {
            indent[i] = d;
            max_indent = std::max(max_indent, d);
        }
    }

    MarkerField out{rest.positions, std::vector<Vec3>(n, Vec3::Zero())};
    if (max_indent == 0.0) return out;

    const double sigma = membrane.spread_sigma;
    const double cutoff = 3.0 * sigma;
    const double floor_w = std::exp(-4.5);
    auto weight = [&](double r) {
        if (r >= cutoff) return 0.0;
        return (std::exp(-0.5 * r * r / (sigma * sigma)) - floor_w) / (1.0 - floor_w);
    };

    Vec2 centroid = Vec2::Zero();
    double isum = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        centroid += indent[i] * Vec2(rest.positions[i].x(), rest.positions[i].y());
        isum += indent[i];
    }
    centroid /= isum;

    for (std::size_t i = 0; i < n; ++i) {
        const Vec2 qi(rest.positions[i].x(), rest.positions[i].y());
        Vec2 push = Vec2::Zero();
        double wsum = 0.0;
        for (std::size_t j = 0; j < n; ++j) {
            if (j == i) continue;
            const Vec2 d = qi - Vec2(rest.positions[j].x(), rest.positions[j].y());
            const double r = d.norm();
            const double w = weight(r);
            if (w == 0.0) continue;
            wsum += w;
            if (indent[j] > 0.0) push += (w * indent[j] / r) * d;
        }
        if (wsum > 0.0) push *= membrane.spread_gain / wsum;

        const double lateral_cap = std::sqrt(std::max(0.0, max_indent * max_indent - indent[i] * indent[i]));
        const double pn = push.norm();
        if (pn > lateral_cap) push *= (lateral_cap > 0.0 ? lateral_cap / pn : 0.0);

        const Vec2 away = qi - centroid;
        const double ra = away.norm();
        if (ra > 0.0) {
            const double t = ra / membrane.stretch_length;
            push += (membrane.stretch_gain * max_indent * t * std::exp(1.0 - t) / ra) * away;
        }

        Vec3 disp = Vec3(push.x(), push.y(), 0.0);
        disp.z() += indent[i];
        const double m = disp.norm();
        if (m > max_indent) disp *= max_indent / m;
        out.displacement[i] = disp;
    }
    return out;
}

TactileImage render(const MarkerField& markers, const RenderConfig& cfg) {
    TactileImage img{cfg.width, cfg.height,
                     std::vector<std::uint8_t>(static_cast<std::size_t>(cfg.width) * cfg.height, 0)};
    // Fixed point with 8 fractional bits keeps coverage platform-independent.
    constexpr std::int64_t kOne = 256;
    const int s = cfg.subsamples;
    const std::int64_t radius = std::llround(cfg.disc_radius_px * kOne);
    const std::int64_t r2 = radius * radius;
    const int full = s * s;
    for (std::size_t i = 0; i < markers.size(); ++i) {
        const Vec3 p = markers.displaced(i);
        const std::int64_t cx = std::llround((0.5 * cfg.width + p.x() * cfg.px_per_mm) * kOne);
        const std::int64_t cy = std::llround((0.5 * cfg.height - p.y() * cfg.px_per_mm) * kOne);
        const int c0 = static_cast<int>(std::max<std::int64_t>(0, (cx - radius) / kOne - 1));
        const int c1 = static_cast<int>(std::min<std::int64_t>(cfg.width - 1, (cx + radius) / kOne + 1));
        const int r0 = static_cast<int>(std::max<std::int64_t>(0, (cy - radius) / kOne - 1));
        const int r1 = static_cast<int>(std::min<std::int64_t>(cfg.height - 1, (cy + radius) / kOne + 1));
        for (int row = r0; row <= r1; ++row) {
            const std::int64_t top = row * kOne - cy, bottom = top + kOne;
            const std::int64_t ny = top > 0 ? top : (bottom < 0 ? bottom : 0);
            const std::int64_t fy = std::max(top * top, bottom * bottom);
            for (int col = c0; col <= c1; ++col) {
                const std::int64_t left = col * kOne - cx, right = left + kOne;
                const std::int64_t nx = left > 0 ? left : (right < 0 ? right : 0);
                if (nx * nx + ny * ny > r2) continue;  // pixel clear of the disc
                int covered = 0;
                if (std::max(left * left, right * right) + fy <= r2) {
                    covered = full;  // every corner inside
                } else {
                    for (int a = 0; a < s; ++a) {
                        const std::int64_t py = row * kOne + (2 * a + 1) * kOne / (2 * s) - cy;
                        for (int b = 0; b < s; ++b) {
                            const std::int64_t px = col * kOne + (2 * b + 1) * kOne / (2 * s) - cx;
                            if (px * px + py * py <= r2) ++covered;
                        }
                    }
                }
                if (covered == 0) continue;
                const auto v = static_cast<std::uint8_t>((255 * covered + full / 2) / full);
                auto& dst = img.pixels[static_cast<std::size_t>(row) * cfg.width + col];
                dst = std::max(dst, v);
            }
        }
    }
    return img;
}

double normal_force(double depth_mm) {
    if (depth_mm <= 0.0) return 0.0;
    static const double k = 8.0 / std::pow(5.0, 1.5);
    return k * std::pow(depth_mm, 1.5);
}

void write_pgm(std::ostream& out, const TactileImage& img) {
    out << "P5\n" << img.width << ' ' << img.height << "\n255\n";
    out.write(reinterpret_cast<const char*>(img.pixels.data()), static_cast<std::streamsize>(img.pixels.size()));
}

TactileImage read_pgm(std::istream& in) {
    std::string magic;
    int w = 0, h = 0, maxval = 0;
    if (!(in >> magic >> w >> h >> maxval) || magic != "P5" || w <= 0 || h <= 0 || maxval != 255)
        throw ImageFormatError("not an 8-bit binary PGM");
    in.get();  // single whitespace after the header
    TactileImage img{w, h, std::vector<std::uint8_t>(static_cast<std::size_t>(w) * h)};
    in.read(reinterpret_cast<char*>(img.pixels.data()), static_cast<std::streamsize>(img.pixels.size()));
    if (in.gcount() != static_cast<std::streamsize>(img.pixels.size())) throw ImageFormatError("truncated PGM");
    return img;
}

void write_pgm(const std::filesystem::path& path, const TactileImage& img) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw ImageFormatError("cannot write " + path.string());
    write_pgm(out, img);
}

TactileImage read_pgm(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ImageFormatError("cannot read " + path.string());
    return read_pgm(in);
}

namespace {

void append_double(std::string& s, double v) {
    char buf[32];
    auto [end, ec] = std::to_chars(buf, buf + sizeof buf, v);
    s.append(buf, end);
}

double parse_double(std::string_view tok) {
    double v = 0.0;
    auto [ptr, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), v);
    if (ec != std::errc() || ptr != tok.data() + tok.size())
        throw ImageFormatError("bad number in marker CSV: '" + std::string(tok) + "'");
    return v;
}

}  // namespace

void write_marker_csv(std::ostream& out, const MarkerField& field) {
    std::string s = "marker_id,x,y,z,dx,dy,dz\n";
    for (std::size_t i = 0; i < field.size(); ++i) {
        s += std::to_string(i);
        for (int k = 0; k < 3; ++k) s += ',', append_double(s, field.positions[i][k]);
        for (int k = 0; k < 3; ++k) s += ',', append_double(s, field.displacement[i][k]);
        s += '\n';
    }
    out << s;
}

MarkerField read_marker_csv(std::istream& in) {
    std::string line;
    if (!std::getline(in, line) || line != "marker_id,x,y,z,dx,dy,dz")
        throw ImageFormatError("marker CSV header mismatch");
    MarkerField f;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        std::vector<std::string_view> cols;
        std::string_view rest(line);
        for (std::size_t pos; (pos = rest.find(',')) != std::string_view::npos; rest.remove_prefix(pos + 1))
            cols.push_back(rest.substr(0, pos));
        cols.push_back(rest);
        if (cols.size() != 7 || parse_double(cols[0]) != static_cast<double>(f.size()))
            throw ImageFormatError("malformed marker CSV row");
        f.positions.emplace_back(parse_double(cols[1]), parse_double(cols[2]), parse_double(cols[3]));
        f.displacement.emplace_back(parse_double(cols[4]), parse_double(cols[5]), parse_double(cols[6]));
    }
    return f;
}

TactileSimulator::TactileSimulator(PalmGeometry palm, MembraneConfig membrane, RenderConfig render_cfg)
    : palm_(palm), membrane_(membrane), render_(render_cfg), rest_(rest_markers(palm_)),
      rest_image_(render(rest_, render_)) {
    if (!(membrane_.spread_sigma > 0.0) || membrane_.spread_gain < 0.0)
        throw InvalidConfig("membrane spread sigma must be > 0 and gain >= 0");
    if (!(membrane_.stretch_length > 0.0) || membrane_.stretch_gain < 0.0)
        throw InvalidConfig("membrane stretch length must be > 0 and gain >= 0");
}

MarkerField TactileSimulator::markers(const ShapeSpec& shape, const Pose& relative) const {
    return deform_markers(rest_, shape, relative, palm_, membrane_);
}

Observation TactileSimulator::sense(const ShapeSpec& shape, const Pose& relative) const {
    Observation o;
    o.depth = relative.z + dome_overlap(shape, relative, palm_);
    o.markers = markers(shape, relative);
    const bool moved = std::any_of(o.markers.displacement.begin(), o.markers.displacement.end(),
                                   [](const Vec3& d) { return d != Vec3::Zero(); });
    o.image = moved ? render(o.markers, render_) : rest_image_;
    return o;
}

Pose TactileSimulator::at_depth(const ShapeSpec& shape, Pose relative, double depth) const {
    relative.z = 0.0;
    const double overlap = dome_overlap(shape, relative, palm_);
    if (!std::isfinite(overlap)) throw NoContact("object does not lie under the skin");
    relative.z = depth - overlap;
    return relative;
}

}  // namespace palmgrasp
