#include <doctest.h>

#include <sstream>

#include "palmgrasp/errors.hpp"
#include "palmgrasp/random.hpp"
#include "palmgrasp/sampling.hpp"
#include "palmgrasp/similarity.hpp"
#include "palmgrasp/tactile_sim.hpp"

using namespace palmgrasp;

namespace {

// Four-connected components of pixels >= 128.
int count_blobs(const TactileImage& img) {
    std::vector<int> seen(img.pixels.size(), 0);
    int blobs = 0;
    std::vector<int> stack;
    for (int start = 0; start < static_cast<int>(img.pixels.size()); ++start) {
        if (seen[start] || img.pixels[start] < 128) continue;
        ++blobs;
        stack.assign(1, start);
        seen[start] = 1;
        while (!stack.empty()) {
            const int p = stack.back();
            stack.pop_back();
            const int r = p / img.width, c = p % img.width;
            const int nb[4][2] = {{r - 1, c}, {r + 1, c}, {r, c - 1}, {r, c + 1}};
            for (auto [rr, cc] : nb) {
                if (rr < 0 || cc < 0 || rr >= img.height || cc >= img.width) continue;
                const int q = rr * img.width + cc;
                if (!seen[q] && img.pixels[q] >= 128) seen[q] = 1, stack.push_back(q);
            }
        }
    }
    return blobs;
}

}  // namespace

TEST_SUITE("tactile_sim") {

TEST_CASE("marker lattice") {
    const PalmGeometry g;
    const MarkerField rest = rest_markers(g);
    CHECK(rest.size() == 127);
    for (std::size_t i = 0; i < rest.size(); ++i) {
        const Vec3& p = rest.positions[i];
        CHECK(std::abs(p.z() - g.sag(std::hypot(p.x(), p.y()))) < 1e-9);
        CHECK(rest.displacement[i].norm() == 0.0);
    }
    for (int n = 1; n <= 8; ++n) {
        PalmGeometry h;
        h.n_rings = n;
        CHECK(static_cast<int>(rest_markers(h).size()) == 1 + 3 * n * (n + 1));
    }
}

TEST_CASE("palm geometry validation") {
    PalmGeometry g;
    g.max_depth = 3.0;
    CHECK_THROWS_AS(g.validate(), InvalidConfig);
    CHECK_NOTHROW(PalmGeometry::with_thickness(6.0).validate());
}

TEST_CASE("deformation") {
    const TactileSimulator sim;
    const ShapeSpec hemi = Hemisphere{45};
    SUBCASE("tangent contact leaves the skin at rest") {
        const MarkerField f = sim.markers(hemi, sim.at_depth(hemi, {}, 0.0));
        for (const auto& d : f.displacement) CHECK(d.norm() == 0.0);
    }
    SUBCASE("apex marker tracks the depth") {
        const MarkerField f = sim.markers(hemi, sim.at_depth(hemi, {}, 3.0));
        CHECK(f.displacement[0].norm() == doctest::Approx(3.0).epsilon(1e-9));
        for (const auto& d : f.displacement) CHECK(d.norm() <= 3.0 + 1e-12);
    }
    SUBCASE("deterministic") {
        const Pose rel = sim.at_depth(hemi, {2, -1, 0, 0}, 2.5);
        CHECK(sim.markers(hemi, rel) == sim.markers(hemi, rel));
        CHECK(sim.sense(hemi, rel).image == sim.sense(hemi, rel).image);
    }
    SUBCASE("over-indentation") {
        CHECK_THROWS_AS(sim.markers(hemi, sim.at_depth(hemi, {}, 5.5)), OverIndentation);
    }
}

TEST_CASE("spread is local without stretch") {
    MembraneConfig m;
    m.stretch_gain = 0.0;
    const TactileSimulator sim(PalmGeometry{}, m);
    const ShapeSpec hemi = Hemisphere{45};
    const Pose rel = sim.at_depth(hemi, {-8, -8, 0, 0}, 2.0);
    const MarkerField f = sim.markers(hemi, rel);
    std::vector<Vec2> footprint;
    for (std::size_t i = 0; i < f.size(); ++i)
        if (f.displacement[i].z() > 0.0) footprint.emplace_back(f.positions[i].x(), f.positions[i].y());
    REQUIRE(!footprint.empty());
    int far = 0;
    for (std::size_t i = 0; i < f.size(); ++i) {
        const Vec2 p(f.positions[i].x(), f.positions[i].y());
        double nearest = 1e9;
        for (const auto& q : footprint) nearest = std::min(nearest, (p - q).norm());
        if (nearest > 3.0 * m.spread_sigma) {
            ++far;
            CHECK(f.displacement[i].norm() < 1e-3);
        }
    }
    CHECK(far > 0);
}

TEST_CASE("rendering") {
    const TactileSimulator sim;
    const TactileImage rest = render(sim.rest());
    CHECK(rest.width == 240);
    CHECK(rest == render(sim.rest()));
    CHECK(count_blobs(rest) == 127);
    const ShapeSpec hemi = Hemisphere{45};
    const TactileImage pressed = sim.sense(hemi, sim.at_depth(hemi, {}, 3.0)).image;
    CHECK(ssim(rest, pressed) < 1.0);
}

TEST_CASE("ssim falls with depth") {
    const TactileSimulator sim;
    const SsimReference ref(sim.rest_image());
    const std::vector<ShapeSpec> shapes{Hemisphere{45}, Ellipsoid{35, 21, 21}, LateralCylinder{35, 120},
                                        EdgedDisk{60, 30}};
    int pairs = 0, violations = 0;
    for (std::size_t s = 0; s < shapes.size(); ++s) {
        Rng rng(derive_seed(1, "monotone", {s}));
        for (int i = 0; i < 25; ++i) {
            const Pose pose = random_feature_pose(shapes[s], rng);
            double prev = 1.0;
            for (double d = 0.5; d <= 4.0; d += 0.5) {
                const double v = ref.compare(sim.sense(shapes[s], sim.at_depth(shapes[s], pose, d)).image);
                ++pairs;
                violations += v > prev;
                prev = v;
            }
        }
    }
    CHECK(violations <= 0.02 * pairs);
}

TEST_CASE("normal force") {
    CHECK(normal_force(0.0) == 0.0);
    CHECK(normal_force(5.0) == doctest::Approx(8.0));
    CHECK(normal_force(3.0) == doctest::Approx(3.717).epsilon(1e-3));
    double prev = 0.0;
    for (double d = 0.1; d < 5.0; d += 0.1) {
        CHECK(normal_force(d) > prev);
        CHECK(normal_force(d) < 8.0);
        prev = normal_force(d);
    }
}

TEST_CASE("file formats") {
    const TactileSimulator sim;
    const ShapeSpec cyl = LateralCylinder{35, 120};
    const Observation obs = sim.sense(cyl, sim.at_depth(cyl, {0, 3, 0, 20}, 2.0));
    std::stringstream pgm;
    write_pgm(pgm, obs.image);
    CHECK(read_pgm(pgm) == obs.image);
    std::stringstream csv;
    write_marker_csv(csv, obs.markers);
    CHECK(read_marker_csv(csv) == obs.markers);
    std::stringstream bad("P2\n2 2\n255\n");
    CHECK_THROWS_AS(read_pgm(bad), ImageFormatError);
}

}
