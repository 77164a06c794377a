#include <doctest.h>

#include <sstream>

#include "palmgrasp/errors.hpp"
#include "palmgrasp/geometry.hpp"
#include "palmgrasp/random.hpp"

using namespace palmgrasp;

TEST_SUITE("geometry") {

TEST_CASE("angle wrapping") {
    CHECK(wrap180(180.0) == 180.0);
    CHECK(wrap180(-180.0) == 180.0);
    CHECK(wrap180(190.0) == doctest::Approx(-170.0));
    CHECK(fold90(100.0) == doctest::Approx(-80.0));
    CHECK(fold90(-90.0) == 90.0);
    CHECK(fold45(50.0) == doctest::Approx(-40.0));
    Rng rng(7);
    for (int i = 0; i < 200; ++i) {
        const double a = rng.uniform(-720.0, 720.0);
        CHECK(fold90(fold90(a)) == fold90(a));
        CHECK(wrap180(wrap180(a)) == wrap180(a));
    }
}

TEST_CASE("sdf reference points") {
    const ShapeSpec hemi = Hemisphere{45};
    CHECK(sdf(hemi, {0, 0, 22.5}) == doctest::Approx(0.0).epsilon(1e-12));
    CHECK(sdf(hemi, {0, 0, 25.0}) == doctest::Approx(2.5));
    const ShapeSpec box = EdgedPrism{30, 30, 20};
    CHECK(sdf(box, {0, 0, 21.0}) == doctest::Approx(1.0));
    CHECK(sdf(box, {0, 0, 10.0}) < 0.0);
}

TEST_CASE("sdf is 1-Lipschitz") {
    const std::vector<ShapeSpec> shapes{Hemisphere{45}, Ellipsoid{35, 21, 21}, LateralCylinder{35, 120},
                                        EdgedPrism{30, 100, 30}, EdgedDisk{60, 30}};
    Rng rng(11);
    for (const auto& s : shapes) {
        for (int i = 0; i < 300; ++i) {
            const Vec3 p(rng.uniform(-60, 60), rng.uniform(-60, 60), rng.uniform(-10, 50));
            const Vec3 q(rng.uniform(-60, 60), rng.uniform(-60, 60), rng.uniform(-10, 50));
            CHECK(std::abs(sdf(s, p) - sdf(s, q)) <= (p - q).norm() + 1e-9);
        }
    }
}

TEST_CASE("shape validation") {
    CHECK_THROWS_AS(ShapeSpec(Hemisphere{-1}), InvalidShape);
    CHECK_THROWS_AS(ShapeSpec(Ellipsoid{10, 20, 5}), InvalidShape);
    const double dims[] = {45.0};
    CHECK(ShapeSpec::parse("Hemisphere", dims) == ShapeSpec(Hemisphere{45}));
}

TEST_CASE("relative pose round trip") {
    Rng rng(3);
    for (int i = 0; i < 100; ++i) {
        const Pose obj{rng.uniform(-50, 50), rng.uniform(-50, 50), rng.uniform(0, 10), rng.uniform(-180, 180)};
        const Pose palm{rng.uniform(-50, 50), rng.uniform(-50, 50), rng.uniform(20, 40), rng.uniform(-180, 180)};
        const Pose back = compose(palm, relative_pose(obj, palm));
        CHECK(back.x == doctest::Approx(obj.x));
        CHECK(back.y == doctest::Approx(obj.y));
        CHECK(back.z == doctest::Approx(obj.z));
        CHECK(std::abs(wrap180(back.yaw - obj.yaw)) < 1e-9);
    }
}

TEST_CASE("feature labels") {
    const ShapeSpec hemi = Hemisphere{45};
    SUBCASE("palm over the apex") {
        const FeatureLabel l = relative_feature_pose(hemi, {}, {0, 0, 30, 0});
        CHECK(*l.x == doctest::Approx(0.0));
        CHECK(*l.y == doctest::Approx(0.0));
        CHECK_FALSE(l.yaw);
    }
    SUBCASE("labels are feature minus palm") {
        CHECK(*relative_feature_pose(hemi, {5, 0, 0, 0}, {0, 0, 30, 0}).x == doctest::Approx(5.0));
        CHECK(*relative_feature_pose(hemi, {}, {5, 0, 30, 0}).x == doctest::Approx(-5.0));
    }
    SUBCASE("cylinder yaw folds") {
        const FeatureLabel l = relative_feature_pose(LateralCylinder{35, 120}, {0, 0, 0, 100}, {0, 0, 40, 0});
        CHECK(*l.yaw == doctest::Approx(-80.0));
        CHECK_FALSE(l.x);
    }
    SUBCASE("edges carry distance and outward normal") {
        // Palm 10 mm inside the +X face of a 60 mm disk.
        const FeatureLabel l = relative_feature_pose(EdgedDisk{60, 30}, {}, {20, 0, 40, 0});
        CHECK(l.shape_class == ShapeClass::EdgedFlat);
        CHECK(*l.x == doctest::Approx(10.0));
        CHECK(*l.yaw == doctest::Approx(0.0));
        CHECK_FALSE(l.y);
    }
    SUBCASE("outside the workspace") {
        CHECK_THROWS_AS(relative_feature_pose(hemi, {20, 0, 0, 0}, {0, 0, 30, 0}), FeatureOutOfWorkspace);
    }
}

TEST_CASE("labels are translation equivariant") {
    const std::vector<ShapeSpec> shapes{Hemisphere{45}, Ellipsoid{35, 21, 21}, LateralCylinder{35, 120},
                                        EdgedDisk{60, 30}};
    Rng rng(5);
    for (const auto& s : shapes) {
        for (int i = 0; i < 50; ++i) {
            const Pose obj{rng.uniform(-5, 5), rng.uniform(-5, 5), 0, rng.uniform(-180, 180)};
            const Pose palm{rng.uniform(-5, 5), rng.uniform(-5, 5), 40, rng.uniform(-180, 180)};
            const double dx = rng.uniform(-100, 100), dy = rng.uniform(-100, 100);
            const FeatureLabel a = relative_feature_pose(s, obj, palm, 100.0);
            const FeatureLabel b = relative_feature_pose(s, {obj.x + dx, obj.y + dy, obj.z, obj.yaw},
                                                         {palm.x + dx, palm.y + dy, palm.z, palm.yaw}, 100.0);
            for (auto [u, v] : {std::pair{a.x, b.x}, std::pair{a.y, b.y}, std::pair{a.yaw, b.yaw}}) {
                REQUIRE(u.has_value() == v.has_value());
                if (u) CHECK(std::abs(*u - *v) < 1e-9);
            }
        }
    }
}

TEST_CASE("contact depth") {
    const ShapeSpec hemi = Hemisphere{45};
    const PalmGeometry palm;
    CHECK(contact_depth(hemi, {}, palm, {0, 0, 22.5, 0}) == doctest::Approx(0.0).epsilon(1e-12));
    CHECK(contact_depth(hemi, {}, palm, {0, 0, 19.5, 0}) == doctest::Approx(3.0));
    CHECK(contact_depth(hemi, {}, palm, {0, 0, 24.5, 0}) == doctest::Approx(-2.0));
    SUBCASE("monotone in palm height") {
        const std::vector<ShapeSpec> shapes{hemi, LateralCylinder{35, 120}, EdgedDisk{60, 30}};
        for (const auto& s : shapes) {
            double prev = -1e9;
            for (double z = 40; z > 20; z -= 0.25) {
                const double d = contact_depth(s, {0, 0, 0, 30}, palm, {4, -3, z, 0});
                CHECK(d >= prev);
                prev = d;
            }
        }
    }
}

TEST_CASE("catalog") {
    const auto cat = default_catalog();
    CHECK(std::count_if(cat.begin(), cat.end(), [](auto& e) { return e.split == "train"; }) == 12);
    CHECK(std::count_if(cat.begin(), cat.end(), [](auto& e) { return e.split == "test"; }) == 8);
    std::stringstream ss;
    ss << "# comment\n";
    for (const auto& e : cat) ss << format_catalog_line(e) << '\n';
    const auto back = parse_catalog(ss);
    REQUIRE(back.size() == cat.size());
    for (std::size_t i = 0; i < cat.size(); ++i) {
        CHECK(back[i].object_id == cat[i].object_id);
        CHECK(back[i].shape == cat[i].shape);
    }
    std::stringstream bad("train x Pyramid 3\n");
    CHECK_THROWS_AS(parse_catalog(bad), CatalogParseError);
}

}
