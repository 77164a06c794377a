#include <doctest.h>

#include <filesystem>

#include "palmgrasp/errors.hpp"
#include "palmgrasp/random.hpp"
#include "palmgrasp/sampling.hpp"
#include "palmgrasp/similarity.hpp"
#include "palmgrasp/tactile_sim.hpp"

using namespace palmgrasp;
namespace fs = std::filesystem;

namespace {

TactileImage noise_image(std::uint64_t seed, int w = 240, int h = 240) {
    Rng rng(seed);
    TactileImage img{w, h, std::vector<std::uint8_t>(static_cast<std::size_t>(w) * h)};
    for (auto& p : img.pixels) p = static_cast<std::uint8_t>(rng.below(256));
    return img;
}

}  // namespace

TEST_SUITE("similarity") {

TEST_CASE("identity and symmetry") {
    const TactileSimulator sim;
    const ShapeSpec cyl = LateralCylinder{35, 120};
    Rng rng(9);
    for (int i = 0; i < 5; ++i) {
        const TactileImage a = sim.sense(cyl, sim.at_depth(cyl, random_feature_pose(cyl, rng), 2.0)).image;
        const TactileImage b = noise_image(i);
        CHECK(ssim(a, a) == 1.0);
        CHECK(ssim(a, b) == ssim(b, a));
        const double v = ssim(sim.rest_image(), a);
        CHECK(v >= 0.0);
        CHECK(v < 1.0);
    }
}

TEST_CASE("cached reference matches the direct form") {
    const TactileSimulator sim;
    const SsimReference ref(sim.rest_image());
    const ShapeSpec disk = EdgedDisk{60, 30};
    Rng rng(4);
    for (int i = 0; i < 5; ++i) {
        const TactileImage img = sim.sense(disk, sim.at_depth(disk, random_feature_pose(disk, rng), 3.0)).image;
        CHECK(ref.compare(img) == ssim(sim.rest_image(), img));
    }
}

TEST_CASE("frozen values") {
    const TactileSimulator sim;
    const ShapeSpec hemi = Hemisphere{45};
    const ShapeSpec cyl = LateralCylinder{35, 120};
    CHECK(ssim(sim.rest_image(), sim.sense(hemi, sim.at_depth(hemi, {}, 3.0)).image) ==
          doctest::Approx(0.652484208686).epsilon(1e-9));
    CHECK(ssim(sim.rest_image(), sim.sense(cyl, sim.at_depth(cyl, {0, 2, 0, 30}, 2.0)).image) ==
          doctest::Approx(0.757737019619).epsilon(1e-9));
}

TEST_CASE("size checks") {
    CHECK_THROWS_AS(ssim(noise_image(1, 240, 240), noise_image(1, 200, 240)), DimensionMismatch);
    SsimConfig even;
    even.window = 10;
    CHECK_THROWS_AS(even.validate(), InvalidConfig);
}

TEST_CASE("threshold file round trip") {
    const fs::path path = fs::temp_directory_path() / "palmgrasp_unit_thresholds.json";
    const Thresholds t{0.6, 0.6164123456789};
    write_thresholds(path, t, "00aa11bb22cc33dd");
    std::string hash;
    const Thresholds back = read_thresholds(path, &hash);
    CHECK(back.contact == t.contact);
    CHECK(back.loss_of_contact == t.loss_of_contact);
    CHECK(hash == "00aa11bb22cc33dd");
    fs::remove(path);
}

TEST_CASE("calibration") {
    const TactileSimulator sim;
    const std::vector<CalibrationObject> objects{{"hemi", Hemisphere{45}}, {"disk", EdgedDisk{60, 30}}};
    SUBCASE("tangent contacts look like rest") {
        CHECK(calibrate_contact_threshold(sim, objects, 3, 0.0, 1) == 1.0);
    }
    SUBCASE("rounded to one decimal and repeatable") {
        const double a = calibrate_contact_threshold(sim, objects, 4, 3.0, 2);
        CHECK(a == calibrate_contact_threshold(sim, objects, 4, 3.0, 2, {}, 2));
        CHECK(a * 10.0 == std::round(a * 10.0));
        CHECK(a > 0.0);
        CHECK(a < 1.0);
    }
    SUBCASE("loss threshold is repeatable") {
        const double a = calibrate_loss_threshold(sim, objects, 3, 3.0, 5);
        CHECK(a == calibrate_loss_threshold(sim, objects, 3, 3.0, 5, {}, 2));
        CHECK(a > 0.0);
        CHECK(a < 1.0);
    }
}

}
