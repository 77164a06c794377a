#include <doctest.h>

#include <filesystem>
#include <fstream>

#include "palmgrasp/datasets.hpp"
#include "palmgrasp/errors.hpp"

using namespace palmgrasp;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
    const fs::path p = fs::temp_directory_path() / ("palmgrasp_unit_" + name);
    fs::remove_all(p);
    return p;
}

DatasetManifest small_manifest(const TactileSimulator& sim) {
    DatasetManifest m;
    m.seed = 3;
    m.config_hash = "0123456789abcdef";
    m.train = sample_contacts(sim, Hemisphere{45}, "hemi_45", 3, training_ranges(), 3, "train");
    const auto disk = sample_contacts(sim, EdgedDisk{60, 30}, "disk_60", 2, training_ranges(), 3, "train");
    m.train.insert(m.train.end(), disk.begin(), disk.end());
    m.test = sample_contacts(sim, LateralCylinder{35, 120}, "cyl_35", 2, {}, 3, "test");
    return m;
}

}  // namespace

TEST_SUITE("datasets") {

TEST_CASE("sampling") {
    const TactileSimulator sim;
    CHECK(sample_contacts(sim, Hemisphere{45}, "h", 0, {}, 1, "train").empty());
    SUBCASE("cylinder labels") {
        const auto s = sample_contacts(sim, LateralCylinder{35, 120}, "c", 40, {}, 1, "test");
        for (const auto& c : s) {
            CHECK_FALSE(c.label.x);
            REQUIRE(c.label.y);
            REQUIRE(c.label.yaw);
            CHECK(std::abs(*c.label.y) <= 12.0);
            CHECK(*c.label.yaw > -90.0);
            CHECK(*c.label.yaw <= 90.0);
            CHECK(c.depth >= 2.0);
            CHECK(c.depth <= 4.0);
            CHECK(c.z == doctest::Approx(c.depth - 3.0));
        }
    }
    SUBCASE("parallel sampling matches serial") {
        CHECK(sample_contacts(sim, Ellipsoid{35, 21, 21}, "e", 6, {}, 2, "train", 1) ==
              sample_contacts(sim, Ellipsoid{35, 21, 21}, "e", 6, {}, 2, "train", 3));
    }
    SUBCASE("stored samples regenerate") {
        const auto s = sample_contacts(sim, EdgedDisk{60, 30}, "d", 4, training_ranges(), 8, "train");
        for (std::size_t i = 0; i < s.size(); ++i) {
            const ContactDraw d = draw_contact(sim, EdgedDisk{60, 30}, "d", i, training_ranges(), 8);
            CHECK(d.label == s[i].label);
            CHECK(sim.sense(EdgedDisk{60, 30}, d.relative).image == s[i].pixels);
        }
    }
}

TEST_CASE("labels are uniform over the workspace") {
    const TactileSimulator sim;
    const auto s = sample_contacts(sim, Hemisphere{45}, "h", 200, {}, 21, "train");
    std::vector<double> xs, ys;
    for (const auto& c : s) xs.push_back(*c.label.x), ys.push_back(*c.label.y);
    CHECK(ks_uniform_statistic(xs, -12, 12) < ks_critical_01(xs.size()));
    CHECK(ks_uniform_statistic(ys, -12, 12) < ks_critical_01(ys.size()));
    std::vector<double> biased(xs);
    for (auto& v : biased) v = std::abs(v);
    CHECK(ks_uniform_statistic(biased, -12, 12) > ks_critical_01(biased.size()));
}

TEST_CASE("write and read back") {
    const TactileSimulator sim;
    const DatasetManifest m = small_manifest(sim);
    const fs::path dir = scratch("dataset");
    write_dataset(dir, m);
    CHECK(read_dataset(dir) == m);
    const DatasetManifest light = read_dataset(dir, false);
    CHECK(light.train.size() == m.train.size());
    CHECK(light.train[0].pixels.pixels.empty());

    SUBCASE("missing image") {
        fs::remove(dir / m.test[1].image);
        CHECK_THROWS_AS(read_dataset(dir), MissingImage);
    }
    SUBCASE("corrupt record") {
        std::ofstream(dir / "test.jsonl", std::ios::app) << "{\"object_id\": 3}\n";
        CHECK_THROWS_AS(read_dataset(dir), CorruptManifest);
    }
    SUBCASE("unreadable meta") {
        std::ofstream(dir / "meta.json") << "{\"seed\": ";
        CHECK_THROWS_AS(read_dataset(dir), CorruptManifest);
    }
    SUBCASE("missing manifest") {
        fs::remove(dir / "meta.json");
        CHECK_THROWS_AS(read_dataset(dir), MissingArtifact);
    }
    fs::remove_all(dir);
}

TEST_CASE("splits must be disjoint") {
    const TactileSimulator sim;
    DatasetManifest m = small_manifest(sim);
    CHECK_NOTHROW(check_disjoint(m));
    m.test[0].object_id = "hemi_45";
    CHECK_THROWS_AS(check_disjoint(m), CorruptManifest);
}

}
