#include <doctest.h>

#include <filesystem>
#include <json.hpp>
#include <sstream>

#include "palmgrasp/errors.hpp"
#include "palmgrasp/grasp_control.hpp"

using namespace palmgrasp;
namespace fs = std::filesystem;

namespace {

const TactileSimulator& simulator() {
    static const TactileSimulator sim;
    return sim;
}

StrategyConfig config(StageFlags stages = {}) {
    StrategyConfig c;
    c.thresholds = {0.6, 0.6164};
    c.stages = stages;
    return c;
}

// Hemisphere 55 with the palm 2 mm above its apex, offset in-plane.
SceneState hemisphere_scene(double dx, double dy) {
    SceneState s;
    s.object = Hemisphere{55};
    s.arm = {dx, dy, 27.5 + 2.0, 0.0};
    s.home = s.arm.xy();
    return s;
}

PoseEstimator constant(PoseEstimate e) {
    return [e](const SensorReading&, const SceneState&) { return e; };
}

}  // namespace

TEST_SUITE("grasp_control") {

TEST_CASE("edge width arithmetic") {
    const auto s = EdgeExplorationState::from_readings(5.0, 1, 4.0);
    CHECK(s.width == 33.0);
    CHECK(s.delta_d == doctest::Approx(-12.5));
    for (int steps = 0; steps < 5; ++steps)
        for (double d1 = -12; d1 <= 12; d1 += 3)
            for (double d2 = -12; d2 <= 12; d2 += 3) {
                const auto e = EdgeExplorationState::from_readings(d1, steps, d2);
                CHECK(e.width == d1 + 24.0 * steps + d2);
                // Centring leaves the palm W/2 from the far edge.
                CHECK(d2 - e.delta_d == doctest::Approx(0.5 * e.width));
            }
}

TEST_CASE("normalize_yaw") {
    CHECK(normalize_yaw(135.0) == doctest::Approx(-45.0));
    CHECK(normalize_yaw(30.0) == doctest::Approx(30.0));
    CHECK(normalize_yaw(-90.0) == doctest::Approx(90.0));
    for (double a = -400; a <= 400; a += 7.5) {
        const double n = normalize_yaw(a);
        CHECK(n > -90.0);
        CHECK(n <= 90.0);
        CHECK(normalize_yaw(n) == doctest::Approx(n));
        CHECK(normalize_yaw(a + 180.0) == doctest::Approx(n));
    }
}

TEST_CASE("predicted offsets") {
    PoseEstimate e;
    e.shape_class = ShapeClass::Hemisphere;
    e.x = 3.0;
    e.y = -2.0;
    CHECK(predicted_offset(e) == Vec2(3.0, -2.0));
    e.x.reset();
    CHECK(predicted_offset(e) == Vec2(0.0, -2.0));
    PoseEstimate c;
    c.shape_class = ShapeClass::LateralCylinder;
    c.y = 4.0;
    c.yaw = 90.0;
    CHECK(predicted_offset(c).x() == doctest::Approx(-4.0));
    CHECK(predicted_offset(c).y() == doctest::Approx(0.0).epsilon(1e-12));
}

TEST_CASE("light contact") {
    const GraspStrategy strategy(simulator(), ground_truth_estimator(), config());
    SUBCASE("stops inside the detection band") {
        SceneState scene = hemisphere_scene(0, 0);
        EpisodeLog log;
        const SensorReading r = strategy.detect_light_contact(scene, log);
        CHECK(r.ssim <= 0.6);
        CHECK(r.depth > 0.0);
        CHECK(r.depth <= 4.0);
        CHECK(r.force == doctest::Approx(normal_force(r.depth)));
    }
    SUBCASE("empty scene") {
        SceneState scene;
        EpisodeLog log;
        CHECK_THROWS_AS(strategy.detect_light_contact(scene, log), NoContact);
        CHECK(strategy.run_episode(scene, {}, 1).result.outcome == "NoContact");
    }
}

TEST_CASE("curved adjustment") {
    SUBCASE("moves by the predicted offset") {
        const GraspStrategy strategy(simulator(), ground_truth_estimator(), config());
        SceneState scene = hemisphere_scene(6, -6);
        EpisodeLog log;
        const int moves = strategy.adjust_curved(scene, strategy.detect_light_contact(scene, log), log);
        CHECK(moves == 1);
        CHECK(grasp_error(*scene.object, scene.relative()).offset.norm() < 1e-9);
        int corrective = 0;
        for (const auto& e : log.events())
            if (e.kind == EventKind::Motion && e.get("predicted_x")) {
                ++corrective;
                CHECK(*e.get("dx") == *e.get("predicted_x"));
                CHECK(*e.get("dy") == *e.get("predicted_y"));
            }
        CHECK(corrective == 1);
    }
    SUBCASE("aligned start needs no moves") {
        const GraspStrategy strategy(simulator(), ground_truth_estimator(), config());
        SceneState scene = hemisphere_scene(0, 0);
        EpisodeLog log;
        CHECK(strategy.adjust_curved(scene, strategy.detect_light_contact(scene, log), log) == 0);
    }
    SUBCASE("an estimator that never settles") {
        PoseEstimate e;
        e.shape_class = ShapeClass::Hemisphere;
        e.class_name = "sphere";
        e.x = 0.6;
        e.y = 0.0;
        const GraspStrategy strategy(simulator(), constant(e), config());
        SceneState scene = hemisphere_scene(0, 0);
        EpisodeLog log;
        CHECK_THROWS_AS(strategy.adjust_curved(scene, strategy.detect_light_contact(scene, log), log),
                        AdjustDiverged);
    }
}

TEST_CASE("holding") {
    SUBCASE("no perturbation, no corrections") {
        const GraspStrategy strategy(simulator(), ground_truth_estimator(), config());
        const EpisodeLog log = strategy.run_episode(hemisphere_scene(3, 2), {}, 4);
        CHECK(log.result.outcome == "held");
        CHECK(log.result.n_corrections == 0);
    }
    SUBCASE("pulled out without the loss stage") {
        const GraspStrategy strategy(simulator(), ground_truth_estimator(), config({true, true, false}));
        const EpisodeLog log = strategy.run_episode(hemisphere_scene(3, 2), {10.0, 0.05}, 4);
        CHECK(log.result.outcome == "ObjectLost");
    }
    SUBCASE("full strategy recovers from a pull") {
        const GraspStrategy strategy(simulator(), ground_truth_estimator(), config());
        const EpisodeLog log = strategy.run_episode(hemisphere_scene(-5, 4), {2.5, 0.05}, 4);
        CHECK(log.result.outcome == "held");
        CHECK(log.result.n_corrections > 0);
        CHECK(log.result.final_err_mm < 0.5);
    }
}

TEST_CASE("episode logs") {
    for (const auto& g : ablation_groups()) {
        CAPTURE(g.name);
        const GraspStrategy strategy(simulator(), ground_truth_estimator(), config(g.stages));
        const EpisodeLog log = strategy.run_episode(make_scene(EdgedDisk{60, 30}, {}, 11), {2.5, 0.05}, 11);
        std::size_t seq = 0;
        for (const auto& e : log.events()) {
            CHECK(e.seq == seq++);
            if (e.kind == EventKind::StageTransition) {
                REQUIRE(e.get("cause"));
                CHECK(*e.get("cause") < static_cast<double>(e.seq));
            }
        }
        CHECK(log.events().back().kind == EventKind::Outcome);

        std::stringstream out;
        write_episode_jsonl(out, log, 11, g.name, "disk_60");
        std::string line;
        std::vector<nlohmann::json> lines;
        while (std::getline(out, line)) lines.push_back(nlohmann::json::parse(line));
        REQUIRE(lines.size() == log.events().size() + 2);
        CHECK(lines.front().contains("schema"));
        CHECK(lines.front()["group"] == g.name);
        CHECK(lines.back()["event"] == "result");
        CHECK(lines.back()["outcome"] == log.result.outcome);
    }
}

TEST_CASE("summary csv") {
    std::vector<EpisodeSummaryRow> rows(2);
    rows[0].seed = 3;
    rows[0].group = "full";
    rows[0].result.outcome = "held";
    rows[0].result.final_err_mm = 0.123456789;
    rows[0].result.detection_depth = 3.25;
    rows[1].seed = 4;
    rows[1].group = "baseline";
    rows[1].result.outcome = "NoContact";
    const fs::path path = fs::temp_directory_path() / "palmgrasp_unit_summary.csv";
    write_summary_csv(path, rows);
    const auto back = read_summary_csv(path);
    REQUIRE(back.size() == 2);
    CHECK(back[0].seed == 3);
    CHECK(back[0].result.final_err_mm == rows[0].result.final_err_mm);
    CHECK(back[0].result.detection_depth == 3.25);
    CHECK_FALSE(back[1].result.detection_depth);
    CHECK(back[1].result.outcome == "NoContact");
    fs::remove(path);
}

TEST_CASE("config validation") {
    StrategyConfig c = config();
    c.thresholds = {0.7, 0.6};
    CHECK_THROWS_AS(c.validate(), InvalidConfig);
    c = config();
    c.tap_heading = std::numeric_limits<double>::quiet_NaN();
    CHECK_THROWS_AS(c.validate(), InvalidConfig);
}

}
