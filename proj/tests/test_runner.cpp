#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "palmgrasp/errors.hpp"
#include "palmgrasp/runner.hpp"

using namespace palmgrasp;
namespace fs = std::filesystem;

namespace {

ExperimentConfig parse(const std::string& text) {
    std::istringstream in(text);
    return parse_experiment_config(in);
}

fs::path scratch(const std::string& name) {
    const fs::path p = fs::temp_directory_path() / ("palmgrasp_unit_" + name);
    fs::remove_all(p);
    fs::create_directories(p);
    return p;
}

int cli(const std::string& args) {
    const std::string cmd = std::string(PALMGRASP_CLI_PATH) + " " + args + " >/dev/null 2>&1";
    const int status = std::system(cmd.c_str());
    return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

}  // namespace

TEST_SUITE("runner") {

TEST_CASE("config files") {
    SUBCASE("key = value lines") {
        const auto c = parse("# demo\nseed = 7\npalm.dome_radius = 40.0  # mm\nvariants = [\"M3\"]\n"
                             "groups = [\"baseline\", \"full\"]\nfixed_heading_batch = false\n");
        CHECK(c.seed == 7);
        CHECK(c.palm.dome_radius == 40.0);
        CHECK(c.variants == std::vector<ModelVariant>{ModelVariant::M3});
        CHECK(c.groups.size() == 2);
        CHECK_FALSE(c.fixed_heading_batch);
    }
    SUBCASE("json object with nesting") {
        const auto c = parse("{\"seed\": 9, \"membrane\": {\"spread_sigma\": 3.5}, \"n_test\": 5}");
        CHECK(c.seed == 9);
        CHECK(c.membrane.spread_sigma == 3.5);
        CHECK(c.n_test == 5);
    }
    SUBCASE("errors") {
        CHECK_THROWS_AS(parse("sede = 1\n"), InvalidConfig);
        CHECK_THROWS_AS(parse("seed = \"one\"\n"), InvalidConfig);
        CHECK_THROWS_AS(parse("seed 1\n"), InvalidConfig);
        CHECK_THROWS_AS(parse("{\"seed\": }"), InvalidConfig);
        CHECK_THROWS_AS(parse("groups = [\"everything\"]\n").validate(), InvalidConfig);
        CHECK_THROWS_AS(parse("palm.membrane_thickness = 6\npalm.max_depth = 4\n").validate(), InvalidConfig);
    }
}

TEST_CASE("shipped configs") {
    const fs::path dir = PALMGRASP_CONFIG_DIR;
    CHECK(load_experiment_config(dir / "default.cfg").hash() == ExperimentConfig{}.hash());
    const ExperimentConfig smoke = load_experiment_config(dir / "smoke.json");
    CHECK_NOTHROW(smoke.validate());
    CHECK(smoke.out == "out/smoke");
}

TEST_CASE("snapshots and hashes") {
    ExperimentConfig a;
    a.seed = 5;
    a.pull_mm = 1.25;
    const ExperimentConfig b = parse(a.snapshot());
    CHECK(b.snapshot() == a.snapshot());
    CHECK(b.hash() == a.hash());
    CHECK(a.hash().size() == 16);
    ExperimentConfig c = a;
    c.out = "elsewhere";
    c.workers = 3;
    CHECK(c.hash() == a.hash());
    c.seed = 6;
    CHECK(c.hash() != a.hash());
}

TEST_CASE("episode batches") {
    ExperimentConfig cfg;
    const auto batches = episode_batches(cfg, {0.6, 0.65});
    REQUIRE(batches.size() == 5);
    CHECK(batches[0].group == "baseline");
    CHECK(batches[4].group == kFixedHeadingGroup);
    CHECK(batches[4].strategy.tap_heading == 0.0);
    CHECK_FALSE(batches[3].strategy.tap_heading);
    cfg.fixed_heading_batch = false;
    CHECK(episode_batches(cfg, {0.6, 0.65}).size() == 4);
}

TEST_CASE("artifacts") {
    ExperimentConfig cfg;
    cfg.out = scratch("artifacts");
    cfg.n_train = 1;
    cfg.n_test = 1;
    cfg.workers = 2;
    SUBCASE("upstream files must exist") {
        CHECK_THROWS_AS(cmd_train(cfg), MissingArtifact);
        CHECK_THROWS_AS(cmd_eval(cfg), MissingArtifact);
        CHECK_THROWS_AS(cmd_episodes(cfg), MissingArtifact);
    }
    SUBCASE("and match the config") {
        cmd_gen_dataset(cfg);
        ExperimentConfig other = cfg;
        other.seed = 1;
        CHECK_THROWS_AS(cmd_train(other), MissingArtifact);
    }
    SUBCASE("report with nothing run") {
        cmd_report(cfg);
        std::ifstream in(cfg.out / "report.md");
        std::stringstream text;
        text << in.rdbuf();
        CHECK(text.str().find("No episodes") != std::string::npos);
        CHECK(fs::exists(cfg.out / "config.txt"));
    }
    fs::remove_all(cfg.out);
}

TEST_CASE("spread sensitivity") {
    ExperimentConfig cfg;
    cfg.out = scratch("sensitivity");
    cfg.workers = 2;
    cfg.sensitivity_sigmas = {3.0, 5.0};
    cfg.sensitivity_n_train = 30;
    cfg.sensitivity_n_test = 5;
    cmd_sensitivity(cfg);
    cmd_report(cfg);
    std::ifstream in(cfg.out / "report.md");
    std::stringstream text;
    text << in.rdbuf();
    CHECK(text.str().find("| 3.0 |") != std::string::npos);
    CHECK(text.str().find("| 5.0 |") != std::string::npos);
    const auto rows = spread_sensitivity(cfg);
    REQUIRE(rows.size() == 2);
    for (const auto& r : rows) {
        CHECK(r.worst_pos_mae >= r.mean_pos_mae);
        CHECK(r.worst_yaw_mae >= r.mean_yaw_mae);
        CHECK(r.class_accuracy > 0.0);
    }
    fs::remove_all(cfg.out);
}

TEST_CASE("perfect predictions evaluate to zero") {
    const fs::path dir = scratch("eval");
    const TactileSimulator sim;
    const ModelSetSpec spec{ModelVariant::M3};
    std::vector<ContactSample> test = sample_contacts(sim, LateralCylinder{35, 120}, "cyl", 6, {}, 1, "test");
    const auto disk = sample_contacts(sim, EdgedDisk{60, 30}, "disk", 6, {}, 1, "test");
    test.insert(test.end(), disk.begin(), disk.end());
    std::vector<PoseEstimate> predictions;
    for (const auto& s : test) predictions.push_back(label_estimate(spec, s.label));
    write_eval(dir, ModelVariant::M3, spec, test, predictions);
    const MaeReport r = read_mae_csv(dir / "M3.csv");
    CHECK(r.rows.size() == 4);
    for (const auto& row : r.rows) CHECK(row.mae == 0.0);
    fs::remove_all(dir);
}

TEST_CASE("command line exit codes") {
    const fs::path dir = scratch("cli");
    const std::string out = " --out " + dir.string();
    CHECK(cli("--help") == 0);
    CHECK(cli("") == 2);
    CHECK(cli("--bogus report") == 2);
    CHECK(cli("--config " + (dir / "missing.cfg").string() + " report") == 2);
    std::ofstream(dir / "bad.cfg") << "sede = 3\n";
    CHECK(cli("--config " + (dir / "bad.cfg").string() + out + " report") == 2);
    CHECK(cli(out + " train") == 3);
    CHECK(cli(out + " report") == 0);
    CHECK(fs::exists(dir / "report.md"));
    fs::remove_all(dir);
}

}
