#include <CLI11.hpp>

#include <cstdio>
#include <iostream>
#include <optional>
#include <string>

#include "palmgrasp/acceptance.hpp"
#include "palmgrasp/errors.hpp"
#include "palmgrasp/runner.hpp"

namespace {

enum Exit { kOk = 0, kFailure = 1, kInvalidConfig = 2, kMissingArtifact = 3, kCheckFailed = 4 };

}  // namespace

int main(int argc, char** argv) {
    using namespace palmgrasp;
    CLI::App app{"Tactile palm grasping experiments"};
    app.require_subcommand(0, 1);

    std::string config_path, out_dir;
    std::optional<std::uint64_t> seed;
    std::optional<int> workers;
    std::optional<std::size_t> n_train, n_test;
    bool check = false;
    app.add_option("--config", config_path, "Experiment config file (key = value lines or JSON)")
        ->check(CLI::ExistingFile);
    app.add_option("--seed", seed, "Override the config seed");
    app.add_option("--out", out_dir, "Output directory (default: out)");
    app.add_option("--workers", workers, "Worker threads (default: available parallelism)");
    app.add_option("--n-train", n_train, "Samples per training object");
    app.add_option("--n-test", n_test, "Samples per test object");
    app.add_flag("--check", check, "Run the acceptance suite and report PASS/FAIL per criterion");

    const std::vector<std::pair<std::string, std::string>> commands{
        {"gen-dataset", "Sample contacts for every catalog object into out/dataset"},
        {"calibrate", "Calibrate contact and loss-of-contact thresholds"},
        {"train", "Train the configured model sets"},
        {"eval", "Per-object MAE of each model set on the test split"},
        {"episodes", "Run the seeded grasp episodes for every stage group"},
        {"sensitivity", "Retrain the episode model across membrane spread sigmas"},
        {"report", "Write out/report.md from the artifacts on disk"},
        {"all", "Run every command above in order"},
    };
    for (const auto& [name, help] : commands) app.add_subcommand(name, help);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? kOk : kInvalidConfig;
    }

    try {
        ExperimentConfig cfg;
        if (!config_path.empty()) cfg = load_experiment_config(config_path);
        if (seed) cfg.seed = *seed;
        if (!out_dir.empty()) cfg.out = out_dir;
        if (workers) cfg.workers = *workers;
        if (n_train) cfg.n_train = *n_train;
        if (n_test) cfg.n_test = *n_test;
        cfg.validate();

        if (check) {
            AcceptanceOptions opts;
            opts.workers = cfg.workers;
            opts.on_result = [](const CriterionResult& r) {
                std::printf("%s\n", format_result(r).c_str());
                std::fflush(stdout);
            };
            bool all_pass = true;
            for (const auto& r : run_acceptance(opts)) all_pass = all_pass && r.pass;
            return all_pass ? kOk : kCheckFailed;
        }
        if (app.get_subcommands().empty()) {
            std::cerr << app.help();
            return kInvalidConfig;
        }
        const std::string cmd = app.get_subcommands().front()->get_name();
        const bool all = cmd == "all";
        if (all || cmd == "gen-dataset") cmd_gen_dataset(cfg);
        if (all || cmd == "calibrate") cmd_calibrate(cfg);
        if (all || cmd == "train") cmd_train(cfg);
        if (all || cmd == "eval") cmd_eval(cfg);
        if (all || cmd == "episodes") cmd_episodes(cfg);
        if (all || cmd == "sensitivity") cmd_sensitivity(cfg);
        if (all || cmd == "report") cmd_report(cfg);
        return kOk;
    } catch (const InvalidConfig& e) {
        std::cerr << "invalid config: " << e.what() << '\n';
        return kInvalidConfig;
    } catch (const MissingArtifact& e) {
        std::cerr << "missing artifact: " << e.what() << '\n';
        return kMissingArtifact;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kFailure;
    }
}
