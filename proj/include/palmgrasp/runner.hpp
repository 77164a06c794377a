#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

#include "palmgrasp/datasets.hpp"
#include "palmgrasp/grasp_control.hpp"
#include "palmgrasp/palm.hpp"
#include "palmgrasp/parallel.hpp"
#include "palmgrasp/pose_models.hpp"
#include "palmgrasp/similarity.hpp"
#include "palmgrasp/tactile_sim.hpp"

namespace palmgrasp {

/// Everything an experiment's outputs depend on, plus where they go.
///
/// Config files hold one `key = value` pair per line, where the value is a
/// JSON literal (number, string, bool or array) and `#` starts a comment. A
/// file whose first non-blank character is `{` is read as one JSON object
/// with the same keys. Dotted keys (`palm.dome_radius`) override nested
/// settings.
struct ExperimentConfig {
    std::uint64_t seed = 0;
    PalmGeometry palm;
    MembraneConfig membrane;
    std::string catalog;  // catalog file; empty for the built-in one
    std::size_t n_train = 1000;  // samples per training object
    std::size_t n_test = 200;    // samples per test object
    int calibration_contacts = 50;  // per training object
    double calibration_depth = 3.0;  // mm
    std::vector<ModelVariant> variants{ModelVariant::M1, ModelVariant::M2, ModelVariant::M3};
    ModelVariant episode_variant = ModelVariant::M3;
    std::vector<std::string> groups{"baseline", "contact", "adjust", "full"};
    std::uint64_t episode_seed_begin = 0;
    std::size_t episodes_per_group = 30;
    double pull_mm = 2.5;
    /// Also run the full group with every first tap along palm +X.
    bool fixed_heading_batch = true;
    /// Spread-sigma sweep: each value gets its own (smaller) dataset and model.
    std::vector<double> sensitivity_sigmas{2.0, 3.0, 4.0, 6.0};  // mm
    std::size_t sensitivity_n_train = 300;
    std::size_t sensitivity_n_test = 100;

    // Not part of the snapshot: neither changes any output byte.
    std::filesystem::path out = "out";
    int workers = default_workers();

    void validate() const;
    /// Canonical `key = value` text of every output-affecting setting.
    std::string snapshot() const;
    /// FNV-1a of the snapshot, 16 hex digits.
    std::string hash() const;
};

/// Applies the settings in `in` on top of `base`. Throws InvalidConfig.
ExperimentConfig parse_experiment_config(std::istream& in, ExperimentConfig base = {});
ExperimentConfig load_experiment_config(const std::filesystem::path& path, ExperimentConfig base = {});

std::vector<CatalogEntry> load_catalog(const ExperimentConfig& cfg);
/// Test-split objects; episode seed s uses object s mod count.
std::vector<CatalogEntry> test_objects(const ExperimentConfig& cfg);

/// In-memory pieces of the commands below.
DatasetManifest generate_dataset(const ExperimentConfig& cfg);
Thresholds calibrate_thresholds(const ExperimentConfig& cfg);

struct EpisodeBatch {
    std::string group;
    StrategyConfig strategy;
};
/// The configured ablation groups in canonical order, then the fixed-heading batch if enabled.
std::vector<EpisodeBatch> episode_batches(const ExperimentConfig& cfg, const Thresholds& thresholds);
/// Episode `seed`: scene and run streams derive from (cfg.seed, seed), so every
/// group sees the same start.
EpisodeLog run_seeded_episode(const ExperimentConfig& cfg, const GraspStrategy& strategy, const CatalogEntry& object,
                              std::uint64_t seed);

/// Pose-estimation error of the episode variant retrained at one spread sigma.
struct SensitivityRow {
    double sigma = 0.0;
    double mean_pos_mae = 0.0, worst_pos_mae = 0.0;  // mm, over test objects and x/y
    double mean_yaw_mae = 0.0, worst_yaw_mae = 0.0;  // deg
    double class_accuracy = 0.0;
};
std::vector<SensitivityRow> spread_sensitivity(const ExperimentConfig& cfg);

/// Name used in summaries for the fixed-heading batch.
inline constexpr const char* kFixedHeadingGroup = "full+x";

// Each command writes `config.txt` (snapshot with its hash) into the output
// directory and reads upstream artifacts only from disk. Upstream files that
// are missing or were written under a different config hash raise
// MissingArtifact naming the command to run.

void cmd_gen_dataset(const ExperimentConfig& cfg);  // dataset/
void cmd_calibrate(const ExperimentConfig& cfg);    // thresholds.json
void cmd_train(const ExperimentConfig& cfg);        // models/<variant>.bin
void cmd_eval(const ExperimentConfig& cfg);         // mae/<variant>.csv, mae/<variant>.json
void cmd_episodes(const ExperimentConfig& cfg);     // episodes/<group>/<seed>.jsonl, episodes/summary.csv
void cmd_sensitivity(const ExperimentConfig& cfg);  // sensitivity.csv
void cmd_report(const ExperimentConfig& cfg);       // report.md

/// Markdown report built from whatever artifacts exist under `out`.
std::string render_report(const std::filesystem::path& out);

/// Writes `<dir>/<variant>.csv` and `.json` for `predictions` against the test split.
void write_eval(const std::filesystem::path& dir, ModelVariant variant, const ModelSetSpec& spec,
                const std::vector<ContactSample>& test, const std::vector<PoseEstimate>& predictions);

/// Writes `<dir>/config.txt`.
void write_config_snapshot(const std::filesystem::path& dir, const ExperimentConfig& cfg);

}  // namespace palmgrasp
