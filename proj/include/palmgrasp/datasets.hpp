#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "palmgrasp/geometry.hpp"
#include "palmgrasp/sampling.hpp"
#include "palmgrasp/tactile_sim.hpp"

namespace palmgrasp {

/// One labelled contact. `image` and `markers` are paths relative to the
/// dataset root; the payloads travel with the sample in memory.
struct ContactSample {
    std::string object_id;
    FeatureLabel label;
    double z = 0.0;      // depth jitter about the reference depth, mm
    double depth = 0.0;  // mm
    std::string image;
    std::string markers;  // empty when not stored

    TactileImage pixels;
    MarkerField field;

    friend bool operator==(const ContactSample&, const ContactSample&) = default;
};

struct DatasetManifest {
    std::uint64_t seed = 0;
    std::string config_hash;
    std::vector<ContactSample> train;
    std::vector<ContactSample> test;

    friend bool operator==(const DatasetManifest&, const DatasetManifest&) = default;
};

struct SamplingStats {
    std::size_t accepted = 0;
    std::size_t rejected = 0;

    double rejection_rate() const {
        const auto total = accepted + rejected;
        return total == 0 ? 0.0 : static_cast<double>(rejected) / static_cast<double>(total);
    }
};

/// Object pose (palm frame) and depth for sample `index` of an object. Pure
/// function of its arguments, so any stored sample can be regenerated.
struct ContactDraw {
    Pose relative;
    FeatureLabel label;
    double depth = 0.0;
    int rejections = 0;
};
ContactDraw draw_contact(const TactileSimulator& sim, const ShapeSpec& shape, std::string_view object_id,
                         std::size_t index, const PoseRanges& ranges, std::uint64_t seed);

/// `n` independent uniform contacts; images and marker fields are rendered
/// into each sample and paths are assigned under `<split>/`.
std::vector<ContactSample> sample_contacts(const TactileSimulator& sim, const ShapeSpec& shape,
                                           const std::string& object_id, std::size_t n, const PoseRanges& ranges,
                                           std::uint64_t seed, const std::string& split, int workers = 1,
                                           SamplingStats* stats = nullptr);

/// Ranges used for training splits: edged objects also see flat-surface
/// contacts beyond the workspace.
PoseRanges training_ranges();

/// Throws CorruptManifest if any object ID appears in both splits.
void check_disjoint(const DatasetManifest& m);

/// Layout: meta.json, train.jsonl, test.jsonl, and the image/marker files
/// named by each record.
void write_dataset(const std::filesystem::path& dir, const DatasetManifest& m);
DatasetManifest read_dataset(const std::filesystem::path& dir, bool load_payloads = true);

/// Kolmogorov-Smirnov distance between `values` and U(lo, hi).
double ks_uniform_statistic(std::vector<double> values, double lo, double hi);
/// Asymptotic critical value at alpha = 0.01.
inline double ks_critical_01(std::size_t n) { return 1.6276 / std::sqrt(static_cast<double>(n)); }

}  // namespace palmgrasp
