#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "palmgrasp/geometry.hpp"
#include "palmgrasp/sampling.hpp"
#include "palmgrasp/tactile_sim.hpp"

namespace palmgrasp {

/// Structural similarity parameters (Gaussian window, standard stabilizers).
struct SsimConfig {
    int window = 11;      // odd
    double sigma = 1.5;   // px
    double k1 = 0.01;
    double k2 = 0.03;
    double dynamic_range = 255.0;

    double c1() const { return (k1 * dynamic_range) * (k1 * dynamic_range); }
    double c2() const { return (k2 * dynamic_range) * (k2 * dynamic_range); }
    void validate() const;
};

/// Mean SSIM over all fully-contained windows, floored at 0. Throws
/// DimensionMismatch when the images differ in size.
double ssim(const TactileImage& a, const TactileImage& b, const SsimConfig& cfg = {});

/// SSIM against a fixed image, with its local statistics computed once.
class SsimReference {
public:
    explicit SsimReference(const TactileImage& reference, const SsimConfig& cfg = {});

    /// Same value as ssim(reference, img, cfg).
    double compare(const TactileImage& img) const;
    const TactileImage& image() const { return reference_; }

private:
    SsimConfig cfg_;
    TactileImage reference_;
    std::vector<double> kernel_;
    std::vector<double> mean_, square_;  // filtered x and x^2, valid region
};

/// Contact fires when SSIM drops to `contact`; loss of contact fires when SSIM
/// rises above `loss_of_contact`.
struct Thresholds {
    double contact = 0.6;
    double loss_of_contact = 0.66;

    bool ordered() const { return 0.0 < contact && contact <= loss_of_contact && loss_of_contact < 1.0; }
};

/// JSON document {contact, loss_of_contact, config_hash}.
void write_thresholds(const std::filesystem::path& path, const Thresholds& t, const std::string& config_hash);
Thresholds read_thresholds(const std::filesystem::path& path, std::string* config_hash = nullptr);

struct CalibrationObject {
    std::string object_id;
    ShapeSpec shape;
};

/// Grand-mean SSIM versus the rest image over `n_contacts` random contacts per
/// object at `depth`, rounded to one decimal place.
double calibrate_contact_threshold(const TactileSimulator& sim, const std::vector<CalibrationObject>& objects,
                                   int n_contacts, double depth, std::uint64_t seed, const SsimConfig& cfg = {},
                                   int workers = 1);

/// Per trial: a random contact at `depth`, then ground-truth pose adjustment
/// (align palm to the grasp target keeping its height), then SSIM. Returns
/// the unrounded mean.
double calibrate_loss_threshold(const TactileSimulator& sim, const std::vector<CalibrationObject>& objects,
                                int n_trials, double depth, std::uint64_t seed, const SsimConfig& cfg = {},
                                int workers = 1);

}  // namespace palmgrasp
