#include "palmgrasp/similarity.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <fstream>

#include "palmgrasp/errors.hpp"
#include "palmgrasp/parallel.hpp"

namespace palmgrasp {

void SsimConfig::validate() const {
    if (window < 1 || window % 2 == 0) throw InvalidConfig("SSIM window must be odd and positive");
    if (!(sigma > 0.0) || !(c1() > 0.0) || !(c2() > 0.0)) throw InvalidConfig("SSIM sigma and stabilizers must be > 0");
}

namespace {

std::vector<double> gaussian_kernel(const SsimConfig& cfg) {
    std::vector<double> kernel(static_cast<std::size_t>(cfg.window));
    double sum = 0.0;
    for (int i = 0; i < cfg.window; ++i) {
        const double d = i - cfg.window / 2;
        kernel[i] = std::exp(-0.5 * d * d / (cfg.sigma * cfg.sigma));
        sum += kernel[i];
    }
    for (auto& k : kernel) k /= sum;
    return kernel;
}

// Separable Gaussian over the valid region; the kernel is symmetric, so
// mirrored taps share a multiply.
void filter_valid(const std::vector<double>& src, int w, int h, const std::vector<double>& kernel,
                  std::vector<double>& rows, std::vector<double>& dst) {
    const int win = static_cast<int>(kernel.size()), half = win / 2;
    const int ow = w - win + 1, oh = h - win + 1;
    rows.resize(static_cast<std::size_t>(h) * ow);
    for (int r = 0; r < h; ++r) {
        const double* in = &src[static_cast<std::size_t>(r) * w];
        double* out = &rows[static_cast<std::size_t>(r) * ow];
        for (int c = 0; c < ow; ++c) out[c] = kernel[half] * in[c + half];
        for (int k = 0; k < half; ++k) {
            const double g = kernel[k];
            const double* lo = in + k;
            const double* hi = in + win - 1 - k;
            for (int c = 0; c < ow; ++c) out[c] += g * (lo[c] + hi[c]);
        }
    }
    dst.resize(static_cast<std::size_t>(oh) * ow);
    for (int r = 0; r < oh; ++r) {
        double* out = &dst[static_cast<std::size_t>(r) * ow];
        const double* mid = &rows[static_cast<std::size_t>(r + half) * ow];
        for (int c = 0; c < ow; ++c) out[c] = kernel[half] * mid[c];
        for (int k = 0; k < half; ++k) {
            const double* top = &rows[static_cast<std::size_t>(r + k) * ow];
            const double* bot = &rows[static_cast<std::size_t>(r + win - 1 - k) * ow];
            const double g = kernel[k];
            for (int c = 0; c < ow; ++c) out[c] += g * (top[c] + bot[c]);
        }
    }
}

}  // namespace

SsimReference::SsimReference(const TactileImage& reference, const SsimConfig& cfg)
    : cfg_(cfg), reference_(reference), kernel_(gaussian_kernel(cfg)) {
    cfg_.validate();
    if (reference.width < cfg.window || reference.height < cfg.window)
        throw DimensionMismatch("image smaller than the SSIM window");
    const std::size_t n = reference.pixels.size();
    thread_local std::vector<double> x, xx, rows;
    x.resize(n), xx.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
        x[i] = reference.pixels[i];
        xx[i] = x[i] * x[i];
    }
    filter_valid(x, reference.width, reference.height, kernel_, rows, mean_);
    filter_valid(xx, reference.width, reference.height, kernel_, rows, square_);
}

double SsimReference::compare(const TactileImage& img) const {
    const int w = reference_.width, h = reference_.height;
    if (img.width != w || img.height != h) throw DimensionMismatch("SSIM inputs differ in size");
    if (img.pixels == reference_.pixels) return 1.0;

    const std::size_t n = img.pixels.size();
    // Per-thread scratch: these buffers are large enough that allocating them
    // per call shows up as page-fault time.
    thread_local std::vector<double> y, yy, xy, rows, uy, syy, sxy;
    y.resize(n), yy.resize(n), xy.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
        y[i] = img.pixels[i];
        yy[i] = y[i] * y[i];
        xy[i] = y[i] * reference_.pixels[i];
    }
    filter_valid(y, w, h, kernel_, rows, uy);
    filter_valid(yy, w, h, kernel_, rows, syy);
    filter_valid(xy, w, h, kernel_, rows, sxy);

    const double c1 = cfg_.c1(), c2 = cfg_.c2();
    double total = 0.0;
    for (std::size_t i = 0; i < uy.size(); ++i) {
        const double ux = mean_[i], vy_mean = uy[i];
        const double vx = square_[i] - ux * ux, vy = syy[i] - vy_mean * vy_mean, cxy = sxy[i] - ux * vy_mean;
        total += ((2 * ux * vy_mean + c1) * (2 * cxy + c2)) / ((ux * ux + vy_mean * vy_mean + c1) * (vx + vy + c2));
    }
    return std::clamp(total / static_cast<double>(uy.size()), 0.0, 1.0);
}

double ssim(const TactileImage& a, const TactileImage& b, const SsimConfig& cfg) {
    if (a.width != b.width || a.height != b.height) throw DimensionMismatch("SSIM inputs differ in size");
    return SsimReference(a, cfg).compare(b);
}

void write_thresholds(const std::filesystem::path& path, const Thresholds& t, const std::string& config_hash) {
    nlohmann::ordered_json j;
    j["contact"] = t.contact;
    j["loss_of_contact"] = t.loss_of_contact;
    j["config_hash"] = config_hash;
    std::ofstream out(path);
    if (!out) throw MissingArtifact("cannot write " + path.string());
    out << j.dump(2) << '\n';
}

Thresholds read_thresholds(const std::filesystem::path& path, std::string* config_hash) {
    std::ifstream in(path);
    if (!in) throw MissingArtifact("thresholds file not found: " + path.string() + " (run `calibrate` first)");
    try {
        const auto j = nlohmann::json::parse(in);
        Thresholds t{j.at("contact").get<double>(), j.at("loss_of_contact").get<double>()};
        if (config_hash) *config_hash = j.at("config_hash").get<std::string>();
        return t;
    } catch (const nlohmann::json::exception& e) {
        throw InvalidConfig("malformed thresholds file " + path.string() + ": " + e.what());
    }
}

namespace {

double mean_of(const std::vector<double>& v) {
    double s = 0.0;
    for (double x : v) s += x;
    return v.empty() ? 0.0 : s / static_cast<double>(v.size());
}

}  // namespace

double calibrate_contact_threshold(const TactileSimulator& sim, const std::vector<CalibrationObject>& objects,
                                   int n_contacts, double depth, std::uint64_t seed, const SsimConfig& cfg,
                                   int workers) {
    if (n_contacts < 1) throw InvalidConfig("n_contacts must be >= 1");
    if (!(depth >= 0.0) || depth > sim.palm().max_depth) throw InvalidConfig("calibration depth out of range");
    const std::size_t per = static_cast<std::size_t>(n_contacts);
    std::vector<double> scores(objects.size() * per);
    const SsimReference reference(sim.rest_image(), cfg);
    parallel_for(scores.size(), workers, [&](std::size_t k) {
        const std::size_t o = k / per, i = k % per;
        Rng rng(derive_seed(seed, "contact-calibration", {o, i}));
        const auto& shape = objects[o].shape;
        const Pose rel = sim.at_depth(shape, random_feature_pose(shape, rng), depth);
        scores[k] = reference.compare(sim.sense(shape, rel).image);
    });
    return std::round(mean_of(scores) * 10.0) / 10.0;
}

double calibrate_loss_threshold(const TactileSimulator& sim, const std::vector<CalibrationObject>& objects,
                                int n_trials, double depth, std::uint64_t seed, const SsimConfig& cfg,
                                int workers) {
    if (n_trials < 1) throw InvalidConfig("n_trials must be >= 1");
    if (!(depth >= 0.0) || depth > sim.palm().max_depth) throw InvalidConfig("calibration depth out of range");
    const std::size_t per = static_cast<std::size_t>(n_trials);
    std::vector<double> scores(objects.size() * per);
    const SsimReference reference(sim.rest_image(), cfg);
    parallel_for(scores.size(), workers, [&](std::size_t k) {
        const std::size_t o = k / per, i = k % per;
        Rng rng(derive_seed(seed, "loss-calibration", {o, i}));
        const auto& shape = objects[o].shape;
        const Pose start = sim.at_depth(shape, random_feature_pose(shape, rng), depth);
        // Ground-truth adjustment: move the palm onto the grasp target.
        const GraspError err = grasp_error(shape, start);
        const Pose palm_after{err.offset.x(), err.offset.y(), 0.0, err.yaw};
        Pose adjusted = relative_pose(start, palm_after);
        adjusted = sim.at_depth(shape, adjusted, depth);
        scores[k] = reference.compare(sim.sense(shape, adjusted).image);
    });
    return mean_of(scores);
}

}  // namespace palmgrasp
