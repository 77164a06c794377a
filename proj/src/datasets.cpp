#include "palmgrasp/datasets.hpp"

#include <json.hpp>

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <set>
#include <sstream>

#include "palmgrasp/errors.hpp"
#include "palmgrasp/parallel.hpp"

namespace palmgrasp {

namespace fs = std::filesystem;
using nlohmann::json;
using nlohmann::ordered_json;

namespace {

constexpr int kMaxAttempts = 1000;

std::string sample_stem(const std::string& object_id, std::size_t index) {
    char buf[16];
    std::snprintf(buf, sizeof buf, "_%05zu", index);
    return object_id + buf;
}

}  // namespace

PoseRanges training_ranges() {
    PoseRanges r;
    r.flat_extension = 8.0;
    return r;
}

ContactDraw draw_contact(const TactileSimulator& sim, const ShapeSpec& shape, std::string_view object_id,
                         std::size_t index, const PoseRanges& ranges, std::uint64_t seed) {
    Rng rng(derive_seed(seed, "contact", {fnv1a64(object_id), index}));
    const double margin = shape.shape_class() == ShapeClass::EdgedFlat ? ranges.flat_extension : 0.0;
    ContactDraw d;
    for (; d.rejections < kMaxAttempts; ++d.rejections) {
        const Pose placed = random_feature_pose(shape, rng, ranges);
        d.depth = rng.uniform(ranges.reference_depth - ranges.depth_jitter,
                              ranges.reference_depth + ranges.depth_jitter);
        try {
            d.relative = sim.at_depth(shape, placed, d.depth);
            d.label = feature_label(shape, d.relative, margin);
            return d;
        } catch (const NoContact&) {
        } catch (const FeatureOutOfWorkspace&) {
        }
    }
    throw InvalidConfig("pose ranges admit no valid contact for " + std::string(object_id));
}

std::vector<ContactSample> sample_contacts(const TactileSimulator& sim, const ShapeSpec& shape,
                                           const std::string& object_id, std::size_t n, const PoseRanges& ranges,
                                           std::uint64_t seed, const std::string& split, int workers,
                                           SamplingStats* stats) {
    std::vector<ContactSample> out(n);
    std::vector<int> rejections(n, 0);
    parallel_for(n, workers, [&](std::size_t i) {
        const ContactDraw d = draw_contact(sim, shape, object_id, i, ranges, seed);
        const Observation obs = sim.sense(shape, d.relative);
        const std::string stem = sample_stem(object_id, i);
        auto& s = out[i];
        s.object_id = object_id;
        s.label = d.label;
        s.depth = d.depth;
        s.z = d.depth - ranges.reference_depth;
        s.image = split + "/images/" + stem + ".pgm";
        s.markers = split + "/markers/" + stem + ".csv";
        s.pixels = obs.image;
        s.field = obs.markers;
        rejections[i] = d.rejections;
    });
    if (stats) {
        stats->accepted += n;
        for (int r : rejections) stats->rejected += static_cast<std::size_t>(r);
    }
    return out;
}

void check_disjoint(const DatasetManifest& m) {
    std::set<std::string> train_ids;
    for (const auto& s : m.train) train_ids.insert(s.object_id);
    for (const auto& s : m.test)
        if (train_ids.count(s.object_id))
            throw CorruptManifest("object '" + s.object_id + "' appears in both train and test splits");
}

namespace {

json optional_number(const std::optional<double>& v) { return v ? json(*v) : json(nullptr); }

std::optional<double> read_optional(const json& j, const char* key) {
    const auto& v = j.at(key);
    if (v.is_null()) return std::nullopt;
    return v.get<double>();
}

void write_split(const fs::path& dir, const std::string& split, const std::vector<ContactSample>& samples) {
    fs::create_directories(dir / split / "images");
    bool any_markers = false;
    for (const auto& s : samples) any_markers |= !s.markers.empty();
    if (any_markers) fs::create_directories(dir / split / "markers");

    std::ofstream manifest(dir / (split + ".jsonl"), std::ios::binary);
    if (!manifest) throw MissingArtifact("cannot write manifest in " + dir.string());
    for (const auto& s : samples) {
        ordered_json j;
        j["object_id"] = s.object_id;
        j["shape_class"] = to_string(s.label.shape_class);
        j["x_mm"] = optional_number(s.label.x);
        j["y_mm"] = optional_number(s.label.y);
        j["z_mm"] = s.z;
        j["yaw_deg"] = optional_number(s.label.yaw);
        j["depth_mm"] = s.depth;
        j["image"] = s.image;
        j["markers"] = s.markers.empty() ? json(nullptr) : json(s.markers);
        manifest << j.dump() << '\n';

        write_pgm(dir / s.image, s.pixels);
        if (!s.markers.empty()) {
            std::ofstream csv(dir / s.markers, std::ios::binary);
            write_marker_csv(csv, s.field);
        }
    }
}

std::vector<ContactSample> read_split(const fs::path& dir, const std::string& split, bool load_payloads) {
    const fs::path path = dir / (split + ".jsonl");
    std::ifstream in(path, std::ios::binary);
    if (!in) throw CorruptManifest("missing manifest " + path.string());
    std::vector<ContactSample> out;
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty()) continue;
        ContactSample s;
        try {
            const json j = json::parse(line);
            static const std::vector<std::string> kFields{"object_id", "shape_class", "x_mm",  "y_mm",   "z_mm",
                                                          "yaw_deg",   "depth_mm",    "image", "markers"};
            if (j.size() != kFields.size())
                throw CorruptManifest("unexpected field count");
            for (const auto& k : kFields)
                if (!j.contains(k)) throw CorruptManifest("missing field '" + k + "'");
            s.object_id = j.at("object_id").get<std::string>();
            s.label.shape_class = shape_class_from_string(j.at("shape_class").get<std::string>());
            s.label.x = read_optional(j, "x_mm");
            s.label.y = read_optional(j, "y_mm");
            s.label.yaw = read_optional(j, "yaw_deg");
            s.z = j.at("z_mm").get<double>();
            s.depth = j.at("depth_mm").get<double>();
            s.image = j.at("image").get<std::string>();
            if (!j.at("markers").is_null()) s.markers = j.at("markers").get<std::string>();
        } catch (const json::exception& e) {
            throw CorruptManifest(path.string() + ":" + std::to_string(lineno) + ": " + e.what());
        } catch (const Error& e) {
            throw CorruptManifest(path.string() + ":" + std::to_string(lineno) + ": " + e.what());
        }
        if (!fs::exists(dir / s.image)) throw MissingImage("missing image " + (dir / s.image).string());
        if (load_payloads) {
            s.pixels = read_pgm(dir / s.image);
            if (!s.markers.empty()) {
                std::ifstream csv(dir / s.markers, std::ios::binary);
                if (!csv) throw MissingImage("missing marker file " + (dir / s.markers).string());
                s.field = read_marker_csv(csv);
            }
        }
        out.push_back(std::move(s));
    }
    return out;
}

}  // namespace

void write_dataset(const fs::path& dir, const DatasetManifest& m) {
    check_disjoint(m);
    fs::create_directories(dir);
    ordered_json meta;
    meta["seed"] = m.seed;
    meta["config_hash"] = m.config_hash;
    meta["n_train"] = m.train.size();
    meta["n_test"] = m.test.size();
    std::ofstream(dir / "meta.json", std::ios::binary) << meta.dump(2) << '\n';
    write_split(dir, "train", m.train);
    write_split(dir, "test", m.test);
}

DatasetManifest read_dataset(const fs::path& dir, bool load_payloads) {
    std::ifstream in(dir / "meta.json", std::ios::binary);
    if (!in) throw MissingArtifact("no dataset at " + dir.string() + " (run `gen-dataset` first)");
    DatasetManifest m;
    try {
        const json meta = json::parse(in);
        m.seed = meta.at("seed").get<std::uint64_t>();
        m.config_hash = meta.at("config_hash").get<std::string>();
    } catch (const json::exception& e) {
        throw CorruptManifest("bad meta.json: " + std::string(e.what()));
    }
    m.train = read_split(dir, "train", load_payloads);
    m.test = read_split(dir, "test", load_payloads);
    check_disjoint(m);
    return m;
}

double ks_uniform_statistic(std::vector<double> values, double lo, double hi) {
    if (values.empty()) return 0.0;
    std::sort(values.begin(), values.end());
    const double n = static_cast<double>(values.size());
    double d = 0.0;
    for (std::size_t i = 0; i < values.size(); ++i) {
        const double f = std::clamp((values[i] - lo) / (hi - lo), 0.0, 1.0);
        d = std::max({d, (static_cast<double>(i) + 1.0) / n - f, f - static_cast<double>(i) / n});
    }
    return d;
}

}  // namespace palmgrasp
