#include "palmgrasp/runner.hpp"

#include <json.hpp>

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>

#include "palmgrasp/datasets.hpp"
#include "palmgrasp/errors.hpp"
#include "palmgrasp/random.hpp"
#include "palmgrasp/similarity.hpp"

namespace palmgrasp {

namespace fs = std::filesystem;
using json = nlohmann::json;

namespace {

// Which settings each artifact depends on; an artifact embeds the hash of
// just these, so e.g. changing the episode count keeps the trained models.
enum class Scope { Dataset, Thresholds, Episodes, All };

using Setting = std::pair<std::string, json>;

std::vector<Setting> settings(const ExperimentConfig& c, Scope scope) {
    std::vector<Setting> s{
        {"seed", c.seed},
        {"palm.skin_diameter", c.palm.skin_diameter},
        {"palm.dome_radius", c.palm.dome_radius},
        {"palm.membrane_thickness", c.palm.membrane_thickness},
        {"palm.n_rings", c.palm.n_rings},
        {"membrane.spread_sigma", c.membrane.spread_sigma},
        {"membrane.spread_gain", c.membrane.spread_gain},
        {"membrane.stretch_gain", c.membrane.stretch_gain},
        {"membrane.stretch_length", c.membrane.stretch_length},
        {"catalog", c.catalog},
    };
    const bool all = scope == Scope::All;
    if (all || scope == Scope::Dataset || scope == Scope::Episodes) {
        s.emplace_back("n_train", c.n_train);
        s.emplace_back("n_test", c.n_test);
    }
    if (all || scope == Scope::Thresholds || scope == Scope::Episodes) {
        s.emplace_back("calibration_contacts", c.calibration_contacts);
        s.emplace_back("calibration_depth", c.calibration_depth);
    }
    if (all) {
        json v = json::array();
        for (auto m : c.variants) v.push_back(std::string(to_string(m)));
        s.emplace_back("variants", v);
    }
    if (all || scope == Scope::Episodes) {
        s.emplace_back("episode_variant", std::string(to_string(c.episode_variant)));
        s.emplace_back("groups", c.groups);
        s.emplace_back("episode_seed_begin", c.episode_seed_begin);
        s.emplace_back("episodes_per_group", c.episodes_per_group);
        s.emplace_back("pull_mm", c.pull_mm);
        s.emplace_back("fixed_heading_batch", c.fixed_heading_batch);
    }
    if (all) {
        s.emplace_back("sensitivity.sigmas", c.sensitivity_sigmas);
        s.emplace_back("sensitivity.n_train", c.sensitivity_n_train);
        s.emplace_back("sensitivity.n_test", c.sensitivity_n_test);
    }
    return s;
}

std::string text_of(const std::vector<Setting>& s) {
    std::string out;
    for (const auto& [k, v] : s) out += k + " = " + v.dump() + "\n";
    return out;
}

std::string hex_hash(const std::string& text) {
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(fnv1a64(text)));
    return buf;
}

std::string scope_hash(const ExperimentConfig& c, Scope scope) { return hex_hash(text_of(settings(c, scope))); }

template <class T>
T number(const json& v, const std::string& key) {
    if constexpr (std::is_unsigned_v<T>) {
        if (!v.is_number_unsigned()) throw InvalidConfig(key + " must be a non-negative integer, got " + v.dump());
    } else if constexpr (std::is_integral_v<T>) {
        if (!v.is_number_integer()) throw InvalidConfig(key + " must be an integer, got " + v.dump());
    } else {
        if (!v.is_number()) throw InvalidConfig(key + " must be a number, got " + v.dump());
    }
    return v.get<T>();
}

std::string string_value(const json& v, const std::string& key) {
    if (!v.is_string()) throw InvalidConfig(key + " must be a string, got " + v.dump());
    return v.get<std::string>();
}

ModelVariant variant_value(const json& v, const std::string& key) {
    try {
        return model_variant_from_string(string_value(v, key));
    } catch (const InvalidConfig&) {
        throw;
    } catch (const Error& e) {
        throw InvalidConfig(key + ": " + e.what());
    }
}

void apply_setting(ExperimentConfig& c, const std::string& key, const json& v) {
    static const std::map<std::string, std::function<void(ExperimentConfig&, const json&)>> kSetters{
        {"seed", [](auto& c, const json& v) { c.seed = number<std::uint64_t>(v, "seed"); }},
        {"palm.skin_diameter", [](auto& c, const json& v) { c.palm.skin_diameter = number<double>(v, "palm.skin_diameter"); }},
        {"palm.dome_radius", [](auto& c, const json& v) { c.palm.dome_radius = number<double>(v, "palm.dome_radius"); }},
        {"palm.membrane_thickness",
         [](auto& c, const json& v) {
             c.palm.membrane_thickness = number<double>(v, "palm.membrane_thickness");
             c.palm.max_depth = c.palm.membrane_thickness - 1.0;
         }},
        {"palm.n_rings", [](auto& c, const json& v) { c.palm.n_rings = number<int>(v, "palm.n_rings"); }},
        {"membrane.spread_sigma",
         [](auto& c, const json& v) { c.membrane.spread_sigma = number<double>(v, "membrane.spread_sigma"); }},
        {"membrane.spread_gain",
         [](auto& c, const json& v) { c.membrane.spread_gain = number<double>(v, "membrane.spread_gain"); }},
        {"membrane.stretch_gain",
         [](auto& c, const json& v) { c.membrane.stretch_gain = number<double>(v, "membrane.stretch_gain"); }},
        {"membrane.stretch_length",
         [](auto& c, const json& v) { c.membrane.stretch_length = number<double>(v, "membrane.stretch_length"); }},
        {"catalog", [](auto& c, const json& v) { c.catalog = string_value(v, "catalog"); }},
        {"n_train", [](auto& c, const json& v) { c.n_train = number<std::size_t>(v, "n_train"); }},
        {"n_test", [](auto& c, const json& v) { c.n_test = number<std::size_t>(v, "n_test"); }},
        {"calibration_contacts",
         [](auto& c, const json& v) { c.calibration_contacts = number<int>(v, "calibration_contacts"); }},
        {"calibration_depth", [](auto& c, const json& v) { c.calibration_depth = number<double>(v, "calibration_depth"); }},
        {"variants",
         [](auto& c, const json& v) {
             if (!v.is_array()) throw InvalidConfig("variants must be an array, got " + v.dump());
             c.variants.clear();
             for (const auto& x : v) c.variants.push_back(variant_value(x, "variants"));
         }},
        {"episode_variant", [](auto& c, const json& v) { c.episode_variant = variant_value(v, "episode_variant"); }},
        {"groups",
         [](auto& c, const json& v) {
             if (!v.is_array()) throw InvalidConfig("groups must be an array, got " + v.dump());
             c.groups.clear();
             for (const auto& x : v) c.groups.push_back(string_value(x, "groups"));
         }},
        {"episode_seed_begin",
         [](auto& c, const json& v) { c.episode_seed_begin = number<std::uint64_t>(v, "episode_seed_begin"); }},
        {"episodes_per_group",
         [](auto& c, const json& v) { c.episodes_per_group = number<std::size_t>(v, "episodes_per_group"); }},
        {"pull_mm", [](auto& c, const json& v) { c.pull_mm = number<double>(v, "pull_mm"); }},
        {"fixed_heading_batch",
         [](auto& c, const json& v) {
             if (!v.is_boolean()) throw InvalidConfig("fixed_heading_batch must be true or false");
             c.fixed_heading_batch = v.get<bool>();
         }},
        {"sensitivity.sigmas",
         [](auto& c, const json& v) {
             if (!v.is_array()) throw InvalidConfig("sensitivity.sigmas must be an array, got " + v.dump());
             c.sensitivity_sigmas.clear();
             for (const auto& x : v) c.sensitivity_sigmas.push_back(number<double>(x, "sensitivity.sigmas"));
         }},
        {"sensitivity.n_train",
         [](auto& c, const json& v) { c.sensitivity_n_train = number<std::size_t>(v, "sensitivity.n_train"); }},
        {"sensitivity.n_test",
         [](auto& c, const json& v) { c.sensitivity_n_test = number<std::size_t>(v, "sensitivity.n_test"); }},
        {"out", [](auto& c, const json& v) { c.out = string_value(v, "out"); }},
        {"workers", [](auto& c, const json& v) { c.workers = number<int>(v, "workers"); }},
    };
    const auto it = kSetters.find(key);
    if (it == kSetters.end()) throw InvalidConfig("unknown config key: " + key);
    it->second(c, v);
}

void apply_object(ExperimentConfig& c, const json& obj, const std::string& prefix) {
    for (const auto& [k, v] : obj.items()) {
        if (v.is_object())
            apply_object(c, v, prefix + k + ".");
        else
            apply_setting(c, prefix + k, v);
    }
}

std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) return {};
    return s.substr(b, s.find_last_not_of(" \t\r") - b + 1);
}

// Drops a trailing `# comment` that is not inside a JSON string.
std::string strip_comment(const std::string& line) {
    bool quoted = false;
    for (std::size_t i = 0; i < line.size(); ++i) {
        if (line[i] == '"' && (i == 0 || line[i - 1] != '\\')) quoted = !quoted;
        if (line[i] == '#' && !quoted) return line.substr(0, i);
    }
    return line;
}

}  // namespace

std::vector<CatalogEntry> load_catalog(const ExperimentConfig& cfg) {
    if (cfg.catalog.empty()) return default_catalog();
    std::ifstream in(cfg.catalog);
    if (!in) throw InvalidConfig("catalog file not found: " + cfg.catalog);
    return parse_catalog(in);
}

namespace {

std::vector<CatalogEntry> split_of(const std::vector<CatalogEntry>& cat, const std::string& split) {
    std::vector<CatalogEntry> out;
    std::copy_if(cat.begin(), cat.end(), std::back_inserter(out), [&](const auto& e) { return e.split == split; });
    return out;
}

void require_hash(const std::string& found, const std::string& expected, const fs::path& what, const char* cmd) {
    if (found != expected)
        throw MissingArtifact(what.string() + " was produced under a different config (hash " + found +
                              ", expected " + expected + "); rerun `" + cmd + "`");
}

fs::path dataset_dir(const ExperimentConfig& c) { return c.out / "dataset"; }
fs::path thresholds_path(const ExperimentConfig& c) { return c.out / "thresholds.json"; }
fs::path model_path(const fs::path& out, ModelVariant v) { return out / "models" / (std::string(to_string(v)) + ".bin"); }
fs::path summary_path(const fs::path& out) { return out / "episodes" / "summary.csv"; }

DatasetManifest load_dataset(const ExperimentConfig& cfg) {
    const fs::path dir = dataset_dir(cfg);
    if (!fs::exists(dir / "meta.json"))
        throw MissingArtifact("dataset not found in " + dir.string() + " (run `gen-dataset` first)");
    DatasetManifest m = read_dataset(dir);
    require_hash(m.config_hash, scope_hash(cfg, Scope::Dataset), dir, "gen-dataset");
    return m;
}

ModelSet load_model(const ExperimentConfig& cfg, ModelVariant v) {
    const fs::path p = model_path(cfg.out, v);
    if (!fs::exists(p)) throw MissingArtifact("model not found: " + p.string() + " (run `train` first)");
    std::string hash;
    ModelSet m = ModelSet::load(p, &hash);
    require_hash(hash, scope_hash(cfg, Scope::Dataset), p, "train");
    return m;
}

void write_text(const fs::path& path, const std::string& text) {
    fs::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary);
    if (!out) throw MissingArtifact("cannot write " + path.string());
    out << text;
}

std::string read_text(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw MissingArtifact("cannot read " + path.string());
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

std::string fixed(double v, int digits = 3) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.*f", digits, v);
    return buf;
}

}  // namespace

void ExperimentConfig::validate() const {
    palm.validate();
    if (!(membrane.spread_sigma > 0.0) || membrane.spread_gain < 0.0 || membrane.stretch_gain < 0.0 ||
        !(membrane.stretch_length > 0.0))
        throw InvalidConfig("membrane settings out of range");
    if (n_train < 1 || n_test < 1) throw InvalidConfig("n_train and n_test must be >= 1");
    if (calibration_contacts < 1) throw InvalidConfig("calibration_contacts must be >= 1");
    if (!(calibration_depth > 0.0) || calibration_depth > palm.max_depth)
        throw InvalidConfig("calibration_depth must lie in (0, max_depth]");
    if (variants.empty()) throw InvalidConfig("variants must not be empty");
    for (const auto& g : groups) {
        const auto& all = ablation_groups();
        if (std::none_of(all.begin(), all.end(), [&](const AblationGroup& a) { return a.name == g; }))
            throw InvalidConfig("unknown episode group: " + g);
    }
    if (!(pull_mm >= 0.0)) throw InvalidConfig("pull_mm must be >= 0");
    for (double s : sensitivity_sigmas)
        if (!(s > 0.0)) throw InvalidConfig("sensitivity.sigmas must be positive");
    if (sensitivity_n_train < 1 || sensitivity_n_test < 1)
        throw InvalidConfig("sensitivity.n_train and sensitivity.n_test must be >= 1");
    if (workers < 1) throw InvalidConfig("workers must be >= 1");
}

std::string ExperimentConfig::snapshot() const { return text_of(settings(*this, Scope::All)); }

std::string ExperimentConfig::hash() const { return hex_hash(snapshot()); }

ExperimentConfig parse_experiment_config(std::istream& in, ExperimentConfig base) {
    std::stringstream ss;
    ss << in.rdbuf();
    const std::string text = ss.str();
    const auto first = text.find_first_not_of(" \t\r\n");
    if (first != std::string::npos && text[first] == '{') {
        json obj;
        try {
            obj = json::parse(text);
        } catch (const json::exception& e) {
            throw InvalidConfig(std::string("malformed JSON config: ") + e.what());
        }
        apply_object(base, obj, "");
        return base;
    }
    std::istringstream lines(text);
    std::string line;
    for (int n = 1; std::getline(lines, line); ++n) {
        line = trim(strip_comment(line));
        if (line.empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos) throw InvalidConfig("line " + std::to_string(n) + ": expected `key = value`");
        const std::string key = trim(line.substr(0, eq));
        json value;
        try {
            value = json::parse(trim(line.substr(eq + 1)));
        } catch (const json::exception&) {
            throw InvalidConfig("line " + std::to_string(n) + ": value of " + key + " is not a JSON literal");
        }
        apply_setting(base, key, value);
    }
    return base;
}

ExperimentConfig load_experiment_config(const fs::path& path, ExperimentConfig base) {
    std::ifstream in(path);
    if (!in) throw InvalidConfig("config file not found: " + path.string());
    return parse_experiment_config(in, std::move(base));
}

void write_config_snapshot(const fs::path& dir, const ExperimentConfig& cfg) {
    write_text(dir / "config.txt", "# config_hash = " + cfg.hash() + "\n" + cfg.snapshot());
}

DatasetManifest generate_dataset(const ExperimentConfig& cfg) {
    const TactileSimulator sim(cfg.palm, cfg.membrane);
    DatasetManifest m;
    m.seed = cfg.seed;
    m.config_hash = scope_hash(cfg, Scope::Dataset);
    for (const auto& e : load_catalog(cfg)) {
        const bool train = e.split == "train";
        auto samples = sample_contacts(sim, e.shape, e.object_id, train ? cfg.n_train : cfg.n_test,
                                       train ? training_ranges() : PoseRanges{}, cfg.seed, e.split, cfg.workers);
        auto& dst = train ? m.train : m.test;
        dst.insert(dst.end(), std::make_move_iterator(samples.begin()), std::make_move_iterator(samples.end()));
    }
    check_disjoint(m);
    return m;
}

void cmd_gen_dataset(const ExperimentConfig& cfg) {
    cfg.validate();
    write_config_snapshot(cfg.out, cfg);
    const DatasetManifest m = generate_dataset(cfg);
    fs::remove_all(dataset_dir(cfg));
    write_dataset(dataset_dir(cfg), m);
}

Thresholds calibrate_thresholds(const ExperimentConfig& cfg) {
    const TactileSimulator sim(cfg.palm, cfg.membrane);
    std::vector<CalibrationObject> objects;
    for (const auto& e : split_of(load_catalog(cfg), "train")) objects.push_back({e.object_id, e.shape});
    const std::uint64_t seed = derive_seed(cfg.seed, "calibrate");
    Thresholds t;
    t.contact = calibrate_contact_threshold(sim, objects, cfg.calibration_contacts, cfg.calibration_depth, seed, {},
                                            cfg.workers);
    t.loss_of_contact = calibrate_loss_threshold(sim, objects, cfg.calibration_contacts, cfg.calibration_depth, seed,
                                                 {}, cfg.workers);
    return t;
}

void cmd_calibrate(const ExperimentConfig& cfg) {
    cfg.validate();
    write_config_snapshot(cfg.out, cfg);
    write_thresholds(thresholds_path(cfg), calibrate_thresholds(cfg), scope_hash(cfg, Scope::Thresholds));
}

void cmd_train(const ExperimentConfig& cfg) {
    cfg.validate();
    write_config_snapshot(cfg.out, cfg);
    const DatasetManifest m = load_dataset(cfg);
    for (const auto v : cfg.variants) {
        const ModelSet model = train_model_set({v}, m.train, {}, derive_seed(cfg.seed, "train"));
        const fs::path p = model_path(cfg.out, v);
        fs::create_directories(p.parent_path());
        model.save(p, scope_hash(cfg, Scope::Dataset));
    }
}

void write_eval(const fs::path& dir, ModelVariant variant, const ModelSetSpec& spec,
                const std::vector<ContactSample>& test, const std::vector<PoseEstimate>& predictions) {
    const MaeReport rep = evaluate_predictions(spec, test, predictions);
    const std::string name(to_string(variant));
    fs::create_directories(dir);
    write_mae_csv(dir / (name + ".csv"), rep);
    nlohmann::ordered_json j;
    j["variant"] = name;
    j["class_accuracy"] = rep.class_accuracy;
    j["n_test"] = test.size();
    write_text(dir / (name + ".json"), j.dump(2) + "\n");
}

void cmd_eval(const ExperimentConfig& cfg) {
    cfg.validate();
    write_config_snapshot(cfg.out, cfg);
    const DatasetManifest m = load_dataset(cfg);
    for (const auto v : cfg.variants) {
        const ModelSet model = load_model(cfg, v);
        std::vector<PoseEstimate> pred(m.test.size());
        parallel_for(m.test.size(), cfg.workers, [&](std::size_t i) { pred[i] = model.predict(m.test[i].field); });
        write_eval(cfg.out / "mae", v, model.spec(), m.test, pred);
    }
}

std::vector<EpisodeBatch> episode_batches(const ExperimentConfig& cfg, const Thresholds& thresholds) {
    std::vector<EpisodeBatch> batches;
    for (const auto& g : ablation_groups()) {
        if (std::find(cfg.groups.begin(), cfg.groups.end(), g.name) == cfg.groups.end()) continue;
        StrategyConfig s;
        s.thresholds = thresholds;
        s.stages = g.stages;
        batches.push_back({g.name, s});
    }
    if (cfg.fixed_heading_batch) {
        StrategyConfig s;
        s.thresholds = thresholds;
        s.tap_heading = 0.0;
        batches.push_back({kFixedHeadingGroup, s});
    }
    return batches;
}

std::vector<CatalogEntry> test_objects(const ExperimentConfig& cfg) {
    auto objects = split_of(load_catalog(cfg), "test");
    if (objects.empty()) throw InvalidConfig("the catalog has no test objects");
    return objects;
}

EpisodeLog run_seeded_episode(const ExperimentConfig& cfg, const GraspStrategy& strategy, const CatalogEntry& object,
                              std::uint64_t seed) {
    const SceneState scene = make_scene(object.shape, {}, derive_seed(cfg.seed, "scene", {seed}));
    return strategy.run_episode(scene, {cfg.pull_mm, Perturbation{}.rate}, derive_seed(cfg.seed, "episode", {seed}));
}

void cmd_episodes(const ExperimentConfig& cfg) {
    cfg.validate();
    write_config_snapshot(cfg.out, cfg);
    const fs::path tpath = thresholds_path(cfg);
    if (!fs::exists(tpath)) throw MissingArtifact("thresholds not found: " + tpath.string() + " (run `calibrate` first)");
    std::string thash;
    const Thresholds thresholds = read_thresholds(tpath, &thash);
    require_hash(thash, scope_hash(cfg, Scope::Thresholds), tpath, "calibrate");
    const ModelSet model = load_model(cfg, cfg.episode_variant);
    const auto objects = test_objects(cfg);
    const auto batches = episode_batches(cfg, thresholds);
    const TactileSimulator sim(cfg.palm, cfg.membrane);
    std::vector<GraspStrategy> strategies;
    for (const auto& b : batches) strategies.emplace_back(sim, model_estimator(model), b.strategy);

    const std::size_t per = cfg.episodes_per_group;
    std::vector<EpisodeSummaryRow> rows(batches.size() * per);
    const fs::path root = cfg.out / "episodes";
    fs::remove_all(root);
    for (const auto& b : batches) fs::create_directories(root / b.group);
    parallel_for(rows.size(), cfg.workers, [&](std::size_t k) {
        const std::size_t b = k / per;
        const std::uint64_t seed = cfg.episode_seed_begin + k % per;
        const auto& obj = objects[seed % objects.size()];
        const EpisodeLog log = run_seeded_episode(cfg, strategies[b], obj, seed);
        std::ofstream out(root / batches[b].group / (std::to_string(seed) + ".jsonl"), std::ios::binary);
        if (!out) throw MissingArtifact("cannot write episode log under " + root.string());
        write_episode_jsonl(out, log, seed, batches[b].group, obj.object_id);
        rows[k] = {seed, batches[b].group, log.result};
    });
    write_summary_csv(summary_path(cfg.out), rows);
}

std::vector<SensitivityRow> spread_sensitivity(const ExperimentConfig& cfg) {
    std::vector<SensitivityRow> rows;
    for (const double sigma : cfg.sensitivity_sigmas) {
        ExperimentConfig c = cfg;
        c.membrane.spread_sigma = sigma;
        c.n_train = cfg.sensitivity_n_train;
        c.n_test = cfg.sensitivity_n_test;
        const DatasetManifest m = generate_dataset(c);
        const ModelSet model = train_model_set({cfg.episode_variant}, m.train, {}, derive_seed(cfg.seed, "train"));
        const MaeReport rep = evaluate_mae(model, m.test, cfg.workers);
        SensitivityRow row;
        row.sigma = sigma;
        row.class_accuracy = rep.class_accuracy;
        std::size_t n_pos = 0, n_yaw = 0;
        for (const auto& r : rep.rows) {
            if (r.dimension == "yaw") {
                row.mean_yaw_mae += r.mae;
                row.worst_yaw_mae = std::max(row.worst_yaw_mae, r.mae);
                ++n_yaw;
            } else {
                row.mean_pos_mae += r.mae;
                row.worst_pos_mae = std::max(row.worst_pos_mae, r.mae);
                ++n_pos;
            }
        }
        if (n_pos) row.mean_pos_mae /= static_cast<double>(n_pos);
        if (n_yaw) row.mean_yaw_mae /= static_cast<double>(n_yaw);
        rows.push_back(row);
    }
    return rows;
}

namespace {

constexpr const char* kSensitivityHeader =
    "sigma,mean_pos_mae,worst_pos_mae,mean_yaw_mae,worst_yaw_mae,class_accuracy";

std::vector<SensitivityRow> read_sensitivity_csv(const fs::path& path) {
    std::istringstream in(read_text(path));
    std::string line;
    if (!std::getline(in, line) || line != kSensitivityHeader)
        throw InvalidConfig("unexpected header in " + path.string());
    std::vector<SensitivityRow> rows;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        std::array<double, 6> v{};
        std::istringstream fields(line);
        std::string f;
        for (double& x : v) {
            if (!std::getline(fields, f, ',')) throw InvalidConfig("short row in " + path.string());
            try {
                x = std::stod(f);
            } catch (const std::exception&) {
                throw InvalidConfig("bad number '" + f + "' in " + path.string());
            }
        }
        rows.push_back({v[0], v[1], v[2], v[3], v[4], v[5]});
    }
    return rows;
}

}  // namespace

void cmd_sensitivity(const ExperimentConfig& cfg) {
    cfg.validate();
    write_config_snapshot(cfg.out, cfg);
    std::string text = std::string(kSensitivityHeader) + "\n";
    for (const auto& r : spread_sensitivity(cfg))
        text += fixed(r.sigma, 2) + "," + fixed(r.mean_pos_mae, 6) + "," + fixed(r.worst_pos_mae, 6) + "," +
                fixed(r.mean_yaw_mae, 6) + "," + fixed(r.worst_yaw_mae, 6) + "," + fixed(r.class_accuracy, 6) + "\n";
    write_text(cfg.out / "sensitivity.csv", text);
}

namespace {

void report_sensitivity(std::ostream& r, const fs::path& out) {
    const fs::path csv = out / "sensitivity.csv";
    if (!fs::exists(csv)) return;
    r << "## Spread sigma sensitivity\n\n"
         "Episode model retrained on a smaller dataset rendered at each membrane spread sigma; "
         "MAE over test objects.\n\n"
         "| sigma (mm) | mean pos (mm) | worst pos (mm) | mean yaw (deg) | worst yaw (deg) | class accuracy |\n"
         "|---:|---:|---:|---:|---:|---:|\n";
    for (const auto& s : read_sensitivity_csv(csv))
        r << "| " << fixed(s.sigma, 1) << " | " << fixed(s.mean_pos_mae) << " | " << fixed(s.worst_pos_mae) << " | "
          << fixed(s.mean_yaw_mae) << " | " << fixed(s.worst_yaw_mae) << " | " << fixed(s.class_accuracy) << " |\n";
    r << '\n';
}

struct GroupStats {
    std::size_t n = 0;
    double err_mm = 0.0, err_deg = 0.0;
    std::map<std::string, int> outcomes;
    std::vector<double> depths;
};

void report_mae(std::ostream& r, const fs::path& out) {
    std::vector<std::pair<std::string, MaeReport>> reports;
    std::map<std::string, double> accuracy;
    for (const auto v : {ModelVariant::M1, ModelVariant::M2, ModelVariant::M3}) {
        const std::string name(to_string(v));
        const fs::path csv = out / "mae" / (name + ".csv");
        if (!fs::exists(csv)) continue;
        reports.emplace_back(name, read_mae_csv(csv));
        const fs::path meta = out / "mae" / (name + ".json");
        if (fs::exists(meta)) accuracy[name] = json::parse(read_text(meta)).at("class_accuracy").get<double>();
    }
    r << "## Pose estimation error\n\n";
    if (reports.empty()) {
        r << "No evaluations: run `eval` to produce `mae/<variant>.csv`.\n\n";
        return;
    }
    r << "Mean absolute error on the test split (mm for x and y, degrees for yaw).\n\n| object | dim |";
    for (const auto& [name, rep] : reports) r << ' ' << name << " |";
    r << "\n|---|---|";
    for (std::size_t i = 0; i < reports.size(); ++i) r << "---:|";
    r << '\n';
    // Row order follows the first table; every variant reports the same objects and dimensions.
    for (const auto& row : reports.front().second.rows) {
        r << "| " << row.object_id << " | " << row.dimension << " |";
        for (const auto& [name, rep] : reports) {
            const MaeRow* m = rep.find(row.object_id, row.dimension);
            r << ' ' << (m ? fixed(m->mae) : std::string("-")) << " |";
        }
        r << '\n';
    }
    r << "| class accuracy | |";
    for (const auto& [name, rep] : reports)
        r << ' ' << (accuracy.count(name) ? fixed(accuracy[name]) : std::string("-")) << " |";
    r << "\n\n";

    r << "### Yaw aliasing\n\n"
         "Yaw MAE (degrees) for test samples within 10 degrees of the yaw range boundary (extreme) "
         "and elsewhere (mid).\n\n| object | variant | extreme | mid | extreme / mid | n extreme |\n"
         "|---|---|---:|---:|---:|---:|\n";
    bool any = false;
    for (const auto& row : reports.front().second.rows) {
        if (row.dimension != "yaw") continue;
        for (const auto& [name, rep] : reports) {
            const MaeRow* m = rep.find(row.object_id, "yaw");
            if (!m || !m->extreme_band_mae) continue;
            any = true;
            const bool ratio = m->mid_band_mae && *m->mid_band_mae > 0.0;
            r << "| " << m->object_id << " | " << name << " | " << fixed(*m->extreme_band_mae) << " | "
              << (m->mid_band_mae ? fixed(*m->mid_band_mae) : "-") << " | "
              << (ratio ? fixed(*m->extreme_band_mae / *m->mid_band_mae, 2) : "-") << " | " << m->n_extreme
              << " |\n";
        }
    }
    if (!any) r << "| (no samples in the extreme band) | | | | | |\n";
    r << '\n';
}

void report_episodes(std::ostream& r, const fs::path& out) {
    const fs::path csv = summary_path(out);
    const auto rows = fs::exists(csv) ? read_summary_csv(csv) : std::vector<EpisodeSummaryRow>{};
    if (rows.empty()) {
        r << "## Episodes\n\nNo episodes: `episodes/summary.csv` is missing or empty. Run `episodes` to fill "
             "the detection-depth and ablation sections.\n";
        return;
    }
    std::vector<std::string> order;
    std::map<std::string, GroupStats> stats;
    for (const auto& row : rows) {
        if (!stats.count(row.group)) order.push_back(row.group);
        auto& s = stats[row.group];
        ++s.n;
        s.err_mm += row.result.final_err_mm;
        s.err_deg += row.result.final_err_deg;
        ++s.outcomes[row.result.outcome];
        if (row.result.detection_depth) s.depths.push_back(*row.result.detection_depth);
    }

    r << "## Contact detection depth\n\nGround-truth depth at which light contact fired, 0.5 mm bins.\n\n";
    bool any_depth = false;
    for (const auto& g : order) {
        const auto& d = stats[g].depths;
        if (d.empty()) continue;
        any_depth = true;
        double mean = 0.0;
        for (double x : d) mean += x / static_cast<double>(d.size());
        const auto in_band = std::count_if(d.begin(), d.end(), [](double x) { return x >= 2.0 && x <= 4.0; });
        r << "### " << g << "\n\nn = " << d.size() << ", mean = " << fixed(mean) << " mm, in [2, 4] mm: " << in_band
          << "/" << d.size() << "\n\n```\n";
        constexpr int kBins = 10;
        std::array<int, kBins> hist{};
        for (double x : d) ++hist[std::clamp(static_cast<int>(std::floor(x / 0.5)), 0, kBins - 1)];
        for (int b = 0; b < kBins; ++b)
            r << fixed(0.5 * b, 1) << "-" << fixed(0.5 * (b + 1), 1) << " | " << std::string(hist[b], '#') << ' '
              << hist[b] << '\n';
        r << "```\n\n";
    }
    if (!any_depth) r << "No group ran contact detection.\n\n";

    r << "## Stage ablation\n\nFinal pose error after the hold: in-plane distance to the grasp target combined "
         "with the depth error, and the yaw error.\n\n"
         "| group | episodes | mean error (mm) | mean yaw error (deg) | outcomes |\n|---|---:|---:|---:|---|\n";
    for (const auto& g : order) {
        const auto& s = stats[g];
        r << "| " << g << " | " << s.n << " | " << fixed(s.err_mm / s.n) << " | " << fixed(s.err_deg / s.n) << " | ";
        bool first = true;
        for (const auto& [o, n] : s.outcomes) {
            r << (first ? "" : ", ") << o << " " << n;
            first = false;
        }
        r << " |\n";
    }
    std::vector<double> means;
    for (const auto& g : ablation_groups())
        if (stats.count(g.name)) means.push_back(stats[g.name].err_mm / stats[g.name].n);
    if (means.size() == ablation_groups().size()) {
        bool decreasing = true;
        for (std::size_t i = 1; i < means.size(); ++i) decreasing = decreasing && means[i] < means[i - 1];
        r << "\nMean error strictly decreases from baseline to full: " << (decreasing ? "yes" : "no") << ".\n";
    }
    if (stats.count(kFixedHeadingGroup) && stats.count("full")) {
        r << "\n### Initial tap heading\n\n`full` draws the first tap direction per seed; `" << kFixedHeadingGroup
          << "` always taps along palm +X. Mean errors: " << fixed(stats["full"].err_mm / stats["full"].n)
          << " mm versus " << fixed(stats[kFixedHeadingGroup].err_mm / stats[kFixedHeadingGroup].n) << " mm.\n";
    }
}

}  // namespace

std::string render_report(const fs::path& out) {
    std::ostringstream r;
    const fs::path cfg_path = out / "config.txt";
    if (!fs::exists(cfg_path)) throw MissingArtifact("no config snapshot in " + out.string() + " (run any command first)");
    const std::string snapshot = read_text(cfg_path);
    const std::string first_line = snapshot.substr(0, snapshot.find('\n'));
    const std::string prefix = "# config_hash = ";
    const std::string hash = first_line.rfind(prefix, 0) == 0 ? first_line.substr(prefix.size()) : "unknown";

    r << "# Tactile palm grasping report\n\nConfig hash: `" << hash << "`\n\n";
    r << "## Contact thresholds\n\n";
    const fs::path tpath = out / "thresholds.json";
    if (fs::exists(tpath)) {
        const Thresholds t = read_thresholds(tpath);
        r << "| contact | loss of contact | ordered |\n|---:|---:|---|\n| " << fixed(t.contact, 4) << " | "
          << fixed(t.loss_of_contact, 4) << " | " << (t.ordered() ? "yes" : "no") << " |\n\n";
    } else {
        r << "Not calibrated: run `calibrate`.\n\n";
    }
    report_mae(r, out);
    report_sensitivity(r, out);
    report_episodes(r, out);
    r << "\n## Configuration\n\n```\n" << snapshot << "```\n";
    return r.str();
}

void cmd_report(const ExperimentConfig& cfg) {
    cfg.validate();
    write_config_snapshot(cfg.out, cfg);
    write_text(cfg.out / "report.md", render_report(cfg.out));
}

}  // namespace palmgrasp
