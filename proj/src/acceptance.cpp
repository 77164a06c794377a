#include "palmgrasp/acceptance.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <map>
#include <memory>
#include <optional>
#include <sstream>

#include "palmgrasp/errors.hpp"
#include "palmgrasp/random.hpp"
#include "palmgrasp/runner.hpp"
#include "palmgrasp/sampling.hpp"

namespace palmgrasp {

namespace fs = std::filesystem;

namespace {

using Clock = std::chrono::steady_clock;

double since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

std::string fmt(const char* f, auto... args) {
    char buf[512];
    std::snprintf(buf, sizeof buf, f, args...);
    return buf;
}

struct Check {
    bool pass = true;
    std::string detail;

    void require(bool ok, const std::string& what) {
        if (!ok) {
            pass = false;
            detail += (detail.empty() ? "" : "; ") + what;
        }
    }
    void note(const std::string& what) { detail += (detail.empty() ? "" : "; ") + what; }
};

// Artifacts shared between criteria, built on first use.
class Suite {
public:
    explicit Suite(const AcceptanceOptions& opts) : opts_(opts) {
        cfg_.workers = opts.workers;
        cfg_.out = opts.scratch / "unused";
    }

    const ExperimentConfig& config() const { return cfg_; }
    const TactileSimulator& sim() const { return sim_; }
    const AcceptanceOptions& options() const { return opts_; }

    const Thresholds& thresholds() {
        if (!thresholds_) thresholds_ = calibrate_thresholds(cfg_);
        return *thresholds_;
    }
    const DatasetManifest& dataset() {
        if (!dataset_) {
            const auto t0 = Clock::now();
            dataset_ = generate_dataset(cfg_);
            dataset_seconds_ = since(t0);
        }
        return *dataset_;
    }
    double dataset_seconds() const { return dataset_seconds_; }
    const ModelSet& model(ModelVariant v) {
        auto& slot = models_[v];
        if (!slot) {
            const auto t0 = Clock::now();
            slot = std::make_unique<ModelSet>(train_model_set({v}, dataset().train, {}, derive_seed(cfg_.seed, "train")));
            train_seconds_[v] = since(t0);
        }
        return *slot;
    }
    double train_seconds(ModelVariant v) { return train_seconds_[v]; }
    const MaeReport& mae(ModelVariant v) {
        auto it = mae_.find(v);
        if (it == mae_.end()) it = mae_.emplace(v, evaluate_mae(model(v), dataset().test, opts_.workers)).first;
        return it->second;
    }

private:
    AcceptanceOptions opts_;
    ExperimentConfig cfg_;
    TactileSimulator sim_{cfg_.palm, cfg_.membrane};
    std::optional<Thresholds> thresholds_;
    std::optional<DatasetManifest> dataset_;
    double dataset_seconds_ = 0.0;
    std::map<ModelVariant, std::unique_ptr<ModelSet>> models_;
    std::map<ModelVariant, double> train_seconds_;
    std::map<ModelVariant, MaeReport> mae_;
};

Check ssim_kernel(Suite& s) {
    Check c;
    const auto cat = default_catalog();
    Rng rng(derive_seed(0, "acceptance-ssim"));
    std::vector<TactileImage> images;
    for (int i = 0; i <= 100; ++i) {
        const auto& shape = cat[rng.below(cat.size())].shape;
        const double depth = rng.uniform(0.2, s.sim().palm().max_depth);
        const Pose rel = s.sim().at_depth(shape, random_feature_pose(shape, rng), depth);
        images.push_back(s.sim().sense(shape, rel).image);
    }
    int identity = 0, symmetric = 0;
    for (int i = 0; i < 100; ++i) {
        identity += ssim(images[i], images[i]) == 1.0;
        symmetric += ssim(images[i], images[i + 1]) == ssim(images[i + 1], images[i]);
    }
    const auto t0 = Clock::now();
    double sink = 0.0;
    for (int i = 0; i < 100; ++i) sink += ssim(images[i], images[i + 1]);
    const double ms = 1000.0 * since(t0) / 100.0;
    c.require(identity == 100, fmt("ssim(I,I) = 1 for %d/100", identity));
    c.require(symmetric == 100, fmt("symmetric for %d/100", symmetric));
    c.require(ms < 5.0, fmt("%.2f ms per pair", ms));
    c.note(fmt("identity 100/100, symmetry %d/100, %.2f ms per 240x240 pair (mean ssim %.3f)", symmetric, ms,
               sink / 100.0));
    return c;
}

Check threshold_ordering(Suite& s) {
    Check c;
    const Thresholds a = s.thresholds();
    const Thresholds b = calibrate_thresholds(s.config());
    c.require(a.ordered(), "thresholds not ordered");
    c.require(a.contact == b.contact && a.loss_of_contact == b.loss_of_contact, "calibration not deterministic");
    c.note(fmt("contact %.4f <= loss %.4f, repeat identical: %s", a.contact, a.loss_of_contact,
               a.contact == b.contact && a.loss_of_contact == b.loss_of_contact ? "yes" : "no"));
    return c;
}

Check detection_band(Suite& s) {
    Check c;
    const auto t0 = Clock::now();
    StrategyConfig sc;
    sc.thresholds = s.thresholds();
    const GraspStrategy strategy(s.sim(), ground_truth_estimator(), sc);
    const auto objects = test_objects(s.config());
    std::vector<double> depth(objects.size() * 20);
    parallel_for(depth.size(), s.options().workers, [&](std::size_t k) {
        SceneState scene = make_scene(objects[k / 20].shape, {}, derive_seed(0, "scene", {k % 20}));
        EpisodeLog log;
        depth[k] = strategy.detect_light_contact(scene, log).depth;
    });
    const double secs = since(t0);
    const auto positive = std::count_if(depth.begin(), depth.end(), [](double d) { return d > 0.0; });
    const auto in_band = std::count_if(depth.begin(), depth.end(), [](double d) { return d >= 2.0 && d <= 4.0; });
    double mean = 0.0;
    for (double d : depth) mean += d / static_cast<double>(depth.size());
    const auto n = static_cast<long>(depth.size());
    c.require(positive == n, "non-positive detection depth");
    c.require(in_band >= 0.95 * static_cast<double>(n), "fewer than 95% in [2, 4] mm");
    c.require(mean >= 2.5 && mean <= 3.5, "mean outside [2.5, 3.5] mm");
    c.require(secs < 120.0, "slower than 2 min");
    c.note(fmt("%ld episodes, positive %ld, in [2,4] %ld, mean %.3f mm, %.1f s", n, positive, in_band, mean, secs));
    return c;
}

Check pose_estimation(Suite& s) {
    Check c;
    const auto t0 = Clock::now();
    const MaeReport& rep = s.mae(ModelVariant::M3);
    double worst_pos = 0.0, worst_yaw = 0.0;
    for (const auto& row : rep.rows) {
        const bool yaw = row.dimension == "yaw";
        (yaw ? worst_yaw : worst_pos) = std::max(yaw ? worst_yaw : worst_pos, row.mae);
        if (row.mae > (yaw ? 3.0 : 1.0))
            c.require(false, fmt("%s %s MAE %.3f", row.object_id.c_str(), row.dimension.c_str(), row.mae));
    }
    const double secs = since(t0);
    c.require(secs < 600.0, "slower than 10 min");
    c.note(fmt("M3 worst position MAE %.3f mm, worst yaw MAE %.3f deg, class accuracy %.3f; dataset %.0f s, "
               "training %.0f s, total %.0f s",
               worst_pos, worst_yaw, rep.class_accuracy, s.dataset_seconds(), s.train_seconds(ModelVariant::M3), secs));
    return c;
}

Check aliasing(Suite& s) {
    Check c;
    const MaeReport& m2 = s.mae(ModelVariant::M2);
    const MaeReport& m3 = s.mae(ModelVariant::M3);
    int checked = 0;
    for (const auto& e : test_objects(s.config())) {
        const auto cls = e.shape.shape_class();
        const bool curved_edge = std::holds_alternative<EdgedDisk>(e.shape.variant());
        if (cls != ShapeClass::LateralCylinder && !curved_edge) continue;
        const MaeRow* a = m2.find(e.object_id, "yaw");
        const MaeRow* b = m3.find(e.object_id, "yaw");
        if (!a || !b || !a->extreme_band_mae || !b->extreme_band_mae || !a->mid_band_mae) {
            c.require(false, e.object_id + ": no extreme-band samples");
            continue;
        }
        ++checked;
        const double ratio = *a->extreme_band_mae / std::max(*a->mid_band_mae, 1e-12);
        c.require(*b->extreme_band_mae < *a->extreme_band_mae, e.object_id + ": M3 extreme not below M2");
        c.require(ratio >= 2.0, e.object_id + fmt(": M2 extreme/mid %.2f", ratio));
        c.note(fmt("%s M2 %.2f (mid %.2f, x%.1f) vs M3 %.2f deg", e.object_id.c_str(), *a->extreme_band_mae,
                   *a->mid_band_mae, ratio, *b->extreme_band_mae));
    }
    c.require(checked > 0, "no cylinder or curved-edge test objects");
    return c;
}

Check edge_exploration(Suite& s) {
    Check c;
    const auto t0 = Clock::now();
    struct Case {
        ShapeSpec shape;
        double width;
    };
    const std::vector<Case> cases{{EdgedDisk{60, 30}, 60}, {EdgedDisk{80, 30}, 80},
                                  {EdgedPrism{30, 100, 30}, 30}, {EdgedPrism{50, 100, 30}, 50}};
    StrategyConfig sc;
    sc.thresholds = s.thresholds();
    const GraspStrategy strategy(s.sim(), ground_truth_estimator(), sc);
    struct Start {
        std::size_t shape;
        double x, y;
    };
    std::vector<Start> starts;
    for (std::size_t i = 0; i < cases.size(); ++i) {
        const bool disk = std::holds_alternative<EdgedDisk>(cases[i].shape.variant());
        const double half = 0.5 * cases[i].width;
        // Every 5 mm grid offset with the palm centre over the top face.
        for (double x = -40; x <= 40; x += 5)
            for (double y = -40; y <= 40; y += 5) {
                const bool inside = disk ? std::hypot(x, y) < half : (std::abs(x) < half && std::abs(y) <= 35);
                if (inside) starts.push_back({i, x, y});
            }
    }
    const double inf = std::numeric_limits<double>::infinity();
    std::vector<double> width_err(starts.size(), inf), centre_err(starts.size(), inf);
    std::vector<int> identity(starts.size(), 0);
    std::vector<std::string> failure(starts.size());
    parallel_for(starts.size(), s.options().workers, [&](std::size_t k) {
        const auto& st = starts[k];
        const auto& cs = cases[st.shape];
        SceneState scene;
        scene.object = cs.shape;
        scene.arm = {st.x, st.y, cs.shape.height() + 2.0, 0.0};
        scene.home = scene.arm.xy();
        EpisodeLog log;
        try {
            const SensorReading r = strategy.detect_light_contact(scene, log);
            const EdgeExplorationState e = strategy.explore_edges(scene, r, 0.0, log);
            width_err[k] = std::abs(e.width - cs.width);
            const bool disk = std::holds_alternative<EdgedDisk>(cs.shape.variant());
            centre_err[k] = disk ? scene.arm.xy().norm() : std::abs(scene.arm.x);
            identity[k] = e.width == e.d1 + 24.0 * e.steps + e.d2;
        } catch (const Error& ex) {
            failure[k] = ex.what();
        }
    });
    const double worst_w = *std::max_element(width_err.begin(), width_err.end());
    const double worst_c = *std::max_element(centre_err.begin(), centre_err.end());
    const auto ids = std::count(identity.begin(), identity.end(), 1);
    for (std::size_t k = 0; k < starts.size(); ++k)
        if (!failure[k].empty()) c.require(false, fmt("start (%g, %g): %s", starts[k].x, starts[k].y, failure[k].c_str()));
    c.require(worst_w <= 1e-6, fmt("width error %.3g mm", worst_w));
    c.require(worst_c <= 1e-6, fmt("centering error %.3g mm", worst_c));
    c.require(ids == static_cast<long>(starts.size()), "width identity broken");
    c.note(fmt("%zu starts, worst width error %.2g mm, worst centering %.2g mm, identity %ld/%zu, %.0f s",
               starts.size(), worst_w, worst_c, ids, starts.size(), since(t0)));
    return c;
}

Check curved_convergence(Suite& s) {
    Check c;
    std::vector<CatalogEntry> curved;
    for (const auto& e : test_objects(s.config()))
        if (e.shape.shape_class() == ShapeClass::Hemisphere || e.shape.shape_class() == ShapeClass::Ellipsoid)
            curved.push_back(e);
    StrategyConfig sc;
    sc.thresholds = s.thresholds();
    const GraspStrategy strategy(s.sim(), model_estimator(s.model(ModelVariant::M3)), sc);
    std::vector<int> ok(30, 0);
    parallel_for(ok.size(), s.options().workers, [&](std::size_t k) {
        const auto& obj = curved[k % curved.size()];
        SceneState scene = make_scene(obj.shape, {}, derive_seed(0, "scene", {k}));
        EpisodeLog log;
        try {
            const SensorReading r = strategy.detect_light_contact(scene, log);
            const int moves = strategy.adjust_curved(scene, r, log);
            const GraspError ge = grasp_error(obj.shape, scene.relative());
            ok[k] = moves <= 2 && ge.offset.norm() < 0.5 && std::abs(ge.yaw) < 1.0;
        } catch (const Error&) {
        }
    });
    const auto n = std::count(ok.begin(), ok.end(), 1);
    c.require(n >= 27, "fewer than 90% converged");
    c.note(fmt("%ld/30 converged within 2 adjustments to < 0.5 mm and < 1 deg", n));
    return c;
}

Check loss_of_contact(Suite& s) {
    Check c;
    ExperimentConfig cfg = s.config();
    StrategyConfig sc;
    sc.thresholds = s.thresholds();
    const GraspStrategy strategy(s.sim(), ground_truth_estimator(), sc);
    const auto objects = test_objects(cfg);
    std::vector<int> fired(30, 0), restored(30, 0), lost(30, 0);
    std::vector<double> residual(30, 0.0);
    parallel_for(fired.size(), s.options().workers, [&](std::size_t k) {
        const EpisodeLog log = run_seeded_episode(cfg, strategy, objects[k % objects.size()], k);
        const auto& r = log.result;
        fired[k] = r.loss_detection_depth && *r.loss_detection_depth > 0.0;
        residual[k] = r.loss_detection_depth.value_or(0.0);
        lost[k] = r.outcome == "ObjectLost";
        for (auto it = log.events().rbegin(); it != log.events().rend(); ++it)
            if (it->kind == EventKind::SsimReading && it->stage == "hold") {
                restored[k] = *it->get("ssim") <= sc.thresholds.loss_of_contact;
                break;
            }
    });
    const auto nf = std::count(fired.begin(), fired.end(), 1);
    const auto nr = std::count(restored.begin(), restored.end(), 1);
    const auto nl = std::count(lost.begin(), lost.end(), 1);
    c.require(nf == 30, "detection did not fire with positive depth in every run");
    c.require(nr == 30, "ssim not restored below the threshold in every run");
    c.require(nl == 0, "object lost");
    c.note(fmt("fired %ld/30 (min residual depth %.3f mm), restored %ld/30, lost %ld", nf,
               *std::min_element(residual.begin(), residual.end()), nr, nl));
    return c;
}

Check ablation(Suite& s) {
    Check c;
    ExperimentConfig cfg = s.config();
    cfg.fixed_heading_batch = false;
    const auto batches = episode_batches(cfg, s.thresholds());
    const auto objects = test_objects(cfg);
    const ModelSet& model = s.model(ModelVariant::M3);
    std::vector<double> mean;
    std::string detail;
    for (const auto& b : batches) {
        const GraspStrategy strategy(s.sim(), model_estimator(model), b.strategy);
        std::vector<double> err(30);
        parallel_for(err.size(), s.options().workers, [&](std::size_t k) {
            err[k] = run_seeded_episode(cfg, strategy, objects[k % objects.size()], k).result.final_err_mm;
        });
        double m = 0.0;
        for (double e : err) m += e / 30.0;
        mean.push_back(m);
        detail += fmt("%s%s %.3f", detail.empty() ? "" : ", ", b.group.c_str(), m);
    }
    bool decreasing = mean.size() == 4;
    for (std::size_t i = 1; i < mean.size(); ++i) decreasing = decreasing && mean[i] < mean[i - 1];
    c.require(decreasing, "group means not strictly decreasing");
    c.note("mean final error (mm): " + detail);
    return c;
}

std::map<std::string, std::string> tree_bytes(const fs::path& root) {
    std::map<std::string, std::string> files;
    for (const auto& e : fs::recursive_directory_iterator(root)) {
        if (!e.is_regular_file()) continue;
        std::ifstream in(e.path(), std::ios::binary);
        std::ostringstream ss;
        ss << in.rdbuf();
        files[fs::relative(e.path(), root).generic_string()] = ss.str();
    }
    return files;
}

Check determinism(Suite& s) {
    Check c;
    // Reduced sizes keep the two full runs short; every command still runs.
    ExperimentConfig cfg;
    cfg.workers = s.options().workers;
    cfg.n_train = 40;
    cfg.n_test = 10;
    cfg.episodes_per_group = 2;
    cfg.sensitivity_sigmas = {3.0, 5.0};
    cfg.sensitivity_n_train = 40;
    cfg.sensitivity_n_test = 10;
    std::vector<std::map<std::string, std::string>> runs;
    for (const char* name : {"a", "b"}) {
        cfg.out = s.options().scratch / name;
        fs::remove_all(cfg.out);
        cmd_gen_dataset(cfg);
        cmd_calibrate(cfg);
        cmd_train(cfg);
        cmd_eval(cfg);
        cmd_episodes(cfg);
        cmd_sensitivity(cfg);
        cmd_report(cfg);
        runs.push_back(tree_bytes(cfg.out));
    }
    fs::remove_all(s.options().scratch);
    std::size_t differ = 0;
    for (const auto& [path, bytes] : runs[0]) {
        const auto it = runs[1].find(path);
        if (it == runs[1].end() || it->second != bytes) {
            ++differ;
            c.require(false, path + " differs");
        }
    }
    c.require(runs[0].size() == runs[1].size(), "file sets differ");
    c.note(fmt("%zu files compared, %zu differ", runs[0].size(), differ));
    return c;
}

}  // namespace

std::string format_result(const CriterionResult& r) {
    return fmt("%s %d %s: %s (%.1f s)", r.pass ? "PASS" : "FAIL", r.id, r.name.c_str(), r.detail.c_str(), r.seconds);
}

std::vector<CriterionResult> run_acceptance(const AcceptanceOptions& opts) {
    Suite suite(opts);
    const std::vector<std::pair<std::string, Check (*)(Suite&)>> criteria{
        {"ssim kernel", ssim_kernel},
        {"threshold ordering", threshold_ordering},
        {"contact detection band", detection_band},
        {"pose estimation", pose_estimation},
        {"aliasing reproduction", aliasing},
        {"edge exploration exactness", edge_exploration},
        {"curved adjustment convergence", curved_convergence},
        {"loss-of-contact", loss_of_contact},
        {"ablation ordering", ablation},
        {"determinism", determinism},
    };
    std::vector<CriterionResult> results;
    for (std::size_t i = 0; i < criteria.size(); ++i) {
        const int id = static_cast<int>(i) + 1;
        if (!opts.only.empty() && std::find(opts.only.begin(), opts.only.end(), id) == opts.only.end()) continue;
        CriterionResult r;
        r.id = id;
        r.name = criteria[i].first;
        const auto t0 = Clock::now();
        try {
            const Check c = criteria[i].second(suite);
            r.pass = c.pass;
            r.detail = c.detail;
        } catch (const std::exception& e) {
            r.pass = false;
            r.detail = std::string("error: ") + e.what();
        }
        r.seconds = since(t0);
        if (opts.on_result) opts.on_result(r);
        results.push_back(r);
    }
    return results;
}

}  // namespace palmgrasp
