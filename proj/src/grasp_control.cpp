#include "palmgrasp/grasp_control.hpp"

#include <json.hpp>

#include <charconv>
#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>

#include "palmgrasp/errors.hpp"
#include "palmgrasp/random.hpp"

namespace palmgrasp {

using nlohmann::ordered_json;

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr const char* kSchema = "palmgrasp.episode/1";

using Values = std::vector<std::pair<std::string, double>>;

Vec2 unit(double deg) { return {std::cos(deg2rad(deg)), std::sin(deg2rad(deg))}; }

bool is_edge(const PoseEstimate& e) { return e.shape_class && *e.shape_class == ShapeClass::EdgedFlat; }

}  // namespace

void StrategyConfig::validate() const {
    if (!thresholds.ordered()) throw InvalidConfig("thresholds must satisfy 0 < contact <= loss_of_contact < 1");
    if (!(descent_step > 0.0) || !(max_travel > 0.0)) throw InvalidConfig("descent step and travel must be > 0");
    if (!(tap_lift > 0.0)) throw InvalidConfig("tap_lift must be > 0");
    if (tap_stride != 2.0 * kWorkspaceHalfWidth)
        throw InvalidConfig("tap_stride must equal the workspace width (24 mm)");
    if (!(curved_tol_pos > 0.0) || !(curved_tol_yaw > 0.0)) throw InvalidConfig("tolerances must be > 0");
    if (max_adjust_iters < 1 || max_taps < 1) throw InvalidConfig("iteration limits must be >= 1");
    if (!(pressure_step > 0.0) || !(pressure_depth_gain > 0.0))
        throw InvalidConfig("pressure step and gain must be > 0");
    if (!(capture_radius > 0.0) || !(arm_reach > 0.0) || blind_depth_jitter < 0.0 || settle_ticks < 0)
        throw InvalidConfig("bad episode limits");
    if (tap_heading && !std::isfinite(*tap_heading)) throw InvalidConfig("tap_heading must be finite");
}

double normalize_yaw(double yaw_deg) { return fold90(yaw_deg); }

double SceneState::depth(const PalmGeometry& palm) const {
    if (!object) return -kInf;
    const Pose rel = relative();
    return rel.z + dome_overlap(*object, rel, palm);
}

PalmSensor::PalmSensor(const TactileSimulator& sim, SsimConfig ssim_cfg)
    : sim_(&sim), reference_(sim.rest_image(), ssim_cfg) {}

SensorReading PalmSensor::read(const SceneState& scene) const {
    SensorReading r;
    r.depth = scene.depth(sim_->palm());
    r.force = normal_force(r.depth);
    if (!(r.depth > 0.0)) {
        // Untouched skin renders exactly the reference image.
        r.markers = sim_->rest();
        r.ssim = 1.0;
        return r;
    }
    const Observation obs = sim_->sense(*scene.object, scene.relative());
    r.markers = obs.markers;
    r.ssim = reference_.compare(obs.image);
    return r;
}

PoseEstimator model_estimator(const ModelSet& model) {
    return [&model](const SensorReading& r, const SceneState&) { return model.predict(r.markers); };
}

PoseEstimate ground_truth_estimate(const ModelSetSpec& spec, const SceneState& scene) {
    if (!scene.object) throw NoContact("no object in the scene");
    return label_estimate(spec, feature_label(*scene.object, scene.relative(), kInf));
}

PoseEstimator ground_truth_estimator(ModelSetSpec spec) {
    return [spec](const SensorReading&, const SceneState& scene) { return ground_truth_estimate(spec, scene); };
}

std::string_view to_string(EventKind k) {
    switch (k) {
        case EventKind::Motion: return "motion";
        case EventKind::SsimReading: return "ssim_reading";
        case EventKind::Prediction: return "prediction";
        case EventKind::StageTransition: return "stage_transition";
        case EventKind::Grasp: return "grasp";
        case EventKind::Lift: return "lift";
        case EventKind::PressureChange: return "pressure_change";
        case EventKind::Outcome: return "outcome";
    }
    return "?";
}

std::optional<double> Event::get(std::string_view key) const {
    for (const auto& [k, v] : values)
        if (k == key) return v;
    return std::nullopt;
}

EdgeExplorationState EdgeExplorationState::from_readings(double d1, int steps, double d2, double stride) {
    EdgeExplorationState s;
    s.d1 = d1;
    s.steps = steps;
    s.d2 = d2;
    s.width = d1 + stride * steps + d2;
    // Positive edge distances point from the palm to the edge, so the midpoint
    // lies d2 - W/2 ahead along the tapping direction.
    s.delta_d = d2 - 0.5 * s.width;
    return s;
}

std::size_t EpisodeLog::add(EventKind kind, std::string stage, Values values, std::string note) {
    const std::size_t seq = events_.size();
    events_.push_back({seq, kind, std::move(stage), std::move(note), std::move(values)});
    if (kind == EventKind::SsimReading || kind == EventKind::Prediction) last_reading_ = seq;
    return seq;
}

std::size_t EpisodeLog::transition(const std::string& from, const std::string& to) {
    // Cause: the latest reading, or with no sensing at all, the motion that
    // completed the previous stage.
    Values v;
    if (last_reading_)
        v.emplace_back("cause", static_cast<double>(*last_reading_));
    else if (!events_.empty())
        v.emplace_back("cause", static_cast<double>(events_.back().seq));
    return add(EventKind::StageTransition, to, std::move(v), from + "->" + to);
}

void write_episode_jsonl(std::ostream& out, const EpisodeLog& log, std::uint64_t seed, const std::string& group,
                         const std::string& object_id) {
    ordered_json head;
    head["schema"] = kSchema;
    head["seed"] = seed;
    head["group"] = group;
    head["object_id"] = object_id;
    out << head.dump() << '\n';
    for (const auto& e : log.events()) {
        ordered_json j;
        j["seq"] = e.seq;
        j["event"] = to_string(e.kind);
        j["stage"] = e.stage;
        if (!e.note.empty()) j["note"] = e.note;
        for (const auto& [k, v] : e.values) j[k] = v;
        out << j.dump() << '\n';
    }
    const auto& r = log.result;
    ordered_json res;
    res["event"] = "result";
    res["outcome"] = r.outcome;
    res["final_err_mm"] = r.final_err_mm;
    res["final_err_deg"] = r.final_err_deg;
    res["n_adjustments"] = r.n_adjustments;
    res["detection_depth_mm"] = r.detection_depth ? ordered_json(*r.detection_depth) : ordered_json(nullptr);
    res["loss_detection_depth_mm"] =
        r.loss_detection_depth ? ordered_json(*r.loss_detection_depth) : ordered_json(nullptr);
    res["n_corrections"] = r.n_corrections;
    if (r.edges) {
        res["edge_d1"] = r.edges->d1;
        res["edge_steps"] = r.edges->steps;
        res["edge_d2"] = r.edges->d2;
        res["edge_width"] = r.edges->width;
        res["edge_delta_d"] = r.edges->delta_d;
    }
    out << res.dump() << '\n';
}

Vec2 predicted_offset(const PoseEstimate& est) {
    if (est.shape_class && *est.shape_class == ShapeClass::LateralCylinder) {
        // y is measured along the axis normal.
        const double phi = deg2rad(est.yaw.value_or(0.0));
        return est.y.value_or(0.0) * Vec2(-std::sin(phi), std::cos(phi));
    }
    return {est.x.value_or(0.0), est.y.value_or(0.0)};
}

GraspStrategy::GraspStrategy(const TactileSimulator& sim, PoseEstimator estimator, StrategyConfig cfg,
                             SsimConfig ssim_cfg)
    : sensor_(sim, ssim_cfg), estimator_(std::move(estimator)), cfg_(std::move(cfg)) {
    cfg_.validate();
}

void GraspStrategy::move(SceneState& scene, const Vec2& offset, double yaw, double dz, EpisodeLog& log,
                         const std::string& stage, Values extra) const {
    const Pose carried = scene.relative();
    const Vec2 world = rotate(offset, scene.arm.yaw);
    scene.arm.x += world.x();
    scene.arm.y += world.y();
    scene.arm.z += dz;
    scene.arm.yaw = wrap180(scene.arm.yaw + yaw);
    if (scene.held) scene.object_pose = compose(scene.arm, carried);
    Values v{{"dx", offset.x()}, {"dy", offset.y()}, {"dz", dz}, {"dyaw", yaw},
             {"x", scene.arm.x}, {"y", scene.arm.y}, {"z", scene.arm.z}, {"yaw", scene.arm.yaw}};
    v.insert(v.end(), extra.begin(), extra.end());
    log.add(EventKind::Motion, stage, std::move(v));
    if ((scene.arm.xy() - scene.home).norm() > cfg_.arm_reach)
        throw WorkspaceExceeded("palm moved beyond the arm's reach");
}

SensorReading GraspStrategy::detect_light_contact(SceneState& scene, EpisodeLog& log) const {
    const double z0 = scene.arm.z;
    const double max_force = normal_force(sensor_.simulator().palm().max_depth);
    for (int n = 0;; ++n) {
        if (n > 0) {
            const double z = z0 - n * cfg_.descent_step;
            move(scene, Vec2::Zero(), 0.0, z - scene.arm.z, log, "contact");
        }
        SensorReading r = sensor_.read(scene);
        log.add(EventKind::SsimReading, "contact", {{"ssim", r.ssim}, {"depth", r.depth}, {"z", scene.arm.z}});
        if (r.ssim <= cfg_.thresholds.contact) return r;
        // Force guard: never press past the membrane's protection margin.
        if (r.force >= max_force) {
            log.add(EventKind::SsimReading, "contact", {{"force", r.force}}, "force_limit");
            return r;
        }
        if ((n + 1) * cfg_.descent_step > cfg_.max_travel + 1e-9)
            throw NoContact("no contact within " + std::to_string(cfg_.max_travel) + " mm of descent");
    }
}

PoseEstimate GraspStrategy::predict(const SensorReading& r, const SceneState& scene, EpisodeLog& log,
                                    const std::string& stage) const {
    PoseEstimate e = estimator_(r, scene);
    Values v{{"class_index", static_cast<double>(e.class_index)}};
    if (e.x) v.emplace_back("x", *e.x);
    if (e.y) v.emplace_back("y", *e.y);
    if (e.yaw) v.emplace_back("yaw", *e.yaw);
    v.emplace_back("flat_surface", e.flat_surface ? 1.0 : 0.0);
    log.add(EventKind::Prediction, stage, std::move(v), e.class_name);
    return e;
}

int GraspStrategy::adjust_curved(SceneState& scene, SensorReading reading, EpisodeLog& log) const {
    for (int moves = 0;; ++moves) {
        const PoseEstimate est = predict(reading, scene, log, "adjust");
        const Vec2 offset = predicted_offset(est);
        const double yaw = normalize_yaw(est.yaw.value_or(0.0));
        if (offset.norm() < cfg_.curved_tol_pos && std::abs(yaw) < cfg_.curved_tol_yaw) return moves;
        if (moves >= cfg_.max_adjust_iters)
            throw AdjustDiverged("pose adjustment did not converge in " + std::to_string(cfg_.max_adjust_iters) +
                                 " iterations");
        move(scene, Vec2::Zero(), 0.0, cfg_.tap_lift, log, "adjust");
        move(scene, offset, yaw, 0.0, log, "adjust", {{"predicted_x", offset.x()}, {"predicted_y", offset.y()}});
        reading = detect_light_contact(scene, log);
    }
}

EdgeExplorationState GraspStrategy::explore_edges(SceneState& scene, SensorReading reading, double heading_deg,
                                                  EpisodeLog& log) const {
    int taps = 0;
    PoseEstimate est = predict(reading, scene, log, "explore");
    const auto tap = [&](const Vec2& dir) {
        if (++taps > cfg_.max_taps) throw EdgeNotFound("no edge within " + std::to_string(cfg_.max_taps) + " taps");
        move(scene, Vec2::Zero(), 0.0, cfg_.tap_lift, log, "explore");
        move(scene, cfg_.tap_stride * dir, 0.0, 0.0, log, "explore");
        reading = detect_light_contact(scene, log);
        est = predict(reading, scene, log, "explore");
    };
    const auto on_edge = [&] { return is_edge(est) && !est.flat_surface && est.x && est.yaw; };

    while (!on_edge()) tap(unit(heading_deg));
    const double d1 = *est.x;
    const double turn = normalize_yaw(*est.yaw);
    move(scene, Vec2::Zero(), 0.0, cfg_.tap_lift, log, "explore");
    move(scene, Vec2::Zero(), turn, 0.0, log, "explore");
    // The first edge's outward normal is now along +X or -X; tap the other way.
    const Vec2 across = -unit(*est.yaw - turn);
    reading = detect_light_contact(scene, log);

    // Edges whose normal is not along the tapping direction are side edges.
    const auto on_far_edge = [&] { return on_edge() && unit(*est.yaw).dot(across) > std::cos(deg2rad(45.0)); };
    int steps = 0;
    do {
        tap(across);
        ++steps;
    } while (!on_far_edge());
    EdgeExplorationState s = EdgeExplorationState::from_readings(d1, steps, *est.x, cfg_.tap_stride);
    log.add(EventKind::Prediction, "explore",
            {{"d1", s.d1}, {"steps", static_cast<double>(s.steps)}, {"d2", s.d2}, {"width", s.width},
             {"delta_d", s.delta_d}},
            "edge_width");

    move(scene, Vec2::Zero(), 0.0, cfg_.tap_lift, log, "explore");
    move(scene, s.delta_d * across, 0.0, 0.0, log, "explore", {{"delta_d", s.delta_d}});
    detect_light_contact(scene, log);
    return s;
}

void GraspStrategy::hold_with_loss_correction(SceneState& scene, const Perturbation& p, EpisodeLog& log) const {
    if (p.magnitude > 0.0 && !(p.rate > 0.0)) throw InvalidConfig("perturbation rate must be > 0");
    const PalmGeometry& palm = sensor_.simulator().palm();
    double remaining = p.magnitude;
    int quiet = 0;
    bool above = false;
    while (remaining > 0.0 || quiet < cfg_.settle_ticks || above) {
        if (remaining > 0.0) {
            const double d = std::min(p.rate, remaining);
            remaining -= d;
            scene.object_pose.z -= d;
            log.add(EventKind::Motion, "hold", {{"pull", d}}, "perturbation");
        } else {
            ++quiet;
        }
        if (!(scene.depth(palm) > 0.0)) throw ObjectLost("object slipped out of the palm");
        if (!cfg_.stages.loss_detect) continue;
        const SensorReading r = sensor_.read(scene);
        log.add(EventKind::SsimReading, "hold", {{"ssim", r.ssim}, {"depth", r.depth}});
        above = r.ssim > cfg_.thresholds.loss_of_contact;
        if (!above) continue;
        if (!log.result.loss_detection_depth) log.result.loss_detection_depth = r.depth;
        scene.pressure += cfg_.pressure_step;
        scene.object_pose.z += cfg_.pressure_depth_gain * cfg_.pressure_step;
        ++log.result.n_corrections;
        log.add(EventKind::PressureChange, "hold", {{"pressure", scene.pressure}, {"depth", scene.depth(palm)}});
        if (quiet > 10 * cfg_.settle_ticks + 1000) throw ObjectLost("loss-of-contact correction did not settle");
    }
}

namespace {

std::string error_name(const Error& e) {
    if (dynamic_cast<const NoContact*>(&e)) return "NoContact";
    if (dynamic_cast<const AdjustDiverged*>(&e)) return "AdjustDiverged";
    if (dynamic_cast<const EdgeNotFound*>(&e)) return "EdgeNotFound";
    if (dynamic_cast<const WorkspaceExceeded*>(&e)) return "WorkspaceExceeded";
    if (dynamic_cast<const ObjectLost*>(&e)) return "ObjectLost";
    if (dynamic_cast<const OverIndentation*>(&e)) return "OverIndentation";
    return "Error";
}

}  // namespace

void GraspStrategy::finish(const SceneState& scene, EpisodeLog& log) const {
    auto& r = log.result;
    if (!scene.object) {
        r.final_err_mm = r.final_err_deg = 0.0;
        return;
    }
    const GraspError ge = grasp_error(*scene.object, scene.relative());
    const double depth = scene.depth(sensor_.simulator().palm());
    const double dz = (std::isfinite(depth) ? std::max(depth, 0.0) : 0.0) - cfg_.reference_depth;
    r.final_err_mm = std::hypot(ge.offset.norm(), dz);
    r.final_err_deg = std::abs(ge.yaw);
    if (r.outcome.empty())
        r.outcome = (ge.offset.norm() <= cfg_.capture_radius && depth > 0.0) ? "held" : "missed";
}

EpisodeLog GraspStrategy::run_episode(SceneState scene, const Perturbation& perturbation, std::uint64_t seed) const {
    EpisodeLog log;
    Rng rng(derive_seed(seed, "episode"));
    const double blind_error = rng.uniform(-cfg_.blind_depth_jitter, cfg_.blind_depth_jitter);
    const double drawn_heading = rng.uniform(-180.0, 180.0);
    const double heading = cfg_.tap_heading.value_or(drawn_heading);
    const PalmGeometry& palm = sensor_.simulator().palm();
    std::string stage = "approach";
    const auto enter = [&](const std::string& next) {
        log.transition(stage, next);
        stage = next;
    };
    try {
        SensorReading reading;
        if (cfg_.stages.contact_detect) {
            reading = detect_light_contact(scene, log);
            log.result.detection_depth = reading.depth;
        } else {
            // Blind descent to a nominal height with no tactile feedback.
            if (!scene.object) throw NoContact("no object in the scene");
            Pose rel = scene.relative();
            rel.z = 0.0;
            double overlap = dome_overlap(*scene.object, rel, palm);
            if (!std::isfinite(overlap)) overlap = scene.object->height();
            const double target = cfg_.reference_depth + blind_error;
            const double z = scene.object_pose.z + overlap - target;
            move(scene, Vec2::Zero(), 0.0, z - scene.arm.z, log, stage, {{"target_depth", target}});
            if (cfg_.stages.pose_adjust) {
                reading = sensor_.read(scene);
                log.add(EventKind::SsimReading, stage,
                        {{"ssim", reading.ssim}, {"depth", reading.depth}, {"z", scene.arm.z}});
            }
        }
        if (cfg_.stages.pose_adjust) {
            enter("classify");
            const PoseEstimate est = predict(reading, scene, log, stage);
            if (is_edge(est)) {
                enter("explore");
                log.result.edges = explore_edges(scene, reading, heading, log);
            } else {
                enter("adjust");
                log.result.n_adjustments = adjust_curved(scene, reading, log);
            }
        }
        enter("grasp");
        scene.held = true;
        scene.pressure = 1.0;
        log.add(EventKind::Grasp, stage, {{"pressure", scene.pressure}, {"depth", scene.depth(palm)}});
        move(scene, Vec2::Zero(), 0.0, cfg_.lift_height, log, stage);
        log.add(EventKind::Lift, stage, {{"z", scene.arm.z}});
        enter("hold");
        hold_with_loss_correction(scene, perturbation, log);
    } catch (const Error& e) {
        log.result.outcome = error_name(e);
        log.add(EventKind::Outcome, stage, {}, log.result.outcome + ": " + e.what());
    }
    finish(scene, log);
    if (log.events().empty() || log.events().back().kind != EventKind::Outcome)
        log.add(EventKind::Outcome, stage, {{"final_err_mm", log.result.final_err_mm}}, log.result.outcome);
    return log;
}

SceneState make_scene(const ShapeSpec& shape, const EpisodeStart& start, std::uint64_t seed) {
    Rng rng(derive_seed(seed, "scene"));
    SceneState s;
    s.object = shape;
    s.object_pose = {0.0, 0.0, 0.0, rng.uniform(-180.0, 180.0)};
    const Vec2 offset(rng.uniform(-start.offset_range, start.offset_range),
                      rng.uniform(-start.offset_range, start.offset_range));
    const double yaw = s.object_pose.yaw + rng.uniform(-start.yaw_range, start.yaw_range);
    s.arm = {offset.x(), offset.y(), shape.height() + start.clearance, wrap180(yaw)};
    s.home = offset;
    return s;
}

const std::vector<AblationGroup>& ablation_groups() {
    static const std::vector<AblationGroup> kGroups{
        {"baseline", {false, false, false}},
        {"contact", {true, false, false}},
        {"adjust", {true, true, false}},
        {"full", {true, true, true}},
    };
    return kGroups;
}

namespace {

std::string format_number(double v) {
    char buf[32];
    auto [end, ec] = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, end);
}

}  // namespace

void write_summary_csv(const std::filesystem::path& path, const std::vector<EpisodeSummaryRow>& rows) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw MissingArtifact("cannot write " + path.string());
    out << "seed,group,outcome,final_err_mm,final_err_deg,n_adjustments,detection_depth_mm\n";
    for (const auto& r : rows)
        out << r.seed << ',' << r.group << ',' << r.result.outcome << ',' << format_number(r.result.final_err_mm)
            << ',' << format_number(r.result.final_err_deg) << ',' << r.result.n_adjustments << ','
            << (r.result.detection_depth ? format_number(*r.result.detection_depth) : "") << '\n';
}

std::vector<EpisodeSummaryRow> read_summary_csv(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw MissingArtifact("episode summary not found: " + path.string() + " (run `episodes` first)");
    std::string line;
    if (!std::getline(in, line) || line != "seed,group,outcome,final_err_mm,final_err_deg,n_adjustments,detection_depth_mm")
        throw InvalidConfig("bad episode summary header in " + path.string());
    std::vector<EpisodeSummaryRow> rows;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        std::vector<std::string> cols;
        std::stringstream ss(line);
        for (std::string c; std::getline(ss, c, ',');) cols.push_back(c);
        if (cols.size() == 6) cols.emplace_back();
        if (cols.size() != 7) throw InvalidConfig("bad episode summary row: " + line);
        EpisodeSummaryRow r;
        r.seed = std::stoull(cols[0]);
        r.group = cols[1];
        r.result.outcome = cols[2];
        r.result.final_err_mm = std::stod(cols[3]);
        r.result.final_err_deg = std::stod(cols[4]);
        r.result.n_adjustments = std::stoi(cols[5]);
        if (!cols[6].empty()) r.result.detection_depth = std::stod(cols[6]);
        rows.push_back(std::move(r));
    }
    return rows;
}

}  // namespace palmgrasp
