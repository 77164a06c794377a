#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <iosfwd>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "palmgrasp/geometry.hpp"
#include "palmgrasp/pose_models.hpp"
#include "palmgrasp/similarity.hpp"
#include "palmgrasp/tactile_sim.hpp"

namespace palmgrasp {

struct StageFlags {
    bool contact_detect = true;
    bool pose_adjust = true;
    bool loss_detect = true;

    friend bool operator==(const StageFlags&, const StageFlags&) = default;
};

struct StrategyConfig {
    Thresholds thresholds;
    double descent_step = 0.1;    // mm
    double max_travel = 60.0;     // mm of descent before giving up
    double tap_lift = 8.0;        // mm
    double tap_stride = 24.0;     // mm, twice the workspace half-width
    double curved_tol_pos = 0.5;  // mm
    double curved_tol_yaw = 1.0;  // deg
    int max_adjust_iters = 5;
    int max_taps = 8;
    /// Farthest the palm may travel in-plane from where the episode started.
    double arm_reach = 200.0;  // mm
    StageFlags stages;
    double pressure_step = 0.1;
    /// Pressing depth gained per unit of finger pressure.
    double pressure_depth_gain = 1.0;  // mm
    /// Depth targeted by a blind descent (contact detection disabled), and the
    /// reference for the depth part of the final pose error.
    double reference_depth = 3.0;         // mm
    double blind_depth_jitter = 5.0;      // mm, half-width of the blind-descent error
    double capture_radius = 2.0;          // mm; a grasp holds when the in-plane error is within it
    double lift_height = 50.0;            // mm
    int settle_ticks = 40;                // hold ticks after the perturbation ends
    /// Palm-frame direction of the first edge taps; unset draws one per seed.
    std::optional<double> tap_heading;    // deg

    void validate() const;
};

/// Arctan(tan(yaw)) in degrees, in (-90, 90]. The two-finger gripper looks the
/// same after half a turn, so no correction needs more than 90 degrees.
double normalize_yaw(double yaw_deg);

/// Perturbation applied while holding: the object is pulled out of the palm
/// by `magnitude` mm at `rate` mm per tick.
struct Perturbation {
    double magnitude = 0.0;
    double rate = 0.05;
};

/// World state. The palm apex is at `arm`; the arm has exactly four degrees of
/// freedom (x, y, z, yaw).
struct SceneState {
    std::optional<ShapeSpec> object;
    Pose object_pose;
    Pose arm;
    double pressure = 0.0;
    bool held = false;
    /// In-plane arm position the episode started from.
    Vec2 home = Vec2::Zero();

    /// Object pose in the palm frame.
    Pose relative() const { return relative_pose(object_pose, arm); }
    /// Vertical skin penetration; -infinity for an empty scene or nothing under the skin.
    double depth(const PalmGeometry& palm) const;
};

struct SensorReading {
    MarkerField markers;
    double ssim = 1.0;
    double depth = 0.0;  // ground truth, for logging
    double force = 0.0;  // N, from the palm's load cell
};

/// Palm sensor: compares every frame against a reference image of the
/// undeformed skin, captured when the sensor is set up for an episode.
class PalmSensor {
public:
    explicit PalmSensor(const TactileSimulator& sim, SsimConfig ssim_cfg = {});

    SensorReading read(const SceneState& scene) const;
    const TactileSimulator& simulator() const { return *sim_; }

private:
    const TactileSimulator* sim_;
    SsimReference reference_;
};

/// Maps a reading to a pose estimate. The scene is passed so oracles can read
/// the ground truth; learned estimators must only look at the reading.
using PoseEstimator = std::function<PoseEstimate(const SensorReading&, const SceneState&)>;

PoseEstimator model_estimator(const ModelSet& model);
/// Exact labels of the contacted feature, classed as in `spec`.
PoseEstimate ground_truth_estimate(const ModelSetSpec& spec, const SceneState& scene);
PoseEstimator ground_truth_estimator(ModelSetSpec spec = {});

enum class EventKind { Motion, SsimReading, Prediction, StageTransition, Grasp, Lift, PressureChange, Outcome };

std::string_view to_string(EventKind k);

struct Event {
    std::size_t seq = 0;
    EventKind kind = EventKind::Motion;
    std::string stage;
    std::string note;
    std::vector<std::pair<std::string, double>> values;

    std::optional<double> get(std::string_view key) const;
};

struct EdgeExplorationState {
    double d1 = 0.0;  // mm
    int steps = 0;
    double d2 = 0.0;  // mm
    double width = 0.0;
    double delta_d = 0.0;  // centering move along the tapping direction

    /// Fills width and delta_d from d1, steps and d2.
    static EdgeExplorationState from_readings(double d1, int steps, double d2, double stride = 24.0);
};

struct EpisodeResult {
    std::string outcome;  // held, missed, lost, or the name of the error that ended the episode
    double final_err_mm = 0.0;
    double final_err_deg = 0.0;
    int n_adjustments = 0;
    std::optional<double> detection_depth;       // first light-contact depth
    std::optional<double> loss_detection_depth;  // first loss-of-contact depth
    int n_corrections = 0;
    std::optional<EdgeExplorationState> edges;
};

/// Ordered record of one episode.
class EpisodeLog {
public:
    const std::vector<Event>& events() const { return events_; }
    EpisodeResult result;

    std::size_t add(EventKind kind, std::string stage, std::vector<std::pair<std::string, double>> values = {},
                    std::string note = {});
    /// Sequence number of the latest reading or prediction, if any.
    std::optional<std::size_t> last_reading() const { return last_reading_; }
    std::size_t transition(const std::string& from, const std::string& to);

private:
    std::vector<Event> events_;
    std::optional<std::size_t> last_reading_;
};

/// JSON lines: a header {"schema", "seed", "group", "object_id"}, one line per
/// event, then the result.
void write_episode_jsonl(std::ostream& out, const EpisodeLog& log, std::uint64_t seed, const std::string& group,
                         const std::string& object_id);

/// Closed-loop strategy over one scene at a time.
class GraspStrategy {
public:
    GraspStrategy(const TactileSimulator& sim, PoseEstimator estimator, StrategyConfig cfg, SsimConfig ssim_cfg = {});

    const StrategyConfig& config() const { return cfg_; }

    /// Descends in descent_step increments until SSIM drops to the contact
    /// threshold, or the normal force reaches its value at the palm's
    /// max_depth. Throws NoContact after max_travel.
    SensorReading detect_light_contact(SceneState& scene, EpisodeLog& log) const;

    /// Predict, lift, move onto the feature, rotate, re-contact; repeats until
    /// the predicted error is within tolerance. Returns the number of
    /// corrective moves. Throws AdjustDiverged after max_adjust_iters.
    int adjust_curved(SceneState& scene, SensorReading reading, EpisodeLog& log) const;

    /// Taps across a flat face to the first edge, turns to face it, taps on to
    /// the opposite edge and centres the palm between them. `heading_deg` is
    /// the palm-frame direction of the initial taps.
    EdgeExplorationState explore_edges(SceneState& scene, SensorReading reading, double heading_deg,
                                       EpisodeLog& log) const;

    /// Holds a lifted object while `perturbation` pulls it away. With the loss
    /// stage enabled, raises finger pressure whenever SSIM exceeds the
    /// loss-of-contact threshold. Throws ObjectLost if the depth reaches 0.
    void hold_with_loss_correction(SceneState& scene, const Perturbation& perturbation, EpisodeLog& log) const;

    /// Runs the enabled stages in order and always returns a log; stage errors
    /// end up in the outcome. `seed` drives the blind-descent error and, unless
    /// fixed in the config, the initial tap heading.
    EpisodeLog run_episode(SceneState scene, const Perturbation& perturbation, std::uint64_t seed) const;

private:
    void move(SceneState& scene, const Vec2& palm_offset, double yaw, double dz, EpisodeLog& log,
              const std::string& stage, std::vector<std::pair<std::string, double>> extra = {}) const;
    PoseEstimate predict(const SensorReading& r, const SceneState& scene, EpisodeLog& log,
                         const std::string& stage) const;
    void finish(const SceneState& scene, EpisodeLog& log) const;

    PalmSensor sensor_;
    PoseEstimator estimator_;
    StrategyConfig cfg_;
};

/// In-plane offset (palm frame) from the palm centre to the feature a
/// prediction describes; fields the class lacks count as 0.
Vec2 predicted_offset(const PoseEstimate& est);

/// Where an episode starts: the palm above the object's grasp target, offset
/// in-plane and in yaw.
struct EpisodeStart {
    double offset_range = 8.0;   // mm, per axis
    double yaw_range = 45.0;     // deg
    double clearance = 2.0;      // mm above the object's top
};

SceneState make_scene(const ShapeSpec& shape, const EpisodeStart& start, std::uint64_t seed);

/// The four cumulative stage groups: baseline, contact, adjust, full.
struct AblationGroup {
    std::string name;
    StageFlags stages;
};
const std::vector<AblationGroup>& ablation_groups();

struct EpisodeSummaryRow {
    std::uint64_t seed = 0;
    std::string group;
    EpisodeResult result;
};

/// CSV columns: seed,group,outcome,final_err_mm,final_err_deg,n_adjustments,detection_depth_mm.
void write_summary_csv(const std::filesystem::path& path, const std::vector<EpisodeSummaryRow>& rows);
std::vector<EpisodeSummaryRow> read_summary_csv(const std::filesystem::path& path);

}  // namespace palmgrasp
