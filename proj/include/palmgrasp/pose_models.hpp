#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "palmgrasp/datasets.hpp"
#include "palmgrasp/geometry.hpp"
#include "palmgrasp/tactile_sim.hpp"

namespace palmgrasp {

enum class ModelVariant { M1, M2, M3 };

std::string_view to_string(ModelVariant v);
ModelVariant model_variant_from_string(std::string_view s);

/// Class layout of a model set.
///   M1: curved, edge
///   M2: sphere, ellipsoid, cylinder, edge
///   M3: M2 with ellipsoid, cylinder and edge split by yaw sign
struct ModelSetSpec {
    ModelVariant variant = ModelVariant::M3;

    const std::vector<std::string>& class_list() const;
    std::size_t class_count() const { return class_list().size(); }
    /// Class index of a label; yaw = 0 belongs to the positive class.
    std::size_t class_of(const FeatureLabel& label) const;
    /// +1 / -1 for sign-split classes, 0 otherwise.
    int yaw_sign(std::size_t class_index) const;
    /// Feature class a class stands for; nullopt for M1's mixed curved class.
    std::optional<ShapeClass> shape_class(std::size_t class_index) const;

    friend bool operator==(const ModelSetSpec&, const ModelSetSpec&) = default;
};

enum class EstimatorKind { KnnOracle, Learned };

std::string_view to_string(EstimatorKind k);
EstimatorKind estimator_kind_from_string(std::string_view s);

struct TrainConfig {
    double split_fraction = 0.8;
    int max_epochs = 100;
    int early_stop_patience = 10;
    EstimatorKind estimator = EstimatorKind::KnnOracle;
    /// Neighbour counts tried on the held-out split; the best is kept.
    std::vector<int> k_candidates{4, 8, 16};
    /// Fit a local linear model over the neighbours instead of averaging.
    bool local_linear = true;
    /// Match samples under the marker lattice's rotations and reflections.
    bool symmetric = true;

    void validate() const;
};

struct PoseEstimate {
    std::size_t class_index = 0;
    std::string class_name;
    std::optional<ShapeClass> shape_class;
    std::optional<double> x, y, yaw;
    /// Edge classes only: the predicted edge lies outside the workspace.
    bool flat_surface = false;
};

/// Flattened per-marker displacement (dx, dy, dz), in mm.
std::vector<float> marker_feature(const MarkerField& field);

/// Classifier over the model set's classes plus one regressor per class, each
/// fit to its class's samples (sign-split classes fit yaw over both halves of
/// their feature class). Neighbour search also matches every stored
/// sample under the 12 rotations/reflections of the hexagonal marker lattice
/// (with its label transformed accordingly). Immutable after training.
class ModelSet {
public:
    ModelSet() = default;

    const ModelSetSpec& spec() const { return spec_; }
    EstimatorKind estimator() const { return estimator_; }
    int k_classify() const { return k_classify_; }
    int k_regress() const { return k_regress_; }
    bool local_linear() const { return local_linear_; }
    bool symmetric() const { return symmetric_; }
    std::size_t size() const { return labels_.size(); }
    std::size_t regressor_count() const { return spec_.class_count(); }
    /// Whether the regressor of a class produces target `dim` (0 x, 1 y, 2 yaw).
    bool regresses(std::size_t class_index, int dim) const;

    PoseEstimate predict(const MarkerField& field) const;
    PoseEstimate predict(const std::vector<float>& feature) const;

    /// Binary format: magic, version, config hash, settings, then the sample table.
    void save(const std::filesystem::path& path, const std::string& config_hash) const;
    static ModelSet load(const std::filesystem::path& path, std::string* config_hash = nullptr);

    /// Compares the stored state; the search index is derived from it.
    friend bool operator==(const ModelSet& a, const ModelSet& b) {
        return a.spec_ == b.spec_ && a.estimator_ == b.estimator_ && a.k_classify_ == b.k_classify_ &&
               a.k_regress_ == b.k_regress_ && a.local_linear_ == b.local_linear_ && a.symmetric_ == b.symmetric_ &&
               a.dim_ == b.dim_ && a.features_ == b.features_ && a.labels_ == b.labels_;
    }

    struct Symmetry {
        std::vector<std::uint32_t> perm;  // marker i moves to perm[i]
        int rotation = 0;                 // multiples of 60 degrees, applied after the reflection
        bool reflect = false;             // mirror y first

        friend bool operator==(const Symmetry&, const Symmetry&) = default;
    };

private:
    friend ModelSet train_model_set(const ModelSetSpec&, const std::vector<ContactSample>&, const TrainConfig&,
                                    std::uint64_t);

    void build_index();
    std::vector<float> distances(const std::vector<float>& q) const;
    std::vector<float> transformed(std::size_t sample, std::size_t g) const;
    std::size_t classify(const std::vector<float>& dist, int k) const;
    std::optional<double> regress(const std::vector<float>& dist, const std::vector<float>& q, std::size_t cls,
                                  int dim, int k) const;
    PoseEstimate assemble(const std::vector<float>& dist, const std::vector<float>& q) const;

    ModelSetSpec spec_;
    EstimatorKind estimator_ = EstimatorKind::KnnOracle;
    int k_classify_ = 8;
    int k_regress_ = 8;
    bool local_linear_ = true;
    bool symmetric_ = true;
    std::size_t dim_ = 0;
    std::vector<float> features_;  // size() x dim_
    std::vector<FeatureLabel> labels_;

    // Derived from the above by build_index().
    std::vector<Symmetry> group_;
    std::vector<float> norms_;                // squared feature norms
    std::vector<std::uint8_t> pair_class_;    // group x sample
    std::vector<double> pair_target_;         // group x sample x 3; NaN when invalid
};

/// Throws ClassUnderflow if any class has fewer than 10 samples.
ModelSet train_model_set(const ModelSetSpec& spec, const std::vector<ContactSample>& samples,
                         const TrainConfig& cfg, std::uint64_t seed);

inline PoseEstimate predict_pose(const ModelSet& model, const MarkerField& field) { return model.predict(field); }

/// Label of the same contact seen after rotating the palm frame by
/// `rotation_deg` (applied after an optional mirror of y).
FeatureLabel transform_label(const FeatureLabel& label, double rotation_deg, bool reflect);

/// The prediction a perfect estimator would make for `label`.
PoseEstimate label_estimate(const ModelSetSpec& spec, const FeatureLabel& label);

/// Angular error for a feature class: 180-degree symmetric classes compare
/// modulo 180, edges modulo 360.
double yaw_error(ShapeClass c, double truth, double predicted);

/// True label's extreme yaw band: within 10 degrees of the range boundary.
bool in_extreme_band(const FeatureLabel& label);

struct SampleError {
    std::optional<double> x, y, yaw;  // absolute errors on the label's valid fields
    bool class_correct = false;
};

/// Errors of one prediction against a ground-truth label. Missing predicted
/// fields count as 0 (palm centre / zero yaw). For 180-degree symmetric
/// classes the flipped reading (yaw + 180, y negated for cylinders) is used
/// when closer.
SampleError sample_error(const ModelSetSpec& spec, const FeatureLabel& truth, const PoseEstimate& est);

struct MaeRow {
    std::string object_id;
    std::string dimension;  // x, y, yaw
    double mae = 0.0;
    std::optional<double> extreme_band_mae;
    std::optional<double> mid_band_mae;
    std::size_t n = 0;
    std::size_t n_extreme = 0;
};

struct MaeReport {
    std::vector<MaeRow> rows;
    double class_accuracy = 0.0;

    const MaeRow* find(std::string_view object_id, std::string_view dimension) const;
};

MaeReport evaluate_mae(const ModelSet& model, const std::vector<ContactSample>& test, int workers = 1);
MaeReport evaluate_predictions(const ModelSetSpec& spec, const std::vector<ContactSample>& test,
                               const std::vector<PoseEstimate>& predictions);

/// CSV columns: object_id,dimension,mae,extreme_band_mae,mid_band_mae,n,n_extreme.
/// Band columns are empty when no samples fall in the band.
void write_mae_csv(const std::filesystem::path& path, const MaeReport& report);
MaeReport read_mae_csv(const std::filesystem::path& path);

}  // namespace palmgrasp
