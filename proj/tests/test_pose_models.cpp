#include <doctest.h>

#include <filesystem>
#include <fstream>

#include "palmgrasp/datasets.hpp"
#include "palmgrasp/errors.hpp"
#include "palmgrasp/pose_models.hpp"

using namespace palmgrasp;
namespace fs = std::filesystem;

namespace {

// 20 contacts per training shape; enough for every M3 class.
const std::vector<ContactSample>& training_samples() {
    static const std::vector<ContactSample> samples = [] {
        const TactileSimulator sim;
        std::vector<ContactSample> out;
        const std::vector<std::pair<std::string, ShapeSpec>> objects{{"hemi", Hemisphere{45}},
                                                                     {"ell", Ellipsoid{35, 21, 21}},
                                                                     {"cyl", LateralCylinder{35, 120}},
                                                                     {"disk", EdgedDisk{60, 30}}};
        for (const auto& [id, shape] : objects) {
            const auto s = sample_contacts(sim, shape, id, 40, training_ranges(), 12, "train", 2);
            out.insert(out.end(), s.begin(), s.end());
        }
        return out;
    }();
    return samples;
}

void check_close(const std::optional<double>& a, const std::optional<double>& b, double tol) {
    REQUIRE(a.has_value() == b.has_value());
    if (a) CHECK(std::abs(*a - *b) <= tol);
}

}  // namespace

TEST_SUITE("pose_models") {

TEST_CASE("class layouts") {
    CHECK(ModelSetSpec{ModelVariant::M1}.class_count() == 2);
    CHECK(ModelSetSpec{ModelVariant::M2}.class_count() == 4);
    CHECK(ModelSetSpec{ModelVariant::M3}.class_count() == 7);
    const ModelSetSpec m3{ModelVariant::M3};
    FeatureLabel l{ShapeClass::LateralCylinder, std::nullopt, 1.0, 0.0};
    const auto pos = m3.class_of(l);
    CHECK(m3.yaw_sign(pos) == 1);
    l.yaw = -20.0;
    CHECK(m3.yaw_sign(m3.class_of(l)) == -1);
    CHECK(m3.shape_class(pos) == ShapeClass::LateralCylinder);
    CHECK_FALSE(ModelSetSpec{ModelVariant::M1}.shape_class(0).has_value());
    for (auto v : {ModelVariant::M1, ModelVariant::M2, ModelVariant::M3})
        CHECK(model_variant_from_string(to_string(v)) == v);
}

TEST_CASE("label transforms") {
    const FeatureLabel l{ShapeClass::Ellipsoid, 3.0, 4.0, 30.0};
    const FeatureLabel r = transform_label(l, 90.0, false);
    CHECK(*r.x == doctest::Approx(-4.0));
    CHECK(*r.y == doctest::Approx(3.0));
    CHECK(*r.yaw == doctest::Approx(-60.0));
    const FeatureLabel m = transform_label(l, 0.0, true);
    CHECK(*m.y == doctest::Approx(-4.0));
    CHECK(*m.yaw == doctest::Approx(-30.0));
    const FeatureLabel edge{ShapeClass::EdgedFlat, 5.0, std::nullopt, 170.0};
    const FeatureLabel e = transform_label(edge, 60.0, false);
    CHECK(*e.x == 5.0);
    CHECK(*e.yaw == doctest::Approx(-130.0));
    for (double rot = 0; rot < 360; rot += 60) {
        const FeatureLabel back = transform_label(transform_label(l, rot, false), -rot, false);
        check_close(back.x, l.x, 1e-9);
        check_close(back.y, l.y, 1e-9);
        check_close(back.yaw, l.yaw, 1e-9);
    }
}

TEST_CASE("yaw errors and bands") {
    CHECK(yaw_error(ShapeClass::LateralCylinder, 89.0, -89.0) == doctest::Approx(2.0));
    CHECK(yaw_error(ShapeClass::EdgedFlat, 179.0, -179.0) == doctest::Approx(2.0));
    CHECK(yaw_error(ShapeClass::EdgedFlat, 0.0, 180.0) == doctest::Approx(180.0));
    CHECK(in_extreme_band({ShapeClass::LateralCylinder, std::nullopt, 0.0, 85.0}));
    CHECK_FALSE(in_extreme_band({ShapeClass::LateralCylinder, std::nullopt, 0.0, 20.0}));
}

TEST_CASE("evaluation arithmetic") {
    const ModelSetSpec spec{ModelVariant::M3};
    std::vector<ContactSample> test(4);
    for (std::size_t i = 0; i < test.size(); ++i) {
        test[i].object_id = "ell";
        test[i].label = {ShapeClass::Ellipsoid, 1.0 * i, -2.0, 10.0 * i + 5.0};
    }
    std::vector<PoseEstimate> perfect;
    for (const auto& s : test) perfect.push_back(label_estimate(spec, s.label));
    const MaeReport zero = evaluate_predictions(spec, test, perfect);
    CHECK(zero.class_accuracy == 1.0);
    for (const auto& row : zero.rows) CHECK(row.mae == 0.0);

    auto shifted = perfect;
    for (auto& p : shifted) *p.x += 1.0;
    const MaeReport one = evaluate_predictions(spec, test, shifted);
    CHECK(one.find("ell", "x")->mae == doctest::Approx(1.0));
    CHECK(one.find("ell", "y")->mae == 0.0);
    CHECK(one.find("ell", "yaw")->n == 4);

    auto blank = perfect;
    for (auto& p : blank) p.x.reset();
    CHECK(evaluate_predictions(spec, test, blank).find("ell", "x")->mae == doctest::Approx(1.5));

    const fs::path path = fs::temp_directory_path() / "palmgrasp_unit_mae.csv";
    write_mae_csv(path, one);
    const MaeReport back = read_mae_csv(path);
    REQUIRE(back.rows.size() == one.rows.size());
    for (std::size_t i = 0; i < back.rows.size(); ++i) {
        CHECK(back.rows[i].object_id == one.rows[i].object_id);
        CHECK(back.rows[i].mae == one.rows[i].mae);
        CHECK(back.rows[i].n == one.rows[i].n);
    }
    fs::remove(path);
}

TEST_CASE("flipped readings of symmetric classes") {
    const ModelSetSpec spec{ModelVariant::M2};
    const FeatureLabel truth{ShapeClass::LateralCylinder, std::nullopt, 3.0, 80.0};
    PoseEstimate est = label_estimate(spec, truth);
    est.y = -3.0;
    est.yaw = -100.0;
    const SampleError e = sample_error(spec, truth, est);
    CHECK(e.class_correct);
    CHECK(*e.y == doctest::Approx(0.0));
    CHECK(*e.yaw == doctest::Approx(0.0));
}

TEST_CASE("training") {
    const auto& samples = training_samples();
    const ModelSetSpec m3{ModelVariant::M3};

    SUBCASE("one regressor per class") {
        TrainConfig cfg;
        cfg.k_candidates = {4};
        CHECK(train_model_set(ModelSetSpec{ModelVariant::M1}, samples, cfg, 1).regressor_count() == 2);
        CHECK(train_model_set(m3, samples, cfg, 1).regressor_count() == 7);
    }
    SUBCASE("nearest neighbour memorizes") {
        TrainConfig cfg;
        cfg.k_candidates = {1};
        cfg.local_linear = false;
        const ModelSet model = train_model_set(m3, samples, cfg, 1);
        for (std::size_t i = 0; i < samples.size(); i += 7) {
            const PoseEstimate p = model.predict(samples[i].field);
            CHECK(p.class_index == m3.class_of(samples[i].label));
            const SampleError e = sample_error(m3, samples[i].label, p);
            for (const auto& v : {e.x, e.y, e.yaw})
                if (v) CHECK(*v < 1e-4);
        }
    }
    SUBCASE("deterministic, and survives a save") {
        const ModelSet a = train_model_set(m3, samples, {}, 5);
        CHECK(a == train_model_set(m3, samples, {}, 5));
        const fs::path path = fs::temp_directory_path() / "palmgrasp_unit_model.bin";
        a.save(path, "feedfacefeedface");
        std::string hash;
        const ModelSet b = ModelSet::load(path, &hash);
        CHECK(hash == "feedfacefeedface");
        CHECK(a == b);
        for (std::size_t i = 0; i < samples.size(); i += 13) {
            const PoseEstimate pa = a.predict(samples[i].field), pb = b.predict(samples[i].field);
            CHECK(pa.class_index == pb.class_index);
            CHECK(pa.x == pb.x);
            CHECK(pa.yaw == pb.yaw);
        }
        fs::remove(path);
    }
    SUBCASE("too few samples in a class") {
        std::vector<ContactSample> few(samples.begin(), samples.begin() + 45);
        CHECK_THROWS_AS(train_model_set(m3, few, {}, 1), ClassUnderflow);
    }
    SUBCASE("learned estimator is not built") {
        TrainConfig cfg;
        cfg.estimator = EstimatorKind::Learned;
        CHECK_THROWS_AS(train_model_set(m3, samples, cfg, 1), InvalidConfig);
    }
    SUBCASE("corrupt model file") {
        const fs::path path = fs::temp_directory_path() / "palmgrasp_unit_bad.bin";
        std::ofstream(path) << "not a model";
        CHECK_THROWS_AS(ModelSet::load(path), ModelFormatError);
        fs::remove(path);
    }
}

}
