#include "palmgrasp/pose_models.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <array>
#include <charconv>
#include <cmath>
#include <cstring>
#include <fstream>
#include <limits>
#include <map>
#include <numeric>
#include <sstream>

#include "palmgrasp/errors.hpp"
#include "palmgrasp/parallel.hpp"
#include "palmgrasp/random.hpp"

namespace palmgrasp {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();
constexpr std::size_t kMinClassSamples = 10;
constexpr int kLocalDims = 4;
constexpr double kRidge = 1e-6;

const std::vector<std::string> kM1{"curved", "edge"};
const std::vector<std::string> kM2{"sphere", "ellipsoid", "cylinder", "edge"};
const std::vector<std::string> kM3{"sphere",    "ellipsoid+", "ellipsoid-", "cylinder+",
                                   "cylinder-", "edge+",      "edge-"};

using Neighbour = std::pair<float, std::uint32_t>;  // squared distance, sample index

double idw_weight(float d2) { return 1.0 / (std::sqrt(static_cast<double>(d2)) + 1e-6); }

}  // namespace

std::string_view to_string(ModelVariant v) {
    switch (v) {
        case ModelVariant::M1: return "M1";
        case ModelVariant::M2: return "M2";
        case ModelVariant::M3: return "M3";
    }
    return "?";
}

ModelVariant model_variant_from_string(std::string_view s) {
    if (s == "M1") return ModelVariant::M1;
    if (s == "M2") return ModelVariant::M2;
    if (s == "M3") return ModelVariant::M3;
    throw InvalidConfig("unknown model set '" + std::string(s) + "' (expected M1, M2 or M3)");
}

std::string_view to_string(EstimatorKind k) { return k == EstimatorKind::KnnOracle ? "knn_oracle" : "learned"; }

EstimatorKind estimator_kind_from_string(std::string_view s) {
    if (s == "knn_oracle") return EstimatorKind::KnnOracle;
    if (s == "learned") return EstimatorKind::Learned;
    throw InvalidConfig("unknown estimator '" + std::string(s) + "'");
}

const std::vector<std::string>& ModelSetSpec::class_list() const {
    switch (variant) {
        case ModelVariant::M1: return kM1;
        case ModelVariant::M2: return kM2;
        case ModelVariant::M3: return kM3;
    }
    return kM3;
}

std::size_t ModelSetSpec::class_of(const FeatureLabel& label) const {
    const bool negative = label.yaw && *label.yaw < 0.0;
    switch (variant) {
        case ModelVariant::M1: return label.shape_class == ShapeClass::EdgedFlat ? 1 : 0;
        case ModelVariant::M2: return static_cast<std::size_t>(label.shape_class);
        case ModelVariant::M3:
            switch (label.shape_class) {
                case ShapeClass::Hemisphere: return 0;
                case ShapeClass::Ellipsoid: return negative ? 2 : 1;
                case ShapeClass::LateralCylinder: return negative ? 4 : 3;
                case ShapeClass::EdgedFlat: return negative ? 6 : 5;
            }
    }
    return 0;
}

int ModelSetSpec::yaw_sign(std::size_t c) const {
    if (variant != ModelVariant::M3 || c == 0) return 0;
    return (c % 2 == 1) ? 1 : -1;
}

std::optional<ShapeClass> ModelSetSpec::shape_class(std::size_t c) const {
    switch (variant) {
        case ModelVariant::M1:
            if (c == 1) return ShapeClass::EdgedFlat;
            return std::nullopt;
        case ModelVariant::M2: return static_cast<ShapeClass>(c);
        case ModelVariant::M3: return static_cast<ShapeClass>((c + 1) / 2);
    }
    return std::nullopt;
}

void TrainConfig::validate() const {
    if (!(split_fraction > 0.0 && split_fraction < 1.0)) throw InvalidConfig("split_fraction must be in (0, 1)");
    if (max_epochs < 1 || early_stop_patience < 1) throw InvalidConfig("epochs and patience must be >= 1");
    if (k_candidates.empty()) throw InvalidConfig("k_candidates must not be empty");
    for (int k : k_candidates)
        if (k < 1) throw InvalidConfig("neighbour counts must be >= 1");
}

std::vector<float> marker_feature(const MarkerField& field) {
    std::vector<float> f;
    f.reserve(field.size() * 3);
    for (const auto& d : field.displacement)
        for (int k = 0; k < 3; ++k) f.push_back(static_cast<float>(d[k]));
    return f;
}

bool ModelSet::regresses(std::size_t c, int dim) const {
    const std::size_t n = pair_class_.size();
    for (std::size_t p = 0; p < n; ++p)
        if (pair_class_[p] == c && !std::isnan(pair_target_[3 * p + dim])) return true;
    return false;
}

FeatureLabel transform_label(const FeatureLabel& l, double rotation_deg, bool reflect) {
    const double s = reflect ? -1.0 : 1.0;
    const auto point = [&](Vec2 v) {
        v.y() *= s;
        return rotate(v, rotation_deg);
    };
    const auto angle = [&](double a) { return s * a + rotation_deg; };
    FeatureLabel o = l;
    switch (l.shape_class) {
        case ShapeClass::Hemisphere:
        case ShapeClass::Ellipsoid:
            if (l.x && l.y) {
                const Vec2 p = point({*l.x, *l.y});
                o.x = p.x();
                o.y = p.y();
            }
            if (l.yaw) o.yaw = fold90(angle(*l.yaw));
            break;
        case ShapeClass::LateralCylinder:
            if (l.y && l.yaw) {
                const auto normal = [](double deg) { return Vec2(-std::sin(deg2rad(deg)), std::cos(deg2rad(deg))); };
                const Vec2 c = point(*l.y * normal(*l.yaw));
                o.yaw = fold90(angle(*l.yaw));
                o.y = c.dot(normal(*o.yaw));
            }
            break;
        case ShapeClass::EdgedFlat:
            if (l.yaw) o.yaw = wrap180(angle(*l.yaw));
            break;
    }
    return o;
}

namespace {

Vec2 apply(const ModelSet::Symmetry& g, Vec2 v) {
    if (g.reflect) v.y() = -v.y();
    return rotate(v, 60.0 * g.rotation);
}

Vec2 apply_inverse(const ModelSet::Symmetry& g, Vec2 v) {
    v = rotate(v, -60.0 * g.rotation);
    if (g.reflect) v.y() = -v.y();
    return v;
}

// Feature of the g-transformed contact: marker j's displacement moves to
// marker perm[j], rotated with the lattice.
void transform_feature(const ModelSet::Symmetry& g, const float* in, float* out, std::size_t markers) {
    for (std::size_t j = 0; j < markers; ++j) {
        const Vec2 d = apply(g, Vec2(in[3 * j], in[3 * j + 1]));
        float* o = out + 3 * g.perm[j];
        o[0] = static_cast<float>(d.x());
        o[1] = static_cast<float>(d.y());
        o[2] = in[3 * j + 2];
    }
}

std::vector<ModelSet::Symmetry> lattice_group(std::size_t markers) {
    int rings = 0;
    while (static_cast<std::size_t>(1 + 3 * rings * (rings + 1)) < markers) ++rings;
    if (rings < 1 || static_cast<std::size_t>(1 + 3 * rings * (rings + 1)) != markers)
        throw DimensionMismatch("marker count " + std::to_string(markers) + " is not a hexagonal lattice");
    PalmGeometry geom;
    geom.n_rings = rings;
    const MarkerField rest = rest_markers(geom);
    std::vector<ModelSet::Symmetry> group;
    for (bool reflect : {false, true}) {
        for (int rot = 0; rot < 6; ++rot) {
            ModelSet::Symmetry g{std::vector<std::uint32_t>(markers), rot, reflect};
            for (std::size_t j = 0; j < markers; ++j) {
                const Vec2 p = apply(g, rest.positions[j].head<2>());
                double best = std::numeric_limits<double>::infinity();
                for (std::size_t m = 0; m < markers; ++m) {
                    const double d = (rest.positions[m].head<2>() - p).squaredNorm();
                    if (d < best) best = d, g.perm[j] = static_cast<std::uint32_t>(m);
                }
            }
            group.push_back(std::move(g));
        }
    }
    return group;
}

// Weighted local linear fit on the leading principal directions of the
// neighbourhood; falls back to the weighted mean when degenerate.
double local_estimate(const Eigen::MatrixXd& X0, const Eigen::VectorXd& q, const std::vector<float>& d2,
                      const std::vector<double>& t, bool linear) {
    const std::size_t k = t.size();
    std::vector<double> w(k);
    double wsum = 0.0, mean = 0.0;
    for (std::size_t i = 0; i < k; ++i) {
        w[i] = idw_weight(d2[i]);
        wsum += w[i];
        mean += w[i] * t[i];
    }
    mean /= wsum;
    if (!linear || k < 4) return mean;

    const Eigen::Index n = static_cast<Eigen::Index>(k);
    Eigen::VectorXd mu = Eigen::VectorXd::Zero(X0.cols());
    for (Eigen::Index i = 0; i < n; ++i) mu += (w[i] / wsum) * X0.row(i).transpose();
    const Eigen::MatrixXd X = X0.rowwise() - mu.transpose();
    const Eigen::VectorXd qv = q - mu;

    const Eigen::MatrixXd G = X * X.transpose();
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(G);
    const int m = std::min<int>(kLocalDims, static_cast<int>(k) - 2);
    const double top = es.eigenvalues()(n - 1);
    if (!(top > 0.0)) return mean;

    // Columns of Z are neighbour coordinates along the leading directions.
    Eigen::MatrixXd Z(n, m + 1);
    Eigen::VectorXd zq(m + 1);
    Z.col(0).setOnes();
    zq(0) = 1.0;
    int used = 0;
    for (int c = 0; c < m; ++c) {
        const Eigen::Index idx = n - 1 - c;
        const double lambda = es.eigenvalues()(idx);
        if (lambda <= 1e-9 * top) break;
        const Eigen::VectorXd axis = X.transpose() * es.eigenvectors().col(idx) / std::sqrt(lambda);
        Z.col(c + 1) = X * axis;
        zq(c + 1) = qv.dot(axis);
        ++used;
    }
    if (used == 0) return mean;
    Eigen::MatrixXd A = Eigen::MatrixXd::Zero(used + 1, used + 1);
    Eigen::VectorXd b = Eigen::VectorXd::Zero(used + 1);
    for (Eigen::Index i = 0; i < n; ++i) {
        const Eigen::VectorXd zi = Z.row(i).head(used + 1).transpose();
        A += w[i] * zi * zi.transpose();
        b += w[i] * t[i] * zi;
    }
    for (int c = 1; c <= used; ++c) A(c, c) += kRidge * A(0, 0) * top;
    const Eigen::VectorXd beta = A.ldlt().solve(b);
    const double est = zq.head(used + 1).dot(beta);
    if (!std::isfinite(est)) return mean;
    const auto [lo, hi] = std::minmax_element(t.begin(), t.end());
    return std::clamp(est, *lo, *hi);
}

// The k smallest entries of `dist` accepted by `keep`, ordered by distance
// then pair index so ties resolve deterministically.
template <class Keep>
std::vector<Neighbour> smallest(const std::vector<float>& dist, std::size_t k, Keep keep) {
    std::vector<Neighbour> all;
    all.reserve(dist.size());
    for (std::uint32_t p = 0; p < dist.size(); ++p)
        if (keep(p)) all.emplace_back(dist[p], p);
    k = std::min(k, all.size());
    std::partial_sort(all.begin(), all.begin() + static_cast<std::ptrdiff_t>(k), all.end());
    all.resize(k);
    return all;
}

}  // namespace

void ModelSet::build_index() {
    const std::size_t n = labels_.size();
    if (symmetric_) {
        if (dim_ % 3 != 0) throw DimensionMismatch("feature size is not a multiple of 3");
        group_ = lattice_group(dim_ / 3);
    } else {
        Symmetry identity{std::vector<std::uint32_t>(dim_ / 3), 0, false};
        std::iota(identity.perm.begin(), identity.perm.end(), 0u);
        group_ = {identity};
    }
    norms_.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
        float s = 0.0f;
        for (std::size_t j = 0; j < dim_; ++j) s += features_[i * dim_ + j] * features_[i * dim_ + j];
        norms_[i] = s;
    }
    pair_class_.assign(group_.size() * n, 0);
    pair_target_.assign(group_.size() * n * 3, kNaN);
    for (std::size_t g = 0; g < group_.size(); ++g) {
        for (std::size_t i = 0; i < n; ++i) {
            const FeatureLabel l = transform_label(labels_[i], 60.0 * group_[g].rotation, group_[g].reflect);
            const std::size_t p = g * n + i;
            const std::size_t c = spec_.class_of(l);
            pair_class_[p] = static_cast<std::uint8_t>(c);
            pair_target_[3 * p] = l.x.value_or(kNaN);
            pair_target_[3 * p + 1] = l.y.value_or(kNaN);
            if (l.yaw) pair_target_[3 * p + 2] = *l.yaw;
        }
    }
}

std::vector<float> ModelSet::distances(const std::vector<float>& q) const {
    const std::size_t n = labels_.size(), markers = dim_ / 3;
    const auto G = static_cast<Eigen::Index>(group_.size());
    // ||q - g x||^2 = ||g^-1 q - x||^2, so transform the query once per element.
    Eigen::MatrixXf Q(static_cast<Eigen::Index>(dim_), G);
    for (Eigen::Index g = 0; g < G; ++g) {
        const auto& s = group_[static_cast<std::size_t>(g)];
        for (std::size_t j = 0; j < markers; ++j) {
            const float* v = &q[3 * s.perm[j]];
            const Vec2 d = apply_inverse(s, Vec2(v[0], v[1]));
            Q(static_cast<Eigen::Index>(3 * j), g) = static_cast<float>(d.x());
            Q(static_cast<Eigen::Index>(3 * j + 1), g) = static_cast<float>(d.y());
            Q(static_cast<Eigen::Index>(3 * j + 2), g) = v[2];
        }
    }
    const Eigen::Map<const Eigen::MatrixXf> X(features_.data(), static_cast<Eigen::Index>(dim_),
                                              static_cast<Eigen::Index>(n));
    const Eigen::MatrixXf C = X.transpose() * Q;
    const float qn = Q.col(0).squaredNorm();
    std::vector<float> dist(group_.size() * n);
    for (Eigen::Index g = 0; g < G; ++g)
        for (std::size_t i = 0; i < n; ++i)
            dist[static_cast<std::size_t>(g) * n + i] =
                std::max(0.0f, qn + norms_[i] - 2.0f * C(static_cast<Eigen::Index>(i), g));
    return dist;
}

std::vector<float> ModelSet::transformed(std::size_t i, std::size_t g) const {
    std::vector<float> out(dim_);
    transform_feature(group_[g], &features_[i * dim_], out.data(), dim_ / 3);
    return out;
}

std::size_t ModelSet::classify(const std::vector<float>& dist, int k) const {
    const auto nb = smallest(dist, static_cast<std::size_t>(k), [](std::uint32_t) { return true; });
    std::vector<double> score(spec_.class_count(), 0.0);
    for (const auto& [d2, p] : nb) score[pair_class_[p]] += idw_weight(d2);
    return static_cast<std::size_t>(std::max_element(score.begin(), score.end()) - score.begin());
}

std::optional<double> ModelSet::regress(const std::vector<float>& dist, const std::vector<float>& q,
                                        std::size_t cls, int d, int k) const {
    // A sign-split class regresses yaw over both halves of its feature class,
    // unwrapped into a half-turn window centred on its own range, so the fit
    // stays smooth where the halves meet.
    const int sign = d == 2 ? spec_.yaw_sign(cls) : 0;
    const auto feature = spec_.shape_class(cls);
    const double period = feature == ShapeClass::EdgedFlat ? 360.0 : 180.0;
    const auto target = [&](std::uint32_t p) {
        const double v = pair_target_[3 * p + d];
        if (sign == 0) return v;
        const double lo = sign * 0.25 * period - 0.5 * period;
        return v < lo ? v + period : (v >= lo + period ? v - period : v);
    };
    const auto nb = smallest(dist, static_cast<std::size_t>(k), [&](std::uint32_t p) {
        if (std::isnan(pair_target_[3 * p + d])) return false;
        return sign == 0 ? pair_class_[p] == cls : spec_.shape_class(pair_class_[p]) == feature;
    });
    if (nb.empty()) return std::nullopt;
    const std::size_t n = labels_.size();
    Eigen::MatrixXd X(static_cast<Eigen::Index>(nb.size()), static_cast<Eigen::Index>(dim_));
    Eigen::VectorXd qv(static_cast<Eigen::Index>(dim_));
    for (std::size_t j = 0; j < dim_; ++j) qv(static_cast<Eigen::Index>(j)) = q[j];
    std::vector<float> d2(nb.size());
    std::vector<double> t(nb.size());
    for (std::size_t r = 0; r < nb.size(); ++r) {
        const std::uint32_t p = nb[r].second;
        const auto f = transformed(p % n, p / n);
        double s = 0.0;
        for (std::size_t j = 0; j < dim_; ++j) {
            X(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(j)) = f[j];
            s += (static_cast<double>(f[j]) - q[j]) * (static_cast<double>(f[j]) - q[j]);
        }
        d2[r] = static_cast<float>(s);
        t[r] = target(p);
    }
    const double v = local_estimate(X, qv, d2, t, local_linear_);
    if (sign > 0) return std::clamp(v, 0.0, 0.5 * period);
    if (sign < 0) return std::clamp(v, -0.5 * period, 0.0);
    return v;
}

PoseEstimate ModelSet::assemble(const std::vector<float>& dist, const std::vector<float>& q) const {
    PoseEstimate e;
    e.class_index = classify(dist, k_classify_);
    e.class_name = spec_.class_list()[e.class_index];
    e.shape_class = spec_.shape_class(e.class_index);
    e.x = regress(dist, q, e.class_index, 0, k_regress_);
    e.y = regress(dist, q, e.class_index, 1, k_regress_);
    e.yaw = regress(dist, q, e.class_index, 2, k_regress_);
    const bool edge = e.class_name.starts_with("edge");
    if (edge && e.x) e.flat_surface = std::abs(*e.x) > kWorkspaceHalfWidth;
    if (e.shape_class && *e.shape_class == ShapeClass::Hemisphere) e.yaw.reset();
    return e;
}

PoseEstimate ModelSet::predict(const MarkerField& field) const { return predict(marker_feature(field)); }

PoseEstimate ModelSet::predict(const std::vector<float>& feature) const {
    if (feature.size() != dim_) throw DimensionMismatch("feature size does not match the trained model");
    return assemble(distances(feature), feature);
}

ModelSet train_model_set(const ModelSetSpec& spec, const std::vector<ContactSample>& samples, const TrainConfig& cfg,
                         std::uint64_t seed) {
    cfg.validate();
    if (cfg.estimator != EstimatorKind::KnnOracle)
        throw InvalidConfig("estimator 'learned' is not available in this build; use knn_oracle");

    ModelSet m;
    m.spec_ = spec;
    m.estimator_ = cfg.estimator;
    m.local_linear_ = cfg.local_linear;
    m.symmetric_ = cfg.symmetric;
    std::vector<std::size_t> counts(spec.class_count(), 0);
    for (const auto& s : samples) {
        if (s.field.size() == 0) throw InvalidConfig("sample " + s.image + " has no marker field loaded");
        const auto f = marker_feature(s.field);
        if (m.dim_ == 0) m.dim_ = f.size();
        if (f.size() != m.dim_) throw DimensionMismatch("inconsistent marker counts in training data");
        m.features_.insert(m.features_.end(), f.begin(), f.end());
        m.labels_.push_back(s.label);
        ++counts[spec.class_of(s.label)];
    }
    for (std::size_t c = 0; c < counts.size(); ++c)
        if (counts[c] < kMinClassSamples)
            throw ClassUnderflow("class '" + spec.class_list()[c] + "' has " + std::to_string(counts[c]) +
                                 " samples (need >= " + std::to_string(kMinClassSamples) + ")");
    m.k_classify_ = m.k_regress_ = cfg.k_candidates.front();
    m.build_index();
    if (cfg.k_candidates.size() == 1) return m;

    // Choose k on a held-out split of the training data.
    std::vector<std::size_t> order(samples.size());
    std::iota(order.begin(), order.end(), 0);
    Rng rng(derive_seed(seed, "train-split"));
    for (std::size_t i = order.size(); i > 1; --i) std::swap(order[i - 1], order[rng.below(i)]);
    const std::size_t n_fit = static_cast<std::size_t>(std::floor(cfg.split_fraction * samples.size()));
    ModelSet fit = m;
    fit.features_.clear();
    fit.labels_.clear();
    std::vector<std::size_t> held(order.begin() + static_cast<std::ptrdiff_t>(n_fit), order.end());
    std::sort(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(n_fit));
    for (std::size_t j = 0; j < n_fit; ++j) {
        const std::size_t i = order[j];
        fit.features_.insert(fit.features_.end(), m.features_.begin() + static_cast<std::ptrdiff_t>(i * m.dim_),
                             m.features_.begin() + static_cast<std::ptrdiff_t>((i + 1) * m.dim_));
        fit.labels_.push_back(m.labels_[i]);
    }
    fit.build_index();

    const std::size_t nk = cfg.k_candidates.size();
    std::vector<double> wrong(nk, 0.0), reg_err(nk, 0.0);
    for (std::size_t i : held) {
        const std::vector<float> q(m.features_.begin() + static_cast<std::ptrdiff_t>(i * m.dim_),
                                   m.features_.begin() + static_cast<std::ptrdiff_t>((i + 1) * m.dim_));
        const auto dist = fit.distances(q);
        const std::size_t truth = spec.class_of(m.labels_[i]);
        const FeatureLabel& l = m.labels_[i];
        const std::array<double, 3> target{
            l.x.value_or(kNaN), l.y.value_or(kNaN),
            l.yaw.value_or(kNaN)};
        for (std::size_t c = 0; c < nk; ++c) {
            if (fit.classify(dist, cfg.k_candidates[c]) != truth) wrong[c] += 1.0;
            for (int d = 0; d < 3; ++d) {
                if (std::isnan(target[d])) continue;
                const auto p = fit.regress(dist, q, truth, d, cfg.k_candidates[c]);
                if (p) reg_err[c] += std::abs(*p - target[d]) / (d == 2 ? 3.0 : 1.0);
            }
        }
    }
    m.k_classify_ = cfg.k_candidates[static_cast<std::size_t>(std::min_element(wrong.begin(), wrong.end()) - wrong.begin())];
    m.k_regress_ =
        cfg.k_candidates[static_cast<std::size_t>(std::min_element(reg_err.begin(), reg_err.end()) - reg_err.begin())];
    return m;
}

// ---- serialization ---------------------------------------------------------

namespace {

constexpr char kMagic[8] = {'P', 'G', 'M', 'O', 'D', 'E', 'L', '\0'};
constexpr std::uint32_t kFormatVersion = 2;

template <class T>
void put(std::ostream& out, const T& v) {
    out.write(reinterpret_cast<const char*>(&v), sizeof v);
}

template <class T>
T get(std::istream& in) {
    T v{};
    in.read(reinterpret_cast<char*>(&v), sizeof v);
    if (!in) throw ModelFormatError("truncated model file");
    return v;
}

void put_string(std::ostream& out, const std::string& s) {
    put<std::uint32_t>(out, static_cast<std::uint32_t>(s.size()));
    out.write(s.data(), static_cast<std::streamsize>(s.size()));
}

std::string get_string(std::istream& in) {
    const auto n = get<std::uint32_t>(in);
    if (n > (1u << 20)) throw ModelFormatError("implausible string length in model file");
    std::string s(n, '\0');
    in.read(s.data(), n);
    if (!in) throw ModelFormatError("truncated model file");
    return s;
}

template <class T>
void put_vector(std::ostream& out, const std::vector<T>& v) {
    put<std::uint64_t>(out, v.size());
    out.write(reinterpret_cast<const char*>(v.data()), static_cast<std::streamsize>(v.size() * sizeof(T)));
}

template <class T>
std::vector<T> get_vector(std::istream& in, std::uint64_t expected) {
    const auto n = get<std::uint64_t>(in);
    if (n != expected) throw ModelFormatError("model table size mismatch");
    std::vector<T> v(n);
    in.read(reinterpret_cast<char*>(v.data()), static_cast<std::streamsize>(n * sizeof(T)));
    if (!in) throw ModelFormatError("truncated model file");
    return v;
}

}  // namespace

void ModelSet::save(const std::filesystem::path& path, const std::string& config_hash) const {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw MissingArtifact("cannot write model file " + path.string());
    out.write(kMagic, sizeof kMagic);
    put(out, kFormatVersion);
    put_string(out, config_hash);
    put<std::uint8_t>(out, static_cast<std::uint8_t>(spec_.variant));
    put<std::uint8_t>(out, static_cast<std::uint8_t>(estimator_));
    put<std::uint8_t>(out, local_linear_ ? 1 : 0);
    put<std::uint8_t>(out, symmetric_ ? 1 : 0);
    put<std::int32_t>(out, k_classify_);
    put<std::int32_t>(out, k_regress_);
    put<std::uint64_t>(out, dim_);
    std::vector<std::uint8_t> classes;
    std::vector<double> fields;
    for (const auto& l : labels_) {
        classes.push_back(static_cast<std::uint8_t>(l.shape_class));
        for (const auto& v : {l.x, l.y, l.yaw}) fields.push_back(v.value_or(kNaN));
    }
    put_vector(out, classes);
    put_vector(out, fields);
    put_vector(out, features_);
}

ModelSet ModelSet::load(const std::filesystem::path& path, std::string* config_hash) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw MissingArtifact("model file not found: " + path.string() + " (run `train` first)");
    char magic[sizeof kMagic];
    in.read(magic, sizeof magic);
    if (!in || std::memcmp(magic, kMagic, sizeof kMagic) != 0) throw ModelFormatError("not a model file");
    if (get<std::uint32_t>(in) != kFormatVersion) throw ModelFormatError("unsupported model format version");
    ModelSet m;
    const std::string hash = get_string(in);
    if (config_hash) *config_hash = hash;
    const auto variant = get<std::uint8_t>(in);
    const auto estimator = get<std::uint8_t>(in);
    if (variant > 2 || estimator > 1) throw ModelFormatError("bad model header");
    m.spec_.variant = static_cast<ModelVariant>(variant);
    m.estimator_ = static_cast<EstimatorKind>(estimator);
    m.local_linear_ = get<std::uint8_t>(in) != 0;
    m.symmetric_ = get<std::uint8_t>(in) != 0;
    m.k_classify_ = get<std::int32_t>(in);
    m.k_regress_ = get<std::int32_t>(in);
    m.dim_ = get<std::uint64_t>(in);
    const auto n = get<std::uint64_t>(in);
    in.seekg(-static_cast<std::streamoff>(sizeof(std::uint64_t)), std::ios::cur);
    const auto classes = get_vector<std::uint8_t>(in, n);
    const auto fields = get_vector<double>(in, n * 3);
    m.features_ = get_vector<float>(in, n * m.dim_);
    if (m.k_classify_ < 1 || m.k_regress_ < 1) throw ModelFormatError("bad neighbour count");
    const auto field = [&](std::size_t i) { return std::isnan(fields[i]) ? std::nullopt : std::optional(fields[i]); };
    for (std::size_t i = 0; i < n; ++i) {
        if (classes[i] > 3) throw ModelFormatError("feature class out of range");
        m.labels_.push_back({static_cast<ShapeClass>(classes[i]), field(3 * i), field(3 * i + 1), field(3 * i + 2)});
    }
    try {
        m.build_index();
    } catch (const DimensionMismatch& e) {
        throw ModelFormatError(e.what());
    }
    return m;
}

// ---- evaluation ------------------------------------------------------------

PoseEstimate label_estimate(const ModelSetSpec& spec, const FeatureLabel& label) {
    PoseEstimate e;
    e.class_index = spec.class_of(label);
    e.class_name = spec.class_list()[e.class_index];
    e.shape_class = spec.shape_class(e.class_index);
    if (!e.shape_class && label.shape_class != ShapeClass::EdgedFlat) e.shape_class = label.shape_class;
    e.x = label.x;
    e.y = label.y;
    e.yaw = label.yaw;
    if (label.shape_class == ShapeClass::EdgedFlat) e.flat_surface = std::abs(*label.x) > kWorkspaceHalfWidth;
    return e;
}

double yaw_error(ShapeClass c, double truth, double predicted) {
    const double d = std::abs(wrap180(predicted - truth));
    if (c == ShapeClass::EdgedFlat) return d;
    return std::min(d, 180.0 - d);
}

bool in_extreme_band(const FeatureLabel& label) {
    if (!label.yaw) return false;
    const double limit = label.shape_class == ShapeClass::EdgedFlat ? 180.0 : 90.0;
    return std::abs(*label.yaw) >= limit - 10.0;
}

SampleError sample_error(const ModelSetSpec& spec, const FeatureLabel& truth, const PoseEstimate& est) {
    SampleError e;
    e.class_correct = spec.class_of(truth) == est.class_index;
    const double px = est.x.value_or(0.0), py = est.y.value_or(0.0), pyaw = est.yaw.value_or(0.0);
    bool flipped = false;
    if (truth.yaw) {
        const double d = std::abs(wrap180(pyaw - *truth.yaw));
        flipped = truth.shape_class != ShapeClass::EdgedFlat && d > 90.0;
        e.yaw = yaw_error(truth.shape_class, *truth.yaw, pyaw);
    }
    if (truth.x) e.x = std::abs(px - *truth.x);
    if (truth.y) {
        const double ty = (flipped && truth.shape_class == ShapeClass::LateralCylinder) ? -*truth.y : *truth.y;
        e.y = std::abs(py - ty);
    }
    return e;
}

const MaeRow* MaeReport::find(std::string_view object_id, std::string_view dimension) const {
    for (const auto& r : rows)
        if (r.object_id == object_id && r.dimension == dimension) return &r;
    return nullptr;
}

MaeReport evaluate_predictions(const ModelSetSpec& spec, const std::vector<ContactSample>& test,
                               const std::vector<PoseEstimate>& predictions) {
    if (predictions.size() != test.size()) throw DimensionMismatch("one prediction per test sample required");
    struct Acc {
        double sum = 0, ext = 0, mid = 0;
        std::size_t n = 0, n_ext = 0, n_mid = 0;
        bool banded = false;
    };
    std::vector<std::string> order;
    std::map<std::string, std::array<Acc, 3>> acc;
    std::size_t correct = 0;
    for (std::size_t i = 0; i < test.size(); ++i) {
        const auto& s = test[i];
        if (!acc.count(s.object_id)) order.push_back(s.object_id);
        auto& a = acc[s.object_id];
        const SampleError e = sample_error(spec, s.label, predictions[i]);
        correct += e.class_correct ? 1 : 0;
        const bool extreme = in_extreme_band(s.label);
        const std::array<std::optional<double>, 3> errs{e.x, e.y, e.yaw};
        for (int d = 0; d < 3; ++d) {
            if (!errs[d]) continue;
            auto& r = a[d];
            r.sum += *errs[d];
            ++r.n;
            if (!s.label.yaw) continue;
            r.banded = true;
            if (extreme) r.ext += *errs[d], ++r.n_ext;
            else r.mid += *errs[d], ++r.n_mid;
        }
    }
    static const char* kDims[3] = {"x", "y", "yaw"};
    MaeReport rep;
    rep.class_accuracy = test.empty() ? 1.0 : static_cast<double>(correct) / static_cast<double>(test.size());
    for (const auto& id : order) {
        for (int d = 0; d < 3; ++d) {
            const auto& r = acc[id][d];
            if (r.n == 0) continue;
            MaeRow row{id, kDims[d], r.sum / static_cast<double>(r.n), std::nullopt, std::nullopt, r.n, r.n_ext};
            if (r.banded && r.n_ext > 0) row.extreme_band_mae = r.ext / static_cast<double>(r.n_ext);
            if (r.banded && r.n_mid > 0) row.mid_band_mae = r.mid / static_cast<double>(r.n_mid);
            rep.rows.push_back(row);
        }
    }
    return rep;
}

MaeReport evaluate_mae(const ModelSet& model, const std::vector<ContactSample>& test, int workers) {
    std::vector<PoseEstimate> pred(test.size());
    parallel_for(test.size(), workers, [&](std::size_t i) { pred[i] = model.predict(test[i].field); });
    return evaluate_predictions(model.spec(), test, pred);
}

namespace {

std::string format_number(double v) {
    char buf[32];
    auto [end, ec] = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, end);
}

}  // namespace

namespace {
constexpr std::string_view kMaeHeader = "object_id,dimension,mae,extreme_band_mae,mid_band_mae,n,n_extreme";
}  // namespace

void write_mae_csv(const std::filesystem::path& path, const MaeReport& report) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw MissingArtifact("cannot write " + path.string());
    out << kMaeHeader << '\n';
    auto opt = [](const std::optional<double>& v) { return v ? format_number(*v) : std::string(); };
    for (const auto& r : report.rows)
        out << r.object_id << ',' << r.dimension << ',' << format_number(r.mae) << ',' << opt(r.extreme_band_mae) << ','
            << opt(r.mid_band_mae) << ',' << r.n << ',' << r.n_extreme << '\n';
}

MaeReport read_mae_csv(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw MissingArtifact("MAE table not found: " + path.string() + " (run `eval` first)");
    std::string line;
    if (!std::getline(in, line) || line != kMaeHeader) throw InvalidConfig("bad MAE CSV header in " + path.string());
    MaeReport rep;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        std::vector<std::string> cols;
        std::stringstream ss(line);
        for (std::string c; std::getline(ss, c, ',');) cols.push_back(c);
        if (cols.size() != 7) throw InvalidConfig("bad MAE CSV row: " + line);
        try {
            MaeRow r;
            r.object_id = cols[0];
            r.dimension = cols[1];
            r.mae = std::stod(cols[2]);
            if (!cols[3].empty()) r.extreme_band_mae = std::stod(cols[3]);
            if (!cols[4].empty()) r.mid_band_mae = std::stod(cols[4]);
            r.n = std::stoul(cols[5]);
            r.n_extreme = std::stoul(cols[6]);
            rep.rows.push_back(r);
        } catch (const std::logic_error&) {
            throw InvalidConfig("bad MAE CSV row: " + line);
        }
    }
    return rep;
}

}  // namespace palmgrasp
