#include "fourphase/dataset.hpp"

#include <cmath>
#include <random>

#include "fourphase/error.hpp"

namespace fourphase {

namespace {

Eigen::VectorXd as_vector(const std::vector<double>& v) {
    return Eigen::Map<const Eigen::VectorXd>(v.data(), static_cast<Eigen::Index>(v.size()));
}

std::vector<double> as_std(const Eigen::VectorXd& v) { return {v.data(), v.data() + v.size()}; }

void check_geometry(const DatasetSpec& spec) {
    if (spec.dim < 2) throw BadDimension("dim must be >= 2, got " + std::to_string(spec.dim));
    if (spec.n_plus < 1 || spec.n_minus < 1) throw AssumptionViolation("cluster counts must be positive");
    if (!(spec.delta > 0.0) || !(spec.delta <= M_PI / 2))
        throw AssumptionViolation("delta must lie in (0, pi/2]");
}

}  // namespace

double Dataset::sin_delta() const { return std::sin(spec.delta); }

Eigen::VectorXd Dataset::plane_e2() const {
    Eigen::VectorXd e2 = x_plus - x_plus.dot(x_minus) * x_minus;
    return e2 / e2.norm();
}

Dataset build_unchecked(const DatasetSpec& spec) {
    check_geometry(spec);
    std::mt19937_64 rng(spec.seed);
    std::normal_distribution<double> gauss(0.0, 1.0);
    Eigen::MatrixXd g(spec.dim, spec.dim);
    for (int j = 0; j < spec.dim; ++j)
        for (int i = 0; i < spec.dim; ++i) g(i, j) = gauss(rng);
    Eigen::HouseholderQR<Eigen::MatrixXd> qr(g);
    Eigen::MatrixXd q = qr.householderQ() * Eigen::MatrixXd::Identity(spec.dim, 2);

    Dataset ds;
    ds.spec = spec;
    Eigen::VectorXd e1 = q.col(0).normalized();
    Eigen::VectorXd e2 = q.col(1) - q.col(1).dot(e1) * e1;
    e2.normalize();
    ds.x_minus = e1;
    ds.x_plus = std::cos(spec.delta) * e1 + std::sin(spec.delta) * e2;
    ds.x_plus.normalize();
    return ds;
}

Dataset build(const DatasetSpec& spec) {
    check_geometry(spec);
    if (spec.p() * std::cos(spec.delta) <= 1.0)
        throw AssumptionViolation("p*cos(delta) = " + std::to_string(spec.p() * std::cos(spec.delta)) +
                                  " must exceed 1");
    return build_unchecked(spec);
}

KeyDirections key_directions(const Dataset& ds) {
    const double c = ds.cos_delta();
    const double p = ds.p();
    KeyDirections k;
    k.x_plus_perp = (ds.x_minus - c * ds.x_plus).normalized();
    k.x_minus_perp = (ds.x_plus - c * ds.x_minus).normalized();
    k.z = (p * ds.x_plus - ds.x_minus) / (1.0 + p);
    k.mu = k.z.normalized();
    return k;
}

double margin(const Dataset& ds) { return std::sin(ds.spec.delta / 2.0); }

std::vector<NoisySample> noisy_variant(const Dataset& ds, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> xi(0.0, ds.spec.delta / 4.0);
    const Eigen::VectorXd e1 = ds.plane_e1();
    const Eigen::VectorXd e2 = ds.plane_e2();
    auto point_at = [&](double a) -> Eigen::VectorXd {
        Eigen::VectorXd v = std::cos(a) * e1 + std::sin(a) * e2;
        return v / v.norm();
    };

    std::vector<NoisySample> out;
    out.reserve(ds.spec.n());
    out.push_back({ds.x_plus, 1, ds.spec.delta});
    for (int i = 1; i < ds.spec.n_plus; ++i) {
        const double a = ds.spec.delta + xi(rng);
        out.push_back({point_at(a), 1, a});
    }
    out.push_back({ds.x_minus, -1, 0.0});
    for (int i = 1; i < ds.spec.n_minus; ++i) {
        const double a = xi(rng);
        out.push_back({point_at(a), -1, a});
    }
    return out;
}

TrainingSet training_set(const Dataset& ds) {
    TrainingSet ts;
    ts.X.resize(ds.dim(), 2);
    ts.X.col(0) = ds.x_plus;
    ts.X.col(1) = ds.x_minus;
    ts.labels = Eigen::Vector2d(1.0, -1.0);
    const double n = ds.spec.n();
    ts.weights = Eigen::Vector2d(ds.spec.n_plus / n, ds.spec.n_minus / n);
    ts.counts = {ds.spec.n_plus, ds.spec.n_minus};
    ts.names = {"plus", "minus"};
    return ts;
}

TrainingSet training_set(const std::vector<NoisySample>& samples) {
    TrainingSet ts;
    const auto n = static_cast<Eigen::Index>(samples.size());
    if (n == 0) throw BadDimension("empty sample list");
    ts.X.resize(samples.front().point.size(), n);
    ts.labels.resize(n);
    ts.weights = Eigen::VectorXd::Constant(n, 1.0 / static_cast<double>(n));
    ts.counts.assign(static_cast<std::size_t>(n), 1);
    ts.index_minus = -1;
    for (Eigen::Index i = 0; i < n; ++i) {
        if (samples[i].label < 0 && ts.index_minus < 0) ts.index_minus = static_cast<int>(i);
        ts.X.col(i) = samples[i].point;
        ts.labels(i) = samples[i].label;
        ts.names.push_back("s" + std::to_string(i));
    }
    return ts;
}

Record to_record(const Dataset& ds) {
    Record r;
    r.set("delta", ds.spec.delta);
    r.set("n_plus", ds.spec.n_plus);
    r.set("n_minus", ds.spec.n_minus);
    r.set("dim", ds.spec.dim);
    r.set("seed", ds.spec.seed);
    r.set("x_plus", as_std(ds.x_plus));
    r.set("x_minus", as_std(ds.x_minus));
    return r;
}

Dataset dataset_from_record(const Record& r) {
    Dataset ds;
    ds.spec.delta = r.get_double("delta");
    ds.spec.n_plus = static_cast<int>(r.get_int("n_plus"));
    ds.spec.n_minus = static_cast<int>(r.get_int("n_minus"));
    ds.spec.dim = static_cast<int>(r.get_int("dim"));
    ds.spec.seed = r.get_uint("seed");
    check_geometry(ds.spec);
    ds.x_plus = as_vector(r.get_doubles("x_plus"));
    ds.x_minus = as_vector(r.get_doubles("x_minus"));
    if (ds.x_plus.size() != ds.spec.dim || ds.x_minus.size() != ds.spec.dim)
        throw ParseError("dataset vectors do not match dim");
    return ds;
}

}  // namespace fourphase
