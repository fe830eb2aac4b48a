#include "fourphase/network.hpp"

#include <cmath>
#include <random>

#include "fourphase/error.hpp"

namespace fourphase {

double NetworkState::scale() const { return kappa2 / std::sqrt(static_cast<double>(m())); }

double default_boundary_tol(double kappa2) { return 1e-9 * kappa2; }

namespace {

Eigen::VectorXd split_signs(int m) {
    Eigen::VectorXd s(m);
    for (int k = 0; k < m; ++k) s(k) = k < m / 2 ? 1.0 : -1.0;
    return s;
}

void check_scales(int m, double kappa1, double kappa2) {
    if (m < 2 || m % 2 != 0) throw OddWidth("width must be even and >= 2, got " + std::to_string(m));
    if (!(kappa1 > 0.0 && kappa1 < kappa2 && kappa2 <= 1.0))
        throw BadScales("need 0 < kappa1 < kappa2 <= 1");
}

}  // namespace

NetworkState init(int m, int dim, double kappa1, double kappa2, std::uint64_t seed) {
    check_scales(m, kappa1, kappa2);
    if (dim < 2) throw BadDimension("dim must be >= 2");
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> gauss(0.0, 1.0);
    NetworkState s;
    s.weights.resize(m, dim);
    const double r = kappa1 / std::sqrt(static_cast<double>(m));
    for (int k = 0; k < m; ++k) {
        Eigen::VectorXd u(dim);
        do {
            for (int j = 0; j < dim; ++j) u(j) = gauss(rng);
        } while (u.norm() == 0.0);
        s.weights.row(k) = (r / u.norm()) * u.transpose();
    }
    s.signs = split_signs(m);
    s.kappa1 = kappa1;
    s.kappa2 = kappa2;
    return s;
}

NetworkState make_state(const Eigen::MatrixXd& weights, double kappa1, double kappa2) {
    const int m = static_cast<int>(weights.rows());
    if (m < 2 || m % 2 != 0) throw OddWidth("width must be even and >= 2");
    NetworkState s;
    s.weights = weights;
    s.signs = split_signs(m);
    s.kappa1 = kappa1;
    s.kappa2 = kappa2;
    return s;
}

double predict(const NetworkState& state, const Eigen::VectorXd& x) {
    const Eigen::VectorXd z = state.weights * x;
    return state.scale() * state.signs.dot(z.cwiseMax(0.0));
}

Eigen::VectorXd predict_all(const NetworkState& state, const TrainingSet& ts) {
    const Eigen::MatrixXd z = state.weights * ts.X;
    return state.scale() * (z.cwiseMax(0.0).transpose() * state.signs);
}

double loss_from_predictions(double f_plus, double f_minus, const DatasetSpec& spec) {
    return (spec.n_plus * std::exp(-f_plus) + spec.n_minus * std::exp(f_minus)) / spec.n();
}

double accuracy_from_predictions(double f_plus, double f_minus, const DatasetSpec& spec) {
    const int correct = (f_plus > 0.0 ? spec.n_plus : 0) + (f_minus < 0.0 ? spec.n_minus : 0);
    return static_cast<double>(correct) / spec.n();
}

double empirical_loss(const NetworkState& state, const Dataset& ds) {
    return loss_from_predictions(predict(state, ds.x_plus), predict(state, ds.x_minus), ds.spec);
}

double empirical_loss(const NetworkState& state, const TrainingSet& ts) {
    const Eigen::VectorXd f = predict_all(state, ts);
    double l = 0.0;
    for (int i = 0; i < ts.size(); ++i) l += ts.weights(i) * std::exp(-ts.labels(i) * f(i));
    return l;
}

double train_accuracy(const NetworkState& state, const Dataset& ds) {
    return accuracy_from_predictions(predict(state, ds.x_plus), predict(state, ds.x_minus), ds.spec);
}

double train_accuracy(const NetworkState& state, const TrainingSet& ts) {
    const Eigen::VectorXd f = predict_all(state, ts);
    int correct = 0, total = 0;
    for (int i = 0; i < ts.size(); ++i) {
        total += ts.counts[i];
        if (ts.labels(i) * f(i) > 0.0) correct += ts.counts[i];
    }
    return static_cast<double>(correct) / total;
}

NeuronView neuron_view(const NetworkState& state, int k) {
    NeuronView v;
    const Eigen::VectorXd b = state.weights.row(k).transpose();
    v.rho = b.norm();
    v.defined = v.rho > 0.0;
    v.w = v.defined ? Eigen::VectorXd(b / v.rho) : Eigen::VectorXd::Zero(b.size());
    return v;
}

PatternMatrix patterns_from_preacts(const Eigen::MatrixXd& z, double boundary_tol) {
    PatternMatrix pm;
    pm.m = static_cast<int>(z.rows());
    pm.n = static_cast<int>(z.cols());
    pm.sgn.resize(static_cast<std::size_t>(pm.m) * pm.n);
    pm.boundary.resize(pm.sgn.size());
    for (int k = 0; k < pm.m; ++k) {
        for (int i = 0; i < pm.n; ++i) {
            const std::size_t at = static_cast<std::size_t>(k) * pm.n + i;
            pm.sgn[at] = z(k, i) > 0.0 ? 1 : 0;
            pm.boundary[at] = std::abs(z(k, i)) <= boundary_tol ? 1 : 0;
        }
    }
    return pm;
}

PatternMatrix patterns(const NetworkState& state, const TrainingSet& ts, double boundary_tol) {
    if (boundary_tol < 0.0) boundary_tol = default_boundary_tol(state.kappa2);
    return patterns_from_preacts(state.weights * ts.X, boundary_tol);
}

PatternMatrix patterns(const NetworkState& state, const Dataset& ds, double boundary_tol) {
    return patterns(state, training_set(ds), boundary_tol);
}

std::vector<PolarPoint> polar_projection(const NetworkState& state, const Dataset& ds) {
    const Eigen::VectorXd e1 = ds.plane_e1();
    const Eigen::VectorXd e2 = ds.plane_e2();
    const Eigen::VectorXd c1 = state.weights * e1;
    const Eigen::VectorXd c2 = state.weights * e2;
    std::vector<PolarPoint> out(state.m());
    for (int k = 0; k < state.m(); ++k) {
        out[k].radius = std::hypot(c1(k), c2(k));
        out[k].defined = out[k].radius > 1e-15 * (state.weights.row(k).norm() + 1e-300);
        out[k].angle = out[k].defined ? std::atan2(c2(k), c1(k)) : 0.0;
        if (out[k].angle <= -M_PI) out[k].angle = M_PI;
    }
    return out;
}

Record snapshot_record(const NetworkState& state, const Dataset& ds, double boundary_tol) {
    Record r;
    const double fp = predict(state, ds.x_plus);
    const double fm = predict(state, ds.x_minus);
    r.set("time", state.time);
    r.set("iteration", state.iteration);
    r.set("m", state.m());
    r.set("dim", state.dim());
    r.set("kappa1", state.kappa1);
    r.set("kappa2", state.kappa2);
    r.set("f_plus", fp);
    r.set("f_minus", fm);
    r.set("loss", loss_from_predictions(fp, fm, ds.spec));
    r.set("acc", accuracy_from_predictions(fp, fm, ds.spec));
    const PatternMatrix pm = patterns(state, ds, boundary_tol);
    std::vector<int> sp, sm, bp, bm;
    for (int k = 0; k < state.m(); ++k) {
        sp.push_back(pm.sgn_plus(k));
        sm.push_back(pm.sgn_minus(k));
        bp.push_back(pm.on_boundary(k, 0));
        bm.push_back(pm.on_boundary(k, 1));
    }
    r.set("sgn_plus", sp);
    r.set("sgn_minus", sm);
    r.set("boundary_plus", bp);
    r.set("boundary_minus", bm);
    for (int k = 0; k < state.m(); ++k) {
        const Eigen::VectorXd b = state.weights.row(k).transpose();
        r.set("b." + std::to_string(k), std::vector<double>(b.data(), b.data() + b.size()));
    }
    return r;
}

NetworkState state_from_record(const Record& r) {
    const int m = static_cast<int>(r.get_int("m"));
    const int dim = static_cast<int>(r.get_int("dim"));
    Eigen::MatrixXd w(m, dim);
    for (int k = 0; k < m; ++k) {
        const auto row = r.get_doubles("b." + std::to_string(k));
        if (static_cast<int>(row.size()) != dim) throw ParseError("weight row has wrong length");
        for (int j = 0; j < dim; ++j) w(k, j) = row[j];
    }
    NetworkState s = make_state(w, r.get_double("kappa1"), r.get_double("kappa2"));
    s.time = r.get_double("time");
    s.iteration = r.get_int("iteration");
    return s;
}

}  // namespace fourphase
