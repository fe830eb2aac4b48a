#include "fourphase/theory.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <ostream>

#include "fourphase/error.hpp"

namespace fourphase {

namespace {

void require_classes(const NeuronClassification& cls) {
    if (cls.m_plus == 0 || cls.m_minus == 0) throw EmptyClass("need nonempty K+ and K-");
}

// v- up to the constant C: (1 + sin^2/(alpha(1+cos))) x- - x+
Eigen::VectorXd minus_block(const Dataset& ds, double alpha) {
    const double c = ds.cos_delta();
    const double s2 = 1.0 - c * c;
    return (1.0 + s2 / (alpha * (1.0 + c))) * ds.x_minus - ds.x_plus;
}

Eigen::VectorXd plus_block(const Dataset& ds) { return ds.x_plus - ds.cos_delta() * ds.x_minus; }

Eigen::MatrixXd stack_blocks(const NeuronClassification& cls, int dim, const Eigen::VectorXd& vp,
                             const Eigen::VectorXd& vm) {
    Eigen::MatrixXd th = Eigen::MatrixXd::Zero(cls.m, dim);
    for (int k : cls.k_plus) th.row(k) = vp.transpose();
    for (int k : cls.k_minus) th.row(k) = vm.transpose();
    return th;
}

double sum_sq(const Eigen::VectorXd& v) { return v.squaredNorm(); }

double golden_min(const std::function<double(double)>& f, double lo, double hi, int iters) {
    const double g = (std::sqrt(5.0) - 1.0) / 2.0;
    double a = lo, b = hi;
    double c = b - g * (b - a), d = a + g * (b - a);
    double fc = f(c), fd = f(d);
    for (int n = 0; n < iters; ++n) {
        if (fc < fd) {
            b = d;
            d = c;
            fd = fc;
            c = b - g * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + g * (b - a);
            fd = f(d);
        }
    }
    return fc < fd ? c : d;
}

}  // namespace

double BoundsReport::phase4_loss_scaling(double t_minus_t_III, double p) const {
    return 1.0 / (std::pow(p, phase4_exponent) + kappa2 * kappa2 * delta * delta * t_minus_t_III);
}

BoundsReport time_scalings(double kappa1, double kappa2, double p, double delta, double alpha) {
    const double c = std::cos(delta);
    if (!(kappa1 > 0.0 && kappa1 < kappa2 && kappa2 <= 1.0)) throw BadScales("need 0 < kappa1 < kappa2 <= 1");
    if (!(p * c > 1.0)) throw AssumptionViolation("p*cos(delta) must exceed 1");
    if (!(alpha > 0.0 && alpha * c < 1.0)) throw AssumptionViolation("need 0 < alpha*cos(delta) < 1");
    BoundsReport b;
    b.kappa2 = kappa2;
    b.delta = delta;
    b.phase4_exponent = 1.0 / (1.0 - alpha * c);
    const double k2d2 = kappa2 * kappa2 * delta * delta;
    b.t_I_exact = 10.0 * std::sqrt(kappa1 / kappa2);
    b.t_plat_scaling = p / k2d2;
    b.t_II_scaling = std::pow(p, b.phase4_exponent) / k2d2;
    b.t_II_pt_factor = 1.0 + std::sqrt(kappa1 * kappa2 * kappa2 * kappa2);
    b.t_III_factor = 1.0 + delta * delta;
    b.loss_at_t_II_scaling = std::pow(p, -b.phase4_exponent);
    return b;
}

ConvergentDirection convergent_direction(const Dataset& ds, const NeuronClassification& cls) {
    require_classes(cls);
    const Eigen::VectorXd a = plus_block(ds);
    const Eigen::VectorXd g = minus_block(ds, cls.alpha);
    ConvergentDirection out;
    out.C = 1.0 / std::sqrt(cls.m_plus * sum_sq(a) + cls.m_minus * sum_sq(g));
    out.v_plus = out.C * a;
    out.v_minus = out.C * g;
    out.theta_bar = stack_blocks(cls, ds.dim(), out.v_plus, out.v_minus);
    return out;
}

KktResult kkt_residual(const NetworkState& theta, const Dataset& ds) {
    const double fp = predict(theta, ds.x_plus);
    const double fm = predict(theta, ds.x_minus);
    const double q = std::min(fp, -fm);
    if (!(q > 0.0)) throw Infeasible("some margin is non-positive; cannot scale to unit margin");

    KktResult out;
    out.rescale = 1.0 / q;
    const Eigen::MatrixXd W = out.rescale * theta.weights;
    const double qp = out.rescale * fp, qm = -out.rescale * fm;
    const int m = theta.m(), d = theta.dim();
    const double a = theta.scale();
    const Eigen::MatrixXd Z = W * training_set(ds).X;

    // subgradient selection: 1 active, 0 inactive, free on the boundary
    enum : int { Off = 0, On = 1, Free = 2 };
    std::vector<int> h(static_cast<std::size_t>(m) * 2);
    struct FreeCol {
        int k, i;
    };
    std::vector<FreeCol> free_cols;
    for (int k = 0; k < m; ++k) {
        const double tol = 1e-9 * W.row(k).norm();
        for (int i = 0; i < 2; ++i) {
            const double z = Z(k, i);
            int v = z > tol ? On : (z < -tol ? Off : Free);
            h[k * 2 + i] = v;
            if (v == Free) free_cols.push_back({k, i});
        }
    }
    const Eigen::VectorXd gp = ds.x_plus;   // d f+ direction
    const Eigen::VectorXd gm = -ds.x_minus; // d(-f-) direction

    const int ncol = 2 + static_cast<int>(free_cols.size());
    Eigen::MatrixXd A = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(m) * d, ncol);
    Eigen::VectorXd rhs(static_cast<Eigen::Index>(m) * d);
    for (int k = 0; k < m; ++k) {
        const double sa = theta.signs(k) * a;
        rhs.segment(static_cast<Eigen::Index>(k) * d, d) = W.row(k).transpose();
        if (h[k * 2] == On) A.col(0).segment(static_cast<Eigen::Index>(k) * d, d) = sa * gp;
        if (h[k * 2 + 1] == On) A.col(1).segment(static_cast<Eigen::Index>(k) * d, d) = sa * gm;
    }
    for (std::size_t c = 0; c < free_cols.size(); ++c) {
        const auto [k, i] = free_cols[c];
        A.col(2 + static_cast<Eigen::Index>(c)).segment(static_cast<Eigen::Index>(k) * d, d) =
            theta.signs(k) * a * (i == 0 ? gp : gm);
    }

    const double theta_norm = rhs.norm();
    Eigen::CompleteOrthogonalDecomposition<Eigen::MatrixXd> cod(A);
    const Eigen::VectorXd x = cod.solve(rhs);
    const double lam_scale = std::max({std::abs(x(0)), std::abs(x(1)), 1e-300});
    bool admissible = x(0) >= -1e-12 * lam_scale && x(1) >= -1e-12 * lam_scale;
    for (std::size_t c = 0; c < free_cols.size() && admissible; ++c) {
        const double mu = x(2 + static_cast<Eigen::Index>(c));
        const double lam = x(free_cols[c].i);
        admissible = mu >= -1e-9 * lam_scale && mu <= lam + 1e-9 * lam_scale;
    }

    if (admissible) {
        out.lambda_plus = std::max(0.0, x(0));
        out.lambda_minus = std::max(0.0, x(1));
        out.stationarity = (A * x - rhs).norm() / theta_norm;
    } else {
        // convex in (lambda+, lambda-) after minimizing the box-constrained
        // boundary multipliers block by block; nested golden section
        out.closed_form = false;
        auto residual = [&](double lp, double lm) {
            double total = 0.0;
            Eigen::VectorXd r(d);
            for (int k = 0; k < m; ++k) {
                const double sa = theta.signs(k) * a;
                r = W.row(k).transpose();
                if (h[k * 2] == On) r -= sa * lp * gp;
                if (h[k * 2 + 1] == On) r -= sa * lm * gm;
                const bool f0 = h[k * 2] == Free, f1 = h[k * 2 + 1] == Free;
                if (f0 || f1) {
                    const Eigen::VectorXd c0 = sa * gp, c1 = sa * gm;
                    double mu0 = 0.0, mu1 = 0.0;
                    for (int it = 0; it < 100; ++it) {
                        if (f0) {
                            const Eigen::VectorXd rr = r - mu1 * c1;
                            mu0 = std::clamp(rr.dot(c0) / c0.squaredNorm(), 0.0, lp);
                        }
                        if (f1) {
                            const Eigen::VectorXd rr = r - mu0 * c0;
                            mu1 = std::clamp(rr.dot(c1) / c1.squaredNorm(), 0.0, lm);
                        }
                        if (!(f0 && f1)) break;
                    }
                    r -= mu0 * c0 + mu1 * c1;
                }
                total += r.squaredNorm();
            }
            return total;
        };
        const double hi = 10.0 * (1.0 + std::abs(x(0)) + std::abs(x(1)));
        auto inner = [&](double lp, double* best_lm) {
            const double lm = golden_min([&](double v) { return residual(lp, v); }, 0.0, hi, 90);
            if (best_lm) *best_lm = lm;
            return residual(lp, lm);
        };
        const double lp = golden_min([&](double v) { return inner(v, nullptr); }, 0.0, hi, 90);
        double lm = 0.0;
        const double r2 = inner(lp, &lm);
        out.lambda_plus = lp;
        out.lambda_minus = lm;
        out.stationarity = std::sqrt(r2) / theta_norm;
    }
    out.feasibility = std::min(qp, qm) - 1.0;
    out.complementarity = std::abs(out.lambda_plus * (qp - 1.0)) + std::abs(out.lambda_minus * (qm - 1.0));
    return out;
}

double certificate_Q(const Dataset& ds, const NeuronClassification& cls, double kappa2) {
    require_classes(cls);
    const double c = ds.cos_delta();
    const double s2 = 1.0 - c * c;
    const double a = kappa2 / std::sqrt(static_cast<double>(cls.m));
    return 1.0 / (a * (cls.m_minus * (1.0 - c) + cls.m_plus * s2 / (1.0 + c)));
}

double analytic_norm_derivative(const Dataset& ds, const NeuronClassification& cls, double Q) {
    const double c = ds.cos_delta();
    const double s2 = 1.0 - c * c;
    return -2.0 * cls.m_plus * Q * Q * (1.0 + cls.alpha) * s2;
}

MarginCertificate margin_certificate(const Dataset& ds, const NeuronClassification& cls, double kappa2) {
    MarginCertificate cert;
    cert.Q = certificate_Q(ds, cls, kappa2);
    cert.kappa2 = kappa2;
    cert.scaled_direction = stack_blocks(cls, ds.dim(), cert.Q * plus_block(ds), cert.Q * minus_block(ds, cls.alpha));
    const NetworkState th = make_state(cert.scaled_direction, 0.5 * kappa2, kappa2);
    cert.signs = th.signs;
    const KktResult kkt = kkt_residual(th, ds);
    cert.kkt_stationarity_residual = kkt.stationarity;
    cert.kkt_feasibility_slack = kkt.feasibility;
    cert.lambda_plus = kkt.lambda_plus;
    cert.lambda_minus = kkt.lambda_minus;
    cert.norm_derivative_at_zero = analytic_norm_derivative(ds, cls, cert.Q);
    return cert;
}

PerturbedPoint perturbation_family(const MarginCertificate& cert, const Dataset& ds, const NeuronClassification& cls,
                                   double epsilon) {
    const Eigen::VectorXd u = plus_block(ds);
    PerturbedPoint out;
    out.theta = cert.scaled_direction;
    for (int k : cls.k_plus) out.theta.row(k) -= (cert.Q * epsilon) * u.transpose();
    for (int k : cls.k_minus) out.theta.row(k) += (cert.Q * epsilon) * u.transpose();
    out.norm_sq = out.theta.squaredNorm();
    const NetworkState th = make_state(out.theta, 0.5 * cert.kappa2, cert.kappa2);
    out.f_plus = predict(th, ds.x_plus);
    out.f_minus = predict(th, ds.x_minus);
    return out;
}

NormDerivativeCheck norm_derivative_check(const MarginCertificate& cert, const Dataset& ds,
                                          const NeuronClassification& cls) {
    const double h = 1e-6;
    NormDerivativeCheck out;
    out.analytic = cert.norm_derivative_at_zero;
    out.finite_difference = (perturbation_family(cert, ds, cls, h).norm_sq -
                             perturbation_family(cert, ds, cls, -h).norm_sq) / (2.0 * h);
    out.rel_error = std::abs(out.finite_difference - out.analytic) / std::abs(out.analytic);
    return out;
}

double lagrange_ratio(const Dataset& ds, const NeuronClassification& cls) {
    require_classes(cls);
    const double c = ds.cos_delta();
    return (1.0 + c) / (1.0 + c + static_cast<double>(cls.m_plus) / cls.m_minus * (1.0 - c * c));
}

std::string to_string(FitModel model) {
    switch (model) {
        case FitModel::inv_sq_plus_inv: return "inv_sq_plus_inv";
        case FitModel::linear: return "linear";
        case FitModel::power_1_5: return "power_1_5";
        case FitModel::free_power: return "free_power";
    }
    return "?";
}

FitModel fit_model_from_string(const std::string& s) {
    if (s == "inv_sq_plus_inv") return FitModel::inv_sq_plus_inv;
    if (s == "linear") return FitModel::linear;
    if (s == "power_1_5") return FitModel::power_1_5;
    if (s == "free_power") return FitModel::free_power;
    throw ConfigError("unknown fit model '" + s + "'");
}

double FitResult::predict(double x) const {
    const auto& c = coefficients;
    switch (model) {
        case FitModel::inv_sq_plus_inv: return c[0] / (x * x) + c[1] / x + c[2];
        case FitModel::linear: return c[0] * x + c[1];
        case FitModel::power_1_5: return c[0] * std::pow(x, 1.5) + c[1];
        case FitModel::free_power: return c[0] * std::pow(x, c[1]) + c[2];
    }
    return 0.0;
}

namespace {

struct LinearFit {
    Eigen::VectorXd coef;
    double sse = 0.0;
};

LinearFit least_squares(const Eigen::MatrixXd& A, const Eigen::VectorXd& y) {
    LinearFit f;
    f.coef = A.colPivHouseholderQr().solve(y);
    f.sse = (A * f.coef - y).squaredNorm();
    return f;
}

Eigen::MatrixXd power_design(const Eigen::VectorXd& x, double gamma) {
    Eigen::MatrixXd A(x.size(), 2);
    for (Eigen::Index n = 0; n < x.size(); ++n) {
        A(n, 0) = std::pow(x(n), gamma);
        A(n, 1) = 1.0;
    }
    return A;
}

}  // namespace

FitResult scaling_fit(const std::vector<std::pair<double, double>>& samples, FitModel model) {
    const std::size_t params = (model == FitModel::linear || model == FitModel::power_1_5) ? 2 : 3;
    if (samples.size() < params)
        throw Underdetermined(std::to_string(samples.size()) + " samples for " + std::to_string(params) + " parameters");
    const auto n = static_cast<Eigen::Index>(samples.size());
    Eigen::VectorXd x(n), y(n);
    for (Eigen::Index i = 0; i < n; ++i) {
        x(i) = samples[i].first;
        y(i) = samples[i].second;
    }

    FitResult out;
    out.model = model;
    LinearFit lf;
    switch (model) {
        case FitModel::inv_sq_plus_inv: {
            Eigen::MatrixXd A(n, 3);
            for (Eigen::Index i = 0; i < n; ++i) {
                A(i, 0) = 1.0 / (x(i) * x(i));
                A(i, 1) = 1.0 / x(i);
                A(i, 2) = 1.0;
            }
            lf = least_squares(A, y);
            out.coefficients = {lf.coef(0), lf.coef(1), lf.coef(2)};
            break;
        }
        case FitModel::linear:
            lf = least_squares(power_design(x, 1.0), y);
            out.coefficients = {lf.coef(0), lf.coef(1)};
            break;
        case FitModel::power_1_5:
            lf = least_squares(power_design(x, 1.5), y);
            out.coefficients = {lf.coef(0), lf.coef(1)};
            break;
        case FitModel::free_power: {
            auto sse = [&](double g) { return least_squares(power_design(x, g), y).sse; };
            double best = 0.05, best_sse = std::numeric_limits<double>::infinity();
            for (double g = 0.05; g <= 6.0 + 1e-12; g += 0.01) {
                const double s = sse(g);
                if (s < best_sse) {
                    best_sse = s;
                    best = g;
                }
            }
            const double gamma = golden_min(sse, std::max(0.01, best - 0.01), best + 0.01, 80);
            lf = least_squares(power_design(x, gamma), y);
            out.coefficients = {lf.coef(0), gamma, lf.coef(1)};
            break;
        }
    }
    const double mean = y.mean();
    const double sst = (y.array() - mean).square().sum();
    const double scale = std::max(1.0, mean * mean) * static_cast<double>(n);
    if (sst <= 1e-28 * scale)
        out.r2 = lf.sse <= 1e-20 * scale ? 1.0 : 0.0;
    else
        out.r2 = 1.0 - lf.sse / sst;
    return out;
}

Record bounds_record(const BoundsReport& b) {
    Record r;
    r.set("t_I_exact", b.t_I_exact);
    r.set("t_plat_scaling", b.t_plat_scaling);
    r.set("t_II_scaling", b.t_II_scaling);
    r.set("t_II_pt_factor", b.t_II_pt_factor);
    r.set("t_III_factor", b.t_III_factor);
    r.set("loss_at_t_II_scaling", b.loss_at_t_II_scaling);
    r.set("phase4_exponent", b.phase4_exponent);
    return r;
}

Record certificate_record(const MarginCertificate& c) {
    Record r;
    r.set("Q", c.Q);
    r.set("kkt_stationarity_residual", c.kkt_stationarity_residual);
    r.set("kkt_feasibility_slack", c.kkt_feasibility_slack);
    r.set("norm_derivative_at_zero", c.norm_derivative_at_zero);
    r.set("lambda_plus", c.lambda_plus);
    r.set("lambda_minus", c.lambda_minus);
    return r;
}

void write_fit_row(std::ostream& os, const std::string& label, const FitResult& fit) {
    os << label << ',' << to_string(fit.model);
    for (double c : fit.coefficients) os << ',' << format_double(c);
    os << ",r2=" << format_double(fit.r2) << '\n';
}

}  // namespace fourphase
