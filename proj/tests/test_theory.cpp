#include <cmath>
#include <random>
#include <sstream>

#include "doctest.h"
#include "fourphase/error.hpp"
#include "fourphase/theory.hpp"
#include "test_util.hpp"

using namespace fourphase;
using testutil::kPi;

namespace {

// first m_plus neurons in K+, then m_minus negatives in K-, the rest dead
NeuronClassification make_cls(int m, int m_plus, int m_minus) {
    NeuronClassification c;
    c.m = m;
    c.label.assign(m, 0);
    for (int k = 0; k < m_plus; ++k) {
        c.k_plus.push_back(k);
        c.label[k] = 1;
    }
    for (int k = m / 2; k < m / 2 + m_minus; ++k) {
        c.k_minus.push_back(k);
        c.label[k] = -1;
    }
    for (int k = 0; k < m; ++k)
        if (c.label[k] == 0) c.dead.push_back(k);
    c.m_plus = m_plus;
    c.m_minus = m_minus;
    c.alpha = static_cast<double>(m_minus) / m_plus;
    return c;
}

const NeuronClassification kRefCls = make_cls(100, 28, 11);

}  // namespace

TEST_CASE("time scalings") {
    const BoundsReport b = time_scalings(0.1, 1.0, 4.0, kPi / 15.0, 0.4);
    CHECK(b.t_I_exact == doctest::Approx(3.16227766).epsilon(1e-8));
    const BoundsReport c = time_scalings(0.1, 1.0, 4.0, 0.75 * kPi / 15.0, 0.4);
    CHECK(c.t_plat_scaling / b.t_plat_scaling == doctest::Approx(16.0 / 9.0));
    CHECK(b.t_III_factor == doctest::Approx(1.0 + std::pow(kPi / 15.0, 2)));
    CHECK(b.phase4_exponent == doctest::Approx(1.0 / (1.0 - 0.4 * std::cos(kPi / 15.0))));
    CHECK(b.t_II_scaling * b.loss_at_t_II_scaling == doctest::Approx(b.t_plat_scaling / 4.0));
    CHECK(b.phase4_loss_scaling(0.0, 4.0) == doctest::Approx(b.loss_at_t_II_scaling));
    CHECK(b.t_II_pt_factor > 1.0);
    for (double v : {b.t_I_exact, b.t_plat_scaling, b.t_II_scaling, b.loss_at_t_II_scaling}) CHECK(v > 0.0);
    std::ostringstream os;
    bounds_record(b).write(os);
    CHECK(os.str().find("t_plat_scaling = ") != std::string::npos);
}

TEST_CASE("convergent direction geometry") {
    const Dataset ds = testutil::ref_dataset();
    const ConvergentDirection d = convergent_direction(ds, kRefCls);
    CHECK(std::abs(d.v_plus.dot(ds.x_minus)) < 1e-14);
    CHECK(d.v_plus.dot(ds.x_plus) > 0.0);
    CHECK(d.v_minus.dot(ds.x_plus) > 0.0);
    CHECK(d.v_minus.dot(ds.x_minus) > 0.0);
    CHECK(d.theta_bar.norm() == doctest::Approx(1.0).epsilon(1e-14));
    for (int k : kRefCls.dead) CHECK(d.theta_bar.row(k).norm() == 0.0);
    const Eigen::VectorXd e1 = ds.plane_e1(), e2 = ds.plane_e2();
    for (const Eigen::VectorXd& v : {d.v_plus, d.v_minus})
        CHECK((v - v.dot(e1) * e1 - v.dot(e2) * e2).norm() < 1e-12);
}

// The sign relation between the two margins of the convergent direction:
// f+ is positive and f- is its negative.
TEST_CASE("convergent direction classifies both points with equal margins") {
    const Dataset ds = testutil::ref_dataset();
    const ConvergentDirection d = convergent_direction(ds, kRefCls);
    const NetworkState s = make_state(d.theta_bar, 0.1, 1.0);
    const double fp = predict(s, ds.x_plus), fm = predict(s, ds.x_minus);
    CHECK(fp > 0.0);
    CHECK(fm == doctest::Approx(-fp).epsilon(1e-12));
}

TEST_CASE("convergent direction needs both classes") {
    CHECK_THROWS_AS(convergent_direction(testutil::ref_dataset(), make_cls(10, 3, 0)), EmptyClass);
}

TEST_CASE("KKT residual of the convergent direction vanishes") {
    const Dataset ds = testutil::ref_dataset();
    const ConvergentDirection d = convergent_direction(ds, kRefCls);
    const KktResult k = kkt_residual(make_state(d.theta_bar, 0.1, 1.0), ds);
    CHECK(k.stationarity <= 1e-9);
    CHECK(std::abs(k.feasibility) <= 1e-12);
    CHECK(k.complementarity <= 1e-10);
    CHECK(k.lambda_plus > 0.0);
    CHECK(k.lambda_minus > 0.0);
    CHECK(k.lambda_plus / k.lambda_minus == doctest::Approx(lagrange_ratio(ds, kRefCls)).epsilon(1e-9));

    const KktResult big = kkt_residual(make_state(37.0 * d.theta_bar, 0.1, 1.0), ds);
    CHECK(big.stationarity <= 1e-9);
    CHECK(big.lambda_plus == doctest::Approx(k.lambda_plus).epsilon(1e-9));
    CHECK(big.rescale * 37.0 == doctest::Approx(k.rescale).epsilon(1e-12));
}

TEST_CASE("KKT residual rejects non-positive margins and detects perturbations") {
    const Dataset ds = testutil::ref_dataset();
    CHECK_THROWS_AS(kkt_residual(make_state(Eigen::MatrixXd::Zero(100, 20), 0.1, 1.0), ds), Infeasible);

    const ConvergentDirection d = convergent_direction(ds, kRefCls);
    std::mt19937_64 rng(11);
    std::normal_distribution<double> g;
    for (int trial = 0; trial < 5; ++trial) {
        Eigen::MatrixXd noise(100, 20);
        for (Eigen::Index i = 0; i < noise.size(); ++i) noise.data()[i] = g(rng);
        const Eigen::MatrixXd th = d.theta_bar + 0.1 * noise / noise.norm();
        const KktResult k = kkt_residual(make_state(th, 0.1, 1.0), ds);
        CHECK(k.stationarity > 1e-3);
    }
}

TEST_CASE("certificate has unit margins and a negative norm derivative") {
    const Dataset ds = testutil::ref_dataset();
    const MarginCertificate cert = margin_certificate(ds, kRefCls, 1.0);
    const PerturbedPoint p0 = perturbation_family(cert, ds, kRefCls, 0.0);
    CHECK(p0.theta == cert.scaled_direction);
    CHECK(p0.f_plus == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(p0.f_minus == doctest::Approx(-1.0).epsilon(1e-12));
    CHECK(cert.kkt_feasibility_slack >= -1e-9);
    CHECK(cert.kkt_stationarity_residual <= 1e-9);

    const double s2 = std::pow(std::sin(kPi / 15.0), 2);
    CHECK(cert.norm_derivative_at_zero / (2.0 * 28 * cert.Q * cert.Q) ==
          doctest::Approx(-(1.0 + kRefCls.alpha) * s2).epsilon(1e-12));
    const NormDerivativeCheck nd = norm_derivative_check(cert, ds, kRefCls);
    CHECK(nd.analytic < 0.0);
    CHECK(nd.rel_error <= 1e-6);
    CHECK(cert.lambda_plus / cert.lambda_minus == doctest::Approx(lagrange_ratio(ds, kRefCls)).epsilon(1e-9));
    std::ostringstream os;
    certificate_record(cert).write(os);
    CHECK(os.str().find("Q = ") != std::string::npos);
}

// Along the family only the x- margin stays at -1; the x+ margin drops linearly,
// so the family leaves the feasible set for every epsilon > 0.
TEST_CASE("perturbation family margins") {
    const Dataset ds = testutil::ref_dataset();
    const MarginCertificate cert = margin_certificate(ds, kRefCls, 1.0);
    const double a = 1.0 / std::sqrt(100.0);
    const double s2 = std::pow(std::sin(kPi / 15.0), 2);
    for (double eps : {1e-4, 1e-2, 0.1, 0.5}) {
        const PerturbedPoint pt = perturbation_family(cert, ds, kRefCls, eps);
        CHECK(pt.f_minus == doctest::Approx(-1.0).epsilon(1e-12));
        CHECK(pt.f_plus == doctest::Approx(1.0 - a * cert.Q * eps * s2 * (28 + 11)).epsilon(1e-12));
        CHECK(pt.f_plus < 1.0);
    }
}

TEST_CASE("norm derivative is negative over the admissible grid") {
    for (double alpha : {0.26, 0.4, 0.6, 0.8, 0.97}) {
        for (double delta : {0.01, 0.1, 0.5, 1.0, 1.5}) {
            const int m_minus = static_cast<int>(std::lround(alpha * 100));
            const NeuronClassification cls = make_cls(400, 100, m_minus);
            const Dataset ds = build_unchecked(DatasetSpec{delta, 12, 3, 6, 2});
            const MarginCertificate cert = margin_certificate(ds, cls, 1.0);
            CHECK(cert.norm_derivative_at_zero < 0.0);
            CHECK(norm_derivative_check(cert, ds, cls).rel_error <= 1e-6);
        }
    }
    // the derivative vanishes with the angle; reported, not a failure mode
    const Dataset tiny = build_unchecked(DatasetSpec{1e-4, 12, 3, 6, 2});
    const MarginCertificate cert = margin_certificate(tiny, kRefCls, 1.0);
    MESSAGE("normalized derivative at delta = 1e-4: " << cert.norm_derivative_at_zero / (cert.Q * cert.Q));
    CHECK(std::abs(cert.norm_derivative_at_zero / (cert.Q * cert.Q)) < 1e-6);
}

TEST_CASE("fit of the published plateau times in delta") {
    const double d0 = 4.0 * kPi / 45.0;
    const std::vector<double> deltas{d0, 0.75 * d0, 0.5625 * d0, 0.421875 * d0};
    const std::vector<double> measured{1.96e4, 3.68e4, 7.25e4, 12.87e4};
    const std::vector<double> published{1.90e4, 3.82e4, 7.14e4, 12.89e4};
    std::vector<std::pair<double, double>> samples;
    for (std::size_t i = 0; i < 4; ++i) samples.emplace_back(deltas[i], measured[i]);
    const FitResult f = scaling_fit(samples, FitModel::inv_sq_plus_inv);
    REQUIRE(f.coefficients.size() == 3);
    for (std::size_t i = 0; i < 4; ++i) CHECK(std::abs(f.predict(deltas[i]) / published[i] - 1.0) <= 0.05);
    CHECK(f.r2 > 0.99);
}

TEST_CASE("fit of the published T_III values in p with exponent 1.5") {
    const std::vector<double> ps{6, 8, 10, 12};
    const std::vector<double> measured{8.92e4, 13.40e4, 19.72e4, 27.68e4};
    const std::vector<double> published{8.59e4, 14.05e4, 20.27e4, 27.14e4};
    std::vector<std::pair<double, double>> samples;
    for (std::size_t i = 0; i < 4; ++i) samples.emplace_back(ps[i], measured[i]);
    const FitResult f = scaling_fit(samples, FitModel::power_1_5);
    for (std::size_t i = 0; i < 4; ++i) CHECK(std::abs(f.predict(ps[i]) / published[i] - 1.0) <= 0.05);
}

TEST_CASE("fits handle constant data, too few samples and a known exponent") {
    const std::vector<std::pair<double, double>> flat{{0.1, 5.0}, {0.2, 5.0}, {0.3, 5.0}, {0.4, 5.0}};
    const FitResult f = scaling_fit(flat, FitModel::inv_sq_plus_inv);
    CHECK(std::abs(f.coefficients[0]) < 1e-9);
    CHECK(std::abs(f.coefficients[1]) < 1e-9);
    CHECK(f.coefficients[2] == doctest::Approx(5.0));
    CHECK(f.r2 == 1.0);

    CHECK_THROWS_AS(scaling_fit({{1.0, 2.0}, {2.0, 3.0}}, FitModel::free_power), Underdetermined);
    CHECK_THROWS_AS(scaling_fit({{1.0, 2.0}}, FitModel::linear), Underdetermined);

    std::vector<std::pair<double, double>> pw;
    for (double p : {4.0, 6.0, 8.0, 10.0, 12.0}) pw.emplace_back(p, 300.0 * std::pow(p, 1.37) - 50.0);
    const FitResult g = scaling_fit(pw, FitModel::free_power);
    CHECK(g.coefficients[1] == doctest::Approx(1.37).epsilon(1e-4));
    CHECK(g.coefficients[0] == doctest::Approx(300.0).epsilon(1e-3));
    CHECK(g.r2 > 0.999999);

    std::ostringstream os;
    write_fit_row(os, "t_III", g);
    CHECK(os.str().rfind("t_III,free_power,", 0) == 0);
    CHECK(fit_model_from_string("power_1_5") == FitModel::power_1_5);
    CHECK_THROWS_AS(fit_model_from_string("cubic"), ConfigError);
}
