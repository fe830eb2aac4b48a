#pragma once

#include <iosfwd>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "fourphase/dataset.hpp"
#include "fourphase/network.hpp"
#include "fourphase/phases.hpp"
#include "fourphase/record.hpp"

namespace fourphase {

struct BoundsReport {
    double t_I_exact = 0.0;
    double t_plat_scaling = 0.0;
    double t_II_scaling = 0.0;
    double t_II_pt_factor = 0.0;  // 1 + sqrt(kappa1 kappa2^3)
    double t_III_factor = 0.0;    // 1 + delta^2
    double loss_at_t_II_scaling = 0.0;
    double phase4_exponent = 0.0;  // 1/(1 - alpha cos(delta))
    double kappa2 = 0.0;
    double delta = 0.0;

    // 1/(p^{1/(1-alpha cos)} + kappa2^2 delta^2 (t - T_III))
    double phase4_loss_scaling(double t_minus_t_III, double p) const;
};

struct ConvergentDirection {
    Eigen::VectorXd v_plus;
    Eigen::VectorXd v_minus;
    Eigen::MatrixXd theta_bar;  // m x dim, unit Frobenius norm
    double C = 0.0;
};

struct KktResult {
    double stationarity = 0.0;  // relative: ||theta - sum lambda grad|| / ||theta||
    double feasibility = 0.0;   // min margin - 1 after rescaling
    double complementarity = 0.0;
    double lambda_plus = 0.0;
    double lambda_minus = 0.0;
    double rescale = 1.0;  // factor bringing the minimum margin to 1
    bool closed_form = true;  // unconstrained least squares was admissible
};

struct MarginCertificate {
    Eigen::MatrixXd scaled_direction;  // theta-hat, unit margins
    Eigen::VectorXd signs;
    double kappa2 = 1.0;
    double Q = 0.0;
    double kkt_stationarity_residual = 0.0;
    double kkt_feasibility_slack = 0.0;
    double norm_derivative_at_zero = 0.0;
    double lambda_plus = 0.0;
    double lambda_minus = 0.0;
};

struct PerturbedPoint {
    Eigen::MatrixXd theta;
    double norm_sq = 0.0;
    double f_plus = 0.0;
    double f_minus = 0.0;
};

struct NormDerivativeCheck {
    double analytic = 0.0;
    double finite_difference = 0.0;
    double rel_error = 0.0;
};

enum class FitModel { inv_sq_plus_inv, linear, power_1_5, free_power };
std::string to_string(FitModel model);
FitModel fit_model_from_string(const std::string& s);

struct FitResult {
    FitModel model = FitModel::linear;
    std::vector<double> coefficients;  // a, b[, c]; free_power: a, gamma, b
    double r2 = 0.0;

    double predict(double x) const;
};

BoundsReport time_scalings(double kappa1, double kappa2, double p, double delta, double alpha);

ConvergentDirection convergent_direction(const Dataset& ds, const NeuronClassification& cls);

KktResult kkt_residual(const NetworkState& theta, const Dataset& ds);

double certificate_Q(const Dataset& ds, const NeuronClassification& cls, double kappa2);
MarginCertificate margin_certificate(const Dataset& ds, const NeuronClassification& cls, double kappa2);
PerturbedPoint perturbation_family(const MarginCertificate& cert, const Dataset& ds, const NeuronClassification& cls,
                                   double epsilon);
double analytic_norm_derivative(const Dataset& ds, const NeuronClassification& cls, double Q);
NormDerivativeCheck norm_derivative_check(const MarginCertificate& cert, const Dataset& ds,
                                          const NeuronClassification& cls);

// Lagrange ratio implied by the convergent pattern
double lagrange_ratio(const Dataset& ds, const NeuronClassification& cls);

FitResult scaling_fit(const std::vector<std::pair<double, double>>& samples, FitModel model);

Record bounds_record(const BoundsReport& b);
Record certificate_record(const MarginCertificate& c);
void write_fit_row(std::ostream& os, const std::string& label, const FitResult& fit);

}  // namespace fourphase
