#pragma once

#include <cstdint>
#include <vector>

#include <Eigen/Dense>

#include "fourphase/dataset.hpp"
#include "fourphase/record.hpp"

namespace fourphase {

struct NetworkState {
    Eigen::MatrixXd weights;  // m x dim, row k is b_k
    Eigen::VectorXd signs;    // +1 for k < m/2, -1 otherwise
    double kappa1 = 0.0;
    double kappa2 = 0.0;
    double time = 0.0;
    std::int64_t iteration = 0;

    int m() const { return static_cast<int>(weights.rows()); }
    int dim() const { return static_cast<int>(weights.cols()); }
    // second-layer magnitude kappa2/sqrt(m)
    double scale() const;
};

struct NeuronView {
    double rho = 0.0;
    Eigen::VectorXd w;
    bool defined = false;
};

struct PatternMatrix {
    int m = 0;
    int n = 0;  // data points; column 0 is x+ and column 1 is x- for the clean dataset
    std::vector<std::uint8_t> sgn;
    std::vector<std::uint8_t> boundary;

    int sign(int k, int i) const { return sgn[static_cast<std::size_t>(k) * n + i]; }
    bool on_boundary(int k, int i) const { return boundary[static_cast<std::size_t>(k) * n + i] != 0; }
    // strictly positive and outside the boundary band
    bool active(int k, int i) const { return sign(k, i) == 1 && !on_boundary(k, i); }
    int sgn_plus(int k) const { return sign(k, 0); }
    int sgn_minus(int k) const { return sign(k, 1); }
};

struct PolarPoint {
    double angle = 0.0;
    double radius = 0.0;
    bool defined = false;
};

double default_boundary_tol(double kappa2);

NetworkState init(int m, int dim, double kappa1, double kappa2, std::uint64_t seed);
// wraps an explicit weight matrix with the standard sign split
NetworkState make_state(const Eigen::MatrixXd& weights, double kappa1, double kappa2);

double predict(const NetworkState& state, const Eigen::VectorXd& x);
Eigen::VectorXd predict_all(const NetworkState& state, const TrainingSet& ts);

double loss_from_predictions(double f_plus, double f_minus, const DatasetSpec& spec);
double accuracy_from_predictions(double f_plus, double f_minus, const DatasetSpec& spec);

double empirical_loss(const NetworkState& state, const Dataset& ds);
double empirical_loss(const NetworkState& state, const TrainingSet& ts);
double train_accuracy(const NetworkState& state, const Dataset& ds);
double train_accuracy(const NetworkState& state, const TrainingSet& ts);

NeuronView neuron_view(const NetworkState& state, int k);

PatternMatrix patterns(const NetworkState& state, const Dataset& ds, double boundary_tol = -1.0);
PatternMatrix patterns(const NetworkState& state, const TrainingSet& ts, double boundary_tol = -1.0);
// pattern matrix from precomputed pre-activations (m x n)
PatternMatrix patterns_from_preacts(const Eigen::MatrixXd& z, double boundary_tol);

std::vector<PolarPoint> polar_projection(const NetworkState& state, const Dataset& ds);

Record snapshot_record(const NetworkState& state, const Dataset& ds, double boundary_tol = -1.0);
NetworkState state_from_record(const Record& r);

}  // namespace fourphase
