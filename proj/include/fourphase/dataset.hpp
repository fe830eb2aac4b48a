#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "fourphase/record.hpp"

namespace fourphase {

struct DatasetSpec {
    double delta = 0.0;
    int n_plus = 1;
    int n_minus = 1;
    int dim = 2;
    std::uint64_t seed = 0;

    double p() const { return static_cast<double>(n_plus) / n_minus; }
    int n() const { return n_plus + n_minus; }
};

struct Dataset {
    Eigen::VectorXd x_plus;
    Eigen::VectorXd x_minus;
    DatasetSpec spec;

    double cos_delta() const { return x_plus.dot(x_minus); }
    double sin_delta() const;
    double p() const { return spec.p(); }
    int dim() const { return static_cast<int>(x_plus.size()); }
    // orthonormal basis of the data plane: e1 = x-, e2 points toward x+
    Eigen::VectorXd plane_e1() const { return x_minus; }
    Eigen::VectorXd plane_e2() const;
};

struct KeyDirections {
    Eigen::VectorXd mu;
    Eigen::VectorXd x_plus_perp;
    Eigen::VectorXd x_minus_perp;
    Eigen::VectorXd z;
};

struct NoisySample {
    Eigen::VectorXd point;
    int label = 1;
    double angle = 0.0;  // in-plane angle measured from x-
};

// Samples with per-sample loss weights (count/n). The noiseless dataset has
// two entries named "plus" and "minus"; the noisy one has n entries.
struct TrainingSet {
    Eigen::MatrixXd X;       // dim x n_samples, columns are points
    Eigen::VectorXd labels;  // +1 / -1
    Eigen::VectorXd weights; // count/n, sums to 1
    std::vector<int> counts; // multiplicity of each point
    std::vector<std::string> names;
    int index_plus = 0;      // the exact copy of x+
    int index_minus = 1;     // the exact copy of x-

    int size() const { return static_cast<int>(X.cols()); }
};

Dataset build(const DatasetSpec& spec);
// same geometry without the p*cos(delta) > 1 check, for edge-case probing
Dataset build_unchecked(const DatasetSpec& spec);

KeyDirections key_directions(const Dataset& ds);
double margin(const Dataset& ds);
std::vector<NoisySample> noisy_variant(const Dataset& ds, std::uint64_t seed);

TrainingSet training_set(const Dataset& ds);
TrainingSet training_set(const std::vector<NoisySample>& samples);

Record to_record(const Dataset& ds);
Dataset dataset_from_record(const Record& r);

}  // namespace fourphase
