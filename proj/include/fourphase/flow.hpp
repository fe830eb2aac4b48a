#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "fourphase/dataset.hpp"
#include "fourphase/network.hpp"

namespace fourphase {

enum class Mode { plain_gd, filippov };

std::string to_string(Mode mode);
Mode mode_from_string(const std::string& s);

struct FlowConfig {
    double eta = 0.01;
    double t_max = 0.0;
    int snapshot_stride = 100;
    double sliding_tol = -1.0;  // negative selects default_sliding_tol
    Mode mode = Mode::filippov;
    std::vector<double> mark_times;  // extra snapshot times (nearest step)
    bool store_weights = true;
};

// One step's worth of normal motion for a neuron: eta * kappa2 / sqrt(m).
double default_sliding_tol(double eta, const NetworkState& state);
double resolved_sliding_tol(const FlowConfig& config, const NetworkState& state);
// band under which a pre-activation counts as zero for pattern events
double event_tolerance(const FlowConfig& config, const NetworkState& state);

struct PerNeuronField {
    Eigen::MatrixXd F;        // m x dim, row k is F_k (includes s_k kappa2/sqrt(m))
    Eigen::VectorXd F_plus;   // class field sum_i y_i (n_i/n) e^{-y_i f_i} x_i
    Eigen::VectorXd f;        // predictions on each training point
    Eigen::VectorXd coef;     // y_i (n_i/n) e^{-y_i f_i}
    std::vector<std::uint8_t> boundary;  // neuron within tol of some surface
};

enum class SlidingKind { SlideOnSurface, CrossSurface, SlideReverse, CrossReverse, NotOnSurface };
std::string to_string(SlidingKind kind);

struct SlidingCase {
    SlidingKind kind = SlidingKind::NotOnSurface;
    int surface = -1;  // index of the data point whose zero set is the surface
    double f_N_minus = 0.0;
    double f_N_plus = 0.0;
    double alpha = 0.0;  // weight of F^+ in the sliding combination
    Eigen::VectorXd sliding_field;
};

struct Decomposition {
    double radial = 0.0;
    Eigen::VectorXd tangential;
};

struct Snapshot {
    double time = 0.0;
    std::int64_t iteration = 0;
    double f_plus = 0.0;
    double f_minus = 0.0;
    double loss = 0.0;
    double accuracy = 0.0;
    std::vector<double> f;  // predictions on every training point
    PatternMatrix patterns;  // boundary band = trajectory event tolerance
    Eigen::MatrixXd weights; // empty unless store_weights
};

struct PatternEvent {
    double time = 0.0;
    std::int64_t iteration = 0;  // first step at which the new value is observed
    int neuron = 0;
    int data_point = 0;
    int old_value = 0;
    int new_value = 0;
};

struct AccuracyEvent {
    double time = 0.0;
    std::int64_t iteration = 0;
    double old_value = 0.0;
    double new_value = 0.0;
};

struct Trajectory {
    std::vector<Snapshot> snapshots;
    std::vector<PatternEvent> events;
    std::vector<AccuracyEvent> accuracy_events;
    std::vector<std::string> point_names;
    Eigen::VectorXd signs;
    double kappa1 = 0.0;
    double kappa2 = 0.0;
    double eta = 0.0;
    double event_tol = 0.0;
    Mode mode = Mode::filippov;
    std::int64_t steps = 0;
    // largest |<b_k, x>| on the attached surface right after any projection
    double max_sliding_residual = 0.0;
    std::int64_t sliding_steps = 0;

    // snapshot whose iteration is closest to t / eta
    const Snapshot& nearest(double t) const;
    int m() const { return static_cast<int>(signs.size()); }
};

struct StepStats {
    double max_sliding_residual = 0.0;
    int sliding = 0;
    int frozen = 0;
};

PerNeuronField vector_field(const NetworkState& state, const Dataset& ds, double tol = 0.0);
PerNeuronField vector_field(const NetworkState& state, const TrainingSet& ts, double tol = 0.0);

SlidingCase sliding_analysis(int k, const NetworkState& state, const Dataset& ds, double tol);
SlidingCase sliding_analysis(int k, const NetworkState& state, const TrainingSet& ts, double tol);

NetworkState step(const NetworkState& state, const Dataset& ds, const FlowConfig& config,
                  StepStats* stats = nullptr);
NetworkState step(const NetworkState& state, const TrainingSet& ts, const FlowConfig& config,
                  StepStats* stats = nullptr);

Decomposition decompose(const Eigen::VectorXd& b, const Eigen::VectorXd& F);

Trajectory simulate(const Dataset& ds, const NetworkState& state0, const FlowConfig& config);
Trajectory simulate(const TrainingSet& ts, const NetworkState& state0, const FlowConfig& config);

// snapshot rebuilt as a network state (needs stored weights)
NetworkState snapshot_state(const Trajectory& traj, const Snapshot& snap);

void write_trajectory_csv(std::ostream& os, const Trajectory& traj, const Dataset& ds);
void write_event_log(std::ostream& os, const Trajectory& traj);
// full weight snapshots, re-loadable for polar export
void write_weight_snapshots(std::ostream& os, const Trajectory& traj, const Dataset& ds);
std::vector<NetworkState> read_weight_snapshots(std::istream& is);

}  // namespace fourphase
