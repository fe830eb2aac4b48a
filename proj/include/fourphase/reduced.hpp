#pragma once

#include <array>
#include <functional>
#include <iosfwd>
#include <vector>

#include "fourphase/dataset.hpp"
#include "fourphase/flow.hpp"
#include "fourphase/network.hpp"
#include "fourphase/phases.hpp"

namespace fourphase {

struct ReducedParams {
    double delta = 0.0;
    double alpha = 0.0;  // m_minus / m_plus
    double p = 1.0;
    double kappa2 = 1.0;
    int m_plus = 1;
    int m_minus = 1;
    int m = 2;

    double cos_delta() const;
    double sin_sq() const;
};

ReducedParams reduced_params(const Dataset& ds, const NeuronClassification& cls, double kappa2);

struct ReducedStateUV {
    double u = 0.0;
    double v = 0.0;
};

struct ReducedStateIJ {
    double i = 0.0;
    double j = 0.0;
};

using Vec2 = std::array<double, 2>;
using Rhs2 = std::function<Vec2(const Vec2&)>;

struct ReducedSample {
    double t = 0.0;
    Vec2 y{};
};
using ReducedTrajectory = std::vector<ReducedSample>;

struct Rk4Options {
    bool step_doubling = false;  // double dt each time y0+y1 decays another 10x
    std::size_t max_samples = 0;  // thin the stored output (0 keeps every step)
};

struct ReducedTimeline {
    bool tau1_present = false;
    double tau1 = 0.0;
    bool plateau_exit_present = false;
    double plateau_exit = 0.0;
};

Vec2 uv_rhs(const ReducedStateUV& s, const ReducedParams& prm);
Vec2 ij_rhs(const ReducedStateIJ& s, const ReducedParams& prm);
Rhs2 uv_system(const ReducedParams& prm);
Rhs2 ij_system(const ReducedParams& prm);

double default_dt(const Vec2& y0);
Vec2 rk4_step(const Rhs2& rhs, const Vec2& y, double dt);
ReducedTrajectory rk4_integrate(const Rhs2& rhs, const Vec2& y0, double dt, double t_end,
                                const Rk4Options& opt = {});

ReducedStateUV uv_from_predictions(double f_plus, double f_minus, const ReducedParams& prm);
ReducedStateIJ ij_from_predictions(double f_plus, double f_minus, const ReducedParams& prm);
ReducedStateUV uv_from_network(const NetworkState& state, const Dataset& ds, const NeuronClassification& cls);
ReducedStateIJ ij_from_network(const NetworkState& state, const Dataset& ds, const NeuronClassification& cls);

double uv_first_integral(const ReducedStateUV& s, const ReducedParams& prm, const ReducedStateUV& ref);

ReducedTimeline reduced_hitting_times(const ReducedTrajectory& traj, const ReducedParams& prm);
double ratio_limit(const ReducedParams& prm);

// max relative deviation between simulator-derived (u,v) or (i,j) and the
// RK4 solution started from the simulator at t_from, over snapshots in [t_from, t_to]
struct OracleComparison {
    double max_rel_error = 0.0;
    int points = 0;
    double t_from = 0.0;
    double t_to = 0.0;
};
enum class ReducedSystem { UV, IJ };
OracleComparison compare_with_oracle(const Trajectory& traj, const Dataset& ds, const NeuronClassification& cls,
                                     ReducedSystem system, double t_from, double t_to);

void write_reduced_csv(std::ostream& os, const ReducedTrajectory& traj, ReducedSystem system);

}  // namespace fourphase
