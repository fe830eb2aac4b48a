#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "fourphase/dataset.hpp"
#include "fourphase/flow.hpp"
#include "fourphase/network.hpp"
#include "fourphase/record.hpp"

namespace fourphase {

struct NeuronClassification {
    std::vector<int> k_plus;
    std::vector<int> k_minus;
    std::vector<int> dead;
    std::vector<int> label;  // +1 in K+, -1 in K-, 0 dead
    int m = 0;
    int m_plus = 0;
    int m_minus = 0;
    double alpha = 0.0;  // m_minus / m_plus
};

struct HittingTime {
    bool present = false;
    double time = 0.0;
    std::int64_t iteration = 0;
};

struct PhaseTimeline {
    HittingTime t_I;
    HittingTime t_plat;
    HittingTime t_II;
    HittingTime t_II_pt;
    HittingTime t_III;
    HittingTime t_III_first;  // first K- reactivation on x+
    int t_II_trigger_count = 0;  // K+ with sgn^- = 0 right after the T_II step
    std::vector<double> accuracy_levels;  // distinct accuracy values from T_I on
};

struct AccuracyProfile {
    double plateau_value = 0.0;
    double post_value = 0.0;
    int snapshots_checked = 0;
    int violations = 0;
    std::vector<std::string> details;
};

struct CondensationReport {
    double min_align_plus = 0.0;   // min over K+ of <w_k, mu>
    double mean_align_plus = 0.0;
    double min_align_minus = 0.0;  // min over K- of <w_k, x+perp>
    double mean_align_minus = 0.0;
    double min_norm_plus = 0.0, max_norm_plus = 0.0;
    double min_norm_minus = 0.0, max_norm_minus = 0.0;
};

enum class IntervalValue { One, Zero, Mixed, Empty };
std::string to_string(IntervalValue v);

struct PatternEvolutionSummary {
    std::array<IntervalValue, 4> kplus_sgn_minus{};
    std::array<IntervalValue, 4> kminus_sgn_plus{};
    double change_fraction_plus = 0.0;   // share of neurons whose sgn^+ differs from T_I
    double change_fraction_minus = 0.0;  // same for sgn^-
    double expected_fraction_plus = 0.0;   // |K-|/m
    double expected_fraction_minus = 0.0;  // |K+|/m
};

double t_I_of(double kappa1, double kappa2);

NeuronClassification classify_at_TI(const Trajectory& traj, const Dataset& ds);
NeuronClassification classify_patterns(const PatternMatrix& pm, const Eigen::VectorXd& signs);

PhaseTimeline detect_timeline(const Trajectory& traj, const Dataset& ds, const NeuronClassification& cls);
AccuracyProfile accuracy_profile(const Trajectory& traj, const PhaseTimeline& timeline, const Dataset& ds);
CondensationReport condensation_report(const NetworkState& state, const Dataset& ds,
                                       const NeuronClassification& cls);
PatternEvolutionSummary pattern_table(const Trajectory& traj, const PhaseTimeline& timeline,
                                      const NeuronClassification& cls);

Record timeline_record(const PhaseTimeline& tl, const NeuronClassification& cls, double eta,
                       const PatternEvolutionSummary* table = nullptr);
Record condensation_record(const CondensationReport& rep);

}  // namespace fourphase
