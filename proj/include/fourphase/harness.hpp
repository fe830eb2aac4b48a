#pragma once

#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "fourphase/config.hpp"
#include "fourphase/dataset.hpp"
#include "fourphase/flow.hpp"
#include "fourphase/phases.hpp"
#include "fourphase/theory.hpp"

namespace fourphase {

enum ExitCode : int { ExitOk = 0, ExitCheckFailed = 1, ExitConfig = 2, ExitNumeric = 3 };

struct RunResult {
    ExperimentConfig config;
    Dataset ds;
    TrainingSet ts;
    Trajectory traj;
    bool analyzed = false;
    NeuronClassification cls;
    PhaseTimeline timeline;
    AccuracyProfile profile;
    std::optional<PatternEvolutionSummary> table;
    std::optional<CondensationReport> condensation;  // at T_I
    std::vector<double> accuracy_levels;              // distinct accuracy values in time order
    std::vector<std::string> notes;
};

// simulate and analyze; throws on invalid config or numeric failure
RunResult execute(const ExperimentConfig& config);
void write_bundle(const RunResult& run, const std::filesystem::path& dir);

struct SweepRow {
    double value = 0.0;
    std::uint64_t seed = 0;
    bool ok = false;
    std::string error;
    int m_plus = 0;
    int m_minus = 0;
    double alpha = 0.0;
    HittingTime t_plat, t_II, t_II_pt, t_III;
};

struct SweepFit {
    std::string quantity;  // t_plat or t_III
    FitResult fit;
};

struct SweepResult {
    SweepSpec spec;
    std::vector<SweepRow> rows;  // axis order
    std::vector<SweepFit> fits;
    std::vector<std::string> skipped_fits;
};

SweepResult run_sweep(const SweepSpec& spec, int jobs);
void write_sweep_table(std::ostream& os, const SweepResult& result);

struct CheckResult {
    std::string name;
    bool pass = false;
    std::string detail;
};

struct AlignmentReport {
    double min_cos_plus = 0.0;
    double min_cos_minus = 0.0;
    double ratio_measured = 0.0;   // p e^{-(f+ + f-)}
    double ratio_predicted = 0.0;  // limit from the I/J system
};

AlignmentReport alignment_report(const NetworkState& state, const Dataset& ds, const NeuronClassification& cls);

// log-log slope of loss against t - T_III over the last decade of the run
double phase4_slope(const Trajectory& traj, double t_III);

// true iff every neuron dead at T_I keeps bit-identical weights in all later snapshots
bool dead_neurons_frozen(const Trajectory& traj, const NeuronClassification& cls, double t_I);

std::vector<CheckResult> verify_checks(const RunResult& run);
void write_checks(std::ostream& os, const std::vector<CheckResult>& checks);

// timeline events compared iteration by iteration
CheckResult compare_timelines(const PhaseTimeline& a, const PhaseTimeline& b, std::int64_t max_steps);

int cmd_run(const ExperimentConfig& config, std::ostream& out, std::ostream& err);
int cmd_sweep(const SweepSpec& spec, int jobs, std::ostream& out, std::ostream& err);
int cmd_verify(const ExperimentConfig& config, std::ostream& out, std::ostream& err);
int cmd_theory(double kappa1, double kappa2, double p, double delta, double alpha, std::ostream& out,
               std::ostream& err);
int cmd_export_polar(const std::string& weights_path, const std::filesystem::path& out_dir, std::ostream& out,
                     std::ostream& err);

}  // namespace fourphase
