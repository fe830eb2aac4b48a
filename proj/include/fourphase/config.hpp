#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "fourphase/dataset.hpp"
#include "fourphase/flow.hpp"
#include "fourphase/record.hpp"

namespace fourphase {

struct ExperimentConfig {
    DatasetSpec data{};  // data.seed is the data seed
    int m = 100;
    double kappa1 = 0.1;
    double kappa2 = 1.0;
    std::uint64_t net_seed = 1;
    FlowConfig flow{};
    bool noisy = false;
    std::uint64_t noise_seed = 1;
    bool analyze = true;
    bool paired_mode_check = false;  // verify: rerun in the other mode and compare timelines
    double extend_factor = 0.0;      // verify: continue to this multiple of T_III (0 = no continuation)
    std::string out = "out";
};

struct SweepSpec {
    ExperimentConfig base;
    std::string axis;  // delta, p or kappa1
    std::vector<double> values;
    std::vector<std::uint64_t> seeds;  // per-run net seeds; empty = base seed + index
    std::vector<double> t_max_values;  // per-run horizons; empty = base t_max
};

// m = 100, d = 20, kappa = (0.1, 1), eta = 0.01, p = 4, delta = pi/15
ExperimentConfig reference_config();

// arithmetic over numbers and "pi": + - * / ^ and parentheses
double parse_expression(const std::string& text);

ExperimentConfig config_from_record(const Record& r);
Record config_record(const ExperimentConfig& c);
ExperimentConfig load_config(const std::string& path);
void validate(const ExperimentConfig& c);

SweepSpec sweep_from_record(const Record& r);
SweepSpec load_sweep(const std::string& path);
void validate(const SweepSpec& s);
// base config with the sweep axis set to values[i] and seeds/horizon applied
ExperimentConfig sweep_member(const SweepSpec& s, std::size_t i);

}  // namespace fourphase
