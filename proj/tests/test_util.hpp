#pragma once

#include <numbers>

#include "fourphase/dataset.hpp"
#include "fourphase/network.hpp"

namespace testutil {

inline constexpr double kPi = std::numbers::pi;

inline fourphase::DatasetSpec ref_spec(double delta = kPi / 15.0, int n_plus = 12, int n_minus = 3) {
    return fourphase::DatasetSpec{delta, n_plus, n_minus, 20, 1};
}

inline fourphase::Dataset ref_dataset() { return fourphase::build(ref_spec()); }

}  // namespace testutil

#include "fourphase/harness.hpp"

namespace testutil {

// reference run shared by the analysis tests; computed once per process
inline const fourphase::RunResult& reference_run() {
    static const fourphase::RunResult run = [] {
        fourphase::ExperimentConfig c = fourphase::reference_config();
        c.flow.t_max = 1300.0;
        return fourphase::execute(c);
    }();
    return run;
}

}  // namespace testutil
