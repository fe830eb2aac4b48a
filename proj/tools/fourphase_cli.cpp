#include <iostream>
#include <optional>
#include <string>

#include "CLI11.hpp"
#include "fourphase/config.hpp"
#include "fourphase/error.hpp"
#include "fourphase/harness.hpp"

using namespace fourphase;

namespace {

struct Common {
    std::string config_path;
    std::string out_dir;
    std::string mode;
};

ExperimentConfig load_experiment(const Common& c) {
    ExperimentConfig cfg = c.config_path.empty() ? reference_config() : load_config(c.config_path);
    if (!c.out_dir.empty()) cfg.out = c.out_dir;
    if (!c.mode.empty()) cfg.flow.mode = mode_from_string(c.mode);
    return cfg;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Four-phase gradient-flow simulator for two-layer ReLU networks on two-point data"};
    app.require_subcommand(1);

    Common common;
    int jobs = 1;
    auto add_common = [&](CLI::App* sub, bool need_config) {
        auto* opt = sub->add_option("--config", common.config_path, "key = value config file");
        if (need_config) opt->required();
        sub->add_option("--out", common.out_dir, "output directory (overrides the config's out)");
        sub->add_option("--mode", common.mode, "integrator mode")->check(CLI::IsMember({"plain_gd", "filippov"}));
    };

    auto* run = app.add_subcommand("run", "simulate one configuration and write its artifacts");
    add_common(run, false);
    auto* sweep = app.add_subcommand("sweep", "run a parameter sweep and fit the scaling laws");
    add_common(sweep, true);
    sweep->add_option("--jobs", jobs, "parallel runs")->check(CLI::PositiveNumber);
    auto* verify = app.add_subcommand("verify", "run the cross-module checks and print PASS/FAIL lines");
    add_common(verify, false);

    double kappa1 = 0.1, kappa2 = 1.0, p = 4.0, alpha = 0.4;
    std::string delta_text = "pi/15";
    auto* theory = app.add_subcommand("theory", "print the closed-form time scalings");
    theory->add_option("--kappa1", kappa1);
    theory->add_option("--kappa2", kappa2);
    theory->add_option("--p", p);
    theory->add_option("--delta", delta_text, "angle, arithmetic with pi allowed");
    theory->add_option("--alpha", alpha, "|K-|/|K+|");

    std::string weights_path;
    auto* polar = app.add_subcommand("export-polar", "re-emit polar projections from a saved weights file");
    polar->add_option("weights", weights_path, "weights.txt written by run")->required();
    polar->add_option("--out", common.out_dir, "output directory")->required();

    CLI11_PARSE(app, argc, argv);

    try {
        if (run->parsed()) return cmd_run(load_experiment(common), std::cout, std::cerr);
        if (verify->parsed()) return cmd_verify(load_experiment(common), std::cout, std::cerr);
        if (sweep->parsed()) {
            SweepSpec spec = load_sweep(common.config_path);
            if (!common.out_dir.empty()) spec.base.out = common.out_dir;
            if (!common.mode.empty()) spec.base.flow.mode = mode_from_string(common.mode);
            return cmd_sweep(spec, jobs, std::cout, std::cerr);
        }
        if (theory->parsed())
            return cmd_theory(kappa1, kappa2, p, parse_expression(delta_text), alpha, std::cout, std::cerr);
        if (polar->parsed()) return cmd_export_polar(weights_path, common.out_dir, std::cout, std::cerr);
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << '\n';
        return ExitConfig;
    }
    return ExitOk;
}
