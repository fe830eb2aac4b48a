// Acceptance suite: one PASS/FAIL line per criterion, nonzero exit if any fails.
#include <algorithm>
#include <cmath>
#include <future>
#include <iostream>
#include <numbers>
#include <random>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "fourphase/config.hpp"
#include "fourphase/harness.hpp"
#include "fourphase/reduced.hpp"

using namespace fourphase;

namespace {

constexpr double kPi = std::numbers::pi;

struct Line {
    int id = 0;
    std::string name;
    bool pass = false;
    std::string detail;
};

std::vector<Line> lines;

void report(int id, const std::string& name, bool pass, const std::string& detail) {
    lines.push_back({id, name, pass, detail});
    std::cout << (pass ? "PASS" : "FAIL") << " [" << id << "] " << name << " : " << detail << std::endl;
}

std::string num(double x, int digits = 6) {
    std::ostringstream os;
    os.precision(digits);
    os << x;
    return os.str();
}

// runs configs concurrently, results in input order
std::vector<RunResult> execute_all(const std::vector<ExperimentConfig>& configs) {
    const unsigned hw = std::max(1u, std::thread::hardware_concurrency());
    std::vector<RunResult> out(configs.size());
    std::vector<std::string> errors(configs.size());
    std::size_t next = 0;
    while (next < configs.size()) {
        std::vector<std::future<void>> batch;
        for (unsigned t = 0; t < hw && next < configs.size(); ++t, ++next) {
            const std::size_t i = next;
            batch.push_back(std::async(std::launch::async, [&, i] {
                try {
                    out[i] = execute(configs[i]);
                } catch (const std::exception& e) {
                    errors[i] = e.what();
                }
            }));
        }
        for (auto& f : batch) f.get();
    }
    for (std::size_t i = 0; i < configs.size(); ++i)
        if (!errors[i].empty()) out[i].notes.push_back("error: " + errors[i]);
    return out;
}

const CheckResult* find_check(const std::vector<CheckResult>& checks, const std::string& name) {
    for (const auto& c : checks)
        if (c.name == name) return &c;
    return nullptr;
}

bool dead_ok(const RunResult& r) {
    if (!r.analyzed) return false;
    try {
        return dead_neurons_frozen(r.traj, r.cls, r.timeline.t_I.time);
    } catch (const std::exception&) {
        return false;
    }
}

// |f+(t) - f+'(t)| at a fixed time, from the snapshots nearest t
double f_plus_gap(const Trajectory& a, const Trajectory& b, double t) {
    return std::abs(a.nearest(t).f_plus - b.nearest(t).f_plus);
}

}  // namespace

int main() {
    std::vector<const RunResult*> dynamics_runs;  // everything subject to the dead-neuron check

    // reference run extended to 4 x T_III plus two finer step sizes
    ExperimentConfig ref = reference_config();
    ExperimentConfig fine = ref;
    fine.flow.t_max = 1300.0;
    fine.flow.eta = 0.005;
    fine.flow.snapshot_stride = 200;
    ExperimentConfig finer = fine;
    finer.flow.eta = 0.0025;
    finer.flow.snapshot_stride = 400;

    RunResult reference = execute(ref);
    if (reference.analyzed && reference.timeline.t_III.present) {
        const double horizon = ref.extend_factor * reference.timeline.t_III.time;
        if (horizon > ref.flow.t_max) {
            ExperimentConfig ext = ref;
            ext.flow.t_max = horizon;
            reference = execute(ext);
        }
    }
    const std::vector<RunResult> step_runs = execute_all({fine, finer});
    const RunResult& half = step_runs[0];
    const RunResult& quarter = step_runs[1];
    dynamics_runs.push_back(&reference);
    dynamics_runs.push_back(&half);
    dynamics_runs.push_back(&quarter);
    const std::vector<CheckResult> checks = verify_checks(reference);
    const PhaseTimeline& tl = reference.timeline;

    // 1
    {
        const AccuracyProfile& p = reference.profile;
        const bool pass = reference.analyzed && tl.t_plat.present && tl.t_III.present && p.violations == 0 &&
                          p.snapshots_checked > 0 && p.plateau_value == 0.8 && p.post_value == 1.0;
        report(1, "plateau exactness", pass,
               "plateau " + num(p.plateau_value) + " then " + num(p.post_value) + ", " +
                   std::to_string(p.violations) + " violations over " + std::to_string(p.snapshots_checked) +
                   " snapshots");
    }

    // 2 and 3: sweeps, with weights kept so the dead-neuron check covers them
    const double d0 = 4.0 * kPi / 45.0;
    SweepSpec dsweep;
    dsweep.base = reference_config();
    dsweep.base.flow.snapshot_stride = 500;
    dsweep.axis = "delta";
    dsweep.seeds = {1};  // one network seed across the axis, so only the swept parameter changes
    dsweep.values = {d0, kPi / 15.0, 0.5625 * d0, 0.421875 * d0};
    dsweep.t_max_values = {1500.0, 2000.0, 3500.0, 6000.0};
    SweepSpec psweep = dsweep;
    psweep.axis = "p";
    psweep.values = {6, 8, 10, 12};
    psweep.t_max_values = {2600.0, 4000.0, 5600.0, 7500.0};
    std::vector<ExperimentConfig> sweep_configs;
    for (std::size_t i = 0; i < 4; ++i) sweep_configs.push_back(sweep_member(dsweep, i));
    for (std::size_t i = 0; i < 4; ++i) sweep_configs.push_back(sweep_member(psweep, i));
    const std::vector<RunResult> sweep_runs = execute_all(sweep_configs);
    for (const auto& r : sweep_runs) dynamics_runs.push_back(&r);

    {
        const double realistic[4] = {1.96e4, 3.68e4, 7.25e4, 12.87e4};
        std::vector<std::pair<double, double>> samples;
        bool all = true;
        std::string detail = "T_plat";
        for (std::size_t i = 0; i < 4; ++i) {
            const RunResult& r = sweep_runs[i];
            if (!r.analyzed || !r.timeline.t_plat.present) {
                all = false;
                detail += " missing";
                continue;
            }
            const double t = static_cast<double>(r.timeline.t_plat.iteration);
            samples.emplace_back(dsweep.values[i], t);
            const double dev = t / realistic[i] - 1.0;
            all = all && std::abs(dev) <= 0.30;
            detail += " " + num(t) + " (" + num(100.0 * dev, 3) + "%)";
        }
        if (samples.size() == 4) {
            const FitResult f = scaling_fit(samples, FitModel::inv_sq_plus_inv);
            double worst = 0.0;
            for (const auto& [x, y] : samples) worst = std::max(worst, std::abs(f.predict(x) / y - 1.0));
            all = all && worst <= 0.05;
            detail += "; fit a/D^2+b/D+c = " + num(f.coefficients[0]) + ", " + num(f.coefficients[1]) + ", " +
                      num(f.coefficients[2]) + ", worst fit error " + num(100.0 * worst, 3) + "%";
        }
        report(2, "delta-axis scaling", all, detail);
    }
    {
        std::vector<std::pair<double, double>> plat, t3;
        std::string detail;
        for (std::size_t i = 0; i < 4; ++i) {
            const RunResult& r = sweep_runs[4 + i];
            if (r.analyzed && r.timeline.t_plat.present)
                plat.emplace_back(psweep.values[i], static_cast<double>(r.timeline.t_plat.iteration));
            if (r.analyzed && r.timeline.t_III.present)
                t3.emplace_back(psweep.values[i], static_cast<double>(r.timeline.t_III.iteration));
        }
        bool pass = plat.size() == 4 && t3.size() == 4;
        if (pass) {
            const FitResult lin = scaling_fit(plat, FitModel::linear);
            const FitResult pw = scaling_fit(t3, FitModel::free_power);
            const double gamma = pw.coefficients[1];
            pass = lin.r2 >= 0.99 && gamma >= 1.3 && gamma <= 1.7;
            detail = "T_plat linear R^2 " + num(lin.r2) + "; T_III exponent " + num(gamma) + " (R^2 " +
                     num(pw.r2) + ")";
            for (const auto& [p, t] : t3) detail += " " + num(p) + ":" + num(t);
        } else {
            detail = "incomplete timelines in the p sweep";
        }
        report(3, "p-axis scaling", pass, detail);
    }

    // 4: Phase I only
    {
        std::vector<ExperimentConfig> cs;
        for (int seed = 1; seed <= 20; ++seed) {
            ExperimentConfig c = reference_config();
            c.m = 2000;
            c.net_seed = static_cast<std::uint64_t>(seed);
            c.flow.t_max = 1.05 * t_I_of(c.kappa1, c.kappa2);
            c.flow.snapshot_stride = 1000000;
            cs.push_back(c);
        }
        const std::vector<RunResult> rs = execute_all(cs);
        int good = 0;
        double lo_p = 1, hi_p = 0, lo_m = 1, hi_m = 0;
        for (const auto& r : rs) {
            if (r.cls.m == 0) continue;
            const double fp = static_cast<double>(r.cls.m_plus) / r.cls.m;
            const double fm = static_cast<double>(r.cls.m_minus) / r.cls.m;
            lo_p = std::min(lo_p, fp), hi_p = std::max(hi_p, fp);
            lo_m = std::min(lo_m, fm), hi_m = std::max(hi_m, fm);
            if (fp >= 0.21 && fp <= 0.29 && fm >= 0.075 && fm <= 0.205) ++good;
        }
        report(4, "neuron-count bounds", good >= 19,
               std::to_string(good) + "/20 runs in range; |K+|/m in [" + num(lo_p) + ", " + num(hi_p) +
                   "], |K-|/m in [" + num(lo_m) + ", " + num(hi_m) + "]");
    }

    // 5
    {
        const CheckResult* c = find_check(checks, "pattern_table");
        report(5, "pattern-evolution table", c && c->pass, c ? c->detail : "no table");
    }

    // 6
    {
        const CheckResult* ij = find_check(checks, "oracle_ij");
        bool pass = reference.analyzed && quarter.analyzed && tl.t_II.present && quarter.timeline.t_II.present;
        std::string detail;
        if (pass) {
            const auto a = compare_with_oracle(reference.traj, reference.ds, reference.cls, ReducedSystem::UV,
                                               tl.t_I.time, tl.t_II.time);
            const auto b = compare_with_oracle(quarter.traj, quarter.ds, quarter.cls, ReducedSystem::UV,
                                               quarter.timeline.t_I.time, quarter.timeline.t_II.time);
            pass = a.max_rel_error <= 1e-2 && b.max_rel_error <= 2.5e-3 && ij && ij->pass;
            detail = "U/V error " + num(a.max_rel_error) + " at eta 0.01, " + num(b.max_rel_error) +
                     " at eta 0.0025; I/J " + (ij ? ij->detail : std::string("missing"));
        } else {
            detail = "reference or fine run lacks T_II";
        }
        report(6, "reduced-system oracle", pass, detail);
    }

    // 7: from the reference run's state at T_I and from random starts in the region
    {
        double worst = 0.0;
        int points = 0;
        std::vector<std::pair<ReducedParams, Vec2>> starts;
        if (reference.analyzed) {
            const ReducedParams prm = reduced_params(reference.ds, reference.cls, ref.kappa2);
            const Snapshot& s = reference.traj.nearest(tl.t_I.time);
            const auto uv = uv_from_predictions(s.f_plus, s.f_minus, prm);
            starts.push_back({prm, {uv.u, uv.v}});
        }
        std::mt19937_64 rng(5);
        std::uniform_real_distribution<double> z(1.05, 3.0), alpha(0.26, 0.97), delta(0.05, 1.0);
        for (int n = 0; n < 8; ++n) {
            ReducedParams prm;
            prm.delta = delta(rng);
            prm.alpha = alpha(rng);
            prm.p = 4.0;
            const double c = std::cos(prm.delta), eps = prm.alpha * std::sin(prm.delta) * std::sin(prm.delta);
            const double v = 0.01;
            starts.push_back({prm, {v * z(rng) * (1.0 + c + eps) / (1.0 + c), v}});
        }
        for (const auto& [prm, y0] : starts) {
            const double c = std::cos(prm.delta), eps = prm.alpha * std::sin(prm.delta) * std::sin(prm.delta);
            const double z_edge = (1.0 + c + eps) / (1.0 + c);
            const ReducedTrajectory tr = rk4_integrate(uv_system(prm), y0, default_dt(y0) / 10.0,
                                                       2000.0 / (y0[0] + y0[1]), {true, 4000});
            const ReducedStateUV r0{y0[0], y0[1]};
            for (const auto& s : tr) {
                if (s.y[0] / s.y[1] < z_edge * (1.0 + 1e-3)) break;
                worst = std::max(worst, std::abs(uv_first_integral({s.y[0], s.y[1]}, prm, r0)));
                ++points;
            }
        }
        report(7, "first-integral conservation", points > 0 && worst <= 1e-8,
               "max |residual| " + num(worst) + " over " + std::to_string(points) + " samples from " +
                   std::to_string(starts.size()) + " starts");
    }

    // 8
    {
        const CheckResult* al = find_check(checks, "directional_alignment");
        const CheckResult* ra = find_check(checks, "ratio_limit");
        report(8, "directional convergence", al && ra && al->pass && ra->pass,
               (al ? al->detail : std::string("no alignment")) + "; ratio " +
                   (ra ? ra->detail : std::string("missing")));
    }

    // 9
    {
        const CheckResult* c = find_check(checks, "phase4_loss_rate");
        report(9, "phase IV loss rate", c && c->pass, c ? c->detail + " (target -1 +/- 0.1)" : "no extended run");
    }

    // 10
    {
        const CheckResult* nd = find_check(checks, "norm_derivative");
        const CheckResult* kk = find_check(checks, "kkt_direction");
        bool pass = nd && kk && nd->pass && kk->pass;
        double smallest = 1e300;
        if (pass) {
            const ConvergentDirection dir = convergent_direction(reference.ds, reference.cls);
            std::mt19937_64 rng(3);
            std::normal_distribution<double> g;
            for (int trial = 0; trial < 10; ++trial) {
                Eigen::MatrixXd noise(dir.theta_bar.rows(), dir.theta_bar.cols());
                for (Eigen::Index i = 0; i < noise.size(); ++i) noise.data()[i] = g(rng);
                const Eigen::MatrixXd th = dir.theta_bar + 0.1 * dir.theta_bar.norm() * noise / noise.norm();
                try {
                    smallest = std::min(smallest,
                                        kkt_residual(make_state(th, ref.kappa1, ref.kappa2), reference.ds).stationarity);
                } catch (const std::exception&) {
                    smallest = 0.0;
                }
            }
            pass = smallest > 1e-3;
        }
        report(10, "max-margin certificate refutation", pass,
               (nd ? nd->detail : std::string("no derivative")) + "; " + (kk ? kk->detail : std::string("no kkt")) +
                   "; smallest perturbed residual " + num(smallest));
    }

    // 11
    {
        int frozen = 0;
        double sliding = 0.0;
        for (const RunResult* r : dynamics_runs) {
            if (dead_ok(*r)) ++frozen;
            sliding = std::max(sliding, r->traj.max_sliding_residual);
        }
        // fixed times inside Phases I to II, every run samples them exactly
        double lo = 1e300, hi = 0.0;
        std::string ratios;
        for (double t : {10.0, 100.0, 500.0, 1000.0}) {
            const double r = f_plus_gap(reference.traj, half.traj, t) / f_plus_gap(half.traj, quarter.traj, t);
            lo = std::min(lo, r);
            hi = std::max(hi, r);
            ratios += " t=" + num(t) + ":" + num(r, 4);
        }
        const bool pass = frozen == static_cast<int>(dynamics_runs.size()) && sliding <= 1e-12 && lo >= 1.7 && hi <= 2.3;
        report(11, "dynamics invariants", pass,
               "dead neurons frozen in " + std::to_string(frozen) + "/" + std::to_string(dynamics_runs.size()) +
                   " runs; max sliding residual " + num(sliding) + "; step-halving contraction of f+ at" + ratios);
    }

    const auto failed = std::count_if(lines.begin(), lines.end(), [](const Line& l) { return !l.pass; });
    std::cout << (lines.size() - failed) << "/" << lines.size() << " criteria passed" << std::endl;
    return failed == 0 ? 0 : 1;
}
