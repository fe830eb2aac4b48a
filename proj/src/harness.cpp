#include "fourphase/harness.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <fstream>
#include <mutex>
#include <ostream>
#include <sstream>
#include <thread>

#include "fourphase/error.hpp"
#include "fourphase/reduced.hpp"

namespace fourphase {

namespace {

std::string fmt(double x) { return format_double(x); }

void write_file(const std::filesystem::path& path, const std::string& text) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw ConfigError("cannot write '" + path.string() + "'");
    os << text;
}

bool is_config_error(const Error& e) {
    return dynamic_cast<const ConfigError*>(&e) || dynamic_cast<const BadScales*>(&e) ||
           dynamic_cast<const OddWidth*>(&e) || dynamic_cast<const AssumptionViolation*>(&e) ||
           dynamic_cast<const BadDimension*>(&e);
}

// maps library exceptions onto exit codes
template <class F>
int guarded(std::ostream& err, F&& body) {
    try {
        return body();
    } catch (const NonFinite& e) {
        err << "error: numeric failure at t = " << fmt(e.time) << ": " << e.what() << '\n';
        return ExitNumeric;
    } catch (const Error& e) {
        err << "error: " << e.what() << '\n';
        return is_config_error(e) ? ExitConfig : ExitCheckFailed;
    } catch (const std::filesystem::filesystem_error& e) {
        err << "error: " << e.what() << '\n';
        return ExitConfig;
    }
}

std::vector<double> accuracy_sequence(const Trajectory& traj) {
    std::vector<double> out;
    if (traj.snapshots.empty()) return out;
    out.push_back(traj.snapshots.front().accuracy);
    for (const auto& ev : traj.accuracy_events) out.push_back(ev.new_value);
    return out;
}

bool timeline_complete(const PhaseTimeline& tl) {
    return tl.t_I.present && tl.t_plat.present && tl.t_II.present && tl.t_II_pt.present && tl.t_III.present;
}


}  // namespace

RunResult execute(const ExperimentConfig& config) {
    validate(config);
    RunResult run;
    run.config = config;
    run.ds = build(config.data);
    run.ts = config.noisy ? training_set(noisy_variant(run.ds, config.noise_seed)) : training_set(run.ds);

    const NetworkState s0 = init(config.m, config.data.dim, config.kappa1, config.kappa2, config.net_seed);
    FlowConfig fc = config.flow;
    const double tI = t_I_of(config.kappa1, config.kappa2);
    fc.mark_times.push_back(tI);
    run.traj = simulate(run.ts, s0, fc);
    run.accuracy_levels = accuracy_sequence(run.traj);

    if (!config.analyze) return run;
    if (config.noisy) {
        run.notes.push_back("noisy data: phase analysis limited to the accuracy sequence");
        return run;
    }
    try {
        run.cls = classify_at_TI(run.traj, run.ds);
    } catch (const HorizonTooShort& e) {
        run.notes.push_back(std::string("no classification: ") + e.what());
        return run;
    }
    run.timeline = detect_timeline(run.traj, run.ds, run.cls);
    run.profile = accuracy_profile(run.traj, run.timeline, run.ds);
    try {
        run.table = pattern_table(run.traj, run.timeline, run.cls);
    } catch (const IncompleteTimeline& e) {
        run.notes.push_back(std::string("no pattern table: ") + e.what());
    }
    const Snapshot& at_TI = run.traj.nearest(tI);
    if (at_TI.weights.size() > 0)
        run.condensation = condensation_report(snapshot_state(run.traj, at_TI), run.ds, run.cls);
    run.analyzed = true;
    return run;
}

void write_bundle(const RunResult& run, const std::filesystem::path& dir) {
    std::filesystem::create_directories(dir);
    {
        std::ostringstream os;
        config_record(run.config).write(os);
        write_file(dir / "config.txt", os.str());
    }
    {
        std::ostringstream os;
        if (run.config.noisy) {
            os << "t,loss,acc\n";
            for (const auto& s : run.traj.snapshots)
                os << fmt(s.time) << ',' << fmt(s.loss) << ',' << fmt(s.accuracy) << '\n';
        } else {
            write_trajectory_csv(os, run.traj, run.ds);
        }
        write_file(dir / "trajectory.csv", os.str());
    }
    {
        std::ostringstream os;
        write_event_log(os, run.traj);
        write_file(dir / "events.log", os.str());
    }
    {
        std::ostringstream os;
        os << "t,iteration,old,new\n";
        for (const auto& ev : run.traj.accuracy_events)
            os << fmt(ev.time) << ',' << ev.iteration << ',' << fmt(ev.old_value) << ',' << fmt(ev.new_value) << '\n';
        write_file(dir / "accuracy_events.csv", os.str());
    }
    if (run.config.flow.store_weights && !run.config.noisy) {
        std::ostringstream os;
        write_weight_snapshots(os, run.traj, run.ds);
        write_file(dir / "weights.txt", os.str());
    }
    Record summary;
    summary.set("steps", run.traj.steps);
    summary.set("snapshots", static_cast<std::int64_t>(run.traj.snapshots.size()));
    summary.set("pattern_events", static_cast<std::int64_t>(run.traj.events.size()));
    summary.set("max_sliding_residual", run.traj.max_sliding_residual);
    summary.set("sliding_steps", run.traj.sliding_steps);
    summary.set("accuracy_levels", run.accuracy_levels);
    for (std::size_t i = 0; i < run.notes.size(); ++i) summary.set("note." + std::to_string(i), run.notes[i]);
    {
        std::ostringstream os;
        summary.write(os);
        write_file(dir / "summary.txt", os.str());
    }
    if (run.analyzed) {
        std::ostringstream os;
        Record tl = timeline_record(run.timeline, run.cls, run.config.flow.eta,
                                    run.table ? &*run.table : nullptr);
        tl.set("profile.plateau_value", run.profile.plateau_value);
        tl.set("profile.post_value", run.profile.post_value);
        tl.set("profile.snapshots_checked", run.profile.snapshots_checked);
        tl.set("profile.violations", run.profile.violations);
        tl.write(os);
        write_file(dir / "timeline.txt", os.str());
    }
    if (run.condensation) {
        std::ostringstream os;
        condensation_record(*run.condensation).write(os);
        write_file(dir / "condensation.txt", os.str());
    }
}

SweepResult run_sweep(const SweepSpec& spec, int jobs) {
    validate(spec);
    SweepResult res;
    res.spec = spec;
    const std::size_t n = spec.values.size();
    res.rows.resize(n);

    std::atomic<std::size_t> next{0};
    auto worker = [&] {
        for (std::size_t i = next++; i < n; i = next++) {
            SweepRow& row = res.rows[i];
            ExperimentConfig c = sweep_member(spec, i);
            c.flow.store_weights = false;
            row.value = spec.values[i];
            row.seed = c.net_seed;
            try {
                const RunResult r = execute(c);
                if (!r.analyzed) throw IncompleteTimeline("run could not be classified");
                row.m_plus = r.cls.m_plus;
                row.m_minus = r.cls.m_minus;
                row.alpha = r.cls.alpha;
                row.t_plat = r.timeline.t_plat;
                row.t_II = r.timeline.t_II;
                row.t_II_pt = r.timeline.t_II_pt;
                row.t_III = r.timeline.t_III;
                row.ok = row.t_plat.present && row.t_III.present;
                if (!row.ok) row.error = "timeline incomplete within t_max";
            } catch (const std::exception& e) {
                row.error = e.what();
            }
        }
    };
    const int nthreads = std::max(1, std::min<int>(jobs, static_cast<int>(n)));
    std::vector<std::thread> pool;
    for (int t = 0; t < nthreads; ++t) pool.emplace_back(worker);
    for (auto& t : pool) t.join();

    std::vector<std::pair<std::string, FitModel>> plan;
    if (spec.axis == "delta") {
        plan = {{"t_plat", FitModel::inv_sq_plus_inv}, {"t_III", FitModel::inv_sq_plus_inv}};
    } else if (spec.axis == "p") {
        plan = {{"t_plat", FitModel::linear}, {"t_III", FitModel::power_1_5}, {"t_III", FitModel::free_power},
                {"t_II", FitModel::free_power}};
    } else {
        plan = {{"t_plat", FitModel::linear}, {"t_III", FitModel::linear}};
    }
    for (const auto& [quantity, model] : plan) {
        std::vector<std::pair<double, double>> samples;
        for (const auto& row : res.rows) {
            const HittingTime& h = quantity == "t_plat" ? row.t_plat : quantity == "t_II" ? row.t_II : row.t_III;
            if (row.ok && h.present) samples.emplace_back(row.value, static_cast<double>(h.iteration));
        }
        const std::string label = quantity + "/" + to_string(model);
        if (samples.size() < 3) {
            res.skipped_fits.push_back(label + ": fewer than 3 successful runs");
            continue;
        }
        try {
            res.fits.push_back({quantity, scaling_fit(samples, model)});
        } catch (const Underdetermined& e) {
            res.skipped_fits.push_back(label + ": " + e.what());
        }
    }
    return res;
}

void write_sweep_table(std::ostream& os, const SweepResult& res) {
    os << "axis,value,seed,status,m_plus,m_minus,alpha,t_plat_iter,t_II_iter,t_II_pt_iter,t_III_iter,t_plat,t_III\n";
    auto it = [](const HittingTime& h) { return h.present ? std::to_string(h.iteration) : std::string(); };
    auto tm = [](const HittingTime& h) { return h.present ? fmt(h.time) : std::string(); };
    for (const auto& r : res.rows) {
        std::string status = r.ok ? "ok" : "failed: " + r.error;
        std::replace(status.begin(), status.end(), ',', ';');
        os << res.spec.axis << ',' << fmt(r.value) << ',' << r.seed << ',' << status << ',' << r.m_plus << ','
           << r.m_minus << ',' << fmt(r.alpha) << ',' << it(r.t_plat) << ',' << it(r.t_II) << ','
           << it(r.t_II_pt) << ',' << it(r.t_III) << ',' << tm(r.t_plat) << ',' << tm(r.t_III) << '\n';
    }
    os << "\nquantity,model,coefficients...,r2\n";
    for (const auto& f : res.fits) write_fit_row(os, f.quantity, f.fit);
    for (const auto& s : res.skipped_fits) os << "skipped," << s << '\n';
}

AlignmentReport alignment_report(const NetworkState& state, const Dataset& ds, const NeuronClassification& cls) {
    const ConvergentDirection dir = convergent_direction(ds, cls);
    AlignmentReport rep;
    rep.min_cos_plus = 1.0;
    rep.min_cos_minus = 1.0;
    auto cosine = [&](int k, const Eigen::VectorXd& v) {
        const Eigen::VectorXd w = state.weights.row(k).transpose();
        return w.dot(v) / (w.norm() * v.norm());
    };
    for (int k : cls.k_plus) rep.min_cos_plus = std::min(rep.min_cos_plus, cosine(k, dir.v_plus));
    for (int k : cls.k_minus) rep.min_cos_minus = std::min(rep.min_cos_minus, cosine(k, dir.v_minus));
    const double fp = predict(state, ds.x_plus);
    const double fm = predict(state, ds.x_minus);
    rep.ratio_measured = ds.p() * std::exp(-(fp + fm));
    rep.ratio_predicted = ratio_limit(reduced_params(ds, cls, state.kappa2));
    return rep;
}

double phase4_slope(const Trajectory& traj, double t_III) {
    if (traj.snapshots.empty()) return std::nan("");
    const double D = traj.snapshots.back().time - t_III;
    if (!(D > 0.0)) return std::nan("");
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    int n = 0;
    for (const auto& s : traj.snapshots) {
        const double dt = s.time - t_III;
        if (dt < D / 10.0 || dt > D) continue;
        const double x = std::log(dt), y = std::log(s.loss);
        sx += x;
        sy += y;
        sxx += x * x;
        sxy += x * y;
        ++n;
    }
    if (n < 2) return std::nan("");
    return (n * sxy - sx * sy) / (n * sxx - sx * sx);
}

bool dead_neurons_frozen(const Trajectory& traj, const NeuronClassification& cls, double t_I) {
    const Snapshot& ref = traj.nearest(t_I);
    if (ref.weights.size() == 0) throw HorizonTooShort("dead-neuron check needs stored weights");
    for (const auto& s : traj.snapshots) {
        if (s.iteration < ref.iteration || s.weights.size() == 0) continue;
        for (int k : cls.dead)
            if (s.weights.row(k) != ref.weights.row(k)) return false;
    }
    for (const auto& ev : traj.events)
        for (int k : cls.dead)
            if (ev.neuron == k && ev.iteration > ref.iteration) return false;
    return true;
}

CheckResult compare_timelines(const PhaseTimeline& a, const PhaseTimeline& b, std::int64_t max_steps) {
    CheckResult c{"paired_mode_timeline", true, ""};
    const std::pair<const char*, std::pair<const HittingTime*, const HittingTime*>> items[] = {
        {"t_plat", {&a.t_plat, &b.t_plat}},
        {"t_II", {&a.t_II, &b.t_II}},
        {"t_II_pt", {&a.t_II_pt, &b.t_II_pt}},
        {"t_III", {&a.t_III, &b.t_III}},
    };
    std::ostringstream d;
    for (const auto& [name, pr] : items) {
        const HittingTime& x = *pr.first;
        const HittingTime& y = *pr.second;
        if (x.present != y.present) {
            c.pass = false;
            d << name << " present in one run only; ";
            continue;
        }
        if (!x.present) continue;
        const std::int64_t gap = std::abs(x.iteration - y.iteration);
        d << name << " " << x.iteration << " vs " << y.iteration << "; ";
        if (gap > max_steps) c.pass = false;
    }
    c.detail = d.str();
    return c;
}

std::vector<CheckResult> verify_checks(const RunResult& run) {
    std::vector<CheckResult> out;
    if (!run.analyzed) {
        std::string why = "run not analyzed";
        for (const auto& n : run.notes) why += "; " + n;
        out.push_back({"analysis", false, why});
        return out;
    }
    const PhaseTimeline& tl = run.timeline;
    const bool complete = timeline_complete(tl);
    out.push_back({"timeline_complete", complete,
                   complete ? "all four transitions detected" : "some transition missing within t_max"});

    out.push_back({"accuracy_plateaus", complete && run.profile.violations == 0,
                   "plateau " + fmt(run.profile.plateau_value) + ", post " + fmt(run.profile.post_value) +
                       ", violations " + std::to_string(run.profile.violations) + " over " +
                       std::to_string(run.profile.snapshots_checked) + " snapshots"});

    {
        CheckResult c{"pattern_table", false, "no table"};
        if (run.table) {
            const auto& t = *run.table;
            using V = IntervalValue;
            const bool plus = t.kplus_sgn_minus == std::array<V, 4>{V::One, V::Mixed, V::Zero, V::Zero};
            const bool minus = t.kminus_sgn_plus == std::array<V, 4>{V::Zero, V::Zero, V::Zero, V::One};
            const bool one_trigger = tl.t_II_trigger_count == 1;
            const bool together = tl.t_III_first.present && tl.t_III.present &&
                                  tl.t_III.time - tl.t_III_first.time <= 2.0 * run.config.flow.eta + 1e-12;
            c.pass = plus && minus && one_trigger && together;
            std::ostringstream d;
            d << "K+ sgn-: ";
            for (auto v : t.kplus_sgn_minus) d << to_string(v) << ' ';
            d << "| K- sgn+: ";
            for (auto v : t.kminus_sgn_plus) d << to_string(v) << ' ';
            d << "| trigger " << tl.t_II_trigger_count;
            if (tl.t_III_first.present && tl.t_III.present)
                d << " | K- spread " << fmt(tl.t_III.time - tl.t_III_first.time);
            c.detail = d.str();
        }
        out.push_back(c);
    }

    if (complete) {
        const auto uv = compare_with_oracle(run.traj, run.ds, run.cls, ReducedSystem::UV, tl.t_I.time, tl.t_II.time);
        out.push_back({"oracle_uv", uv.max_rel_error <= 1e-2,
                       "max rel error " + fmt(uv.max_rel_error) + " over " + std::to_string(uv.points) + " points"});
        const double t_end = run.traj.snapshots.back().time;
        if (t_end > tl.t_III.time) {
            const auto ij = compare_with_oracle(run.traj, run.ds, run.cls, ReducedSystem::IJ, tl.t_III.time, t_end);
            out.push_back({"oracle_ij", ij.max_rel_error <= 1e-2,
                           "max rel error " + fmt(ij.max_rel_error) + " over " + std::to_string(ij.points) +
                               " points"});
        } else {
            out.push_back({"oracle_ij", false, "run ends at T_III"});
        }
    }

    const Snapshot& last = run.traj.snapshots.back();
    if (complete && last.weights.size() > 0) {
        const auto al = alignment_report(snapshot_state(run.traj, last), run.ds, run.cls);
        const double reached = last.time / tl.t_III.time;
        out.push_back({"directional_alignment", al.min_cos_plus >= 0.99 && al.min_cos_minus >= 0.99,
                       "min cos K+ " + fmt(al.min_cos_plus) + ", K- " + fmt(al.min_cos_minus) + " at " + fmt(reached) +
                           " x T_III"});
        out.push_back({"ratio_limit", std::abs(al.ratio_measured - al.ratio_predicted) <= 1e-2,
                       "measured " + fmt(al.ratio_measured) + ", limit " + fmt(al.ratio_predicted)});
        const double slope = phase4_slope(run.traj, tl.t_III.time);
        out.push_back({"phase4_loss_rate", std::abs(slope + 1.0) <= 0.1, "log-log slope " + fmt(slope)});
    }

    try {
        const MarginCertificate cert = margin_certificate(run.ds, run.cls, run.config.kappa2);
        const NormDerivativeCheck nd = norm_derivative_check(cert, run.ds, run.cls);
        out.push_back({"norm_derivative", nd.analytic < 0.0 && nd.rel_error <= 1e-6,
                       "analytic " + fmt(nd.analytic) + ", finite difference " + fmt(nd.finite_difference)});
        const ConvergentDirection dir = convergent_direction(run.ds, run.cls);
        const KktResult k = kkt_residual(make_state(dir.theta_bar, run.config.kappa1, run.config.kappa2), run.ds);
        out.push_back({"kkt_direction", k.stationarity <= 1e-9, "stationarity " + fmt(k.stationarity)});
    } catch (const Error& e) {
        out.push_back({"theory_certificate", false, e.what()});
    }

    try {
        out.push_back({"dead_stays_dead", dead_neurons_frozen(run.traj, run.cls, tl.t_I.time),
                       std::to_string(run.cls.dead.size()) + " dead neurons"});
    } catch (const Error& e) {
        out.push_back({"dead_stays_dead", false, e.what()});
    }
    out.push_back({"sliding_on_surface", run.traj.max_sliding_residual <= 1e-12,
                   "max residual " + fmt(run.traj.max_sliding_residual)});
    return out;
}

void write_checks(std::ostream& os, const std::vector<CheckResult>& checks) {
    for (const auto& c : checks) os << (c.pass ? "PASS " : "FAIL ") << c.name << " : " << c.detail << '\n';
}

int cmd_run(const ExperimentConfig& config, std::ostream& out, std::ostream& err) {
    return guarded(err, [&] {
        const RunResult run = execute(config);
        write_bundle(run, config.out);
        out << "wrote " << config.out << " (" << run.traj.snapshots.size() << " snapshots, " << run.traj.steps
            << " steps)\n";
        if (run.analyzed) {
            const auto show = [&](const char* name, const HittingTime& h) {
                out << "  " << name << " = ";
                if (h.present) out << fmt(h.time) << " (iteration " << h.iteration << ")\n";
                else out << "absent\n";
            };
            out << "  m+ = " << run.cls.m_plus << ", m- = " << run.cls.m_minus << ", alpha = " << fmt(run.cls.alpha)
                << '\n';
            show("T_plat", run.timeline.t_plat);
            show("T_II", run.timeline.t_II);
            show("T_II^PT", run.timeline.t_II_pt);
            show("T_III", run.timeline.t_III);
        }
        for (const auto& n : run.notes) out << "  note: " << n << '\n';
        return int{ExitOk};
    });
}

int cmd_sweep(const SweepSpec& spec, int jobs, std::ostream& out, std::ostream& err) {
    return guarded(err, [&] {
        const SweepResult res = run_sweep(spec, jobs);
        std::filesystem::create_directories(spec.base.out);
        std::ostringstream os;
        write_sweep_table(os, res);
        write_file(std::filesystem::path(spec.base.out) / "sweep.csv", os.str());
        out << os.str();
        return int{ExitOk};
    });
}

int cmd_verify(const ExperimentConfig& config, std::ostream& out, std::ostream& err) {
    return guarded(err, [&] {
        RunResult run = execute(config);
        if (config.extend_factor > 0.0 && run.analyzed && run.timeline.t_III.present) {
            const double horizon = config.extend_factor * run.timeline.t_III.time;
            if (horizon > config.flow.t_max) {
                ExperimentConfig ext = config;
                ext.flow.t_max = horizon;
                run = execute(ext);
            }
        }
        std::vector<CheckResult> checks = verify_checks(run);
        if (config.paired_mode_check && run.analyzed) {
            ExperimentConfig other = run.config;
            other.flow.mode = config.flow.mode == Mode::filippov ? Mode::plain_gd : Mode::filippov;
            const RunResult run2 = execute(other);
            if (run2.analyzed) checks.push_back(compare_timelines(run.timeline, run2.timeline, 2));
            else checks.push_back({"paired_mode_timeline", false, "paired run not analyzed"});
        }
        write_checks(out, checks);
        const bool all = std::all_of(checks.begin(), checks.end(), [](const CheckResult& c) { return c.pass; });
        return all ? int{ExitOk} : int{ExitCheckFailed};
    });
}

int cmd_theory(double kappa1, double kappa2, double p, double delta, double alpha, std::ostream& out,
               std::ostream& err) {
    return guarded(err, [&] {
        const BoundsReport b = time_scalings(kappa1, kappa2, p, delta, alpha);
        bounds_record(b).write(out);
        return int{ExitOk};
    });
}

int cmd_export_polar(const std::string& weights_path, const std::filesystem::path& out_dir, std::ostream& out,
                     std::ostream& err) {
    return guarded(err, [&] {
        std::ifstream in(weights_path);
        if (!in) throw ConfigError("cannot open '" + weights_path + "'");
        const std::vector<Record> recs = parse_records(in);
        const Record* head = nullptr;
        for (const auto& r : recs)
            if (r.has("kind") && r.get("kind") == "dataset") head = &r;
        if (!head) throw ParseError("no dataset record in '" + weights_path + "'");
        const Dataset ds = dataset_from_record(*head);
        std::ostringstream os;
        os << "time,iteration,neuron,sign,angle,radius\n";
        std::size_t count = 0;
        for (const auto& r : recs) {
            if (!r.has("kind") || r.get("kind") != "snapshot") continue;
            const NetworkState s = state_from_record(r);
            const auto pts = polar_projection(s, ds);
            for (int k = 0; k < s.m(); ++k)
                os << fmt(s.time) << ',' << s.iteration << ',' << k << ',' << (s.signs(k) > 0 ? 1 : -1) << ','
                   << (pts[k].defined ? fmt(pts[k].angle) : std::string("nan")) << ',' << fmt(pts[k].radius)
                   << '\n';
            ++count;
        }
        std::filesystem::create_directories(out_dir);
        write_file(out_dir / "polar.csv", os.str());
        out << "wrote " << (out_dir / "polar.csv").string() << " (" << count << " snapshots)\n";
        return int{ExitOk};
    });
}

}  // namespace fourphase
