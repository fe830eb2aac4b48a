#include "fourphase/phases.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <set>

#include "fourphase/error.hpp"

namespace fourphase {

std::string to_string(IntervalValue v) {
    switch (v) {
        case IntervalValue::One: return "1";
        case IntervalValue::Zero: return "0";
        case IntervalValue::Mixed: return "mixed";
        case IntervalValue::Empty: return "empty";
    }
    return "?";
}

double t_I_of(double kappa1, double kappa2) { return 10.0 * std::sqrt(kappa1 / kappa2); }

namespace {

HittingTime at_iteration(std::int64_t it, double eta) { return {true, static_cast<double>(it) * eta, it}; }

HittingTime at_event(std::int64_t it, double time) { return {true, time, it}; }

// current activation bits replayed through the event log
class PatternReplay {
public:
    PatternReplay(const Trajectory& traj, const Snapshot& start) : traj_(traj), n_(start.patterns.n) {
        bits_.resize(static_cast<std::size_t>(start.patterns.m) * n_);
        for (int k = 0; k < start.patterns.m; ++k)
            for (int i = 0; i < n_; ++i) bits_[idx(k, i)] = start.patterns.active(k, i) ? 1 : 0;
        pos_ = std::upper_bound(traj.events.begin(), traj.events.end(), start.iteration,
                                [](std::int64_t it, const PatternEvent& e) { return it < e.iteration; }) -
               traj.events.begin();
    }

    bool done() const { return pos_ >= traj_.events.size(); }
    std::int64_t next_iteration() const { return traj_.events[pos_].iteration; }
    double next_time() const { return traj_.events[pos_].time; }

    // applies every event of the next iteration; returns the touched events
    std::vector<PatternEvent> apply_group() {
        std::vector<PatternEvent> group;
        const std::int64_t it = next_iteration();
        while (!done() && traj_.events[pos_].iteration == it) {
            const auto& e = traj_.events[pos_++];
            bits_[idx(e.neuron, e.data_point)] = static_cast<std::uint8_t>(e.new_value);
            group.push_back(e);
        }
        return group;
    }

    int bit(int k, int i) const { return bits_[idx(k, i)]; }

private:
    std::size_t idx(int k, int i) const { return static_cast<std::size_t>(k) * n_ + i; }
    const Trajectory& traj_;
    int n_;
    std::vector<std::uint8_t> bits_;
    std::size_t pos_ = 0;
};

bool all_kplus_off_minus(const PatternReplay& r, const NeuronClassification& cls) {
    for (int k : cls.k_plus)
        if (r.bit(k, 1)) return false;
    return true;
}

bool all_kminus_on_plus(const PatternReplay& r, const NeuronClassification& cls) {
    for (int k : cls.k_minus)
        if (!r.bit(k, 0)) return false;
    return true;
}

const Snapshot& snapshot_at_TI(const Trajectory& traj) {
    const double tI = t_I_of(traj.kappa1, traj.kappa2);
    if (traj.snapshots.empty() || traj.snapshots.back().time < tI - 0.5 * traj.eta)
        throw HorizonTooShort("trajectory ends before T_I = " + format_double(tI));
    return traj.nearest(tI);
}

}  // namespace

NeuronClassification classify_patterns(const PatternMatrix& pm, const Eigen::VectorXd& signs) {
    NeuronClassification c;
    c.m = pm.m;
    c.label.assign(pm.m, 0);
    for (int k = 0; k < pm.m; ++k) {
        bool alive = false;
        for (int i = 0; i < pm.n; ++i) alive = alive || pm.sign(k, i) == 1;
        if (!alive) {
            c.dead.push_back(k);
        } else if (signs(k) > 0) {
            c.k_plus.push_back(k);
            c.label[k] = 1;
        } else {
            c.k_minus.push_back(k);
            c.label[k] = -1;
        }
    }
    c.m_plus = static_cast<int>(c.k_plus.size());
    c.m_minus = static_cast<int>(c.k_minus.size());
    c.alpha = c.m_plus > 0 ? static_cast<double>(c.m_minus) / c.m_plus : 0.0;
    return c;
}

NeuronClassification classify_at_TI(const Trajectory& traj, const Dataset& ds) {
    (void)ds;
    return classify_patterns(snapshot_at_TI(traj).patterns, traj.signs);
}

PhaseTimeline detect_timeline(const Trajectory& traj, const Dataset& ds, const NeuronClassification& cls) {
    (void)ds;
    PhaseTimeline tl;
    const double tI = t_I_of(traj.kappa1, traj.kappa2);
    if (traj.snapshots.empty() || traj.snapshots.back().time < tI - 0.5 * traj.eta) return tl;
    const Snapshot& start = traj.nearest(tI);
    tl.t_I = at_iteration(start.iteration, traj.eta);
    tl.t_I.time = tI;

    // accuracy plateau exit and the level sequence
    tl.accuracy_levels.push_back(start.accuracy);
    if (start.accuracy == 1.0) tl.t_plat = tl.t_I;
    for (const auto& a : traj.accuracy_events) {
        if (a.iteration <= start.iteration) continue;
        if (a.new_value != tl.accuracy_levels.back()) tl.accuracy_levels.push_back(a.new_value);
        if (!tl.t_plat.present && a.new_value == 1.0) tl.t_plat = at_event(a.iteration, a.time);
    }

    PatternReplay replay(traj, start);
    while (!replay.done()) {
        const std::int64_t it = replay.next_iteration();
        const double t = replay.next_time();
        const auto group = replay.apply_group();
        bool living = false;
        for (const auto& e : group) living = living || cls.label[e.neuron] != 0;
        if (!tl.t_II.present && living) {
            tl.t_II = at_event(it, t);
            for (int k : cls.k_plus) tl.t_II_trigger_count += replay.bit(k, 1) == 0 ? 1 : 0;
        }
        if (!tl.t_II.present) continue;
        if (!tl.t_II_pt.present && all_kplus_off_minus(replay, cls)) tl.t_II_pt = at_event(it, t);
        if (!tl.t_III_first.present) {
            for (const auto& e : group)
                if (cls.label[e.neuron] == -1 && e.data_point == 0 && e.new_value == 1) tl.t_III_first = at_event(it, t);
        }
        if (!tl.t_III.present && !cls.k_minus.empty() && all_kminus_on_plus(replay, cls)) tl.t_III = at_event(it, t);
        if (tl.t_II_pt.present && tl.t_III.present) break;
    }
    return tl;
}

AccuracyProfile accuracy_profile(const Trajectory& traj, const PhaseTimeline& tl, const Dataset& ds) {
    AccuracyProfile prof;
    prof.plateau_value = static_cast<double>(ds.spec.n_plus) / ds.spec.n();
    prof.post_value = 1.0;
    if (!tl.t_I.present) {
        ++prof.violations;
        prof.details.push_back("T_I not covered");
        return prof;
    }
    const std::int64_t lo = tl.t_I.iteration;
    const std::int64_t plat = tl.t_plat.present ? tl.t_plat.iteration : std::numeric_limits<std::int64_t>::max();
    const std::int64_t hi = tl.t_III.present ? tl.t_III.iteration : std::numeric_limits<std::int64_t>::max();

    for (const auto& s : traj.snapshots) {
        if (s.iteration < lo || s.iteration > hi) continue;
        if (s.iteration < plat) {
            ++prof.snapshots_checked;
            if (s.accuracy != prof.plateau_value) {
                ++prof.violations;
                prof.details.push_back("acc " + format_double(s.accuracy) + " at t=" + format_double(s.time) +
                                       " inside the plateau");
            }
        } else if (s.iteration > plat) {
            ++prof.snapshots_checked;
            if (s.accuracy != prof.post_value) {
                ++prof.violations;
                prof.details.push_back("acc " + format_double(s.accuracy) + " at t=" + format_double(s.time) +
                                       " after the plateau");
            }
        }
    }
    // step-level check: the only accuracy change in (T_I, T_III] is the jump to 1
    for (const auto& a : traj.accuracy_events) {
        if (a.iteration <= lo || a.iteration > hi) continue;
        if (a.iteration == plat && a.old_value == prof.plateau_value && a.new_value == 1.0) continue;
        ++prof.violations;
        prof.details.push_back("accuracy change " + format_double(a.old_value) + " -> " + format_double(a.new_value) +
                               " at t=" + format_double(a.time));
    }
    return prof;
}

CondensationReport condensation_report(const NetworkState& state, const Dataset& ds, const NeuronClassification& cls) {
    const KeyDirections kd = key_directions(ds);
    CondensationReport r;
    auto scan = [&](const std::vector<int>& set, const Eigen::VectorXd& dir, double& mn, double& mean, double& nmin,
                    double& nmax) {
        mn = std::numeric_limits<double>::infinity();
        nmin = std::numeric_limits<double>::infinity();
        mean = 0.0;
        nmax = 0.0;
        for (int k : set) {
            const NeuronView v = neuron_view(state, k);
            const double al = v.defined ? v.w.dot(dir) : 0.0;
            mn = std::min(mn, al);
            mean += al;
            nmin = std::min(nmin, v.rho);
            nmax = std::max(nmax, v.rho);
        }
        if (set.empty()) {
            mn = nmin = 0.0;
        } else {
            mean /= static_cast<double>(set.size());
        }
    };
    scan(cls.k_plus, kd.mu, r.min_align_plus, r.mean_align_plus, r.min_norm_plus, r.max_norm_plus);
    scan(cls.k_minus, kd.x_plus_perp, r.min_align_minus, r.mean_align_minus, r.min_norm_minus, r.max_norm_minus);
    return r;
}

PatternEvolutionSummary pattern_table(const Trajectory& traj, const PhaseTimeline& tl, const NeuronClassification& cls) {
    if (!(tl.t_I.present && tl.t_II.present && tl.t_II_pt.present && tl.t_III.present))
        throw IncompleteTimeline("pattern table needs T_I, T_II, T_II^PT and T_III");
    const Snapshot& start = traj.nearest(tl.t_I.time);
    const std::array<std::int64_t, 5> edges = {tl.t_I.iteration, tl.t_II.iteration, tl.t_II_pt.iteration,
                                               tl.t_III.iteration, std::numeric_limits<std::int64_t>::max()};
    std::array<std::set<int>, 4> seen_plus, seen_minus;
    PatternReplay replay(traj, start);

    // the state set at iteration `now` holds on [now, until); interval j spans
    // iterations [edges[j], edges[j+1])
    std::int64_t now = start.iteration;
    auto record = [&](std::int64_t until) {
        for (int j = 0; j < 4; ++j) {
            if (std::max(now, edges[j]) >= std::min(until, edges[j + 1])) continue;
            for (int k : cls.k_plus) seen_plus[j].insert(replay.bit(k, 1));
            for (int k : cls.k_minus) seen_minus[j].insert(replay.bit(k, 0));
        }
    };
    while (!replay.done()) {
        const std::int64_t next = replay.next_iteration();
        record(next);
        replay.apply_group();
        now = next;
    }
    record(std::max<std::int64_t>(now + 1, traj.snapshots.back().iteration + 1));

    auto value = [](const std::set<int>& s) {
        if (s.empty()) return IntervalValue::Empty;
        if (s.size() > 1) return IntervalValue::Mixed;
        return *s.begin() == 1 ? IntervalValue::One : IntervalValue::Zero;
    };
    PatternEvolutionSummary out;
    for (int j = 0; j < 4; ++j) {
        out.kplus_sgn_minus[j] = value(seen_plus[j]);
        out.kminus_sgn_plus[j] = value(seen_minus[j]);
    }

    const Snapshot& last = traj.snapshots.back();
    int changed_plus = 0, changed_minus = 0;
    for (int k = 0; k < cls.m; ++k) {
        changed_plus += last.patterns.active(k, 0) != start.patterns.active(k, 0) ? 1 : 0;
        changed_minus += last.patterns.active(k, 1) != start.patterns.active(k, 1) ? 1 : 0;
    }
    out.change_fraction_plus = static_cast<double>(changed_plus) / cls.m;
    out.change_fraction_minus = static_cast<double>(changed_minus) / cls.m;
    out.expected_fraction_plus = static_cast<double>(cls.m_minus) / cls.m;
    out.expected_fraction_minus = static_cast<double>(cls.m_plus) / cls.m;
    return out;
}

Record timeline_record(const PhaseTimeline& tl, const NeuronClassification& cls, double eta,
                       const PatternEvolutionSummary* table) {
    Record r;
    auto put = [&](const std::string& name, const HittingTime& h) {
        r.set(name + ".present", h.present);
        if (!h.present) return;
        r.set(name + ".time", h.time);
        r.set(name + ".iteration", h.iteration);
    };
    r.set("eta", eta);
    put("t_I", tl.t_I);
    put("t_plat", tl.t_plat);
    put("t_II", tl.t_II);
    put("t_II_pt", tl.t_II_pt);
    put("t_III", tl.t_III);
    put("t_III_first", tl.t_III_first);
    r.set("t_II_trigger_count", tl.t_II_trigger_count);
    r.set("accuracy_levels", tl.accuracy_levels);
    r.set("m", cls.m);
    r.set("m_plus", cls.m_plus);
    r.set("m_minus", cls.m_minus);
    r.set("dead", static_cast<int>(cls.dead.size()));
    r.set("alpha", cls.alpha);
    r.set("k_plus", cls.k_plus);
    r.set("k_minus", cls.k_minus);
    if (table) {
        std::string a, b;
        for (int j = 0; j < 4; ++j) {
            a += (j ? " " : "") + to_string(table->kplus_sgn_minus[j]);
            b += (j ? " " : "") + to_string(table->kminus_sgn_plus[j]);
        }
        r.set("pattern.kplus_sgn_minus", a);
        r.set("pattern.kminus_sgn_plus", b);
        r.set("pattern.change_fraction_plus", table->change_fraction_plus);
        r.set("pattern.change_fraction_minus", table->change_fraction_minus);
    }
    return r;
}

Record condensation_record(const CondensationReport& rep) {
    Record r;
    r.set("min_align_plus_mu", rep.min_align_plus);
    r.set("mean_align_plus_mu", rep.mean_align_plus);
    r.set("min_align_minus_xplus_perp", rep.min_align_minus);
    r.set("mean_align_minus_xplus_perp", rep.mean_align_minus);
    r.set("norm_plus_min", rep.min_norm_plus);
    r.set("norm_plus_max", rep.max_norm_plus);
    r.set("norm_minus_min", rep.min_norm_minus);
    r.set("norm_minus_max", rep.max_norm_minus);
    return r;
}

}  // namespace fourphase
