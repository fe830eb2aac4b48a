#include "fourphase/flow.hpp"

#include <algorithm>
#include <cmath>
#include <istream>
#include <ostream>

#include "fourphase/error.hpp"

namespace fourphase {

std::string to_string(Mode mode) { return mode == Mode::plain_gd ? "plain_gd" : "filippov"; }

Mode mode_from_string(const std::string& s) {
    if (s == "plain_gd") return Mode::plain_gd;
    if (s == "filippov") return Mode::filippov;
    throw ConfigError("unknown mode '" + s + "' (expected plain_gd or filippov)");
}

std::string to_string(SlidingKind kind) {
    switch (kind) {
        case SlidingKind::SlideOnSurface: return "SlideOnSurface";
        case SlidingKind::CrossSurface: return "CrossSurface";
        case SlidingKind::SlideReverse: return "SlideReverse";
        case SlidingKind::CrossReverse: return "CrossReverse";
        case SlidingKind::NotOnSurface: return "NotOnSurface";
    }
    return "?";
}

double default_sliding_tol(double eta, const NetworkState& state) { return eta * state.scale(); }

double resolved_sliding_tol(const FlowConfig& config, const NetworkState& state) {
    return config.sliding_tol >= 0.0 ? config.sliding_tol : default_sliding_tol(config.eta, state);
}

double event_tolerance(const FlowConfig& config, const NetworkState& state) {
    // plain_gd chatters across surfaces by up to one step; filippov keeps
    // attached neurons at projection residue
    return config.mode == Mode::plain_gd ? resolved_sliding_tol(config, state) : 1e-10 * state.kappa2;
}

const Snapshot& Trajectory::nearest(double t) const {
    if (snapshots.empty()) throw HorizonTooShort("trajectory has no snapshots");
    const double target = t / eta;
    const Snapshot* best = &snapshots.front();
    for (const auto& s : snapshots)
        if (std::abs(s.iteration - target) < std::abs(best->iteration - target)) best = &s;
    return *best;
}

namespace {

constexpr double kDegenerate = 1e-14;
// distance below which a neuron counts as lying on a surface (projection residue)
constexpr double kOnSurface = 1e-12;

struct Eval {
    Eigen::MatrixXd Z;     // m x n pre-activations
    Eigen::VectorXd f;     // predictions
    Eigen::VectorXd coef;  // y_i w_i e^{-y_i f_i}
};

void evaluate(const NetworkState& s, const TrainingSet& ts, Eval& e) {
    e.Z.noalias() = s.weights * ts.X;
    e.f = s.scale() * (e.Z.cwiseMax(0.0).transpose() * s.signs);
    e.coef.resize(ts.size());
    for (int i = 0; i < ts.size(); ++i)
        e.coef(i) = ts.labels(i) * ts.weights(i) * std::exp(-ts.labels(i) * e.f(i));
}

bool all_nonpositive(const Eigen::MatrixXd& Z, int k) {
    for (Eigen::Index i = 0; i < Z.cols(); ++i)
        if (Z(k, i) > 0.0) return false;
    return true;
}

struct SurfaceSplit {
    double f_N_minus;
    double f_N_plus;
};

// normal projections of the two one-sided fields on surface i; other points
// use the strict sign of z
SurfaceSplit split_on_surface(double sk, double scale, const Eigen::VectorXd& coef,
                              const Eigen::MatrixXd& gram, const Eigen::VectorXd& z, int i) {
    double base = 0.0;
    for (Eigen::Index j = 0; j < z.size(); ++j)
        if (j != i && z(j) > 0.0) base += coef(j) * gram(j, i);
    const double a = sk * scale;
    return {a * base, a * (base + coef(i) * gram(i, i))};
}

SlidingKind classify(double fm, double fp, double* alpha) {
    if (std::abs(fm) <= kDegenerate && std::abs(fp) <= kDegenerate)
        throw DegenerateProjection("both one-sided normal projections vanish");
    *alpha = 0.0;
    if (fm > 0.0 && fp < 0.0) {
        *alpha = fm / (fm - fp);
        return SlidingKind::SlideOnSurface;
    }
    if (fm < 0.0 && fp > 0.0) {
        *alpha = fm / (fm - fp);
        return SlidingKind::SlideReverse;
    }
    if (fm >= 0.0 && fp >= 0.0) return SlidingKind::CrossSurface;
    return SlidingKind::CrossReverse;
}

SlidingKind classify_or_degenerate(double fm, double fp, double* alpha, bool* degenerate) {
    *degenerate = false;
    try {
        return classify(fm, fp, alpha);
    } catch (const DegenerateProjection&) {
        *degenerate = true;
        *alpha = 0.0;
        return SlidingKind::SlideOnSurface;
    }
}

class Stepper {
public:
    Stepper(const TrainingSet& ts, const FlowConfig& config, const NetworkState& state)
        : ts_(ts), config_(config), gram_(ts.X.transpose() * ts.X),
          tol_(resolved_sliding_tol(config, state)) {}

    double tol() const { return tol_; }

    // advances state by one Euler step from the evaluation e of the same state
    void advance(NetworkState& s, const Eval& e, StepStats& stats) {
        const int n = ts_.size();
        const double scale = s.scale();
        const double eta = config_.eta;
        Eigen::VectorXd g(n), z(n), znew(n), b(s.dim());
        for (int k = 0; k < s.m(); ++k) {
            z = e.Z.row(k).transpose();
            if (all_nonpositive(e.Z, k)) {
                ++stats.frozen;
                continue;
            }
            const double sk = s.signs(k);
            for (int j = 0; j < n; ++j) g(j) = z(j) > 0.0 ? e.coef(j) : 0.0;

            int project_on = -1;
            if (config_.mode == Mode::filippov) {
                int surf = -1;
                for (int j = 0; j < n; ++j)
                    if (std::abs(z(j)) <= tol_ && (surf < 0 || std::abs(z(j)) < std::abs(z(surf)))) surf = j;
                if (surf >= 0) {
                    const SurfaceSplit sp = split_on_surface(sk, scale, e.coef, gram_, z, surf);
                    double alpha = 0.0;
                    bool degenerate = false;
                    const SlidingKind kind = classify_or_degenerate(sp.f_N_minus, sp.f_N_plus, &alpha, &degenerate);
                    switch (kind) {
                        case SlidingKind::SlideOnSurface:
                            g(surf) = alpha * e.coef(surf);
                            project_on = surf;
                            break;
                        // repelling surface: never attach, leave with the current side
                        case SlidingKind::SlideReverse: break;
                        // crossing: keep the field of the current side, exactly on
                        // the surface take the destination side
                        case SlidingKind::CrossSurface: g(surf) = z(surf) < -kOnSurface ? 0.0 : e.coef(surf); break;
                        case SlidingKind::CrossReverse: g(surf) = z(surf) > kOnSurface ? e.coef(surf) : 0.0; break;
                        case SlidingKind::NotOnSurface: break;
                    }
                }
            }

            b = s.weights.row(k).transpose();
            b.noalias() += (eta * sk * scale) * (ts_.X * g);

            if (config_.mode == Mode::filippov && project_on < 0) {
                // landing: a strict sign change into a Case I configuration
                znew.noalias() = ts_.X.transpose() * b;
                for (int j = 0; j < n && project_on < 0; ++j) {
                    const bool crossed = (z(j) > 0.0 && znew(j) < 0.0) || (z(j) < 0.0 && znew(j) > 0.0);
                    if (!crossed) continue;
                    const SurfaceSplit sp = split_on_surface(sk, scale, e.coef, gram_, znew, j);
                    if (sp.f_N_minus > 0.0 && sp.f_N_plus < 0.0) project_on = j;
                }
            }
            if (project_on >= 0) {
                const Eigen::VectorXd x = ts_.X.col(project_on);
                b.noalias() -= (b.dot(x) / gram_(project_on, project_on)) * x;
                stats.max_sliding_residual = std::max(stats.max_sliding_residual, std::abs(b.dot(x)));
                ++stats.sliding;
            }
            s.weights.row(k) = b.transpose();
        }
        ++s.iteration;
        s.time = static_cast<double>(s.iteration) * eta;
        if (!s.weights.allFinite()) throw NonFinite("weights", s.time);
    }

private:
    const TrainingSet& ts_;
    FlowConfig config_;
    Eigen::MatrixXd gram_;
    double tol_;
};

void check_config(const FlowConfig& c) {
    if (!(c.eta > 0.0)) throw ConfigError("eta must be positive");
    if (!(c.t_max >= 0.0)) throw ConfigError("t_max must be non-negative");
    if (c.snapshot_stride < 1) throw ConfigError("snapshot_stride must be >= 1");
}

}  // namespace

PerNeuronField vector_field(const NetworkState& state, const TrainingSet& ts, double tol) {
    Eval e;
    evaluate(state, ts, e);
    PerNeuronField out;
    out.f = e.f;
    out.coef = e.coef;
    out.F_plus = ts.X * e.coef;
    out.F.resize(state.m(), state.dim());
    out.boundary.assign(state.m(), 0);
    const double scale = state.scale();
    Eigen::VectorXd g(ts.size());
    for (int k = 0; k < state.m(); ++k) {
        for (int j = 0; j < ts.size(); ++j) {
            g(j) = e.Z(k, j) > 0.0 ? e.coef(j) : 0.0;
            if (std::abs(e.Z(k, j)) <= tol) out.boundary[k] = 1;
        }
        out.F.row(k) = (state.signs(k) * scale) * (ts.X * g).transpose();
    }
    return out;
}

PerNeuronField vector_field(const NetworkState& state, const Dataset& ds, double tol) {
    return vector_field(state, training_set(ds), tol);
}

SlidingCase sliding_analysis(int k, const NetworkState& state, const TrainingSet& ts, double tol) {
    Eval e;
    evaluate(state, ts, e);
    const Eigen::VectorXd z = e.Z.row(k).transpose();
    SlidingCase out;
    for (int j = 0; j < ts.size(); ++j)
        if (std::abs(z(j)) <= tol && (out.surface < 0 || std::abs(z(j)) < std::abs(z(out.surface)))) out.surface = j;
    if (out.surface < 0) return out;

    const Eigen::MatrixXd gram = ts.X.transpose() * ts.X;
    const SurfaceSplit sp = split_on_surface(state.signs(k), state.scale(), e.coef, gram, z, out.surface);
    out.f_N_minus = sp.f_N_minus;
    out.f_N_plus = sp.f_N_plus;
    out.kind = classify(sp.f_N_minus, sp.f_N_plus, &out.alpha);

    Eigen::VectorXd g(ts.size());
    for (int j = 0; j < ts.size(); ++j) g(j) = z(j) > 0.0 ? e.coef(j) : 0.0;
    g(out.surface) = out.alpha * e.coef(out.surface);
    out.sliding_field = (state.signs(k) * state.scale()) * (ts.X * g);
    return out;
}

SlidingCase sliding_analysis(int k, const NetworkState& state, const Dataset& ds, double tol) {
    return sliding_analysis(k, state, training_set(ds), tol);
}

NetworkState step(const NetworkState& state, const TrainingSet& ts, const FlowConfig& config, StepStats* stats) {
    check_config(config);
    Stepper stepper(ts, config, state);
    Eval e;
    evaluate(state, ts, e);
    NetworkState next = state;
    StepStats local;
    stepper.advance(next, e, local);
    if (stats) *stats = local;
    return next;
}

NetworkState step(const NetworkState& state, const Dataset& ds, const FlowConfig& config, StepStats* stats) {
    return step(state, training_set(ds), config, stats);
}

Decomposition decompose(const Eigen::VectorXd& b, const Eigen::VectorXd& F) {
    const double rho = b.norm();
    if (rho == 0.0) throw ZeroNeuron("cannot decompose a zero neuron");
    const Eigen::VectorXd w = b / rho;
    Decomposition d;
    d.radial = F.dot(w);
    d.tangential = (F - d.radial * w) / rho;
    return d;
}

Trajectory simulate(const TrainingSet& ts, const NetworkState& state0, const FlowConfig& config) {
    check_config(config);
    Stepper stepper(ts, config, state0);
    const double tol = event_tolerance(config, state0);

    Trajectory traj;
    traj.point_names = ts.names;
    traj.signs = state0.signs;
    traj.kappa1 = state0.kappa1;
    traj.kappa2 = state0.kappa2;
    traj.eta = config.eta;
    traj.event_tol = tol;
    traj.mode = config.mode;

    const auto total = static_cast<std::int64_t>(std::floor(config.t_max / config.eta + 1e-9));
    std::vector<std::int64_t> marks;
    for (double t : config.mark_times) {
        const auto it = std::llround(t / config.eta);
        if (it >= 0 && it <= total) marks.push_back(it);
    }
    std::sort(marks.begin(), marks.end());

    NetworkState s = state0;
    s.iteration = 0;
    s.time = 0.0;
    const int m = s.m();
    const int n = ts.size();
    int count_total = 0;
    for (int c : ts.counts) count_total += c;

    Eval e;
    std::vector<std::uint8_t> bits(static_cast<std::size_t>(m) * n), prev_bits;
    double prev_acc = 0.0;
    std::size_t next_mark = 0;

    for (std::int64_t it = 0;; ++it) {
        evaluate(s, ts, e);
        if (!e.f.allFinite()) throw NonFinite("predictions", s.time);

        for (int k = 0; k < m; ++k)
            for (int i = 0; i < n; ++i) bits[static_cast<std::size_t>(k) * n + i] = e.Z(k, i) > tol ? 1 : 0;
        int correct = 0;
        for (int i = 0; i < n; ++i)
            if (ts.labels(i) * e.f(i) > 0.0) correct += ts.counts[i];
        const double acc = static_cast<double>(correct) / count_total;

        const double t_event = (static_cast<double>(it) - 0.5) * config.eta;
        if (it > 0) {
            for (int k = 0; k < m; ++k) {
                for (int i = 0; i < n; ++i) {
                    const std::size_t at = static_cast<std::size_t>(k) * n + i;
                    if (bits[at] != prev_bits[at])
                        traj.events.push_back({t_event, it, k, i, prev_bits[at], bits[at]});
                }
            }
            if (acc != prev_acc) traj.accuracy_events.push_back({t_event, it, prev_acc, acc});
        }
        prev_bits = bits;
        prev_acc = acc;

        bool take = it % config.snapshot_stride == 0 || it == total;
        while (next_mark < marks.size() && marks[next_mark] <= it) {
            if (marks[next_mark] == it) take = true;
            ++next_mark;
        }
        if (take) {
            Snapshot snap;
            snap.time = s.time;
            snap.iteration = it;
            snap.f.assign(e.f.data(), e.f.data() + n);
            snap.f_plus = e.f(ts.index_plus);
            snap.f_minus = ts.index_minus >= 0 ? e.f(ts.index_minus) : 0.0;
            double loss = 0.0;
            for (int i = 0; i < n; ++i) loss += ts.weights(i) * std::exp(-ts.labels(i) * e.f(i));
            snap.loss = loss;
            snap.accuracy = acc;
            snap.patterns = patterns_from_preacts(e.Z, tol);
            if (config.store_weights) snap.weights = s.weights;
            traj.snapshots.push_back(std::move(snap));
        }
        if (it == total) break;

        StepStats stats;
        try {
            stepper.advance(s, e, stats);
        } catch (const NonFinite&) {
            throw;
        } catch (const Error& err) {
            throw NonFinite(err.what(), s.time);
        }
        traj.max_sliding_residual = std::max(traj.max_sliding_residual, stats.max_sliding_residual);
        traj.sliding_steps += stats.sliding;
    }
    traj.steps = total;
    return traj;
}

Trajectory simulate(const Dataset& ds, const NetworkState& state0, const FlowConfig& config) {
    return simulate(training_set(ds), state0, config);
}

NetworkState snapshot_state(const Trajectory& traj, const Snapshot& snap) {
    if (snap.weights.size() == 0) throw HorizonTooShort("snapshot has no stored weights");
    NetworkState s = make_state(snap.weights, traj.kappa1, traj.kappa2);
    s.time = snap.time;
    s.iteration = snap.iteration;
    return s;
}

void write_trajectory_csv(std::ostream& os, const Trajectory& traj, const Dataset& ds) {
    const bool polar = !traj.snapshots.empty() && traj.snapshots.front().weights.size() > 0;
    os << "t,f_plus,f_minus,loss,acc";
    if (polar)
        for (int k = 0; k < traj.m(); ++k) os << ",angle_" << k << ",radius_" << k;
    os << '\n';
    for (const auto& s : traj.snapshots) {
        os << format_double(s.time) << ',' << format_double(s.f_plus) << ',' << format_double(s.f_minus) << ','
           << format_double(s.loss) << ',' << format_double(s.accuracy);
        if (polar) {
            for (const auto& pp : polar_projection(snapshot_state(traj, s), ds))
                os << ',' << (pp.defined ? format_double(pp.angle) : std::string("nan")) << ','
                   << format_double(pp.radius);
        }
        os << '\n';
    }
}

void write_event_log(std::ostream& os, const Trajectory& traj) {
    for (const auto& ev : traj.events) {
        os << "t = " << format_double(ev.time) << "; iteration = " << ev.iteration << "; neuron = " << ev.neuron
           << "; data_point = " << traj.point_names.at(ev.data_point) << "; old = " << ev.old_value
           << "; new = " << ev.new_value << '\n';
    }
}

void write_weight_snapshots(std::ostream& os, const Trajectory& traj, const Dataset& ds) {
    std::vector<Record> recs;
    Record head = to_record(ds);
    head.set("kind", "dataset");
    recs.push_back(head);
    for (const auto& s : traj.snapshots) {
        if (s.weights.size() == 0) continue;
        Record r = snapshot_record(snapshot_state(traj, s), ds, traj.event_tol);
        r.set("kind", "snapshot");
        recs.push_back(std::move(r));
    }
    write_records(os, recs);
}

std::vector<NetworkState> read_weight_snapshots(std::istream& is) {
    std::vector<NetworkState> out;
    for (const auto& r : parse_records(is))
        if (r.has("kind") && r.get("kind") == "snapshot") out.push_back(state_from_record(r));
    return out;
}

}  // namespace fourphase
