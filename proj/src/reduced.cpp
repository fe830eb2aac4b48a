#include "fourphase/reduced.hpp"

#include <algorithm>
#include <cmath>
#include <ostream>

#include "fourphase/error.hpp"

namespace fourphase {

double ReducedParams::cos_delta() const { return std::cos(delta); }
double ReducedParams::sin_sq() const {
    const double s = std::sin(delta);
    return s * s;
}

ReducedParams reduced_params(const Dataset& ds, const NeuronClassification& cls, double kappa2) {
    if (cls.m_plus == 0 || cls.m_minus == 0) throw EmptyClass("reduced dynamics need nonempty K+ and K-");
    ReducedParams prm;
    prm.delta = ds.spec.delta;
    prm.alpha = static_cast<double>(cls.m_minus) / cls.m_plus;
    prm.p = ds.p();
    prm.kappa2 = kappa2;
    prm.m_plus = cls.m_plus;
    prm.m_minus = cls.m_minus;
    prm.m = cls.m;
    return prm;
}

Vec2 uv_rhs(const ReducedStateUV& s, const ReducedParams& prm) {
    const double c = prm.cos_delta();
    const double eps = prm.alpha * prm.sin_sq();
    return {s.u * s.v * c - s.u * s.u, s.u * s.v * c - s.v * s.v * (1.0 + eps)};
}

Vec2 ij_rhs(const ReducedStateIJ& s, const ReducedParams& prm) {
    const double c = prm.cos_delta();
    const double eps = static_cast<double>(prm.m_plus) / prm.m_minus * prm.sin_sq();
    return {s.i * s.j * c - s.i * s.i * (1.0 + eps), s.i * s.j * c - s.j * s.j};
}

Rhs2 uv_system(const ReducedParams& prm) {
    return [prm](const Vec2& y) { return uv_rhs({y[0], y[1]}, prm); };
}

Rhs2 ij_system(const ReducedParams& prm) {
    return [prm](const Vec2& y) { return ij_rhs({y[0], y[1]}, prm); };
}

double default_dt(const Vec2& y0) { return std::min(0.1 / y0[0], 0.1 / y0[1]); }

Vec2 rk4_step(const Rhs2& rhs, const Vec2& y, double dt) {
    auto axpy = [](const Vec2& a, double h, const Vec2& k) { return Vec2{a[0] + h * k[0], a[1] + h * k[1]}; };
    const Vec2 k1 = rhs(y);
    const Vec2 k2 = rhs(axpy(y, 0.5 * dt, k1));
    const Vec2 k3 = rhs(axpy(y, 0.5 * dt, k2));
    const Vec2 k4 = rhs(axpy(y, dt, k3));
    return {y[0] + dt / 6.0 * (k1[0] + 2.0 * k2[0] + 2.0 * k3[0] + k4[0]),
            y[1] + dt / 6.0 * (k1[1] + 2.0 * k2[1] + 2.0 * k3[1] + k4[1])};
}

ReducedTrajectory rk4_integrate(const Rhs2& rhs, const Vec2& y0, double dt, double t_end, const Rk4Options& opt) {
    if (!(dt > 0.0)) throw ConfigError("rk4 step must be positive");
    ReducedTrajectory out;
    out.push_back({0.0, y0});
    Vec2 y = y0;
    double t = 0.0;
    double h = dt;
    double next_decade = 0.1 * (y0[0] + y0[1]);
    std::int64_t steps = 0;
    const auto total_guess = static_cast<std::int64_t>(std::ceil(t_end / dt));
    const std::int64_t thin =
        opt.max_samples > 0 ? std::max<std::int64_t>(1, total_guess / static_cast<std::int64_t>(opt.max_samples)) : 1;
    while (t < t_end - 1e-12 * std::max(1.0, t_end)) {
        const double step = std::min(h, t_end - t);
        y = rk4_step(rhs, y, step);
        t += step;
        ++steps;
        if (!std::isfinite(y[0]) || !std::isfinite(y[1])) throw NonFinite("reduced state", t);
        if (steps % thin == 0 || t >= t_end - 1e-12 * std::max(1.0, t_end)) out.push_back({t, y});
        if (opt.step_doubling && y[0] + y[1] <= next_decade) {
            h *= 2.0;
            next_decade *= 0.1;
        }
    }
    return out;
}

ReducedStateUV uv_from_predictions(double f_plus, double f_minus, const ReducedParams& prm) {
    const double base = prm.kappa2 * prm.kappa2 * prm.m_plus / prm.m;
    return {base * prm.p / (1.0 + prm.p) * std::exp(-f_plus), base / (1.0 + prm.p) * std::exp(f_minus)};
}

ReducedStateIJ ij_from_predictions(double f_plus, double f_minus, const ReducedParams& prm) {
    const double base = prm.kappa2 * prm.kappa2 * prm.m_minus / prm.m;
    return {base * prm.p / (1.0 + prm.p) * std::exp(-f_plus), base / (1.0 + prm.p) * std::exp(f_minus)};
}

ReducedStateUV uv_from_network(const NetworkState& state, const Dataset& ds, const NeuronClassification& cls) {
    return uv_from_predictions(predict(state, ds.x_plus), predict(state, ds.x_minus),
                               reduced_params(ds, cls, state.kappa2));
}

ReducedStateIJ ij_from_network(const NetworkState& state, const Dataset& ds, const NeuronClassification& cls) {
    return ij_from_predictions(predict(state, ds.x_plus), predict(state, ds.x_minus),
                               reduced_params(ds, cls, state.kappa2));
}

double uv_first_integral(const ReducedStateUV& s, const ReducedParams& prm, const ReducedStateUV& ref) {
    const double c = prm.cos_delta();
    const double s2 = prm.sin_sq();
    const double eps = prm.alpha * s2;
    const double z = s.u / s.v;
    const double zr = ref.u / ref.v;
    const double arg = (1.0 + c) * z - (1.0 + c + eps);
    const double arg_ref = (1.0 + c) * zr - (1.0 + c + eps);
    if (!(arg > 0.0) || !(arg_ref > 0.0)) throw OutOfRegion("(1+cos)Z must exceed 1+cos+eps");
    return std::log(s.v / ref.v) + (1.0 + eps) / (1.0 + c + eps) * std::log(z / zr) -
           (s2 + eps) / ((1.0 + c + eps) * (1.0 + c)) * std::log(arg / arg_ref);
}

ReducedTimeline reduced_hitting_times(const ReducedTrajectory& traj, const ReducedParams& prm) {
    ReducedTimeline out;
    if (traj.empty()) return out;
    const double c = prm.cos_delta();
    const double eps = prm.alpha * prm.sin_sq();
    const double exit_level = prm.kappa2 * prm.kappa2 * prm.m_plus / prm.m / (1.0 + prm.p);
    auto g1 = [&](const Vec2& y) { return y[0] * c - y[1] * (1.0 + eps); };
    auto g2 = [&](const Vec2& y) { return y[1] - exit_level; };
    // first crossing from > 0 to <= 0, linearly interpolated; a start exactly on
    // the level (f- = 0 for the exit) is not a hit
    auto hit = [&](auto g, bool& present, double& when) {
        if (g(traj.front().y) < 0.0) {
            present = true;
            when = traj.front().t;
            return;
        }
        for (std::size_t n = 1; n < traj.size(); ++n) {
            const double a = g(traj[n - 1].y), b = g(traj[n].y);
            if (a > 0.0 && b <= 0.0) {
                present = true;
                when = traj[n - 1].t + (traj[n].t - traj[n - 1].t) * a / (a - b);
                return;
            }
        }
    };
    hit(g1, out.tau1_present, out.tau1);
    hit(g2, out.plateau_exit_present, out.plateau_exit);
    return out;
}

double ratio_limit(const ReducedParams& prm) {
    const double c = prm.cos_delta();
    return (1.0 + c) / (1.0 + c + static_cast<double>(prm.m_plus) / prm.m_minus * prm.sin_sq());
}

OracleComparison compare_with_oracle(const Trajectory& traj, const Dataset& ds, const NeuronClassification& cls,
                                     ReducedSystem system, double t_from, double t_to) {
    const ReducedParams prm = reduced_params(ds, cls, traj.kappa2);
    auto extract = [&](const Snapshot& s) -> Vec2 {
        if (system == ReducedSystem::UV) {
            const auto r = uv_from_predictions(s.f_plus, s.f_minus, prm);
            return {r.u, r.v};
        }
        const auto r = ij_from_predictions(s.f_plus, s.f_minus, prm);
        return {r.i, r.j};
    };
    const Rhs2 rhs = system == ReducedSystem::UV ? uv_system(prm) : ij_system(prm);

    OracleComparison out;
    const Snapshot* first = nullptr;
    for (const auto& s : traj.snapshots) {
        if (s.time >= t_from - 1e-9) {
            first = &s;
            break;
        }
    }
    if (!first) throw HorizonTooShort("no snapshot after t_from");
    out.t_from = first->time;
    Vec2 y = extract(*first);
    std::int64_t at = first->iteration;
    // ten RK4 substeps per simulator step keep the oracle's own error negligible
    const double h = traj.eta / 10.0;
    for (const auto& s : traj.snapshots) {
        if (s.iteration <= at || s.time > t_to + 1e-9) continue;
        for (std::int64_t n = 0; n < (s.iteration - at) * 10; ++n) y = rk4_step(rhs, y, h);
        at = s.iteration;
        const Vec2 sim = extract(s);
        const double e = std::max(std::abs(sim[0] - y[0]) / std::abs(y[0]), std::abs(sim[1] - y[1]) / std::abs(y[1]));
        out.max_rel_error = std::max(out.max_rel_error, e);
        out.t_to = s.time;
        ++out.points;
    }
    return out;
}

void write_reduced_csv(std::ostream& os, const ReducedTrajectory& traj, ReducedSystem system) {
    os << (system == ReducedSystem::UV ? "t,u,v\n" : "t,i,j\n");
    for (const auto& s : traj)
        os << format_double(s.t) << ',' << format_double(s.y[0]) << ',' << format_double(s.y[1]) << '\n';
}

}  // namespace fourphase
