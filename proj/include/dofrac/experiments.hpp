#pragma once

// Experiment building blocks shared by the command line tool and the acceptance
// suite: forward runs, trace post-processing, bound fits, weight recovery runs and
// gradient checks.

#include <boost/math/differentiation/finite_difference.hpp>

#include <cmath>
#include <cstdint>
#include <limits>
#include <random>
#include <string>
#include <vector>

#include "dofrac/adjoint.hpp"
#include "dofrac/asymptotics.hpp"
#include "dofrac/fem1d.hpp"
#include "dofrac/forward.hpp"
#include "dofrac/inverse.hpp"

namespace dofrac {

struct TraceRun {
    ForwardSolution solution;
    ObservationTrace trace;
};

inline TraceRun run_forward(const ProblemSpec& spec) {
    const FeSystem fe = assemble(spec.mesh, spec.coeff);
    const DistributedWeights w(spec.grid, spec.mu, spec.quad);
    TraceRun r{step_forward(spec, fe, w), {}};
    r.trace = observe(r.solution, spec, fe);
    return r;
}

/// Observation of the steady state reached when sigma and the boundary data are frozen
/// at their values at the end of the grid. NaN when that state is not unique
/// (Neumann problem without a zeroth-order term).
inline double steady_trace(const ProblemSpec& spec) {
    const FeSystem fe = assemble(spec.mesh, spec.coeff);
    const double t_end = spec.grid.horizon();
    const std::vector<double> load = problem_load(spec, load_vector(spec.mesh, spec.f), t_end);
    TriDiag K = fe.stiffness;
    std::vector<double> rhs = load;
    if (spec.bc.kind == BoundarySpec::Kind::Dirichlet) {
        detail::impose_dirichlet_rows(K);
        const BoundaryValues g = detail::boundary_values(spec.bc, t_end);
        rhs.front() = g.left;
        rhs.back() = g.right;
    } else if (spec.coeff.q_vanishes()) {
        return std::numeric_limits<double>::quiet_NaN();
    }
    TriDiagLU(K).solve_in_place(rhs);
    const int b = boundary_node(fe, spec.observe.side);
    if (spec.observe.kind == TraceKind::Dirichlet) return rhs[b];
    return boundary_flux(fe, rhs, {}, load, spec.observe.side);
}

/// Least-squares slope of log|y| against log t over the samples in [t1, t2].
inline double loglog_slope(std::span<const double> t, std::span<const double> y, double t1, double t2) {
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    int n = 0;
    for (std::size_t i = 0; i < t.size(); ++i) {
        if (t[i] < t1 * (1 - 1e-9) || t[i] > t2 * (1 + 1e-9)) continue;
        if (!(std::abs(y[i]) > 0.0)) throw DomainError("loglog_slope: zero sample in window");
        const double lx = std::log(t[i]), ly = std::log(std::abs(y[i]));
        sx += lx;
        sy += ly;
        sxx += lx * lx;
        sxy += lx * ly;
        ++n;
    }
    if (n < 2) throw DomainError("loglog_slope: fewer than two samples in window");
    return (n * sxy - sx * sy) / (n * sxx - sx * sx);
}

/// |g(t) - g(0)| and |g(t) - g_inf| (or |g(t)| when g_inf is unavailable).
struct ShiftedTrace {
    std::vector<double> t, from_start, from_limit;
};

inline ShiftedTrace shifted_trace(const ObservationTrace& tr, double g_inf) {
    ShiftedTrace s;
    const double lim = std::isfinite(g_inf) ? g_inf : 0.0;
    for (std::size_t n = 1; n < tr.size(); ++n) {
        s.t.push_back(tr.t[n]);
        s.from_start.push_back(std::abs(tr.g[n] - tr.g[0]));
        s.from_limit.push_back(std::abs(tr.g[n] - lim));
    }
    return s;
}

/// Fit windows: large times for the lower bound, small times for the upper bound.
struct BoundWindows {
    double lower_t1 = 1e4, lower_t2 = 1e5;
    double upper_t1 = 1e-6, upper_t2 = 1e-5;
};

struct BoundEstimate {
    BoundFit lower, upper;
    double small_slope = 0.0;  // log-log slope of |g - g(0)| over the small-time window
    double large_slope = 0.0;  // log-log slope of |g - g_inf| over the large-time window
};

inline BoundEstimate estimate_bounds(const ObservationTrace& tr, double g_inf, const BoundWindows& w) {
    BoundEstimate e;
    e.lower = fit_bound(tr, w.lower_t1, w.lower_t2, BoundTarget::Lower);
    e.upper = fit_bound(tr, w.upper_t1, w.upper_t2, BoundTarget::Upper);
    const ShiftedTrace s = shifted_trace(tr, g_inf);
    e.small_slope = loglog_slope(s.t, s.from_start, w.upper_t1, w.upper_t2);
    e.large_slope = loglog_slope(s.t, s.from_limit, w.lower_t1, w.lower_t2);
    return e;
}

// ---------------------------------------------------------------------------
// Weight recovery

inline std::vector<double> sample_on(const AlphaQuadrature& quad, const Expr& e) {
    std::vector<double> v;
    v.reserve(quad.nodes.size());
    for (double a : quad.nodes) v.push_back(eval(e, "alpha", a));
    return v;
}

inline std::vector<double> sample_on(const AlphaQuadrature& quad, const WeightDistribution& mu) {
    std::vector<double> v;
    v.reserve(quad.nodes.size());
    for (double a : quad.nodes) v.push_back(mu.density(a));
    return v;
}

struct RecoveryRun {
    ObservationTrace clean, data;
    double delta_est = 0.0;
    RecoveryState state;
};

/// Simulates data with the true weight in `spec`, corrupts it with noise level eps,
/// and runs the conjugate gradient recovery from `initial`.
inline RecoveryRun run_recovery(const ProblemSpec& spec, double eps, std::uint64_t seed, const Expr& initial,
                                CgmOptions opts, bool use_discrepancy) {
    RecoveryRun r;
    r.clean = run_forward(spec).trace;
    r.data = add_noise(r.clean, eps, seed);
    r.delta_est = eps * r.clean.sup_norm() * std::sqrt(spec.grid.horizon());
    opts.delta_est = use_discrepancy ? r.delta_est : 0.0;
    if (!use_discrepancy) opts.tau_dp = 0.0;
    opts.truth = sample_on(spec.quad, spec.mu);
    r.state = cgm_recover(spec, r.data, sample_on(spec.quad, initial), opts);
    return r;
}

// ---------------------------------------------------------------------------
// Gradient checks

struct GradcheckRow {
    int direction = 0;
    double adjoint = 0.0;            // <J'(mu), h>
    double finite_difference = 0.0;  // (J(mu + e h) - J(mu - e h)) / 2e
    double rel_error = 0.0;
    double duality = 0.0;  // (u_h(x0, .), r)
    double duality_rel_error = 0.0;
};

/// Compares the adjoint gradient at `point` with central differences of J and with
/// the sensitivity pairing, along random directions h with i.i.d. normal node values.
inline std::vector<GradcheckRow> gradient_check(const ProblemSpec& spec, const ObservationTrace& data,
                                                std::span<const double> point, int directions, double step,
                                                std::uint64_t seed) {
    const FeSystem fe = assemble(spec.mesh, spec.coeff);
    const auto J = [&](std::span<const double> m) {
        const DistributedWeights w(spec.grid, weight_measure(spec.quad, m));
        return objective(spec.grid, trace_residual(observe(step_forward(spec, fe, w), spec, fe), data));
    };
    const DistributedWeights w(spec.grid, weight_measure(spec.quad, point));
    const ForwardSolution u = step_forward(spec, fe, w);
    const std::vector<double> r = trace_residual(observe(u, spec, fe), data);
    const GradientSample g = assemble_gradient(spec, fe, u, solve_adjoint(spec, fe, w, r));
    const int b = boundary_node(fe, spec.observe.side);

    std::mt19937_64 rng(seed);
    std::normal_distribution<double> nd(0.0, 1.0);
    std::vector<GradcheckRow> rows;
    for (int k = 0; k < directions; ++k) {
        std::vector<double> h(point.size());
        for (double& x : h) x = nd(rng);
        GradcheckRow row;
        row.direction = k;
        row.adjoint = gradient_pairing(spec.quad, g.value, h);
        std::vector<double> plus(point.begin(), point.end()), minus = plus;
        for (std::size_t i = 0; i < h.size(); ++i) {
            plus[i] += step * h[i];
            minus[i] -= step * h[i];
        }
        row.finite_difference = (J(plus) - J(minus)) / (2.0 * step);
        row.rel_error = std::abs(row.adjoint - row.finite_difference) / std::abs(row.finite_difference);
        const ForwardSolution uh = solve_sensitivity(spec, fe, w, u, h);
        std::vector<double> yh(uh.u.size());
        for (std::size_t n = 0; n < yh.size(); ++n) yh[n] = uh.u[n][b];
        row.duality = time_inner(spec.grid, yh, r);
        row.duality_rel_error = std::abs(row.adjoint - row.duality) / std::abs(row.duality);
        rows.push_back(row);
    }
    return rows;
}

// ---------------------------------------------------------------------------
// Asymptotic predictions

/// R*h(x0) for a smooth profile h(x): the value for Neumann problems, the conormal
/// derivative a h' nu for Dirichlet problems.
inline double boundary_functional(const ProblemSpec& spec, const Expr& h) {
    const double x0 = spec.observe.side == Side::Left ? 0.0 : 1.0;
    if (spec.observe.kind == TraceKind::Dirichlet) return eval(h, "x", x0);
    const double nu = spec.observe.side == Side::Left ? -1.0 : 1.0;
    const double dh = boost::math::differentiation::finite_difference_derivative(
        [&](double x) { return eval(h, "x", x); }, x0);
    return nu * eval(spec.coeff.a, "x", x0) * dh;
}

/// R*A^{-2}h(x0) from two finite element elliptic solves; NaN when A is singular.
inline double boundary_functional_a2(const ProblemSpec& spec, const Expr& h) {
    const FeSystem fe = assemble(spec.mesh, spec.coeff);
    try {
        const std::vector<double> w1 = elliptic_solve(fe, spec.bc.kind, interpolate(spec.mesh, h));
        const std::vector<double> w2 = elliptic_solve(fe, spec.bc.kind, w1);
        const int b = boundary_node(fe, spec.observe.side);
        if (spec.observe.kind == TraceKind::Dirichlet) return w2[b];
        return boundary_flux(fe, w2, {}, fe.mass.apply(w1), spec.observe.side);
    } catch (const SolverError&) {
        return std::numeric_limits<double>::quiet_NaN();
    }
}

struct AsymptoticsRow {
    double t, P, Q_contour, P_contour, predicted;
};

/// P(t), Qc(t), Pc(t) and the leading-order prediction of R*w(x0,t) for the impulse
/// response w with spatial profile h = f: the small-time law for t < 1 and the
/// large-time law for t >= 1.
inline std::vector<AsymptoticsRow> asymptotics_table(const ProblemSpec& spec, std::span<const double> times,
                                                     const ContourParams& cp) {
    const KernelMoments km(spec.mu);
    const double rh = boundary_functional(spec, spec.f);
    const double ra2 = boundary_functional_a2(spec, spec.f);
    std::vector<AsymptoticsRow> rows;
    for (double t : times) {
        AsymptoticsRow r{t, eval_P(t, spec.mu), contour_Q(t, km, cp), contour_P(t, km, cp), 0.0};
        r.predicted = t < 1.0 ? predict_small_t(t, km, rh, cp) : predict_large_t(t, km, ra2, cp);
        rows.push_back(r);
    }
    return rows;
}

}  // namespace dofrac
