#pragma once

// Reconstruction algorithms: support-bound estimation by fitting c0 + c1 t^{-/+b} to a
// boundary trace, and weight recovery by a projected conjugate gradient method driven
// by adjoint gradients.

#include <boost/math/tools/minima.hpp>

#include <algorithm>
#include <cmath>
#include <optional>
#include <span>
#include <vector>

#include "dofrac/adjoint.hpp"
#include "dofrac/error.hpp"
#include "dofrac/fem1d.hpp"
#include "dofrac/forward.hpp"
#include "dofrac/fracweights.hpp"

namespace dofrac {

// ---------------------------------------------------------------------------
// Bound fitting

/// Lower bound b1 from large times: g ~ c0 + c1 t^{-b}.
/// Upper bound b2 from small times:  g ~ c0 + c1 t^{+b}.
enum class BoundTarget { Lower, Upper };

struct BoundFit {
    BoundTarget target = BoundTarget::Lower;
    double t1 = 0.0, t2 = 0.0;
    double b = 0.0, c0 = 0.0, c1 = 0.0;
    double residual = 0.0;           // sqrt of the sum of squared misfits
    double relative_residual = 0.0;  // residual / ||g|| over the window
    int samples = 0;
};

namespace detail {

struct LinearFit {
    double c0, c1, sse;
};

/// Least squares for g ~ c0 + c1 x, solved in centred form.
inline LinearFit fit_affine(std::span<const double> x, std::span<const double> g) {
    const double n = static_cast<double>(x.size());
    double mx = 0.0, mg = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        mx += x[i];
        mg += g[i];
    }
    mx /= n;
    mg /= n;
    double sxx = 0.0, sxg = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        sxx += (x[i] - mx) * (x[i] - mx);
        sxg += (x[i] - mx) * (g[i] - mg);
    }
    if (!(sxx > 0.0)) return {mg, 0.0, std::numeric_limits<double>::infinity()};
    const double c1 = sxg / sxx;
    const double c0 = mg - c1 * mx;
    double sse = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        const double e = c0 + c1 * x[i] - g[i];
        sse += e * e;
    }
    return {c0, c1, sse};
}

}  // namespace detail

/// Minimises sum_i (c0 + c1 t_i^{-/+b} - g_i)^2 over the samples with t1 <= t_i <= t2:
/// a 99-point scan of b over (0.01, 0.99), refined by Brent's method around the best
/// scan point, with (c0, c1) eliminated by linear least squares.
inline BoundFit fit_bound(const ObservationTrace& trace, double t1, double t2, BoundTarget target) {
    if (!(t1 > 0.0 && t2 > t1)) throw DomainError("fit_bound: need 0 < t1 < t2");
    const double slack = 1e-9;
    std::vector<double> lt, g;
    for (std::size_t n = 0; n < trace.size(); ++n) {
        const double t = trace.t[n];
        if (t >= t1 * (1.0 - slack) && t <= t2 * (1.0 + slack)) {
            lt.push_back(std::log(t));
            g.push_back(trace.g[n]);
        }
    }
    if (lt.size() < 8) throw DomainError("fit_bound: fewer than 8 samples inside the window");
    if (trace.t.front() > t1 * (1.0 + slack) || trace.t.back() < t2 * (1.0 - slack)) {
        throw DomainError("fit_bound: trace does not cover the window");
    }
    double gmax = 0.0, gmin = g.front(), gmax_signed = g.front(), gnorm2 = 0.0;
    for (double v : g) {
        gmax = std::max(gmax, std::abs(v));
        gmin = std::min(gmin, v);
        gmax_signed = std::max(gmax_signed, v);
        gnorm2 += v * v;
    }
    if (!(gmax_signed - gmin > 1e-14 * gmax)) throw DomainError("fit_bound: trace is constant on the window");

    const double sign = target == BoundTarget::Lower ? -1.0 : 1.0;
    std::vector<double> x(lt.size());
    const auto solve = [&](double b) {
        for (std::size_t i = 0; i < lt.size(); ++i) x[i] = std::exp(sign * b * lt[i]);
        return detail::fit_affine(x, g);
    };

    constexpr int scan = 99;
    int best = 0;
    double best_sse = std::numeric_limits<double>::infinity();
    for (int i = 0; i < scan; ++i) {
        const double sse = solve(0.01 * (i + 1)).sse;
        if (sse < best_sse) {
            best_sse = sse;
            best = i;
        }
    }
    if (!std::isfinite(best_sse)) throw DomainError("fit_bound: degenerate normal equations");
    const double lo = 0.01 * std::max(best, 1), hi = 0.01 * std::min(best + 2, scan);
    double b = 0.01 * (best + 1);
    if (hi > lo) {
        const auto r = boost::math::tools::brent_find_minima([&](double bb) { return solve(bb).sse; }, lo, hi, 40);
        if (r.second <= best_sse) b = r.first;
    }
    const detail::LinearFit f = solve(b);
    BoundFit out;
    out.target = target;
    out.t1 = t1;
    out.t2 = t2;
    out.b = b;
    out.c0 = f.c0;
    out.c1 = f.c1;
    out.residual = std::sqrt(f.sse);
    out.relative_residual = out.residual / std::sqrt(gnorm2);
    out.samples = static_cast<int>(lt.size());
    return out;
}

// ---------------------------------------------------------------------------
// Weight recovery

/// How the conjugate coefficient gamma^k is formed.
enum class ConjugateRule {
    Smoothed,  // ||d/dalpha w^k||^2 / ||d/dalpha w^{k-1}||^2, w the smoothed gradient
    Literal,   // the same ratio with the raw gradient J'(mu^k)
    None,      // gamma = 0: projected steepest descent
};

struct CgmOptions {
    int max_iterations = 100;
    double tau_dp = 1.1;
    double delta_est = 0.0;  // expected noise norm eps ||g||_inf sqrt(T); 0 disables the discrepancy stop
    double gradient_floor = 1e-12;
    bool smooth_gradient = true;
    ConjugateRule conjugate = ConjugateRule::Smoothed;
    std::optional<std::vector<double>> truth;  // mu on the order grid, for error reporting
};

enum class StopReason { None, Discrepancy, MaxIterations, GradientFloor, ZeroSensitivity };

inline const char* to_string(StopReason r) {
    switch (r) {
        case StopReason::None: return "none";
        case StopReason::Discrepancy: return "discrepancy";
        case StopReason::MaxIterations: return "max-iterations";
        case StopReason::GradientFloor: return "gradient-floor";
        case StopReason::ZeroSensitivity: return "zero-sensitivity";
    }
    return "?";
}

struct IterationLog {
    int k = 0;
    double J = 0.0;
    double residual = 0.0;
    double error = std::numeric_limits<double>::quiet_NaN();
    double step = std::numeric_limits<double>::quiet_NaN();
};

struct RecoveryState {
    std::vector<double> alpha;
    std::vector<double> mu;            // current iterate
    std::vector<double> direction;     // d^k
    std::vector<double> smoothed;      // w^k
    double prev_derivative_norm2 = 0;  // ||d/dalpha w^{k-1}||^2
    std::vector<IterationLog> log;
    StopReason stop = StopReason::None;
    int stop_index = -1;
    std::vector<double> best_mu;  // iterate with the smallest error (when the truth is known)
    int best_index = -1;
    double best_error = std::numeric_limits<double>::infinity();
};

struct StopDecision {
    bool stop = false;
    StopReason reason = StopReason::None;
};

/// Discrepancy principle ||r^k|| <= tau_dp delta_est, or the iteration budget.
inline StopDecision stopping_rule(const RecoveryState& state, const CgmOptions& opts) {
    if (state.log.empty()) throw DomainError("stopping_rule: empty residual history");
    const IterationLog& last = state.log.back();
    if (last.residual <= opts.tau_dp * opts.delta_est) return {true, StopReason::Discrepancy};
    if (last.k >= opts.max_iterations) return {true, StopReason::MaxIterations};
    return {false, StopReason::None};
}

/// Index m of the smallest error when it lies strictly inside the history, i.e. the
/// error first goes down (errors[0] > errors[m]) and later comes back up
/// (errors.back() > errors[m]); nullopt for monotone histories.
inline std::optional<int> semiconvergence_turn(std::span<const double> errors) {
    const int n = static_cast<int>(errors.size());
    if (n < 3) return std::nullopt;
    const int m = static_cast<int>(std::min_element(errors.begin(), errors.end()) - errors.begin());
    if (m == 0 || m == n - 1) return std::nullopt;
    if (!(errors[0] > errors[m] && errors[n - 1] > errors[m])) return std::nullopt;
    return m;
}

/// Solves -w'' = g on the uniform order grid with w = 0 at both ends.
inline std::vector<double> sobolev_smooth(std::span<const double> g, double spacing) {
    const int n = static_cast<int>(g.size());
    if (n < 3) throw DomainError("sobolev_smooth: need at least 3 grid points");
    const int m = n - 2;
    TriDiag A(m);
    const double s = 1.0 / (spacing * spacing);
    for (int i = 0; i < m; ++i) {
        A.diag[i] = 2.0 * s;
        if (i > 0) A.lower[i] = -s;
        if (i + 1 < m) A.upper[i] = -s;
    }
    std::vector<double> rhs(g.begin() + 1, g.end() - 1);
    TriDiagLU(A).solve_in_place(rhs);
    std::vector<double> w(n, 0.0);
    std::copy(rhs.begin(), rhs.end(), w.begin() + 1);
    return w;
}

/// ||f'||^2 on the uniform grid by forward differences.
inline double derivative_norm2(std::span<const double> f, double spacing) {
    double s = 0.0;
    for (std::size_t i = 1; i < f.size(); ++i) {
        const double d = (f[i] - f[i - 1]) / spacing;
        s += d * d * spacing;
    }
    return s;
}

/// L2(0,1) distance with the quadrature weights of the order grid.
inline double weight_error(const AlphaQuadrature& quad, std::span<const double> a, std::span<const double> b) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += quad.weights[i] * (a[i] - b[i]) * (a[i] - b[i]);
    return std::sqrt(s);
}

inline OrderMeasure weight_measure(const AlphaQuadrature& quad, std::span<const double> mu) {
    return direction_measure(quad, mu);
}

/// Projected conjugate gradient recovery of mu from the boundary trace `data`, starting
/// from `mu0` sampled on the trapezoid order grid of `spec.quad`.
inline RecoveryState cgm_recover(const ProblemSpec& spec, const ObservationTrace& data, std::span<const double> mu0,
                                 const CgmOptions& opts) {
    if (spec.bc.kind != BoundarySpec::Kind::Neumann) throw DomainError("cgm_recover: requires a Neumann problem");
    spec.validate_observation();
    if (spec.quad.kind != AlphaQuadrature::Kind::Trapezoid) throw DomainError("cgm_recover: needs a trapezoid order grid");
    if (mu0.size() != spec.quad.nodes.size()) throw DomainError("cgm_recover: initial iterate size mismatch");
    if (static_cast<int>(data.size()) != spec.grid.steps() + 1) throw DomainError("cgm_recover: data not on the time grid");
    if (opts.truth && opts.truth->size() != mu0.size()) throw DomainError("cgm_recover: truth size mismatch");

    const FeSystem fe = assemble(spec.mesh, spec.coeff);
    const AlphaQuadrature& quad = spec.quad;
    const double spacing = 1.0 / quad.intervals();
    const int b = boundary_node(fe, spec.observe.side);

    RecoveryState st;
    st.alpha = quad.nodes;
    st.mu.assign(mu0.begin(), mu0.end());
    for (double& v : st.mu) v = std::max(v, 0.0);

    for (int k = 0;; ++k) {
        const DistributedWeights weights(spec.grid, weight_measure(quad, st.mu));
        const ForwardSolution u = step_forward(spec, fe, weights);
        const ObservationTrace model = observe(u, spec, fe);
        const std::vector<double> r = trace_residual(model, data);

        IterationLog entry;
        entry.k = k;
        entry.J = objective(spec.grid, r);
        entry.residual = time_norm(spec.grid, r);
        if (opts.truth) {
            entry.error = weight_error(quad, st.mu, *opts.truth);
            if (entry.error < st.best_error) {
                st.best_error = entry.error;
                st.best_index = k;
                st.best_mu = st.mu;
            }
        }
        st.log.push_back(entry);
        if (const StopDecision d = stopping_rule(st, opts); d.stop) {
            st.stop = d.reason;
            st.stop_index = k;
            break;
        }

        const AdjointSolution v = solve_adjoint(spec, fe, weights, r);
        const GradientSample grad = assemble_gradient(spec, fe, u, v);
        if (std::sqrt(gradient_pairing(quad, grad.value, grad.value)) <= opts.gradient_floor) {
            st.stop = StopReason::GradientFloor;
            st.stop_index = k;
            break;
        }

        const std::vector<double> w = opts.smooth_gradient ? sobolev_smooth(grad.value, spacing) : grad.value;
        const double dn2 = derivative_norm2(opts.conjugate == ConjugateRule::Literal ? grad.value : w, spacing);
        double gamma = 0.0;
        if (k > 0 && opts.conjugate != ConjugateRule::None && st.prev_derivative_norm2 > 0.0) {
            gamma = dn2 / st.prev_derivative_norm2;
        }
        st.prev_derivative_norm2 = dn2;
        if (st.direction.empty()) st.direction.assign(w.size(), 0.0);
        for (std::size_t i = 0; i < w.size(); ++i) st.direction[i] = -w[i] + gamma * st.direction[i];
        st.smoothed = w;

        const ForwardSolution ud = solve_sensitivity(spec, fe, weights, u, st.direction);
        std::vector<double> yd(ud.u.size());
        for (std::size_t n = 0; n < yd.size(); ++n) yd[n] = ud.u[n][b];
        const double denom = time_inner(spec.grid, yd, yd);
        if (!(denom > 0.0)) {
            st.stop = StopReason::ZeroSensitivity;
            st.stop_index = k;
            break;
        }
        const double s = -time_inner(spec.grid, yd, r) / denom;
        st.log.back().step = s;
        for (std::size_t i = 0; i < st.mu.size(); ++i) st.mu[i] = std::max(0.0, st.mu[i] + s * st.direction[i]);
    }
    return st;
}

}  // namespace dofrac
