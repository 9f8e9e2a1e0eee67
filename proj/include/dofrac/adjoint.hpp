#pragma once

// Adjoint, sensitivity and gradient of J(mu) = 1/2 ||u(mu)(x0,.) - g||^2_{L2(0,T)}
// for Neumann problems observed through the boundary value at x0.
//
// The time-stepping scheme is a block lower-triangular system L W = G in the
// increments W^n = U^n - U^0, with L_{n,m} = p_{n-m,n} M + delta_{nm} S. The adjoint
// is solved with L^T, i.e. the same scheme marched backwards in time from a zero
// terminal state, driven by quadrature-weighted point loads at x0. The gradient is
// therefore the exact derivative of the discrete objective.

#include <cmath>
#include <span>
#include <vector>

#include "dofrac/error.hpp"
#include "dofrac/fem1d.hpp"
#include "dofrac/forward.hpp"
#include "dofrac/fracweights.hpp"

namespace dofrac {

struct AdjointSolution {
    std::vector<std::vector<double>> v;  // V^n, n = 0..N; V^0 is identically zero
};

/// Per-order values of J'(mu) on the order quadrature nodes.
struct GradientSample {
    std::vector<double> alpha;
    std::vector<double> value;
};

/// r_n = u(x0, t_n) - g_n.
inline std::vector<double> trace_residual(const ObservationTrace& model, const ObservationTrace& data) {
    if (model.size() != data.size()) throw DomainError("trace_residual: traces have different lengths");
    std::vector<double> r(model.size());
    for (std::size_t n = 0; n < r.size(); ++n) r[n] = model.g[n] - data.g[n];
    return r;
}

/// Discrete L2(0,T) inner product with trapezoid weights.
inline double time_inner(const TimeGrid& grid, std::span<const double> a, std::span<const double> b) {
    const auto w = grid.trapezoid_weights();
    double s = 0.0;
    for (std::size_t n = 0; n < w.size(); ++n) s += w[n] * a[n] * b[n];
    return s;
}

inline double time_norm(const TimeGrid& grid, std::span<const double> a) { return std::sqrt(time_inner(grid, a, a)); }

/// J = 1/2 ||r||^2.
inline double objective(const TimeGrid& grid, std::span<const double> residual) {
    return 0.5 * time_inner(grid, residual, residual);
}

namespace detail {

inline void require_neumann_value_observation(const ProblemSpec& spec) {
    if (spec.bc.kind != BoundarySpec::Kind::Neumann) {
        throw DomainError("adjoint: only Neumann problems (value observations) are supported");
    }
    spec.validate_observation();
}

}  // namespace detail

/// Backward solve of L^T V = R with R^n = w_n r_n e_{x0}.
inline AdjointSolution solve_adjoint(const ProblemSpec& spec, const FeSystem& fe, const DistributedWeights& weights,
                                     std::span<const double> residual) {
    detail::require_neumann_value_observation(spec);
    const TimeGrid& grid = spec.grid;
    const int N = grid.steps();
    if (static_cast<int>(residual.size()) != N + 1) throw DomainError("solve_adjoint: residual length mismatch");
    const int nn = fe.size();
    const int b = boundary_node(fe, spec.observe.side);
    const auto tw = grid.trapezoid_weights();

    AdjointSolution adj;
    adj.v.assign(static_cast<std::size_t>(N) + 1, std::vector<double>(nn, 0.0));
    std::vector<double> acc(nn), rhs(nn);
    TriDiagLU lu;
    double factored_lead = std::numeric_limits<double>::quiet_NaN();
    for (int m = N; m >= 1; --m) {
        std::fill(acc.begin(), acc.end(), 0.0);
        for (int n = m + 1; n <= N; ++n) {
            const double c = weights.row(n)[n - m];
            const auto& vn = adj.v[n];
            for (int i = 0; i < nn; ++i) acc[i] += c * vn[i];
        }
        fe.mass.apply(acc, rhs);
        for (int i = 0; i < nn; ++i) rhs[i] = -rhs[i];
        rhs[b] += tw[m] * residual[m];
        const double lead = weights.leading(m);
        if (!(lead == factored_lead)) {
            lu = TriDiagLU(TriDiag::combine(lead, fe.mass, 1.0, fe.stiffness));
            factored_lead = lead;
        }
        lu.solve_in_place(rhs);
        adj.v[m] = rhs;
    }
    return adj;
}

/// Order measure of a direction h sampled on the quadrature nodes.
inline OrderMeasure direction_measure(const AlphaQuadrature& quad, std::span<const double> h) {
    if (h.size() != quad.nodes.size()) throw DomainError("direction grid mismatch");
    OrderMeasure m;
    m.alpha = quad.nodes;
    m.mass.resize(h.size());
    for (std::size_t i = 0; i < h.size(); ++i) m.mass[i] = quad.weights[i] * h[i];
    return m;
}

/// Derivative u_h of the solution in direction h: zero initial state, homogeneous
/// boundary data and load -M sum_i w_i h_i d^{alpha_i}(U - U^0).
inline ForwardSolution solve_sensitivity(const ProblemSpec& spec, const FeSystem& fe, const DistributedWeights& weights,
                                         const ForwardSolution& base, std::span<const double> h) {
    const TimeGrid& grid = spec.grid;
    if (!(base.grid == grid)) throw DomainError("solve_sensitivity: base solution on a different grid");
    const DistributedWeights dh(grid, direction_measure(spec.quad, h));
    const int nn = fe.size();
    const int N = grid.steps();
    std::vector<std::vector<double>> loads(static_cast<std::size_t>(N) + 1, std::vector<double>(nn, 0.0));
    std::vector<double> d(nn);
    for (int n = 1; n <= N; ++n) {
        const auto row = dh.row(n);
        std::fill(d.begin(), d.end(), 0.0);
        for (int j = 0; j < n; ++j) {
            const double c = row[j];
            const auto& un = base.u[n - j];
            const auto& u0 = base.u[0];
            for (int i = 0; i < nn; ++i) d[i] += c * (un[i] - u0[i]);
        }
        fe.mass.apply(d, loads[n]);
        for (double& v : loads[n]) v = -v;
    }
    const std::vector<double> zero(nn, 0.0);
    return detail::march(
        fe, weights, grid, spec.bc.kind, zero, [&](int n) { return loads[n]; },
        [](int) { return BoundaryValues{}; });
}

/// J'(mu)(alpha_i) = -sum_n (V^n)^T M d^{alpha_i}(U - U^0)^n on the quadrature nodes.
inline GradientSample assemble_gradient(const ProblemSpec& spec, const FeSystem& fe, const ForwardSolution& u,
                                        const AdjointSolution& v) {
    const TimeGrid& grid = spec.grid;
    const int N = grid.steps();
    if (!(u.grid == grid) || static_cast<int>(v.v.size()) != N + 1) {
        throw DomainError("assemble_gradient: grid mismatch");
    }
    const int nn = fe.size();
    // Y^n = M V^n
    std::vector<std::vector<double>> y(static_cast<std::size_t>(N) + 1, std::vector<double>(nn, 0.0));
    for (int n = 1; n <= N; ++n) fe.mass.apply(v.v[n], y[n]);
    const auto inner = [&](int n, int m) {
        double s = 0.0;
        const auto& a = y[n];
        const auto& um = u.u[m];
        const auto& u0 = u.u[0];
        for (int i = 0; i < nn; ++i) s += a[i] * (um[i] - u0[i]);
        return s;
    };

    GradientSample g;
    g.alpha = spec.quad.nodes;
    g.value.assign(g.alpha.size(), 0.0);
    std::vector<double> b;
    if (grid.is_uniform()) {
        // Toeplitz: collect Z_k = sum_{n-m=k} z_{n,m} once, then one dot product per order.
        std::vector<double> z(static_cast<std::size_t>(N), 0.0);
        for (int n = 1; n <= N; ++n) {
            for (int m = 1; m <= n; ++m) z[n - m] += inner(n, m);
        }
        for (std::size_t i = 0; i < g.alpha.size(); ++i) {
            detail::l1_row(grid, g.alpha[i], N, b);
            double s = 0.0;
            for (int k = 0; k < N; ++k) s += b[k] * z[k];
            g.value[i] = -s;
        }
        return g;
    }
    std::vector<std::vector<double>> z(static_cast<std::size_t>(N) + 1);
    for (int n = 1; n <= N; ++n) {
        z[n].resize(static_cast<std::size_t>(n) + 1);
        for (int m = 1; m <= n; ++m) z[n][m] = inner(n, m);
    }
    for (std::size_t i = 0; i < g.alpha.size(); ++i) {
        double s = 0.0;
        for (int n = 1; n <= N; ++n) {
            detail::l1_row(grid, g.alpha[i], n, b);
            for (int m = 1; m <= n; ++m) s += b[n - m] * z[n][m];
        }
        g.value[i] = -s;
    }
    return g;
}

/// <J'(mu), h> with the quadrature weights of the order grid.
inline double gradient_pairing(const AlphaQuadrature& quad, std::span<const double> grad, std::span<const double> h) {
    double s = 0.0;
    for (std::size_t i = 0; i < h.size(); ++i) s += quad.weights[i] * grad[i] * h[i];
    return s;
}

}  // namespace dofrac
