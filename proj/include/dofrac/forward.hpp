#pragma once

// Fully discrete solver for the distributed-order problem
//   d^[mu]_t u + A u = sigma(t) f(x),  boundary condition R u, u(0) = u0,
// with P1 elements in space and the L1 distributed-order weights in time.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <random>
#include <span>
#include <vector>

#include "dofrac/error.hpp"
#include "dofrac/expr.hpp"
#include "dofrac/fem1d.hpp"
#include "dofrac/fracweights.hpp"

namespace dofrac {

enum class TraceKind { Dirichlet, ConormalFlux };

struct Observation {
    Side side = Side::Left;
    TraceKind kind = TraceKind::ConormalFlux;
};

struct ProblemSpec {
    Mesh1D mesh = Mesh1D::uniform(64);
    CoefficientField coeff;
    BoundarySpec bc;
    Expr u0 = Expr::number(0.0);     // in x
    Expr f = Expr::number(0.0);      // in x
    Expr sigma = Expr::number(1.0);  // in t
    WeightDistribution mu = WeightDistribution::indicator(0.2, 0.8);
    AlphaQuadrature quad = AlphaQuadrature::trapezoid(128);
    TimeGrid grid = TimeGrid::uniform(1.0, 100);
    Observation observe;

    /// The observed trace must be the one complementary to the boundary condition:
    /// Dirichlet condition -> flux observed, Neumann condition -> value observed.
    void validate_observation() const {
        const bool ok = (bc.kind == BoundarySpec::Kind::Dirichlet && observe.kind == TraceKind::ConormalFlux) ||
                        (bc.kind == BoundarySpec::Kind::Neumann && observe.kind == TraceKind::Dirichlet);
        if (!ok) throw DomainError("observation kind incompatible with the boundary condition");
    }
};

/// Nodal history U^n, the discrete distributed derivative D^n used for flux
/// recovery, and the load vectors F^n (including Neumann boundary terms).
struct ForwardSolution {
    TimeGrid grid;
    std::vector<std::vector<double>> u;
    std::vector<std::vector<double>> rate;
    std::vector<std::vector<double>> load;

    int steps() const { return grid.steps(); }
};

struct ObservationTrace {
    struct Provenance {
        bool noisy = false;
        double eps = 0.0;
        std::uint64_t seed = 0;
    };
    std::vector<double> t;
    std::vector<double> g;
    Provenance provenance;

    std::size_t size() const { return t.size(); }
    double sup_norm() const {
        double m = 0.0;
        for (double v : g) m = std::max(m, std::abs(v));
        return m;
    }
};

/// Boundary data for one step: Dirichlet values (or Neumann fluxes) at both ends.
struct BoundaryValues {
    double left = 0.0;
    double right = 0.0;
};

namespace detail {

inline BoundaryValues boundary_values(const BoundarySpec& bc, double t) {
    return {eval(bc.left, "t", t), eval(bc.right, "t", t)};
}

/// Marches M sum_m l_{n,m}(U^m - U^0) + S U^n = load(n) for n = 1..N.
/// Dirichlet rows are replaced by the prescribed values.
inline ForwardSolution march(const FeSystem& fe, const DistributedWeights& weights, const TimeGrid& grid,
                             BoundarySpec::Kind bc_kind, std::span<const double> u0,
                             const std::function<std::vector<double>(int)>& load_at,
                             const std::function<BoundaryValues(int)>& dirichlet_at) {
    if (weights.steps() != grid.steps()) throw SolverError("weight table does not match the time grid");
    const int nn = fe.size();
    const int N = grid.steps();
    const bool dirichlet = bc_kind == BoundarySpec::Kind::Dirichlet;

    ForwardSolution sol{grid, {}, {}, {}};
    sol.u.reserve(N + 1);
    sol.rate.reserve(N + 1);
    sol.load.reserve(N + 1);

    std::vector<std::vector<double>> w;  // W^n = U^n - U^0
    w.reserve(N + 1);
    sol.u.emplace_back(u0.begin(), u0.end());
    w.emplace_back(nn, 0.0);

    // Limit of the discrete derivative as t -> 0: M D^0 = F^0 - S U^0 on the free nodes.
    {
        std::vector<double> f0 = load_at(0);
        std::vector<double> r = fe.stiffness.apply(u0);
        for (int i = 0; i < nn; ++i) r[i] = f0[i] - r[i];
        TriDiag Mk = fe.mass;
        if (dirichlet) {
            detail::impose_dirichlet_rows(Mk);
            r.front() = 0.0;
            r.back() = 0.0;
        }
        TriDiagLU(Mk).solve_in_place(r);
        sol.rate.push_back(std::move(r));
        sol.load.push_back(std::move(f0));
    }

    TriDiagLU lu;
    double factored_lead = std::numeric_limits<double>::quiet_NaN();
    std::vector<double> hist(nn), rhs(nn), tmp(nn);
    for (int n = 1; n <= N; ++n) {
        const auto row = weights.row(n);
        const double lead = row[0];
        std::fill(hist.begin(), hist.end(), 0.0);
        for (int j = 1; j < n; ++j) {
            const double c = row[j];
            const auto& wj = w[n - j];
            for (int i = 0; i < nn; ++i) hist[i] += c * wj[i];
        }
        if (!(lead == factored_lead)) {
            TriDiag K = TriDiag::combine(lead, fe.mass, 1.0, fe.stiffness);
            if (dirichlet) detail::impose_dirichlet_rows(K);
            lu = TriDiagLU(K);
            factored_lead = lead;
        }
        // rhs = F^n + M (lead U^0 - H)
        for (int i = 0; i < nn; ++i) tmp[i] = lead * u0[i] - hist[i];
        fe.mass.apply(tmp, rhs);
        std::vector<double> fn = load_at(n);
        for (int i = 0; i < nn; ++i) rhs[i] += fn[i];
        if (dirichlet) {
            const BoundaryValues bv = dirichlet_at(n);
            rhs.front() = bv.left;
            rhs.back() = bv.right;
        }
        lu.solve_in_place(rhs);

        std::vector<double> wn(nn), dn(nn);
        for (int i = 0; i < nn; ++i) {
            wn[i] = rhs[i] - u0[i];
            dn[i] = lead * wn[i] + hist[i];
        }
        sol.u.push_back(rhs);
        sol.rate.push_back(std::move(dn));
        sol.load.push_back(std::move(fn));
        w.push_back(std::move(wn));
    }
    return sol;
}

}  // namespace detail

/// Load vector sigma(t) (f, phi_i) plus Neumann boundary terms at time t.
inline std::vector<double> problem_load(const ProblemSpec& spec, std::span<const double> f_load, double t) {
    const double s = eval(spec.sigma, "t", t);
    std::vector<double> b(f_load.size());
    for (std::size_t i = 0; i < b.size(); ++i) b[i] = s * f_load[i];
    if (spec.bc.kind == BoundarySpec::Kind::Neumann) {
        const BoundaryValues g = detail::boundary_values(spec.bc, t);
        b.front() += g.left;
        b.back() += g.right;
    }
    return b;
}

inline ForwardSolution step_forward(const ProblemSpec& spec, const FeSystem& fe, const DistributedWeights& weights) {
    std::vector<double> u0 = interpolate(spec.mesh, spec.u0);
    if (spec.bc.kind == BoundarySpec::Kind::Dirichlet) {
        const BoundaryValues g = detail::boundary_values(spec.bc, 0.0);
        u0.front() = g.left;
        u0.back() = g.right;
    }
    const std::vector<double> f_load = load_vector(spec.mesh, spec.f);
    return detail::march(
        fe, weights, spec.grid, spec.bc.kind, u0,
        [&](int n) { return problem_load(spec, f_load, spec.grid[n]); },
        [&](int n) { return detail::boundary_values(spec.bc, spec.grid[n]); });
}

/// Assembles the system and weights for `spec` and runs the solver.
inline ForwardSolution step_forward(const ProblemSpec& spec) {
    const FeSystem fe = assemble(spec.mesh, spec.coeff);
    const DistributedWeights weights(spec.grid, spec.mu, spec.quad);
    return step_forward(spec, fe, weights);
}

inline int boundary_node(const FeSystem& fe, Side side) { return side == Side::Left ? 0 : fe.size() - 1; }

/// Extracts the observed boundary trace: nodal value (Neumann problems) or consistent
/// conormal flux (Dirichlet problems).
inline ObservationTrace observe(const ForwardSolution& sol, const ProblemSpec& spec, const FeSystem& fe) {
    spec.validate_observation();
    ObservationTrace tr;
    tr.t = sol.grid.nodes();
    tr.g.resize(tr.t.size());
    const int b = boundary_node(fe, spec.observe.side);
    for (int n = 0; n <= sol.steps(); ++n) {
        tr.g[n] = spec.observe.kind == TraceKind::Dirichlet
                      ? sol.u[n][b]
                      : boundary_flux(fe, sol.u[n], sol.rate[n], sol.load[n], spec.observe.side);
    }
    return tr;
}

inline ObservationTrace observe(const ForwardSolution& sol, const ProblemSpec& spec) {
    return observe(sol, spec, assemble(spec.mesh, spec.coeff));
}

/// g_delta(t_n) = g(t_n) + eps ||g||_inf xi_n with xi_n i.i.d. standard normal drawn
/// from a generator seeded with `seed`.
inline ObservationTrace add_noise(const ObservationTrace& trace, double eps, std::uint64_t seed) {
    if (eps < 0.0) throw DomainError("add_noise: noise level must be non-negative");
    if (trace.provenance.noisy) throw DomainError("add_noise: trace is already noisy");
    ObservationTrace out = trace;
    out.provenance = {true, eps, seed};
    if (eps == 0.0) return out;
    const double scale = eps * trace.sup_norm();
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> xi(0.0, 1.0);
    for (double& v : out.g) v += scale * xi(rng);
    return out;
}

}  // namespace dofrac
