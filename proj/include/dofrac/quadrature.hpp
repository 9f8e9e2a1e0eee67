#pragma once

// Gauss-Legendre rules and composite integration helpers (real or complex
// integrands). Nodes come from Boost.Math; everything else is a thin layer.

#include <boost/math/quadrature/gauss.hpp>
#include <boost/math/quadrature/gauss_kronrod.hpp>

#include <cmath>
#include <vector>

#include "dofrac/error.hpp"

namespace dofrac::quad {

/// Gauss-Legendre nodes/weights on [-1, 1].
struct GaussRule {
    std::vector<double> x;
    std::vector<double> w;
};

namespace detail {

template <unsigned N>
GaussRule expand() {
    using G = boost::math::quadrature::gauss<double, N>;
    const auto& a = G::abscissa();
    const auto& wt = G::weights();
    GaussRule r;
    // Boost stores the non-negative half; N odd includes the origin once.
    for (std::size_t i = 0; i < a.size(); ++i) {
        if (a[i] == 0.0) {
            r.x.push_back(0.0);
            r.w.push_back(wt[i]);
        } else {
            r.x.push_back(-a[i]);
            r.w.push_back(wt[i]);
            r.x.push_back(a[i]);
            r.w.push_back(wt[i]);
        }
    }
    return r;
}

}  // namespace detail

/// Rules with 8, 16, 32 or 64 points.
inline const GaussRule& gauss_rule(int points) {
    static const GaussRule r8 = detail::expand<8>();
    static const GaussRule r16 = detail::expand<16>();
    static const GaussRule r32 = detail::expand<32>();
    static const GaussRule r64 = detail::expand<64>();
    switch (points) {
        case 8: return r8;
        case 16: return r16;
        case 32: return r32;
        case 64: return r64;
        default: throw DomainError("gauss_rule: supported sizes are 8, 16, 32, 64");
    }
}

/// Composite Gauss-Legendre over [a, b] split into `panels` equal pieces.
template <class F>
auto composite(F&& f, double a, double b, int panels, int points) {
    const GaussRule& g = gauss_rule(points);
    const double h = (b - a) / panels;
    decltype(f(a)) sum{};
    for (int k = 0; k < panels; ++k) {
        const double mid = a + (k + 0.5) * h;
        decltype(f(a)) part{};
        for (std::size_t i = 0; i < g.x.size(); ++i) part += g.w[i] * f(mid + 0.5 * h * g.x[i]);
        sum += part * (0.5 * h);
    }
    return sum;
}

/// Adaptive Gauss-Kronrod (15-point) for smooth real integrands.
template <class F>
double adaptive(F&& f, double a, double b, double rel_tol = 1e-12, double* error = nullptr) {
    double err = 0.0;
    const double v = boost::math::quadrature::gauss_kronrod<double, 15>::integrate(f, a, b, 20, rel_tol, &err);
    if (error) *error = err;
    return v;
}

}  // namespace dofrac::quad
