#pragma once

// Kernel moments of the order weight and the contour integrals that govern the
// small- and large-time behaviour of boundary observations:
//
//   P(t)    = int t^{-alpha} mu(alpha) dalpha
//   Q(t,p)  = int t^{-alpha} p^alpha mu(alpha) dalpha
//   Qc(t)   = 1/(2 pi i) int_gamma e^p Q(t,p)^{-1} dp
//   Pc(t)   = 1/(2 pi i) int_gamma e^p Q(t,p) dp
//
// gamma = gamma(delta, theta): the ray arg p = -theta coming in from infinity, the arc
// |p| = delta, and the ray arg p = theta going out to infinity.

#include <algorithm>
#include <cmath>
#include <complex>
#include <functional>
#include <limits>
#include <numbers>
#include <string>
#include <vector>

#include "dofrac/error.hpp"
#include "dofrac/fracweights.hpp"
#include "dofrac/quadrature.hpp"

namespace dofrac {

using cplx = std::complex<double>;

struct ContourParams {
    double delta = 1.0;
    double theta = std::numeric_limits<double>::quiet_NaN();  // NaN: midpoint of the admissible interval
    double r_max = std::numeric_limits<double>::quiet_NaN();  // NaN: 40 / |cos theta|
    double panel_length = 1.0;                                 // target panel length along the contour
    int points = 16;                                           // Gauss points per panel
    double tolerance = 1e-6;                                   // relative change allowed on panel doubling
};

/// Admissible angles for support upper bound b2: (pi/2, min(pi/(2 b2), pi)).
inline std::pair<double, double> theta_interval(double b2) {
    const double hi = b2 > 0.5 ? std::numbers::pi / (2.0 * b2) : std::numbers::pi;
    return {std::numbers::pi / 2.0, hi};
}

/// Fills in the defaults of `cp` and checks them against the support bound b2.
inline ContourParams resolve(ContourParams cp, double b2) {
    const auto [lo, hi] = theta_interval(b2);
    if (!(hi > lo)) throw DomainError("contour: no admissible angle for b2 = " + std::to_string(b2));
    if (std::isnan(cp.theta)) cp.theta = 0.5 * (lo + hi);
    if (!(cp.theta > lo && cp.theta < hi)) throw DomainError("contour: theta outside the admissible interval");
    if (std::isnan(cp.r_max)) cp.r_max = 40.0 / std::abs(std::cos(cp.theta));
    if (!(cp.delta > 0.0) || !(cp.r_max > cp.delta)) throw DomainError("contour: need 0 < delta < r_max");
    if (std::exp(cp.r_max * std::cos(cp.theta)) > 1e-16) throw DomainError("contour: ray truncation too short");
    if (!(cp.panel_length > 0.0)) throw DomainError("contour: panel length must be positive");
    return cp;
}

namespace detail {

inline cplx contour_sum(const std::function<cplx(cplx)>& f, const ContourParams& cp, int refine) {
    const double th = cp.theta;
    const cplx up = std::polar(1.0, th), down = std::polar(1.0, -th);
    const double ray_len = cp.r_max - cp.delta;
    const int ray_panels = refine * std::max(1, static_cast<int>(std::ceil(ray_len / cp.panel_length)));
    const int arc_panels = refine * std::max(1, static_cast<int>(std::ceil(2.0 * th * cp.delta / cp.panel_length)));
    // incoming ray minus outgoing ray reversed: int_delta^R [f(r e^{i th}) e^{i th} - f(r e^{-i th}) e^{-i th}] dr
    const cplx rays = quad::composite([&](double r) { return f(r * up) * up - f(r * down) * down; }, cp.delta,
                                      cp.r_max, ray_panels, cp.points);
    const cplx arc = quad::composite(
        [&](double b) {
            const cplx p = std::polar(cp.delta, b);
            return f(p) * cplx(0.0, 1.0) * p;
        },
        -th, th, arc_panels, cp.points);
    return (rays + arc) / cplx(0.0, 2.0 * std::numbers::pi);
}

}  // namespace detail

/// (1/2 pi i) int_gamma f(p) dp with panel doubling until the relative change is
/// below cp.tolerance. Throws SolverError if that does not happen within a few doublings.
inline cplx contour_integral(const std::function<cplx(cplx)>& f, const ContourParams& cp) {
    cplx prev = detail::contour_sum(f, cp, 1);
    for (int refine = 2; refine <= 16; refine *= 2) {
        const cplx cur = detail::contour_sum(f, cp, refine);
        const double scale = std::max(std::abs(cur), 1e-300);
        if (std::abs(cur - prev) <= cp.tolerance * scale || std::abs(cur - prev) <= 1e-14) return cur;
        prev = cur;
    }
    throw SolverError("contour integral did not converge under panel doubling");
}

/// Evaluates int e^{c alpha} mu(alpha) dalpha for complex c; everything here is a
/// moment of this form with c = log p - log t.
class KernelMoments {
public:
    explicit KernelMoments(const WeightDistribution& mu) : b1_(mu.b1()), b2_(mu.b2()), indicator_(mu.is_indicator()) {
        if (const auto* at = std::get_if<WeightDistribution::Atoms>(&mu.mode())) {
            nodes_ = at->alpha;
            weights_ = at->weight;
            return;
        }
        if (indicator_) return;
        // Composite Gauss on the support; for grid-backed weights the panels follow the
        // sample cells so the piecewise-linear kinks sit on panel edges.
        std::vector<double> edges;
        if (const auto* g = std::get_if<WeightDistribution::Grid>(&mu.mode())) {
            const int n = static_cast<int>(g->values.size()) - 1;
            edges.push_back(b1_);
            for (int i = 1; i < n; ++i) {
                const double a = static_cast<double>(i) / n;
                if (a > b1_ && a < b2_) edges.push_back(a);
            }
            edges.push_back(b2_);
        } else {
            constexpr int panels = 32;
            for (int i = 0; i <= panels; ++i) edges.push_back(b1_ + (b2_ - b1_) * i / panels);
        }
        const quad::GaussRule& rule = quad::gauss_rule(16);
        for (std::size_t k = 1; k < edges.size(); ++k) {
            const double mid = 0.5 * (edges[k] + edges[k - 1]), half = 0.5 * (edges[k] - edges[k - 1]);
            for (std::size_t i = 0; i < rule.x.size(); ++i) {
                const double a = mid + half * rule.x[i];
                nodes_.push_back(a);
                weights_.push_back(half * rule.w[i] * mu.density(a));
            }
        }
    }

    double b1() const { return b1_; }
    double b2() const { return b2_; }

    cplx moment(cplx c) const {
        if (indicator_) {
            const double len = b2_ - b1_;
            const cplx z = c * len;
            if (std::abs(z) < 1e-3) {
                return std::exp(c * b1_) * len * (1.0 + z / 2.0 + z * z / 6.0 + z * z * z / 24.0);
            }
            return (std::exp(c * b2_) - std::exp(c * b1_)) / c;
        }
        cplx s = 0.0;
        for (std::size_t i = 0; i < nodes_.size(); ++i) s += weights_[i] * std::exp(c * nodes_[i]);
        return s;
    }

    /// V(p) = int p^alpha mu dalpha.
    cplx V(cplx p) const { return moment(checked_log(p)); }

    /// Q(t, p) = int (p/t)^alpha mu dalpha.
    cplx Q(double t, cplx p) const {
        if (!(t > 0.0)) throw DomainError("Q: t must be positive");
        return moment(checked_log(p) - std::log(t));
    }

private:
    static cplx checked_log(cplx p) {
        if (p.imag() == 0.0 && p.real() <= 0.0) throw DomainError("Q: p lies on the branch cut (-inf, 0]");
        return std::log(p);
    }

    double b1_, b2_;
    bool indicator_;
    std::vector<double> nodes_;
    std::vector<double> weights_;
};

/// P(t) = int t^{-alpha} mu dalpha by adaptive Gauss-Kronrod over [b1, b2].
inline double eval_P(double t, const WeightDistribution& mu) {
    if (!(t > 0.0)) throw DomainError("eval_P: t must be positive");
    const double lt = std::log(t);
    if (const auto* at = std::get_if<WeightDistribution::Atoms>(&mu.mode())) {
        double s = 0.0;
        for (std::size_t i = 0; i < at->alpha.size(); ++i) s += at->weight[i] * std::exp(-lt * at->alpha[i]);
        return s;
    }
    return quad::adaptive([&](double a) { return std::exp(-lt * a) * mu.density(a); }, mu.b1(), mu.b2(), 1e-12);
}

inline cplx eval_Q(double t, cplx p, const WeightDistribution& mu) { return KernelMoments(mu).Q(t, p); }

/// Real part of Qc(t); the imaginary part vanishes by conjugate symmetry of the contour.
inline double contour_Q(double t, const KernelMoments& km, const ContourParams& cp = {}) {
    if (!(t > 0.0)) throw DomainError("contour_Q: t must be positive");
    const ContourParams c = resolve(cp, km.b2());
    return contour_integral([&](cplx p) { return std::exp(p) / km.Q(t, p); }, c).real();
}

inline double contour_P(double t, const KernelMoments& km, const ContourParams& cp = {}) {
    if (!(t > 0.0)) throw DomainError("contour_P: t must be positive");
    const ContourParams c = resolve(cp, km.b2());
    return contour_integral([&](cplx p) { return std::exp(p) * km.Q(t, p); }, c).real();
}

inline double contour_Q(double t, const WeightDistribution& mu, const ContourParams& cp = {}) {
    return contour_Q(t, KernelMoments(mu), cp);
}
inline double contour_P(double t, const WeightDistribution& mu, const ContourParams& cp = {}) {
    return contour_P(t, KernelMoments(mu), cp);
}

/// Leading small-time term t^{-1} Qc(t) R*h(x0).
inline double predict_small_t(double t, const KernelMoments& km, double boundary_value, const ContourParams& cp = {}) {
    if (boundary_value == 0.0) return 0.0;
    return contour_Q(t, km, cp) * boundary_value / t;
}

/// Leading large-time term -t^{-1} R*A^{-2}h(x0) Pc(t).
inline double predict_large_t(double t, const KernelMoments& km, double a2_boundary_value, const ContourParams& cp = {}) {
    if (a2_boundary_value == 0.0) return 0.0;
    return -a2_boundary_value * contour_P(t, km, cp) / t;
}

enum class Trend { Vanishing, Diverging };

inline const char* to_string(Trend tr) { return tr == Trend::Vanishing ? "vanishing" : "diverging"; }

/// Samples of t^b P(t) for large t and t^{-b}/P(t) for small t, with the observed
/// trend at the extreme sample and the trend the support bounds predict.
struct LimitReport {
    double b = 0.0;
    std::vector<double> large_t, large_value;
    std::vector<double> small_t, small_value;
    double large_slope = 0.0;  // d log(t^b P) / d log t at the largest t
    double small_slope = 0.0;  // d log(t^{-b}/P) / d log t at the smallest t
    Trend large_observed = Trend::Vanishing, large_expected = Trend::Vanishing;
    Trend small_observed = Trend::Vanishing, small_expected = Trend::Vanishing;

    bool consistent() const { return large_observed == large_expected && small_observed == small_expected; }
};

/// The sample values alone can mislead (the approach to the limit carries 1/log t
/// factors), so the trend is read off the local log-log slope at the extreme sample.
inline LimitReport check_limits(const WeightDistribution& mu, double b) {
    if (b == mu.b1() || b == mu.b2()) throw DomainError("check_limits: b must differ from the support bounds");
    LimitReport r;
    r.b = b;
    const auto large = [&](double t) { return std::pow(t, b) * eval_P(t, mu); };
    const auto small = [&](double t) { return std::pow(t, -b) / eval_P(t, mu); };
    for (int e = 2; e <= 6; ++e) {
        const double t = std::pow(10.0, e);
        r.large_t.push_back(t);
        r.large_value.push_back(large(t));
    }
    for (int e = -6; e <= -2; ++e) {
        const double t = std::pow(10.0, e);
        r.small_t.push_back(t);
        r.small_value.push_back(small(t));
    }
    constexpr double h = 0.01;
    const auto slope = [&](auto&& f, double t) {
        return (std::log(f(t * std::exp(h))) - std::log(f(t * std::exp(-h)))) / (2.0 * h);
    };
    r.large_slope = slope(large, r.large_t.back());
    r.small_slope = slope(small, r.small_t.front());
    r.large_observed = r.large_slope < 0.0 ? Trend::Vanishing : Trend::Diverging;
    r.small_observed = r.small_slope > 0.0 ? Trend::Vanishing : Trend::Diverging;
    r.large_expected = b < mu.b1() ? Trend::Vanishing : Trend::Diverging;
    r.small_expected = b < mu.b2() ? Trend::Vanishing : Trend::Diverging;
    return r;
}

}  // namespace dofrac
