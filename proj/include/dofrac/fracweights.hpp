#pragma once

// Time grids, L1 convolution weights for single fractional orders and the
// distributed-order weights obtained by quadrature in the order variable.

#include <algorithm>
#include <cmath>
#include <numeric>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include "dofrac/error.hpp"
#include "dofrac/expr.hpp"

namespace dofrac {

/// Euler's Gamma function. Throws DomainError at the poles z = 0, -1, -2, ...
inline double gamma_fn(double z) {
    if (!std::isfinite(z)) throw DomainError("gamma_fn: non-finite argument");
    if (z <= 0.0 && z == std::floor(z)) {
        throw DomainError("gamma_fn: pole at non-positive integer " + std::to_string(z));
    }
    return std::tgamma(z);
}

// ---------------------------------------------------------------------------
// TimeGrid

class TimeGrid {
public:
    enum class Kind { Uniform, Geometric, Explicit };

    /// t_n = n T / N.
    static TimeGrid uniform(double horizon, int steps) {
        if (!(horizon > 0.0)) throw DomainError("TimeGrid: horizon must be positive");
        if (steps < 1) throw DomainError("TimeGrid: need at least one step");
        std::vector<double> t(static_cast<std::size_t>(steps) + 1);
        const double tau = horizon / steps;
        for (int n = 0; n <= steps; ++n) t[n] = n * tau;
        t.back() = horizon;
        return TimeGrid(Kind::Uniform, std::move(t), 1.0);
    }

    /// t_0 = 0 followed by log-uniform nodes 10^(e0 + k/per_decade), e0 = log10(t_first),
    /// up to the first node >= t_end. Whole decades are hit exactly when e0 is an integer.
    static TimeGrid geometric(double t_first, double t_end, int per_decade) {
        if (!(t_first > 0.0) || !(t_end > t_first)) {
            throw DomainError("TimeGrid: geometric grid needs 0 < t_first < t_end");
        }
        if (per_decade < 1) throw DomainError("TimeGrid: per_decade must be >= 1");
        const double e0 = std::log10(t_first);
        std::vector<double> t{0.0};
        for (int k = 0;; ++k) {
            const double tk = std::pow(10.0, e0 + static_cast<double>(k) / per_decade);
            t.push_back(tk);
            if (tk >= t_end * (1.0 - 1e-12)) break;
        }
        return TimeGrid(Kind::Geometric, std::move(t), std::pow(10.0, 1.0 / per_decade));
    }

    static TimeGrid explicit_nodes(std::vector<double> t) {
        if (t.size() < 2) throw DomainError("TimeGrid: need at least two nodes");
        if (t.front() != 0.0) throw DomainError("TimeGrid: first node must be 0");
        for (std::size_t i = 1; i < t.size(); ++i) {
            if (!(t[i] > t[i - 1])) throw DomainError("TimeGrid: nodes must be strictly increasing");
        }
        return TimeGrid(Kind::Explicit, std::move(t), 1.0);
    }

    Kind kind() const { return kind_; }
    bool is_uniform() const { return kind_ == Kind::Uniform; }
    double ratio() const { return ratio_; }
    int steps() const { return static_cast<int>(t_.size()) - 1; }
    double horizon() const { return t_.back(); }
    double operator[](int n) const { return t_[static_cast<std::size_t>(n)]; }
    double step(int k) const { return t_[k] - t_[k - 1]; }
    const std::vector<double>& nodes() const { return t_; }

    /// Trapezoid weights for the discrete L2(0,T) inner product on the nodes.
    std::vector<double> trapezoid_weights() const {
        std::vector<double> w(t_.size(), 0.0);
        for (int k = 1; k <= steps(); ++k) {
            w[k - 1] += 0.5 * step(k);
            w[k] += 0.5 * step(k);
        }
        return w;
    }

    friend bool operator==(const TimeGrid& a, const TimeGrid& b) { return a.t_ == b.t_; }

private:
    TimeGrid(Kind kind, std::vector<double> t, double ratio) : kind_(kind), t_(std::move(t)), ratio_(ratio) {}

    Kind kind_;
    std::vector<double> t_;
    double ratio_;
};

// ---------------------------------------------------------------------------
// L1 weights

namespace detail {

// x^e with the convention 0^e = 0 for e >= 0 (the limit from e > 0).
inline double pow0(double x, double e) { return x <= 0.0 ? 0.0 : std::pow(x, e); }

// b_{j,n} for j = 0..n (coefficient of u^{n-j}); alpha in [0,1].
inline void l1_row(const TimeGrid& grid, double alpha, int n, std::vector<double>& b) {
    b.assign(static_cast<std::size_t>(n) + 1, 0.0);
    const double e = 1.0 - alpha;
    if (grid.is_uniform()) {
        const double scale = 1.0 / (std::tgamma(2.0 - alpha) * std::pow(grid.step(1), alpha));
        b[0] = scale;
        for (int j = 1; j < n; ++j) {
            b[j] = scale * (pow0(j + 1.0, e) + pow0(j - 1.0, e) - 2.0 * pow0(j, e));
        }
        b[n] = -scale * (pow0(n, e) - pow0(n - 1.0, e));
        return;
    }
    // Increment form: coefficient of (u^k - u^{k-1}) is
    //   a_k = [(t_n - t_{k-1})^{1-a} - (t_n - t_k)^{1-a}] / [Gamma(2-a) (t_k - t_{k-1})].
    const double g = std::tgamma(2.0 - alpha);
    const double tn = grid[n];
    double prev = pow0(tn - grid[0], e);
    for (int k = 1; k <= n; ++k) {
        const double cur = pow0(tn - grid[k], e);
        const double ak = (prev - cur) / (g * grid.step(k));
        // a_k multiplies u^k (j = n-k) with +, and u^{k-1} (j = n-k+1) with -.
        b[n - k] += ak;
        b[n - k + 1] -= ak;
        prev = cur;
    }
}

}  // namespace detail

/// L1 weights b_{j,n}^{(alpha)}, j = 0..n, such that
/// d^alpha u(t_n) ~ sum_j b_{j,n} u^{n-j}. The row sums to zero, so applying it to
/// (u - u^0) or to u gives the same value.
inline std::vector<double> l1_weights(const TimeGrid& grid, double alpha, int n) {
    if (!(alpha > 0.0 && alpha < 1.0)) throw DomainError("l1_weights: alpha must lie in (0,1)");
    if (n < 1 || n > grid.steps()) throw DomainError("l1_weights: index out of range");
    std::vector<double> b;
    detail::l1_row(grid, alpha, n, b);
    return b;
}

// ---------------------------------------------------------------------------
// Quadrature in the order variable and the weight distribution

/// Quadrature rule on [0,1] for the order variable.
struct AlphaQuadrature {
    enum class Kind { Trapezoid, Discrete };
    Kind kind = Kind::Trapezoid;
    std::vector<double> nodes;
    std::vector<double> weights;

    /// Composite trapezoid with `intervals` equal sub-intervals: weights c_i / N_alpha.
    static AlphaQuadrature trapezoid(int intervals) {
        if (intervals < 1) throw DomainError("AlphaQuadrature: need at least one interval");
        AlphaQuadrature q;
        q.kind = Kind::Trapezoid;
        const double h = 1.0 / intervals;
        for (int i = 0; i <= intervals; ++i) {
            q.nodes.push_back(i == intervals ? 1.0 : i * h);
            q.weights.push_back((i == 0 || i == intervals) ? 0.5 * h : h);
        }
        return q;
    }

    static AlphaQuadrature discrete(std::vector<double> nodes, std::vector<double> weights) {
        if (nodes.size() != weights.size()) throw DomainError("AlphaQuadrature: size mismatch");
        for (double w : weights) {
            if (!(w > 0.0)) throw DomainError("AlphaQuadrature: discrete weights must be positive");
        }
        AlphaQuadrature q;
        q.kind = Kind::Discrete;
        q.nodes = std::move(nodes);
        q.weights = std::move(weights);
        return q;
    }

    int intervals() const { return static_cast<int>(nodes.size()) - 1; }
    bool empty() const { return nodes.empty(); }
};

/// A discrete measure sum_i mass_i delta_{alpha_i} on [0,1]; masses may be signed
/// (perturbation directions are represented the same way).
struct OrderMeasure {
    std::vector<double> alpha;
    std::vector<double> mass;

    std::size_t size() const { return alpha.size(); }
    double total() const { return std::accumulate(mass.begin(), mass.end(), 0.0); }
};

/// The order-weight mu on [0,1] with declared support [b1, b2].
class WeightDistribution {
public:
    struct Expression {
        Expr density;  // in the variable `alpha`
    };
    struct Indicator {};
    struct Grid {
        std::vector<double> values;  // samples on the uniform grid i/(n-1)
    };
    struct Atoms {
        std::vector<double> alpha;
        std::vector<double> weight;
    };
    using Mode = std::variant<Expression, Indicator, Grid, Atoms>;

    static WeightDistribution expression(Expr density, double b1 = 0.0, double b2 = 1.0) {
        return WeightDistribution(Expression{std::move(density)}, b1, b2);
    }
    static WeightDistribution indicator(double b1, double b2) {
        return WeightDistribution(Indicator{}, b1, b2);
    }
    static WeightDistribution grid(std::vector<double> values, double b1 = 0.0, double b2 = 1.0) {
        if (values.size() < 2) throw DomainError("WeightDistribution: grid needs >= 2 samples");
        return WeightDistribution(Grid{std::move(values)}, b1, b2);
    }
    static WeightDistribution atoms(std::vector<double> alpha, std::vector<double> weight) {
        if (alpha.empty() || alpha.size() != weight.size()) {
            throw DomainError("WeightDistribution: atoms need matching nonempty order/weight lists");
        }
        for (std::size_t i = 0; i < alpha.size(); ++i) {
            if (!(alpha[i] > 0.0 && alpha[i] < 1.0)) throw DomainError("WeightDistribution: atom order outside (0,1)");
            if (!(weight[i] > 0.0)) throw DomainError("WeightDistribution: atom weight must be positive");
        }
        const auto [lo, hi] = std::minmax_element(alpha.begin(), alpha.end());
        const double b1 = *lo, b2 = *hi;
        return WeightDistribution(Atoms{std::move(alpha), std::move(weight)}, b1, b2, true);
    }

    const Mode& mode() const { return mode_; }
    bool is_indicator() const { return std::holds_alternative<Indicator>(mode_); }
    bool is_atoms() const { return std::holds_alternative<Atoms>(mode_); }
    double b1() const { return b1_; }
    double b2() const { return b2_; }

    /// Pointwise density for the continuous modes (not defined for atoms).
    double density(double alpha) const {
        return std::visit(
            detail::Overloaded{
                [&](const Expression& e) { return eval(e.density, "alpha", alpha); },
                [&](const Indicator&) { return (b1_ <= alpha && alpha <= b2_) ? 1.0 : 0.0; },
                [&](const Grid& g) {
                    const int n = static_cast<int>(g.values.size()) - 1;
                    if (alpha <= 0.0) return g.values.front();
                    if (alpha >= 1.0) return g.values.back();
                    const double s = alpha * n;
                    const int i = std::min(static_cast<int>(s), n - 1);
                    const double f = s - i;
                    return (1.0 - f) * g.values[i] + f * g.values[i + 1];
                },
                [&](const Atoms&) -> double {
                    throw DomainError("WeightDistribution: atoms have no pointwise density");
                },
            },
            mode_);
    }

    /// Checks the modelling invariants: mu >= 0, 0 <= b1 < b2 <= 1, positive mass.
    void validate() const {
        if (is_atoms()) return;  // enforced at construction
        constexpr int samples = 1000;
        double mass = 0.0;
        for (int i = 0; i <= samples; ++i) {
            const double a = static_cast<double>(i) / samples;
            const double v = density(a);
            if (!(v >= 0.0)) throw DomainError("WeightDistribution: density must be non-negative");
            mass += v;
        }
        if (!(mass > 0.0)) throw DomainError("WeightDistribution: density vanishes identically");
    }

    /// Combines mu with a quadrature rule into the discrete order measure used by the
    /// time-stepping weights. Indicator weights are integrated on [b1,b2] only: the
    /// trapezoid partition is clipped to the support and b1, b2 are added as nodes.
    OrderMeasure discretize(const AlphaQuadrature& quad) const {
        if (quad.empty()) throw DomainError("distributed weights: empty quadrature");
        OrderMeasure m;
        if (const auto* at = std::get_if<Atoms>(&mode_)) {
            if (quad.kind != AlphaQuadrature::Kind::Discrete || quad.nodes != at->alpha) {
                throw DomainError("distributed weights: quadrature nodes must match the atoms");
            }
            m.alpha = at->alpha;
            m.mass = at->weight;
            return m;
        }
        if (is_indicator() && quad.kind == AlphaQuadrature::Kind::Trapezoid) {
            std::vector<double> pts{b1_};
            for (double a : quad.nodes) {
                if (a > b1_ && a < b2_) pts.push_back(a);
            }
            pts.push_back(b2_);
            m.alpha = pts;
            m.mass.assign(pts.size(), 0.0);
            for (std::size_t i = 1; i < pts.size(); ++i) {
                const double h = pts[i] - pts[i - 1];
                m.mass[i - 1] += 0.5 * h;
                m.mass[i] += 0.5 * h;
            }
            return m;
        }
        for (std::size_t i = 0; i < quad.nodes.size(); ++i) {
            const double v = density(quad.nodes[i]) * quad.weights[i];
            m.alpha.push_back(quad.nodes[i]);
            m.mass.push_back(v);
        }
        return m;
    }

private:
    WeightDistribution(Mode mode, double b1, double b2, bool atoms = false) : mode_(std::move(mode)), b1_(b1), b2_(b2) {
        if (!atoms && !(0.0 <= b1 && b1 < b2 && b2 <= 1.0)) {
            throw DomainError("WeightDistribution: support must satisfy 0 <= b1 < b2 <= 1");
        }
    }

    Mode mode_;
    double b1_;
    double b2_;
};

// ---------------------------------------------------------------------------
// Distributed-order weights

/// Weight table p_{j,n} = sum_i mass_i b_{j,n}^{(alpha_i)} for every target index n.
/// On uniform grids the table is Toeplitz (p_j independent of n for j < n) and only
/// one row is stored.
class DistributedWeights {
public:
    DistributedWeights(const TimeGrid& grid, const OrderMeasure& measure) : steps_(grid.steps()) {
        if (measure.size() == 0) throw DomainError("distributed weights: empty quadrature");
        std::vector<double> b;
        if (grid.is_uniform()) {
            toeplitz_ = true;
            // Interior closed form for every j < N; the endpoint value (j = n) is
            // recovered from the zero row sum when needed.
            rows_.assign(1, std::vector<double>(static_cast<std::size_t>(steps_), 0.0));
            auto& p = rows_[0];
            for (std::size_t i = 0; i < measure.size(); ++i) {
                if (measure.mass[i] == 0.0) continue;
                const double alpha = measure.alpha[i];
                const double e = 1.0 - alpha;
                const double scale = measure.mass[i] / (std::tgamma(2.0 - alpha) * std::pow(grid.step(1), alpha));
                p[0] += scale;
                for (int j = 1; j < steps_; ++j) {
                    p[j] += scale * (detail::pow0(j + 1.0, e) + detail::pow0(j - 1.0, e) - 2.0 * detail::pow0(j, e));
                }
            }
            return;
        }
        rows_.resize(static_cast<std::size_t>(steps_) + 1);
        for (int n = 1; n <= steps_; ++n) {
            auto& row = rows_[n];
            row.assign(static_cast<std::size_t>(n), 0.0);
            for (std::size_t i = 0; i < measure.size(); ++i) {
                if (measure.mass[i] == 0.0) continue;
                detail::l1_row(grid, measure.alpha[i], n, b);
                for (int j = 0; j < n; ++j) row[j] += measure.mass[i] * b[j];
            }
        }
    }

    DistributedWeights(const TimeGrid& grid, const WeightDistribution& mu, const AlphaQuadrature& quad)
        : DistributedWeights(grid, mu.discretize(quad)) {}

    int steps() const { return steps_; }
    bool toeplitz() const { return toeplitz_; }

    /// p_{j,n} for j = 0..n-1 (the coefficients of U^n, U^{n-1}, ..., U^1 applied to U - U^0).
    std::span<const double> row(int n) const {
        if (toeplitz_) return std::span<const double>(rows_[0]).first(static_cast<std::size_t>(n));
        return rows_[static_cast<std::size_t>(n)];
    }

    /// p_{j,n} for j = 0..n including the endpoint coefficient of u^0.
    std::vector<double> full_row(int n) const {
        auto r = row(n);
        std::vector<double> out(r.begin(), r.end());
        out.push_back(-std::accumulate(r.begin(), r.end(), 0.0));
        return out;
    }

    double leading(int n) const { return row(n)[0]; }

private:
    int steps_;
    bool toeplitz_ = false;
    std::vector<std::vector<double>> rows_;
};

/// Row n of the distributed-order weights (p_{j,n}, j = 0..n).
inline std::vector<double> distributed_weights(const TimeGrid& grid, const WeightDistribution& mu,
                                               const AlphaQuadrature& quad, int n) {
    if (n < 1 || n > grid.steps()) throw DomainError("distributed_weights: index out of range");
    const OrderMeasure m = mu.discretize(quad);
    if (m.size() == 0) throw DomainError("distributed weights: empty quadrature");
    std::vector<double> p(static_cast<std::size_t>(n) + 1, 0.0), b;
    for (std::size_t i = 0; i < m.size(); ++i) {
        detail::l1_row(grid, m.alpha[i], n, b);
        for (int j = 0; j <= n; ++j) p[j] += m.mass[i] * b[j];
    }
    return p;
}

}  // namespace dofrac
