#pragma once

// Piecewise-linear finite elements on an interval for the operator
// A u = -(a u')' + q u, tridiagonal solves and boundary flux recovery.

#include <algorithm>
#include <cmath>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "dofrac/error.hpp"
#include "dofrac/expr.hpp"

namespace dofrac {

class Mesh1D {
public:
    static Mesh1D uniform(int elements) {
        std::vector<double> x(static_cast<std::size_t>(elements) + 1);
        for (int i = 0; i <= elements; ++i) x[i] = static_cast<double>(i) / elements;
        return Mesh1D(std::move(x));
    }

    /// x_i = (i/M)^power: nodes cluster at x = 0 for power > 1.
    static Mesh1D graded(int elements, double power) {
        if (!(power >= 1.0)) throw DomainError("Mesh1D: grading power must be >= 1");
        std::vector<double> x(static_cast<std::size_t>(elements) + 1);
        for (int i = 0; i <= elements; ++i) x[i] = std::pow(static_cast<double>(i) / elements, power);
        return Mesh1D(std::move(x));
    }

    explicit Mesh1D(std::vector<double> nodes) : x_(std::move(nodes)) {
        if (x_.size() < 3) throw DomainError("Mesh1D: need at least two elements");
        if (x_.front() != 0.0 || x_.back() != 1.0) throw DomainError("Mesh1D: nodes must span [0,1]");
        for (std::size_t i = 1; i < x_.size(); ++i) {
            if (!(x_[i] > x_[i - 1])) throw DomainError("Mesh1D: nodes must be strictly increasing");
        }
    }

    int elements() const { return static_cast<int>(x_.size()) - 1; }
    int nodes_count() const { return static_cast<int>(x_.size()); }
    double operator[](int i) const { return x_[static_cast<std::size_t>(i)]; }
    double h(int e) const { return x_[e + 1] - x_[e]; }
    const std::vector<double>& nodes() const { return x_; }

private:
    std::vector<double> x_;
};

struct CoefficientField {
    Expr a = Expr::number(1.0);  // diffusivity, in x
    Expr q = Expr::number(0.0);  // potential, in x

    bool q_vanishes() const { return q.is_constant() && eval(q, Bindings{}) == 0.0; }
};

/// Tridiagonal matrix. lower[0] and upper[n-1] are unused.
struct TriDiag {
    std::vector<double> lower, diag, upper;

    explicit TriDiag(int n = 0) : lower(n, 0.0), diag(n, 0.0), upper(n, 0.0) {}
    int size() const { return static_cast<int>(diag.size()); }

    void apply(std::span<const double> x, std::span<double> y) const {
        const int n = size();
        for (int i = 0; i < n; ++i) {
            double s = diag[i] * x[i];
            if (i > 0) s += lower[i] * x[i - 1];
            if (i + 1 < n) s += upper[i] * x[i + 1];
            y[i] = s;
        }
    }
    std::vector<double> apply(std::span<const double> x) const {
        std::vector<double> y(x.size());
        apply(x, y);
        return y;
    }
    /// Row i applied to x.
    double row_dot(int i, std::span<const double> x) const {
        double s = diag[i] * x[i];
        if (i > 0) s += lower[i] * x[i - 1];
        if (i + 1 < size()) s += upper[i] * x[i + 1];
        return s;
    }

    /// alpha * A + beta * B (same size).
    static TriDiag combine(double alpha, const TriDiag& A, double beta, const TriDiag& B) {
        TriDiag C(A.size());
        for (int i = 0; i < A.size(); ++i) {
            C.lower[i] = alpha * A.lower[i] + beta * B.lower[i];
            C.diag[i] = alpha * A.diag[i] + beta * B.diag[i];
            C.upper[i] = alpha * A.upper[i] + beta * B.upper[i];
        }
        return C;
    }
};

/// Thomas factorisation kept for repeated solves with one matrix.
class TriDiagLU {
public:
    TriDiagLU() = default;
    explicit TriDiagLU(const TriDiag& A) : lower_(A.lower), upper_(A.upper), pivot_(A.diag) {
        const int n = A.size();
        for (int i = 0; i < n; ++i) {
            if (i > 0) {
                const double m = lower_[i] / pivot_[i - 1];
                lower_[i] = m;
                pivot_[i] -= m * upper_[i - 1];
            }
            if (pivot_[i] == 0.0 || !std::isfinite(pivot_[i])) {
                throw SolverError("tridiagonal solve: zero pivot at row " + std::to_string(i));
            }
        }
    }

    void solve_in_place(std::span<double> x) const {
        const int n = static_cast<int>(pivot_.size());
        for (int i = 1; i < n; ++i) x[i] -= lower_[i] * x[i - 1];
        x[n - 1] /= pivot_[n - 1];
        for (int i = n - 2; i >= 0; --i) x[i] = (x[i] - upper_[i] * x[i + 1]) / pivot_[i];
    }

private:
    std::vector<double> lower_, upper_, pivot_;
};

/// Solves sys * x = rhs with the Thomas algorithm. Throws SolverError on a zero pivot.
inline std::vector<double> solve_tridiag(const TriDiag& sys, std::span<const double> rhs) {
    if (static_cast<int>(rhs.size()) != sys.size()) throw DomainError("solve_tridiag: size mismatch");
    std::vector<double> x(rhs.begin(), rhs.end());
    TriDiagLU(sys).solve_in_place(x);
    return x;
}

struct BoundarySpec {
    enum class Kind { Dirichlet, Neumann };
    Kind kind = Kind::Dirichlet;
    // Dirichlet: boundary values. Neumann: outward conormal derivative a u' nu.
    Expr left = Expr::number(0.0);   // in t
    Expr right = Expr::number(0.0);  // in t

    bool homogeneous() const {
        return left.is_constant() && right.is_constant() && eval(left, Bindings{}) == 0.0 &&
               eval(right, Bindings{}) == 0.0;
    }
};

enum class Side { Left, Right };

/// Mesh plus assembled mass and stiffness matrices on all nodes (no boundary rows removed).
struct FeSystem {
    Mesh1D mesh;
    TriDiag mass;
    TriDiag stiffness;

    int size() const { return mesh.nodes_count(); }
};

/// Mass matrix (exact) and stiffness matrix of a and q via 2-point Gauss per element.
inline FeSystem assemble(const Mesh1D& mesh, const CoefficientField& coeff) {
    const int n = mesh.nodes_count();
    TriDiag M(n), S(n);
    const double g = 0.5 / std::sqrt(3.0);
    for (int e = 0; e < mesh.elements(); ++e) {
        const double x0 = mesh[e], h = mesh.h(e);
        const double pts[2] = {x0 + (0.5 - g) * h, x0 + (0.5 + g) * h};
        double abar = 0.0, qll = 0.0, qlr = 0.0, qrr = 0.0;
        for (double xg : pts) {
            const double a = eval(coeff.a, "x", xg);
            const double q = eval(coeff.q, "x", xg);
            if (!(a > 0.0)) {
                throw DomainError("assemble: diffusivity must be positive (a = " + std::to_string(a) +
                                  " at x = " + std::to_string(xg) + ")");
            }
            if (q < 0.0) throw DomainError("assemble: potential q must be non-negative");
            const double pl = (x0 + h - xg) / h, pr = (xg - x0) / h;
            abar += 0.5 * a;
            qll += 0.5 * h * q * pl * pl;
            qlr += 0.5 * h * q * pl * pr;
            qrr += 0.5 * h * q * pr * pr;
        }
        M.diag[e] += h / 3.0;
        M.diag[e + 1] += h / 3.0;
        M.upper[e] += h / 6.0;
        M.lower[e + 1] += h / 6.0;

        const double k = abar / h;
        S.diag[e] += k + qll;
        S.diag[e + 1] += k + qrr;
        S.upper[e] += -k + qlr;
        S.lower[e + 1] += -k + qlr;
    }
    return FeSystem{mesh, std::move(M), std::move(S)};
}

/// Load vector (f, phi_i) by 3-point Gauss per element.
inline std::vector<double> load_vector(const Mesh1D& mesh, const std::function<double(double)>& f) {
    static const double gx[3] = {-std::sqrt(0.6), 0.0, std::sqrt(0.6)};
    static const double gw[3] = {5.0 / 9.0, 8.0 / 9.0, 5.0 / 9.0};
    std::vector<double> b(static_cast<std::size_t>(mesh.nodes_count()), 0.0);
    for (int e = 0; e < mesh.elements(); ++e) {
        const double x0 = mesh[e], h = mesh.h(e);
        for (int k = 0; k < 3; ++k) {
            const double s = 0.5 * (gx[k] + 1.0);
            const double v = 0.5 * h * gw[k] * f(x0 + s * h);
            b[e] += v * (1.0 - s);
            b[e + 1] += v * s;
        }
    }
    return b;
}

inline std::vector<double> load_vector(const Mesh1D& mesh, const Expr& f) {
    return load_vector(mesh, [&](double x) { return eval(f, "x", x); });
}

inline std::vector<double> interpolate(const Mesh1D& mesh, const std::function<double(double)>& f) {
    std::vector<double> u(static_cast<std::size_t>(mesh.nodes_count()));
    for (int i = 0; i < mesh.nodes_count(); ++i) u[i] = f(mesh[i]);
    return u;
}

inline std::vector<double> interpolate(const Mesh1D& mesh, const Expr& f) {
    return interpolate(mesh, [&](double x) { return eval(f, "x", x); });
}

namespace detail {

// Replaces the boundary rows by identity rows (Dirichlet elimination).
inline void impose_dirichlet_rows(TriDiag& K) {
    const int n = K.size();
    K.diag[0] = 1.0;
    K.upper[0] = 0.0;
    K.diag[n - 1] = 1.0;
    K.lower[n - 1] = 0.0;
}

}  // namespace detail

/// Finite element solution of A w = load with homogeneous boundary conditions of the
/// given kind. `load` holds nodal values of the right-hand side function, which is
/// applied through the mass matrix. Neumann with q == 0 is singular and rejected.
inline std::vector<double> elliptic_solve(const FeSystem& fe, BoundarySpec::Kind kind, std::span<const double> load) {
    if (static_cast<int>(load.size()) != fe.size()) throw DomainError("elliptic_solve: size mismatch");
    std::vector<double> rhs = fe.mass.apply(load);
    TriDiag K = fe.stiffness;
    if (kind == BoundarySpec::Kind::Dirichlet) {
        detail::impose_dirichlet_rows(K);
        rhs.front() = 0.0;
        rhs.back() = 0.0;
    } else {
        // Without a zeroth-order term the constants span the kernel.
        double qsum = 0.0;
        for (int i = 0; i < K.size(); ++i) {
            qsum += K.diag[i] + (i > 0 ? K.lower[i] : 0.0) + (i + 1 < K.size() ? K.upper[i] : 0.0);
        }
        const double scale = std::abs(fe.stiffness.diag[0]) * fe.size();
        if (std::abs(qsum) <= 1e-13 * scale) {
            throw SolverError("elliptic_solve: Neumann problem with q == 0 is singular");
        }
    }
    TriDiagLU(K).solve_in_place(rhs);
    return rhs;
}

/// Consistent (variational) boundary flux a u' nu at the given side, nu the outward
/// normal. Tests the discrete equation M D + S U = load against the boundary hat
/// function: flux = (M D)_b + (S U)_b - load_b. `rate` is the discrete time derivative
/// D (empty for a steady problem) and `load` the (f, phi_i) vector (empty for none).
inline double boundary_flux(const FeSystem& fe, std::span<const double> u, std::span<const double> rate,
                            std::span<const double> load, Side side) {
    const int b = side == Side::Left ? 0 : fe.size() - 1;
    double flux = fe.stiffness.row_dot(b, u);
    if (!rate.empty()) flux += fe.mass.row_dot(b, rate);
    if (!load.empty()) flux -= load[b];
    return flux;
}

/// One-sided difference flux a(x_b) u'(x_b) nu (first order).
inline double difference_flux(const Mesh1D& mesh, const CoefficientField& coeff, std::span<const double> u,
                              Side side) {
    if (side == Side::Left) {
        return -eval(coeff.a, "x", 0.0) * (u[1] - u[0]) / mesh.h(0);
    }
    const int m = mesh.elements();
    return eval(coeff.a, "x", 1.0) * (u[m] - u[m - 1]) / mesh.h(m - 1);
}

}  // namespace dofrac
