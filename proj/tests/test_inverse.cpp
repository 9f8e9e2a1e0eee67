#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "dofrac/experiments.hpp"
#include "dofrac/inverse.hpp"

using namespace dofrac;

namespace {

ObservationTrace synthetic(double b, double c0, double c1, double sign, double t1, double t2) {
    ObservationTrace tr;
    const TimeGrid g = TimeGrid::geometric(t1 / 10, t2 * 10, 40);
    tr.t = g.nodes();
    for (double t : tr.t) tr.g.push_back(c0 + c1 * (t > 0 ? std::pow(t, sign * b) : 0.0));
    return tr;
}

ProblemSpec small_recovery() {
    ProblemSpec s;
    s.mesh = Mesh1D::uniform(16);
    s.coeff.a = parse("1+x*(1-x)");
    s.u0 = parse("x*(1-x)*exp(x)");
    s.bc.kind = BoundarySpec::Kind::Neumann;
    s.bc.right = parse("1");
    s.observe = {Side::Left, TraceKind::Dirichlet};
    s.mu = WeightDistribution::expression(parse("alpha*(1-alpha)^2*exp(2*alpha)"));
    s.quad = AlphaQuadrature::trapezoid(8);
    s.grid = TimeGrid::uniform(1.0, 32);
    return s;
}

}  // namespace

TEST(FitBoundProperty, RecoversExponentOfExactPowerLaws) {
    std::mt19937_64 rng(61);
    std::uniform_real_distribution<double> bd(0.05, 0.95), cd(-2.0, 2.0);
    for (int trial = 0; trial < 30; ++trial) {
        const double b = bd(rng), c0 = cd(rng), c1 = cd(rng) + (trial % 2 ? 3.0 : -3.0);
        const auto lower = fit_bound(synthetic(b, c0, c1, -1, 1e4, 1e5), 1e4, 1e5, BoundTarget::Lower);
        EXPECT_NEAR(lower.b, b, 1e-5);
        EXPECT_NEAR(lower.c0, c0, 1e-4 * (1 + std::abs(c0)));
        EXPECT_LT(lower.relative_residual, 1e-8);
        const auto upper = fit_bound(synthetic(b, c0, c1, 1, 1e-6, 1e-5), 1e-6, 1e-5, BoundTarget::Upper);
        EXPECT_NEAR(upper.b, b, 1e-5);
        EXPECT_EQ(upper.samples, 41);
    }
}

TEST(FitBound, RejectsBadWindows) {
    const auto tr = synthetic(0.5, 1, 1, -1, 1e4, 1e5);
    EXPECT_THROW(fit_bound(tr, 1e5, 1e4, BoundTarget::Lower), DomainError);
    EXPECT_THROW(fit_bound(tr, 1e4, 1e8, BoundTarget::Lower), DomainError);
    EXPECT_THROW(fit_bound(tr, 1e4, 1.1e4, BoundTarget::Lower), DomainError);
    ObservationTrace flat = tr;
    for (double& g : flat.g) g = 2.0;
    EXPECT_THROW(fit_bound(flat, 1e4, 1e5, BoundTarget::Lower), DomainError);
}

TEST(Semiconvergence, InteriorMinimum) {
    EXPECT_EQ(semiconvergence_turn(std::vector<double>{3, 2, 1, 2, 3}), 2);
    EXPECT_EQ(semiconvergence_turn(std::vector<double>{3, 2.5, 2.6, 1, 1.5, 1.2}), 3);
    EXPECT_FALSE(semiconvergence_turn(std::vector<double>{3, 2, 1}));
    EXPECT_FALSE(semiconvergence_turn(std::vector<double>{1, 2, 3}));
    EXPECT_FALSE(semiconvergence_turn(std::vector<double>{1, 2}));
}

TEST(SobolevSmoothing, ExactForQuadratics) {
    const int n = 17;
    const double h = 1.0 / (n - 1);
    const std::vector<double> g(n, 2.0);
    const auto w = sobolev_smooth(g, h);
    for (int i = 0; i < n; ++i) {
        const double a = i * h;
        EXPECT_NEAR(w[i], a * (1 - a), 1e-13);
    }
    EXPECT_EQ(w.front(), 0.0);
    EXPECT_EQ(w.back(), 0.0);
    std::vector<double> line(n);
    for (int i = 0; i < n; ++i) line[i] = i * h;
    EXPECT_NEAR(derivative_norm2(line, h), 1.0, 1e-13);
}

TEST(StoppingRule, DiscrepancyAndBudget) {
    RecoveryState st;
    CgmOptions o;
    o.delta_est = 1.0;
    o.max_iterations = 3;
    st.log.push_back({0, 1.0, 2.0});
    EXPECT_FALSE(stopping_rule(st, o).stop);
    st.log.push_back({1, 1.0, 1.05});
    EXPECT_EQ(stopping_rule(st, o).reason, StopReason::Discrepancy);
    st.log.push_back({3, 1.0, 5.0});
    EXPECT_EQ(stopping_rule(st, o).reason, StopReason::MaxIterations);
    EXPECT_THROW(stopping_rule(RecoveryState{}, o), DomainError);
}

TEST(Cgm, ExactDataAtTheTruthStopsImmediately) {
    const ProblemSpec s = small_recovery();
    const ObservationTrace data = run_forward(s).trace;
    CgmOptions o;
    o.tau_dp = 1.0;
    const auto st = cgm_recover(s, data, sample_on(s.quad, s.mu), o);
    EXPECT_EQ(st.stop, StopReason::Discrepancy);
    EXPECT_EQ(st.stop_index, 0);
}

TEST(CgmProperty, IteratesStayNonnegativeAndMisfitDrops) {
    const ProblemSpec s = small_recovery();
    const ObservationTrace data = run_forward(s).trace;
    for (ConjugateRule rule : {ConjugateRule::Smoothed, ConjugateRule::Literal, ConjugateRule::None}) {
        CgmOptions o;
        o.max_iterations = 6;
        o.conjugate = rule;
        o.truth = sample_on(s.quad, s.mu);
        const auto st = cgm_recover(s, data, sample_on(s.quad, parse("sin(3.141592653589793*alpha)/100")), o);
        EXPECT_EQ(st.stop, StopReason::MaxIterations);
        for (double v : st.mu) EXPECT_GE(v, 0.0);
        EXPECT_LT(st.log.back().J, 0.5 * st.log.front().J);
        EXPECT_LE(st.best_error, st.log.front().error);
    }
}

TEST(Cgm, RejectsUnsupportedSetups) {
    ProblemSpec s = small_recovery();
    const ObservationTrace data = run_forward(s).trace;
    const auto mu0 = sample_on(s.quad, s.mu);
    EXPECT_THROW(cgm_recover(s, data, std::vector<double>(3, 0.0), {}), DomainError);
    ObservationTrace shorter = data;
    shorter.t.pop_back();
    shorter.g.pop_back();
    EXPECT_THROW(cgm_recover(s, shorter, mu0, {}), DomainError);
    s.bc.kind = BoundarySpec::Kind::Dirichlet;
    s.observe.kind = TraceKind::ConormalFlux;
    EXPECT_THROW(cgm_recover(s, data, mu0, {}), DomainError);
}
