#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "dofrac/asymptotics.hpp"

using namespace dofrac;

namespace {

WeightDistribution atom(double a) { return WeightDistribution::atoms({a}, {1.0}); }

}  // namespace

TEST(Contour, HankelRepresentationOfReciprocalGamma) {
    for (double a : {0.3, 0.5, 0.8}) {
        EXPECT_NEAR(contour_Q(1.0, atom(a)), 1.0 / std::tgamma(a), 1e-10);
        EXPECT_NEAR(contour_P(1.0, atom(a)), 1.0 / std::tgamma(-a), 1e-10);
    }
}

TEST(Contour, CauchyVanishingAndDeltaInvariance) {
    ContourParams cp;
    cp = resolve(cp, 0.8);
    EXPECT_LT(std::abs(contour_integral([](cplx p) { return std::exp(p); }, cp)), 1e-12);
    const WeightDistribution mu = WeightDistribution::indicator(0.2, 0.8);
    for (double t : {1e-3, 1.0, 1e3}) {
        ContourParams d2;
        d2.delta = 2.0;
        const double a = contour_Q(t, mu), b = contour_Q(t, mu, d2);
        EXPECT_NEAR(a, b, 1e-7 * std::abs(a));
        const double c = contour_P(t, mu), d = contour_P(t, mu, d2);
        EXPECT_NEAR(c, d, 1e-7 * std::abs(c));
    }
}

TEST(ContourProperty, SingleOrderScaling) {
    std::mt19937_64 rng(51);
    std::uniform_real_distribution<double> ad(0.1, 0.9), le(-3.0, 3.0);
    for (int trial = 0; trial < 20; ++trial) {
        const double a = ad(rng), t = std::pow(10.0, le(rng));
        const double q = contour_Q(t, atom(a));
        const double exact = std::pow(t, a) / std::tgamma(a);
        EXPECT_NEAR(q, exact, 1e-8 * exact) << a << " " << t;
    }
}

TEST(Contour, AngleMustBeAdmissible) {
    const auto [lo, hi] = theta_interval(0.8);
    EXPECT_DOUBLE_EQ(lo, M_PI / 2);
    EXPECT_DOUBLE_EQ(hi, M_PI / 1.6);
    EXPECT_DOUBLE_EQ(theta_interval(0.3).second, M_PI);
    ContourParams cp;
    cp.theta = 0.95 * M_PI;
    EXPECT_THROW(resolve(cp, 0.8), DomainError);
    EXPECT_NO_THROW(resolve(cp, 0.4));
}

TEST(KernelMoments, BranchCutIsRejected) {
    const KernelMoments km(WeightDistribution::indicator(0.2, 0.8));
    EXPECT_THROW(km.Q(1.0, cplx(-1.0, 0.0)), DomainError);
    EXPECT_THROW(km.Q(0.0, cplx(1.0, 0.0)), DomainError);
    EXPECT_NO_THROW(km.Q(1.0, cplx(-1.0, 1e-3)));
}

TEST(KernelMomentsProperty, QuadratureMatchesClosedFormIndicator) {
    std::mt19937_64 rng(52);
    std::uniform_real_distribution<double> u(0.0, 1.0), z(-20.0, 20.0);
    for (int trial = 0; trial < 50; ++trial) {
        double b1 = u(rng), b2 = u(rng);
        if (b1 > b2) std::swap(b1, b2);
        if (b2 - b1 < 0.05) continue;
        const KernelMoments exact(WeightDistribution::indicator(b1, b2));
        const KernelMoments numeric(WeightDistribution::expression(parse("1"), b1, b2));
        const cplx c(z(rng), z(rng));
        const cplx a = exact.moment(c), b = numeric.moment(c);
        // scale by int |e^{c alpha}| over the support
        EXPECT_LT(std::abs(a - b), 1e-12 * (b2 - b1) * std::exp(std::max(c.real() * b1, c.real() * b2)));
    }
    // small |c| uses the series branch
    const KernelMoments km(WeightDistribution::indicator(0.2, 0.8));
    EXPECT_NEAR(km.moment(cplx(1e-6, 0)).real(), std::exp(0.2e-6) * std::expm1(0.6e-6) / 1e-6, 1e-15);
}

TEST(EvalP, ClosedFormForIndicator) {
    const WeightDistribution mu = WeightDistribution::indicator(0.2, 0.6);
    for (double t : {1e-6, 0.3, 2.0, 1e5}) {
        const double lt = std::log(t);
        const double exact = (std::exp(-0.2 * lt) - std::exp(-0.6 * lt)) / lt;
        EXPECT_NEAR(eval_P(t, mu), exact, 1e-11 * exact);
    }
    EXPECT_NEAR(eval_P(2.0, WeightDistribution::atoms({0.5}, {3.0})), 3.0 / std::sqrt(2.0), 1e-15);
    EXPECT_THROW(eval_P(0.0, mu), DomainError);
}

TEST(Sandwich, RatiosStayBounded) {
    for (auto [b1, b2] : {std::pair{0.2, 0.8}, {0.2, 0.6}, {0.4, 0.8}}) {
        const WeightDistribution mu = WeightDistribution::indicator(b1, b2);
        const KernelMoments km(mu);
        for (double t : {1e-3, 1e-2, 1e-1, 1.0}) {
            const double r = std::abs(contour_Q(t, km)) * eval_P(t, mu);
            EXPECT_GT(r, 1e-2);
            EXPECT_LT(r, 1e2);
        }
        for (double t : {1.0, 1e1, 1e2, 1e3}) {
            const double r = std::abs(contour_P(t, km)) / eval_P(t, mu);
            EXPECT_GT(r, 1e-2);
            EXPECT_LT(r, 1e2);
        }
    }
}

TEST(CheckLimits, TrendsFollowTheSupportBounds) {
    const WeightDistribution mu = WeightDistribution::indicator(0.2, 0.8);
    for (double b : {0.1, 0.3, 0.7, 0.9}) {
        const LimitReport r = check_limits(mu, b);
        EXPECT_TRUE(r.consistent()) << b;
    }
    EXPECT_EQ(check_limits(mu, 0.1).large_observed, Trend::Vanishing);
    EXPECT_EQ(check_limits(mu, 0.3).large_observed, Trend::Diverging);
    EXPECT_EQ(check_limits(mu, 0.7).small_observed, Trend::Vanishing);
    EXPECT_EQ(check_limits(mu, 0.9).small_observed, Trend::Diverging);
    EXPECT_THROW(check_limits(mu, 0.2), DomainError);
}
