#include "siegel/hermite.hpp"

#include <gtest/gtest.h>

#include <random>

using namespace siegel;

namespace {

HermiteField random_band(const HermiteTruncation& t, int band, std::mt19937_64& rng) {
    std::normal_distribution<double> n(0.0, 1.0);
    auto f = HermiteField::zero(t);
    for (std::size_t k = 0; k < f.c.size(); ++k) {
        auto a = f.multi_index(k);
        bool in = true;
        for (int x : a) in = in && x < band;
        if (in) f.c[k] = {n(rng), n(rng)};
    }
    return f;
}

cplx inner(const HermiteField& a, const HermiteField& b) {
    cplx s{};
    for (std::size_t i = 0; i < a.c.size(); ++i) s += std::conj(a.c[i]) * b.c[i];
    return s;
}

double dist(const HermiteField& a, const HermiteField& b) { return (a - b).norm(); }

// <psi_{2m}, e^{-c x^2/2}>
double gaussian_coeff(int m, double c) {
    double lr = 0.5 * std::lgamma(2.0 * m + 1) - m * std::log(2.0) - std::lgamma(m + 1.0);
    return std::pow(kPi, 0.25) * std::sqrt(2.0 / (1 + c)) * std::exp(lr) * std::pow((1 - c) / (1 + c), m);
}

}  // namespace

TEST(Hermite, TruncationValidation) {
    EXPECT_THROW(HermiteField::zero({1, 3, 1.0}), DomainError);
    EXPECT_THROW(HermiteField::zero({1, 8, 0.0}), DomainError);
    EXPECT_EQ(HermiteField::zero({2, 8, 1.0}).c.size(), 64u);
}

TEST(Hermite, IndexRoundTripFirstAxisSlowest) {
    auto f = HermiteField::zero({3, 5, 1.0});
    EXPECT_EQ(f.index({1, 2, 3}), 1u * 25 + 2 * 5 + 3);
    for (std::size_t k = 0; k < f.c.size(); ++k) EXPECT_EQ(f.index(f.multi_index(k)), k);
}

TEST(Hermite, SobolevNormOfGroundStateAndS0) {
    for (int g = 1; g <= 3; ++g) {
        auto f = HermiteField::mode({g, 6, 1.0}, std::vector<int>(g, 0));
        for (double s : {0.0, 0.5, 1.0, 2.5}) EXPECT_NEAR(sobolev_norm(f, s), std::pow(g, s / 2), 1e-14);
    }
    std::mt19937_64 rng(1);
    auto f = random_band({2, 8, 3.0}, 8, rng);
    EXPECT_NEAR(sobolev_norm(f, 0.0), f.norm(), 1e-13);
}

TEST(Hermite, CanonicalCommutationOnBandLimitedFields) {
    std::mt19937_64 rng(2);
    for (double h : {1.0, -2.0, 2 * kPi}) {
        HermiteTruncation t{2, 16, h};
        auto f = random_band(t, 8, rng);
        for (int ax = 0; ax < 2; ++ax) {
            // [d, x] = 1 scaled by |h|
            auto c1 = apply_ddx(apply_x(f, ax), ax) - apply_x(apply_ddx(f, ax), ax);
            EXPECT_LT(dist(c1, cplx(std::abs(h)) * f), 1e-11 * f.norm() * std::abs(h));
            // [Xi, X] = i h
            auto c2 = apply_xi(apply_ddx(f, ax), ax) - apply_ddx(apply_xi(f, ax), ax);
            EXPECT_LT(dist(c2, cplx(0, h) * f), 1e-11 * f.norm() * std::abs(h));
        }
        EXPECT_EQ(apply_x(f, 0).loss, 0.0);
    }
}

TEST(Hermite, OscillatorEigenrelation) {
    HermiteTruncation t{2, 12, 1.0};
    for (int a0 = 0; a0 < 9; ++a0) {
        auto f = HermiteField::mode(t, {a0, 3});
        auto xx = apply_x(apply_x(f, 0), 0);
        auto dd = apply_ddx(apply_ddx(f, 0), 0);
        EXPECT_LT(dist(xx - dd, cplx(2.0 * a0 + 1) * f), 1e-13);
    }
}

TEST(Hermite, DerivativeIsSkewAdjoint) {
    std::mt19937_64 rng(3);
    HermiteTruncation t{1, 32, 1.0};
    auto f = random_band(t, 20, rng), g = random_band(t, 20, rng);
    EXPECT_LT(std::abs(inner(apply_ddx(f, 0), g) + inner(f, apply_ddx(g, 0))), 1e-12 * f.norm() * g.norm() * 20);
}

TEST(Hermite, TopModeLossRecorded) {
    HermiteTruncation t{1, 8, 1.0};
    auto f = HermiteField::mode(t, {7});
    EXPECT_NEAR(apply_ddx(f, 0).loss, std::sqrt(8.0 / 2.0), 1e-14);
    EXPECT_EQ(apply_ddx(HermiteField::mode(t, {5}), 0).loss, 0.0);
}

TEST(Hermite, IntegralRecurrenceMatchesQuadrature) {
    EXPECT_LT(hermite_integral_check(60), 1e-12);
    EXPECT_NO_THROW(validate_hermite_integrals());
    auto d = hermite_integrals(8);
    EXPECT_NEAR(d[0], std::sqrt(2.0) * std::pow(kPi, 0.25), 1e-15);
    EXPECT_EQ(d[1], 0.0);
    EXPECT_NEAR(d[2], d[0] / std::sqrt(2.0), 1e-15);
}

TEST(Hermite, MassOneGaussianNormByQuadrature) {
    // ||phi_1||_0^2 = integral of ((2 pi)^{-1/2} e^{-x^2/2})^2, x = sqrt(2) u
    auto gh = gauss_hermite(200);
    double q = 0;
    for (std::size_t i = 0; i < gh.nodes.size(); ++i)
        q += std::sqrt(2.0) * gh.weights[i] * std::exp(-gh.nodes[i] * gh.nodes[i]) / (2 * kPi);
    const double measured = std::sqrt(q);
    for (int d = 1; d <= 3; ++d) {
        auto phi = extend_E(HermiteField{{0, 8, 1.0}, {1.0}, 0}, d);
        EXPECT_NEAR(sobolev_norm(phi, 0.0), std::pow(measured, d), 1e-14);
        EXPECT_NEAR(sobolev_norm(phi, 0.0), std::pow(kPi, -d / 4.0) * std::pow(2.0, -d / 2.0), 1e-14);
        EXPECT_NEAR(sobolev_norm(phi, 1.5), std::pow(d, 0.75) * sobolev_norm(phi, 0.0), 1e-14);
    }
}

TEST(Hermite, IntegrateGaussianAndParity) {
    for (int g = 1; g <= 3; ++g) {
        HermiteField one{{0, 10, 1.0}, {1.0}, 0};
        auto phi = extend_E(one, g);
        EXPECT_NEAR(integrate_I(phi, g).c[0].real(), 1.0, 1e-14);
    }
    HermiteTruncation t{2, 10, 1.0};
    EXPECT_EQ(integrate_I(HermiteField::mode(t, {3, 2}), 1).norm(), 0.0);
    EXPECT_EQ(integrate_I(HermiteField::mode(t, {2, 5}), 2).norm(), 0.0);
}

TEST(Hermite, IntegrateAfterExtendIsIdentity) {
    std::mt19937_64 rng(4);
    for (int trial = 0; trial < 100; ++trial) {
        int g = 1 + trial % 3, d = 1 + trial % g;
        HermiteTruncation t{g - d, 8, 1.0};
        auto f = g - d == 0 ? HermiteField{t, {cplx(1.3, -0.2)}, 0} : random_band(t, 8, rng);
        auto back = integrate_I(extend_E(f, d), d);
        EXPECT_LT(dist(back, f), 1e-14 * std::max(1.0, f.norm()));
    }
}

TEST(Hermite, ExtendIntegrateIsIdempotent) {
    std::mt19937_64 rng(5);
    HermiteTruncation t{2, 16, 1.0};
    auto f = random_band(t, 16, rng);
    auto p = extend_E(integrate_I(f, 1), 1);
    auto pp = extend_E(integrate_I(p, 1), 1);
    EXPECT_LT(dist(p, pp), 1e-12 * f.norm());
    EXPECT_LT(dist(p, project_gaussian_axis(f, 0)), 1e-12 * f.norm());
}

TEST(Hermite, ExtendBoundStableUnderCutoffDoubling) {
    std::mt19937_64 rng(6);
    double c1 = 0, c2 = 0;
    for (int trial = 0; trial < 20; ++trial) {
        auto f1 = random_band({1, 16, 1.0}, 8, rng);
        auto f2 = HermiteField::zero({1, 32, 1.0});
        std::copy(f1.c.begin(), f1.c.end(), f2.c.begin());
        c1 = std::max(c1, sobolev_norm(extend_E(f1, 1), 2) / sobolev_norm(f1, 2));
        c2 = std::max(c2, sobolev_norm(extend_E(f2, 1), 2) / sobolev_norm(f2, 2));
    }
    EXPECT_NEAR(c1, c2, 1e-12);
}

TEST(Hermite, CurrentNormFiniteAboveThreshold) {
    // s > g/2: converges; s = g/2: keeps growing with the cutoff
    double a = current_norm(1, 256, 1.0, 1.0), b = current_norm(1, 1024, 1.0, 1.0);
    EXPECT_LT(std::abs(a - b) / b, 1e-2);
    double c = current_norm(1, 256, 1.0, 0.5), e = current_norm(1, 4096, 1.0, 0.5);
    EXPECT_GT(e - c, 0.1);
}

TEST(Primitive, GaussianDerivative) {
    // -x e^{-x^2/2} = pi^{1/4} * (-1/sqrt2) psi_1 ; primitive e^{-x^2/2} = pi^{1/4} psi_0
    HermiteTruncation t{1, 16, 1.0};
    auto f = HermiteField::mode(t, {1}, -std::pow(kPi, 0.25) / std::sqrt(2.0));
    auto p = primitive_P(f);
    EXPECT_NEAR(p.c[0].real(), std::pow(kPi, 0.25), 1e-14);
    for (int m = 1; m < 16; ++m) EXPECT_NEAR(std::abs(p.c[m]), 0.0, 1e-14);
}

TEST(Primitive, InvertsDerivativeOnConstraintSubspace) {
    std::mt19937_64 rng(7);
    HermiteTruncation t{2, 32, 1.0};
    auto u = random_band(t, 16, rng);
    auto du = apply_ddx(u, 0);  // |h| = 1
    auto back = primitive_P(du, 0);
    EXPECT_LT(dist(back, u), 1e-9 * u.norm());
    auto again = apply_ddx(back, 0);
    EXPECT_LT(dist(again, du), 1e-10 * du.norm());
    EXPECT_LT(back.loss, 1e-10);
}

TEST(Primitive, RejectsNonzeroIntegral) {
    HermiteTruncation t{1, 16, 1.0};
    try {
        primitive_P(HermiteField::mode(t, {0}));
        FAIL();
    } catch (const PreconditionError& e) {
        EXPECT_NEAR(e.defect, hermite_integrals(2)[0], 1e-14);
    }
}

TEST(Metaplectic, ZeroIsIdentity) {
    std::mt19937_64 rng(8);
    auto f = random_band({2, 16, 1.0}, 8, rng);
    auto r = metaplectic_U(f, {0.0, 0.0});
    EXPECT_EQ(dist(r.field, f), 0.0);
    EXPECT_FALSE(r.accuracy_warning);
}

TEST(Metaplectic, GaussianClosedForm) {
    // U_t (pi^{1/4} psi_0) = e^{t/2} e^{-e^{2t} x^2 / 2}
    const double t = 0.3, c = std::exp(2 * t);
    HermiteTruncation tr{1, 256, 1.0};
    auto f = HermiteField::mode(tr, {0}, std::pow(kPi, 0.25));
    auto r = metaplectic_U(f, {t});
    double err = 0;
    for (int m = 0; m < 256; ++m) {
        double want = m % 2 ? 0.0 : std::exp(t / 2) * gaussian_coeff(m / 2, c);
        err = std::max(err, std::abs(r.field.c[m] - want));
    }
    EXPECT_LT(err, 1e-8);
    EXPECT_NEAR(r.field.norm(), f.norm(), 1e-10);
}

TEST(Metaplectic, UnitaryAndGroupLaw) {
    std::mt19937_64 rng(9);
    HermiteTruncation tr{1, 128, 1.0};
    auto f = random_band(tr, 24, rng);
    auto a = metaplectic_U(metaplectic_U(f, {0.2}).field, {0.3}).field;
    auto b = metaplectic_U(f, {0.5}).field;
    EXPECT_LT(dist(a, b), 1e-9 * f.norm());
    EXPECT_NEAR(b.norm(), f.norm(), 1e-9 * f.norm() + b.loss);
    EXPECT_TRUE(metaplectic_U(HermiteField::mode({1, 8, 1.0}, {0}), {1.5}).accuracy_warning);
}

TEST(Metaplectic, CurrentNormScalesLikeExpMinusHalfT) {
    const double base = current_norm_after_flow(256, 1.0, 1.0, 0.0);
    EXPECT_NEAR(base, current_norm(1, 256, 1.0, 1.0), 1e-13);
    for (double t : {0.1, 0.5, 1.0}) {
        double r = current_norm_after_flow(256, 1.0, 1.0, t) / base;
        EXPECT_NEAR(r, std::exp(-t / 2), 1e-6) << "t=" << t;
    }
}
