#include <gtest/gtest.h>

#include <kflow/gluing.hpp>

using namespace kflow;

namespace {

const ExpanderProfile& baseline() {
    static const ExpanderProfile e = solve_expander(ConeModel::flat_quotient(2, 3), Grid(-6.0, 8.0, 561));
    return e;
}

GluedInitialData glue(double s, PerturbationSpec u = {}, double h = 0.025) {
    return glue_initial(baseline(), u, s, gluing_grid(baseline().cone, u, s, -2.0, h));
}

}  // namespace

TEST(Cutoff, PlateausAndMonotone) {
    EXPECT_EQ(cutoff(0.0), 0.0);
    EXPECT_EQ(cutoff(1.0), 0.0);
    EXPECT_EQ(cutoff(2.0), 1.0);
    EXPECT_EQ(cutoff(7.0), 1.0);
    EXPECT_NEAR(cutoff(1.5), 0.5, 1e-15);
    EXPECT_THROW(cutoff(-0.1), ParamError);
    double prev = 0.0;
    for (int i = 0; i <= 1000; ++i) {
        const double v = cutoff(1.0 + i / 1000.0);
        ASSERT_GE(v, prev);
        prev = v;
    }
}

TEST(Cutoff, FourTimesDifferentiableAtTheJoins) {
    // the m-th derivative vanishes like y^{5-m} at both joins
    const double y = 1e-3;
    for (int m = 1; m <= 4; ++m) {
        const double lo = Cutoff::deriv(1.0 + 2 * y, m) / Cutoff::deriv(1.0 + y, m);
        const double hi = Cutoff::deriv(2.0 - 2 * y, m) / Cutoff::deriv(2.0 - y, m);
        EXPECT_NEAR(std::log2(std::abs(lo)), 5 - m, 0.05) << m;
        EXPECT_NEAR(std::log2(std::abs(hi)), 5 - m, 0.05) << m;
    }
    // derivatives agree with central differences of the previous order
    for (int m = 1; m <= 4; ++m)
        for (double r : {1.2, 1.5, 1.83}) {
            const double d = 1e-5;
            const double fd = (Cutoff::deriv(r + d, m - 1) - Cutoff::deriv(r - d, m - 1)) / (2 * d);
            EXPECT_NEAR(Cutoff::deriv(r, m), fd, 1e-4 * (1 + std::abs(fd)));
        }
}

TEST(Perturbation, RadialDerivativesMatchDifferences) {
    PerturbationSpec u{0.05, 0.5, 1.5};
    for (int j = 1; j <= 4; ++j)
        for (double r : {0.4, 1.7, 2.2}) {
            const double d = 1e-5;
            const double fd = (u.radial(r + d)[j - 1] - u.radial(r - d)[j - 1]) / (2 * d);
            EXPECT_NEAR(u.radial(r)[j], fd, 1e-5 * (1 + std::abs(fd))) << j << " " << r;
        }
    EXPECT_EQ(u.value(4.0), 0.0);  // past 2 r0
    EXPECT_THROW((PerturbationSpec{0.05, -1.0}.validate()), ParamError);
}

TEST(Gluing, PlateausAreBitwiseExact) {
    const auto d = glue(1e-3);
    const double lo = d.glue_lo(), hi = d.glue_hi();
    int inner = 0, outer = 0;
    for (std::size_t i = 0; i < d.grid.N; ++i) {
        const double r2 = d.cone.r2(d.grid.x(i));
        const double r = std::sqrt(r2);
        if (r <= lo) {
            ASSERT_EQ(d.phi0[i], 0.0);
            ++inner;
        } else if (r >= hi) {
            ASSERT_EQ(d.P[i], 0.5 * r2 + d.u1.value(r));
            ++outer;
        }
    }
    EXPECT_GT(inner, 10);
    EXPECT_GT(outer, 10);
}

TEST(Gluing, RejectsBadInputs) {
    const auto& e = baseline();
    PerturbationSpec u;
    EXPECT_THROW(glue_initial(e, u, 2.0, Grid(-4, 2, 200)), ParamError);
    EXPECT_THROW(glue_initial(e, u, 1e-3, Grid(-1, 2, 200)), ParamError);     // misses the annulus
    EXPECT_THROW(glue_initial(e, u, 1e-3, Grid(-10, 2, 40)), ParamError);     // too coarse
    PerturbationSpec bad{-1.0, 0.5};
    EXPECT_THROW(glue(1e-3, bad), NonKahler);
}

TEST(Gluing, PositiveS0) {
    const auto& e = baseline();
    PerturbationSpec u;
    const double s0 = find_s0(e, u, [&](double s) { return gluing_grid(e.cone, u, s, -2.0, 0.025); });
    EXPECT_GT(s0, 0.0);
}

// Annulus closeness decreases along s = 1e-2, 1e-3, 1e-4.
TEST(Gluing, AnnulusClosenessMonotone) {
    double prev[3] = {INFINITY, INFINITY, INFINITY};
    for (double s : {1e-2, 1e-3, 1e-4}) {
        const auto a = annulus_closeness(glue(s));
        for (int k = 0; k <= 2; ++k) {
            const double v = a.measured.at("sup_k" + std::to_string(k));
            EXPECT_LT(v, prev[k]) << "s=" << s << " k=" << k;
            prev[k] = v;
        }
    }
    EXPECT_THROW(annulus_closeness(glue(1e-3), 3), ParamError);
}

TEST(Gluing, PhiAtAgreesWithGrid) {
    const auto d = glue(1e-4);
    for (std::size_t i = 0; i < d.grid.N; i += 17) EXPECT_EQ(d.phi0_at(d.grid.x(i)), d.phi0[i]);
}

TEST(Gluing, ConicalClosenessSmallForSmallPerturbation) {
    PerturbationSpec tiny{1e-6, 0.5};
    const auto c = conical_closeness(glue(1e-4, tiny), 1.0);
    const auto big = conical_closeness(glue(1e-4), 1.0);
    EXPECT_LT(c.measured.at("A0"), big.measured.at("A0"));
}
