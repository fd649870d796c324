#include <gtest/gtest.h>

#include <cmath>

#include "lcstop/error.hpp"
#include "lcstop/oracle.hpp"
#include "support.hpp"

using namespace lcstop;

TEST(DP, CapInstance) {
    const DPSolution dp = dp_value_iteration(test::cap5(), -40, 15, 1e-12);
    EXPECT_NEAR(*dp.value_at(0.0), 4.0, 1e-8);
    EXPECT_NEAR(*dp.value_at(4.0), 4.8, 1e-8);
    for (std::size_t i = 0; i < dp.states.size(); ++i) {
        if (dp.states[i] >= -20.0) {
            EXPECT_EQ(dp.stopping_set[i], dp.states[i] >= 5.0) << dp.states[i];
        }
    }
}

TEST(DP, AutomaticDomainMarksTrustedStates) {
    const DPSolution dp = dp_value_iteration_auto(test::cap5(), 4.8, 1e-12);
    EXPECT_NEAR(*dp.value_at(0.0), 4.0, 1e-8);
    EXPECT_TRUE(dp.trusted.back());
    EXPECT_TRUE(dp_threshold_mismatches(dp, 4.8, false).empty());
}

TEST(DP, WrongThresholdIsReported) {
    const DPSolution dp = dp_value_iteration_auto(test::cap5(), 4.8, 1e-12);
    EXPECT_FALSE(dp_threshold_mismatches(dp, 3.5, false).empty());
}

TEST(DP, FiniteChain) {
    ProblemSpec p;
    p.process = FiniteChainSpec{{0, 1, 2}, {{0.2, 0.8, 0}, {0.1, 0.1, 0.8}, {0, 0, 1}}};
    p.payoff = PayoffSpec::linear(1.0);
    p.cost = CostSpec::constant(0.05);
    const DPSolution dp = dp_value_iteration(p, 0, 2, 1e-13);
    // V(2) = 2, V(1) = max(1, -0.05 + 0.1 V(0) + 0.1 V(1) + 1.6), V(0) = max(0, -0.05 + 0.2 V(0) + 0.8 V(1)).
    const double v1 = (1.55 + 0.1 * ((-0.05) / 0.8)) / (0.9 - 0.1 * 0.8 / 0.8);
    const double v0 = (-0.05 + 0.8 * v1) / 0.8;
    EXPECT_NEAR(dp.values[2], 2.0, 1e-12);
    EXPECT_NEAR(dp.values[1], v1, 1e-10);
    EXPECT_NEAR(dp.values[0], v0, 1e-10);
    EXPECT_TRUE(dp.stopping_set[2]);
    EXPECT_FALSE(dp.stopping_set[0]);
}

TEST(BrownianExit, MartingaleAndWald) {
    test::Gen g(5);
    for (int trial = 0; trial < 50; ++trial) {
        const double mu = g.uniform(-2, 2);
        const double sigma = g.uniform(0.3, 3);
        const double a = g.uniform(-5, 0);
        const double b = g.uniform(0.1, 5);
        const double x = g.uniform(a, b);
        if (std::abs(mu) < 1e-3) continue;
        const ExitLaw e = bm_scale_exit(mu, sigma, a, b, x);
        const double theta = 2 * mu / (sigma * sigma);
        const double lhs = e.p_up * std::exp(-theta * (b - x)) + (1 - e.p_up) * std::exp(-theta * (a - x));
        EXPECT_NEAR(lhs, 1.0, 1e-12 * std::max(1.0, std::exp(-theta * (a - x))));
        const double exit_mean = e.p_up * b + (1 - e.p_up) * a;
        EXPECT_NEAR(exit_mean - x, mu * e.e_time, 1e-10 * std::max(1.0, e.e_time));
    }
}

TEST(BrownianExit, DriftlessLimit) {
    const ExitLaw e = bm_scale_exit(1e-10, 1.0, -1, 2, 0);
    EXPECT_NEAR(e.p_up, 1.0 / 3.0, 1e-8);
    EXPECT_NEAR(e.e_time, 2.0, 1e-7);
}

TEST(BrownianGreen, AffineCostSolvesGenerator) {
    const double a = 200, b = 1;
    const CostSpec h = CostSpec::affine_positive(a, b);
    for (const auto& [mu, sigma] : {std::pair{1.0, 1.0}, std::pair{0.5, 2.0}, std::pair{3.0, 0.5}}) {
        for (const auto& [x, y] : {std::pair{-2.0, 1.0}, std::pair{0.0, 0.5}, std::pair{1.0, 4.0}}) {
            const double z = y - x;
            const double A = (a + b * y - sigma * sigma * b / (2 * mu)) / mu;
            const double u = A * z - b / (2 * mu) * z * z;
            EXPECT_NEAR(bm_green_expected_cost(mu, sigma, x, y, h), u, 1e-8 * u);
        }
    }
}

TEST(BrownianGreen, ConstantCostIsCostTimesPassageTime) {
    EXPECT_NEAR(bm_green_expected_cost(2.0, 1.0, -1.0, 2.0, CostSpec::constant(0.3)), 0.3 * 1.5, 1e-12);
    EXPECT_EQ(bm_green_expected_cost(1.0, 1.0, 2.0, 2.0, CostSpec::constant(1.0)), 0.0);
}

TEST(BrownianInterval, ConstantCost) {
    const ExitLaw e = bm_scale_exit(0.7, 1.3, -2, 3, 0.5);
    EXPECT_NEAR(bm_interval_expected_cost(0.7, 1.3, -2, 3, 0.5, CostSpec::constant(0.4)), 0.4 * e.e_time, 1e-10);
}

TEST(BrownianHat, ClosedForms) {
    EXPECT_NEAR(bm_hat_value(1, 1, CostSpec::constant(0.5), 3.0), 0.5, 1e-14);
    const double theta = 2 * 1.5 / (0.8 * 0.8);
    for (const double y : {0.0, 2.0, 5.0})
        EXPECT_NEAR(bm_hat_value(1.5, 0.8, CostSpec::affine_positive(30, 2), y), 30 + 2 * y - 2 / theta, 1e-9);
}

TEST(Identity, LadderSumOnCapInstance) {
    MCConfig cfg;
    cfg.paths = 20000;
    const IdentityReport r = check_ladder_sum_identity(test::cap5(), 0.0, 4.8, cfg);
    EXPECT_TRUE(r.passed(4.0)) << r.z;
    EXPECT_EQ(r.paths, 20000u);
}

TEST(Identity, InclusiveConventionIsBiased) {
    MCConfig cfg;
    cfg.paths = 20000;
    const IdentityReport r = check_ladder_sum_identity(test::cap5(), 0.0, 4.8, cfg, LadderConvention::inclusive);
    EXPECT_FALSE(r.passed());
}

TEST(Identity, MaxRepresentationBrownian) {
    MCConfig cfg;
    cfg.paths = 2000;
    const ProblemSpec p = test::bm_softplus();
    const IdentityReport r = check_max_representation(*p.levy(), p, -1.0, 2.0, cfg);
    EXPECT_TRUE(r.passed(4.0)) << r.z;
    MaxRepOptions flipped;
    flipped.f_override = [](double m) { return 1.0 / (1.0 + std::exp(m)) + 0.5; };
    EXPECT_FALSE(check_max_representation(*p.levy(), p, -1.0, 2.0, cfg, flipped).passed());
}
