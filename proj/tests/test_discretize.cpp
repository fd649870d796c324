#include <gtest/gtest.h>

#include <cmath>

#include "lcstop/discretize.hpp"
#include "lcstop/error.hpp"
#include "support.hpp"

using namespace lcstop;

TEST(TimeScheme, GaussianStepAndConstantCost) {
    const ProblemSpec p = test::bm_softplus();
    const EmbeddedWalk w = build_time_discretization(*p.levy(), p, 2, MCConfig{});
    EXPECT_EQ(w.delta, 0.25);
    EXPECT_EQ(w.step.kind, StepKind::gaussian);
    EXPECT_DOUBLE_EQ(w.step.location, 0.25);
    EXPECT_DOUBLE_EQ(w.step.spread, 0.5);
    EXPECT_DOUBLE_EQ(eval_cost(w.ceil_h, 3.0), 0.125);
}

TEST(TimeScheme, AffineCostQuadrature) {
    ProblemSpec p = test::bm_softplus(0.8, 1.2);
    p.cost = CostSpec::affine_positive(40, 0.5);
    const EmbeddedWalk w = build_time_discretization(*p.levy(), p, 1, MCConfig{});
    const double d = 0.5;
    for (const double x : {-5.0, 0.0, 7.5}) EXPECT_NEAR(eval_cost(w.ceil_h, x), 40 * d + 0.5 * (x * d + 0.8 * d * d / 2), 1e-8);
}

TEST(TimeScheme, UnboundedPayoffRejected) {
    ProblemSpec p = test::bm_softplus();
    p.payoff = PayoffSpec::exp(-1.0, -1.0);
    try {
        build_time_discretization(*p.levy(), p, 1, MCConfig{});
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), ErrorCode::method_inapplicable);
    }
}

TEST(SpatialScheme, BrownianCellExit) {
    const ProblemSpec p = test::bm_softplus();
    const EmbeddedWalk w = build_spatial_discretization(*p.levy(), p, 1, MCConfig{});
    EXPECT_NEAR(w.p_up, 0.731059, 1e-6);
    EXPECT_NEAR(w.e_duration, 0.231059, 1e-6);
    EXPECT_NEAR(eval_cost(w.ceil_h, 0.0), 0.115530, 1e-6);
    EXPECT_TRUE(w.step.upward_skip_free());
    EXPECT_FALSE(w.grid_snap_bias);
}

TEST(SpatialScheme, PureDriftMovesUp) {
    ProblemSpec p = test::bm_softplus();
    p.process = LevySpec::compound_poisson(1.0, 0.0, StepDistribution::gaussian(0, 0));
    MCConfig cfg;
    cfg.paths = 200;
    const EmbeddedWalk w = build_spatial_discretization(*p.levy(), p, 2, cfg);
    EXPECT_DOUBLE_EQ(w.p_up, 1.0);
    EXPECT_NEAR(w.e_duration, 0.25, 0.25 * 0.25 / 64 + 1e-12);
}

TEST(SpatialScheme, JumpsSetSnapFlag) {
    ProblemSpec p = test::bm_softplus();
    p.process = LevySpec::compound_poisson(1.0, 2.0, StepDistribution::two_point(0.5, 1.0, 1.0));
    MCConfig cfg;
    cfg.paths = 2000;
    const EmbeddedWalk w = build_spatial_discretization(*p.levy(), p, 1, cfg);
    EXPECT_TRUE(w.grid_snap_bias);
    EXPECT_EQ(w.method, "spatial/monte_carlo_exit_snapped");
}

TEST(SpatialScheme, LevelThresholdMatchesBisection) {
    const ProblemSpec p = test::bm_softplus();
    for (const int n : {1, 2, 3}) {
        const EmbeddedWalk w = build_spatial_discretization(*p.levy(), p, n, MCConfig{});
        MCConfig cfg;
        cfg.paths = 500;
        const LevelResult r = solve_level(w, p, {}, cfg);
        EXPECT_NEAR(r.threshold.x_bar, test::spatial_level_root(1.0, 0.5, w.delta), 1e-8) << "n=" << n;
    }
}

TEST(SpatialScheme, LevelFunctionIsDifferenceQuotient) {
    const ProblemSpec p = test::bm_softplus();
    const EmbeddedWalk w = build_spatial_discretization(*p.levy(), p, 2, MCConfig{});
    EvalOptions o;
    o.variant = FVariant::weighted;
    const ProblemSpec q = w.problem(p);
    for (const double x : {-1.0, 0.0, 1.5}) {
        const double fn = evaluate_f(q, x, MCConfig{}, o).f;
        EXPECT_NEAR(fn, (test::softplus(x + w.delta) - test::softplus(x)) / w.delta - 0.5, 1e-9);
    }
}

TEST(SpatialScheme, MonteCarloCoversExactLevelFunction) {
    const ProblemSpec p = test::bm_softplus();
    const EmbeddedWalk w = build_spatial_discretization(*p.levy(), p, 1, MCConfig{});
    const ProblemSpec q = w.problem(p);
    MCConfig cfg;
    cfg.paths = 40000;
    EvalOptions mc;
    mc.variant = FVariant::weighted;
    mc.backend = FBackend::monte_carlo;
    EvalOptions ex;
    ex.variant = FVariant::weighted;
    for (const double x : {-1.0, 0.5}) {
        const FValue v = evaluate_f(q, x, cfg, mc);
        EXPECT_LE(std::abs(v.f - evaluate_f(q, x, cfg, ex).f), v.ci_halfwidth);
    }
}

TEST(SpatialScheme, ProbeAboveThresholdStopsAtOnce) {
    const ProblemSpec p = test::bm_softplus();
    const EmbeddedWalk w = build_spatial_discretization(*p.levy(), p, 1, MCConfig{});
    MCConfig cfg;
    cfg.paths = 500;
    const LevelResult r = solve_level(w, p, {1.0}, cfg);
    ASSERT_EQ(r.values.size(), 1u);
    EXPECT_TRUE(r.values[0].value.immediate);
    EXPECT_EQ(r.values[0].value.direct, test::softplus(1.0));
}

TEST(FnConvergence, LinearPayoffIsExactAtEveryLevel) {
    ProblemSpec p = test::bm_softplus(1.0, 1.0, 0.0);
    p.payoff = PayoffSpec::linear(1.0);
    const FnConvergence c = check_fn_convergence(*p.levy(), p, {1, 2, 3}, {-1, 0, 1}, MCConfig{});
    for (const auto& row : c.f_n)
        for (const double v : row) EXPECT_NEAR(v, 1.0, 1e-10);
    EXPECT_TRUE(c.halving_ok);
}

TEST(FnConvergence, ConstantPayoffGivesMinusCost) {
    ProblemSpec p = test::bm_softplus(1.0, 1.0, 0.3);
    p.payoff = PayoffSpec::constant(2.0);
    const FnConvergence c = check_fn_convergence(*p.levy(), p, {1, 2}, {0, 4}, MCConfig{});
    for (const auto& row : c.f_n)
        for (const double v : row) EXPECT_NEAR(v, -0.3, 1e-10);
}

TEST(FnConvergence, SoftplusResidualHalves) {
    const ProblemSpec p = test::bm_softplus();
    const FnConvergence c = check_fn_convergence(*p.levy(), p, {2, 3, 4, 5}, {-1, 0, 1}, MCConfig{});
    EXPECT_TRUE(c.halving_ok);
    for (const auto& row : c.ratios)
        for (const double r : row) {
            EXPECT_GT(r, 1.6);
            EXPECT_LT(r, 2.4);
        }
}

TEST(Sequence, SpatialBrownianSoftplus) {
    const ProblemSpec p = test::bm_softplus();
    MCConfig cfg;
    cfg.paths = 4000;
    const DiscretizationReport r = solve_sequence(*p.levy(), p, Scheme::spatial, {1, 2, 3, 4}, {-1.0}, cfg);
    ASSERT_EQ(r.levels.size(), 4u);
    for (const auto& l : r.levels) EXPECT_NEAR(l.threshold.x_bar, -l.delta / 2, 1e-8);
    EXPECT_TRUE(r.monotone_thresholds_ok);
    ASSERT_TRUE(r.continuum_threshold.has_value());
    EXPECT_NEAR(*r.continuum_threshold, 0.0, 1e-9);
    ASSERT_TRUE(r.limit_estimate.has_value());
    EXPECT_NEAR(*r.limit_estimate, 0.0, 1e-6);
    ASSERT_TRUE(r.fn.has_value());
}

TEST(Sequence, SingleLevelHasNoExtrapolation) {
    const ProblemSpec p = test::bm_softplus();
    MCConfig cfg;
    cfg.paths = 500;
    const DiscretizationReport r = solve_sequence(*p.levy(), p, Scheme::spatial, {2}, {-1.0}, cfg);
    EXPECT_FALSE(r.limit_estimate.has_value());
    EXPECT_FALSE(r.order_estimate.has_value());
}

TEST(Sequence, LevelsMustIncrease) {
    const ProblemSpec p = test::bm_softplus();
    EXPECT_THROW(solve_sequence(*p.levy(), p, Scheme::spatial, {2, 1}, {}, MCConfig{}), Error);
}

TEST(Sequence, DefaultProbes) {
    EXPECT_EQ(default_probes(0.0), (std::vector<double>{-5, -4, -3, -2, -1}));
}
