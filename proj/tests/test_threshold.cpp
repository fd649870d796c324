#include <gtest/gtest.h>

#include <cmath>

#include "lcstop/error.hpp"
#include "lcstop/threshold.hpp"
#include "support.hpp"

using namespace lcstop;

namespace {

ErrorCode code_of(const std::function<void()>& fn) {
    try {
        fn();
    } catch (const Error& e) {
        return e.code();
    }
    ADD_FAILURE() << "no error thrown";
    return ErrorCode::invalid_argument;
}

FCurve curve(std::vector<double> f, std::vector<double> ci = {}) {
    FCurve c;
    for (std::size_t i = 0; i < f.size(); ++i) c.grid.push_back(static_cast<double>(i));
    c.f_values = std::move(f);
    c.ci_halfwidths = ci.empty() ? std::vector<double>(c.f_values.size(), 0.0) : std::move(ci);
    return c;
}

FEvaluator exact_fn(std::function<double(double)> g) {
    return [g](double y, std::size_t) { return FValue{g(y), 0.0, true}; };
}

}  // namespace

TEST(EvaluateF, CapInstanceExamples) {
    const ProblemSpec p = test::cap5();
    EXPECT_NEAR(evaluate_f(p, 0.0, MCConfig{}).f, 0.4, 1e-12);
    EXPECT_NEAR(evaluate_f(p, 4.5, MCConfig{}).f, 0.15, 1e-12);
    EXPECT_NEAR(evaluate_f(p, 4.8, MCConfig{}).f, 0.0, 1e-12);
    EXPECT_NEAR(evaluate_f(p, 7.0, MCConfig{}).f, -0.1, 1e-12);
    EXPECT_TRUE(evaluate_f(p, 0.0, MCConfig{}).exact);
}

TEST(EvaluateF, MonteCarloCoversExactValue) {
    const ProblemSpec p = test::cap5();
    MCConfig cfg;
    cfg.paths = 40000;
    EvalOptions o;
    o.backend = FBackend::monte_carlo;
    for (const double y : {1.0, 4.5}) {
        const FValue v = evaluate_f(p, y, cfg, o);
        EXPECT_FALSE(v.exact);
        EXPECT_LE(std::abs(v.f - evaluate_f(p, y, cfg).f), v.ci_halfwidth);
    }
}

TEST(EvaluateF, WeightedNeedsWeight) {
    EvalOptions o;
    o.variant = FVariant::weighted;
    EXPECT_EQ(code_of([&] { evaluate_f(test::cap5(), 0.0, MCConfig{}, o); }), ErrorCode::invalid_argument);
}

TEST(EvaluateF, LevyProcessNeedsLevyEvaluator) {
    EXPECT_EQ(code_of([] { evaluate_f(test::bm_softplus(), 0.0, MCConfig{}); }), ErrorCode::method_inapplicable);
}

TEST(LevyF, AnalyticSoftplus) {
    const ProblemSpec p = test::bm_softplus();
    const LevySpec& l = *p.levy();
    EXPECT_NEAR(evaluate_f_levy(l, p, 0.0, MCConfig{}).f, 0.0, 1e-15);
    for (const double x : {-2.0, -0.5, 1.0, 3.0})
        EXPECT_NEAR(evaluate_f_levy(l, p, x, MCConfig{}).f, 1.0 / (1.0 + std::exp(x)) - 0.5, 1e-12);
}

TEST(LevyF, AnalyticScalesWithDrift) {
    ProblemSpec p = test::bm_softplus(2.0, 1.0, 1.0);
    EXPECT_NEAR(evaluate_f_levy(*p.levy(), p, 0.0, MCConfig{}).f, 0.0, 1e-15);
    EXPECT_NEAR(evaluate_f_levy(*p.levy(), p, -1.0, MCConfig{}).f, 2.0 / (1.0 + std::exp(-1.0)) - 1.0, 1e-12);
}

TEST(LevyF, FlippedSignMovesRoot) {
    const ProblemSpec p = test::bm_softplus();
    LevyFOptions o;
    o.flip_sign = true;
    EXPECT_NEAR(evaluate_f_levy(*p.levy(), p, 0.0, MCConfig{}, o).f, 1.0, 1e-12);
}

TEST(LevyF, DifferenceQuotientAgreesWithAnalytic) {
    const ProblemSpec p = test::bm_softplus();
    MCConfig cfg;
    cfg.paths = 4000;
    LevyFOptions o;
    o.backend = LevyFOptions::Backend::difference_quotient;
    for (const double x : {-1.0, 1.0}) {
        const FValue dq = evaluate_f_levy(*p.levy(), p, x, cfg, o);
        const FValue an = evaluate_f_levy(*p.levy(), p, x, cfg);
        EXPECT_FALSE(dq.exact);
        EXPECT_LE(std::abs(dq.f - an.f), dq.ci_halfwidth) << "x=" << x;
    }
}

TEST(LevyF, NonPositiveDriftRejected) {
    const ProblemSpec p = test::bm_softplus(-1.0);
    EXPECT_EQ(code_of([&] { evaluate_f_levy(*p.levy(), p, 0.0, MCConfig{}); }), ErrorCode::method_inapplicable);
}

TEST(Monotonicity, Certified) {
    const Assumption2Report r = validate_assumption2(curve({1, 0.5, -0.5, -1}));
    EXPECT_EQ(r.status, Assumption2Status::certified);
    EXPECT_EQ(r.sign_change, 1u);
}

TEST(Monotonicity, ExactZeroCountsNonPositive) {
    EXPECT_EQ(validate_assumption2(curve({1, 0, 0, -1})).status, Assumption2Status::certified);
}

TEST(Monotonicity, TwoSignChanges) {
    const Assumption2Report r = validate_assumption2(curve({1, -1, 1, -1}));
    EXPECT_EQ(r.status, Assumption2Status::violated);
    EXPECT_EQ(r.offending.size(), 3u);
}

TEST(Monotonicity, RisingAfterCrossing) {
    const Assumption2Report r = validate_assumption2(curve({1, -1, -0.5, -2}));
    EXPECT_EQ(r.status, Assumption2Status::violated);
    ASSERT_EQ(r.offending.size(), 1u);
    EXPECT_EQ(r.offending[0], (std::pair<std::size_t, std::size_t>{1, 2}));
}

TEST(Monotonicity, NegativeToPositive) {
    EXPECT_EQ(validate_assumption2(curve({-1, 1})).status, Assumption2Status::violated);
}

TEST(Monotonicity, UndecidedAwayFromCrossing) {
    EXPECT_EQ(validate_assumption2(curve({1, 0.5, -0.5, -0.6}, {0, 0, 0, 0.7})).status, Assumption2Status::inconclusive);
}

TEST(Monotonicity, NoSignChange) {
    EXPECT_EQ(code_of([] { validate_assumption2(curve({2, 1, 0.5})); }), ErrorCode::bracket_not_found);
    EXPECT_EQ(code_of([] { validate_assumption2(curve({0, 0, 0})); }), ErrorCode::bracket_not_found);
}

TEST(FindRoot, ContinuousExact) {
    const Threshold t = find_root(exact_fn([](double y) { return 1.0 - y; }), -3, 4, 1e-12);
    EXPECT_NEAR(t.x_bar, 1.0, 1e-11);
    EXPECT_EQ(t.boundary, Boundary::nonstrict);
    EXPECT_FALSE(t.jump);
}

TEST(FindRoot, JumpFollowsSignAtRoot) {
    for (const double at : {2.0, 2.3, 1.0 / 3.0}) {
        const auto g = [at](double y) { return y < at ? 1.0 : -1.0; };
        const Threshold t = find_root(exact_fn(g), 0, 3, 1e-12);
        EXPECT_NEAR(t.x_bar, at, 1e-11);
        EXPECT_TRUE(t.jump);
        EXPECT_EQ(t.boundary, g(t.x_bar) > 0 ? Boundary::strict : Boundary::nonstrict);
    }
}

TEST(FindRoot, ContinuousWithFlatTail) {
    const Threshold t = find_root(exact_fn([](double y) { return std::max(0.0, 5.0 - y) / 2; }), -1, 8, 1e-10);
    EXPECT_NEAR(t.x_bar, 5.0, 1e-9);
    EXPECT_FALSE(t.jump);
    EXPECT_EQ(t.boundary, Boundary::nonstrict);
}

TEST(FindRoot, MonteCarloBoundaryFromInterval) {
    // Bisection points 1.5, 0.75, 1.125, 0.9375 are all decided; x_bar = 1.03125 is not.
    const FEvaluator f = [](double y, std::size_t) { return FValue{1.0 - y, 0.04, false}; };
    const Threshold t = find_root(f, 0, 3, 0.2);
    EXPECT_DOUBLE_EQ(t.x_bar, 1.03125);
    EXPECT_TRUE(t.boundary_inconclusive);
    EXPECT_EQ(t.boundary, Boundary::nonstrict);
}

TEST(FindRoot, MonteCarloStrictWhenLowerBoundPositive) {
    const FEvaluator f = [](double y, std::size_t) { return FValue{y <= 1.0 ? 0.5 : -0.5, 0.01, false}; };
    const Threshold t = find_root(f, 0, 3, 1e-9);
    EXPECT_EQ(t.boundary, t.x_bar <= 1.0 ? Boundary::strict : Boundary::nonstrict);
    EXPECT_FALSE(t.boundary_inconclusive);
}

TEST(FindRoot, EscalatesPathBudget) {
    std::size_t largest = 0;
    const FEvaluator f = [&](double y, std::size_t m) {
        largest = std::max(largest, m);
        return FValue{1.0 - y, 0.5 / std::sqrt(static_cast<double>(m)), false};
    };
    find_root(f, -3, 4, 1.0);
    EXPECT_EQ(largest, 4u);
    EXPECT_THROW(find_root(f, -3, 4, 1e-6), RootInconclusive);
    EXPECT_EQ(largest, 16u);
}

TEST(FindRoot, ErrorCases) {
    EXPECT_EQ(code_of([] { find_root(exact_fn([](double) { return 0.0; }), 0, 1, 1e-9); }), ErrorCode::root_inconclusive);
    EXPECT_EQ(code_of([] { find_root(exact_fn([](double y) { return 5.0 - y; }), 0, 1, 1e-9); }), ErrorCode::bracket_not_found);
    EXPECT_EQ(code_of([] { find_root(exact_fn([](double y) { return -y; }), 1, 2, 1e-9); }), ErrorCode::bracket_not_found);
    EXPECT_EQ(code_of([] { find_root(exact_fn([](double y) { return -y; }), 2, 1, 1e-9); }), ErrorCode::invalid_argument);
    const FEvaluator noisy = [](double, std::size_t) { return FValue{0.0, 1.0, false}; };
    EXPECT_THROW(find_root(noisy, 0, 1, 1e-9), RootInconclusive);
}

TEST(FindRoot, LevySoftplusRoot) {
    const Threshold t = find_root(test::bm_softplus(), -2, 3, MCConfig{}, 1e-12);
    EXPECT_NEAR(t.x_bar, 0.0, 1e-10);
    EXPECT_EQ(t.boundary, Boundary::nonstrict);
}

TEST(RandomWalk, CapInstance) {
    const ProblemSpec p = test::cap5();
    RandomWalkOptions o;
    o.bracket = std::make_pair(0.0, 10.0);
    o.tol = 1e-10;
    const Threshold t = random_walk_threshold(*p.walk(), p, MCConfig{}, o);
    EXPECT_NEAR(t.x_bar, 4.8, 1e-9);
    EXPECT_EQ(t.boundary, Boundary::nonstrict);
    ASSERT_TRUE(t.assumption2.has_value());
    EXPECT_EQ(t.assumption2->status, Assumption2Status::certified);
}

TEST(RandomWalk, AutomaticBracket) {
    const ProblemSpec p = test::cap5();
    EXPECT_NEAR(random_walk_threshold(*p.walk(), p, MCConfig{}).x_bar, 4.8, 1e-8);
}

TEST(RandomWalk, ZeroCostStopsAtCap) {
    const ProblemSpec p = test::cap5(0.0);
    const Threshold t = random_walk_threshold(*p.walk(), p, MCConfig{});
    EXPECT_NEAR(t.x_bar, 5.0, 1e-8);
    EXPECT_EQ(t.boundary, Boundary::nonstrict);
}

TEST(RandomWalk, ImmediateStop) {
    ProblemSpec p = test::cap5();
    p.payoff = PayoffSpec::capped(-1.0);
    RandomWalkOptions o;
    o.bracket = std::make_pair(0.0, 10.0);
    const Threshold t = random_walk_threshold(*p.walk(), p, MCConfig{}, o);
    EXPECT_TRUE(t.immediate_stop);
    EXPECT_EQ(t.x_bar, 0.0);
}

TEST(RandomWalk, GaussianSeedsAgree) {
    ProblemSpec p;
    p.process = StepDistribution::gaussian(0.5, 1.0);
    p.payoff = PayoffSpec::capped(3.0);
    p.cost = CostSpec::constant(0.1);
    MCConfig cfg;
    cfg.paths = 20000;
    RandomWalkOptions o;
    o.bracket = std::make_pair(-2.0, 6.0);
    o.tol = 1e-6;
    const Threshold a = random_walk_threshold(*p.walk(), p, cfg.with_seed(11), o);
    const Threshold b = random_walk_threshold(*p.walk(), p, cfg.with_seed(12), o);
    ASSERT_TRUE(a.x_bar_ci && b.x_bar_ci);
    EXPECT_LE(std::max(a.x_bar_ci->first, b.x_bar_ci->first), std::min(a.x_bar_ci->second, b.x_bar_ci->second));
    EXPECT_LT(a.x_bar, 3.0);
}

TEST(RandomWalk, ConvexPayoffRejected) {
    ProblemSpec p = test::cap5();
    p.payoff = PayoffSpec::lookup({{-20, 2, 4, 20}, {-20, 2, 2.1, 20}});
    EXPECT_EQ(code_of([&] { random_walk_threshold(*p.walk(), p, MCConfig{}); }), ErrorCode::assumption_violated);
}

TEST(RandomWalk, DecreasingCostRejected) {
    ProblemSpec p = test::cap5();
    p.cost = CostSpec::lookup({{-20, 0, 20}, {1, 0.5, 0.2}});
    EXPECT_EQ(code_of([&] { random_walk_threshold(*p.walk(), p, MCConfig{}); }), ErrorCode::assumption_violated);
}

TEST(Property, ScaleInvariance) {
    test::Gen g(77);
    for (int trial = 0; trial < 20; ++trial) {
        ProblemSpec p = test::cap5(g.uniform(0.01, 0.3), g.uniform(0.55, 0.95));
        p.payoff = PayoffSpec::capped(g.uniform(1, 8));
        p.cost = CostSpec::affine_positive(g.uniform(0.01, 0.2), g.uniform(0, 0.05));
        const double alpha = g.uniform(0.1, 10);
        ProblemSpec q = p;
        q.payoff.scale = alpha;
        q.cost = CostSpec::affine_positive(alpha * p.cost.a, alpha * p.cost.b);
        const double a = random_walk_threshold(*p.walk(), p, MCConfig{}).x_bar;
        const double b = random_walk_threshold(*q.walk(), q, MCConfig{}).x_bar;
        EXPECT_NEAR(a, b, 1e-7) << "trial " << trial;
    }
}

TEST(Property, ConstantWeightKeepsRoot) {
    test::Gen g(78);
    for (int trial = 0; trial < 20; ++trial) {
        ProblemSpec p = test::cap5(g.uniform(0.01, 0.3), g.uniform(0.55, 0.95));
        p.payoff = PayoffSpec::softplus(g.uniform(-2, 2), g.uniform(0.5, 2));
        const double kappa = g.uniform(0.1, 10);
        p.weight = CostSpec::constant(kappa);
        RandomWalkOptions o;
        const double a = random_walk_threshold(*p.walk(), p, MCConfig{}, o).x_bar;
        o.variant = FVariant::weighted;
        const double b = random_walk_threshold(*p.walk(), p, MCConfig{}, o).x_bar;
        EXPECT_NEAR(a, b, 1e-7) << "trial " << trial;
        const double y = a - 1.0;
        EvalOptions eo;
        eo.variant = FVariant::weighted;
        EXPECT_NEAR(evaluate_f(p, y, MCConfig{}, eo).f * kappa, evaluate_f(p, y, MCConfig{}).f, 1e-12);
    }
}

TEST(Value, CapInstanceThreeWays) {
    MCConfig cfg;
    cfg.paths = 20000;
    const ValueEstimate v = value_of_threshold(test::cap5(), 4.8, Boundary::nonstrict, 0.0, cfg);
    EXPECT_NEAR(v.direct, 4.0, 4.0 * v.direct_se);
    EXPECT_NEAR(v.ladder_sum, 4.0, 1e-9);
    EXPECT_LE(std::abs(v.z), 4.0);
}

TEST(Value, InclusiveConventionCountsFinalEpoch) {
    MCConfig cfg;
    cfg.paths = 20000;
    ValueOptions o;
    o.convention = LadderConvention::inclusive;
    const ValueEstimate v = value_of_threshold(test::cap5(), 4.8, Boundary::nonstrict, 0.0, cfg, o);
    EXPECT_NEAR(v.residual, -0.2, 4.0 * v.residual_se + 1e-12);
}

TEST(Value, StartInsideStoppingSet) {
    const ValueEstimate v = value_of_threshold(test::cap5(), 4.8, Boundary::nonstrict, 6.0, MCConfig{});
    EXPECT_TRUE(v.immediate);
    EXPECT_EQ(v.direct, 5.0);
}

TEST(Value, ThresholdDominatesOtherLevels) {
    MCConfig cfg;
    cfg.paths = 20000;
    const ProblemSpec p = test::cap5();
    const ValueEstimate best = value_of_threshold(p, 4.8, Boundary::nonstrict, 0.0, cfg);
    for (const double other : {3.0, 6.0, 8.0}) {
        const ValueEstimate v = value_of_threshold(p, other, Boundary::nonstrict, 0.0, cfg);
        EXPECT_GT(best.direct, v.direct) << "level " << other;
    }
}

TEST(Value, BrownianSoftplusAgreement) {
    MCConfig cfg;
    cfg.paths = 2000;
    const ValueEstimate v = value_of_threshold(test::bm_softplus(), 0.0, Boundary::nonstrict, -1.0, cfg);
    EXPECT_LE(std::abs(v.z), 4.0);
    EXPECT_LT(v.direct, test::softplus(0.0));
}
