// Acceptance run: one PASS/FAIL line per criterion, nonzero exit if any fails.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <string>
#include <vector>

#include "lcstop/discretize.hpp"
#include "lcstop/error.hpp"
#include "lcstop/ladder.hpp"
#include "lcstop/oracle.hpp"
#include "lcstop/threshold.hpp"
#include "support.hpp"

using namespace lcstop;

namespace {

constexpr double kContinuumValue = -0.69314718055994531 - 0.5;  // gamma(0) - c E tau_0 from -1

struct Outcome {
    bool pass = false;
    std::string detail;
};

double seconds_since(std::chrono::steady_clock::time_point start) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
}

std::string fmt(const char* f, auto... args) {
    char buf[512];
    std::snprintf(buf, sizeof buf, f, args...);
    return buf;
}

Outcome skipfree_benchmark() {
    const auto start = std::chrono::steady_clock::now();
    const ProblemSpec p = test::cap5();
    RandomWalkOptions o;
    o.bracket = std::make_pair(0.0, 10.0);
    o.tol = 1e-10;
    const Threshold t = random_walk_threshold(*p.walk(), p, MCConfig{}, o);
    MCConfig cfg;
    cfg.paths = 100000;
    const ValueEstimate v = value_of_threshold(p, t.x_bar, t.boundary, 0.0, cfg);
    const DPSolution dp = dp_value_iteration(p, -60, 15, 1e-13);
    const double v_dp = *dp.value_at(0.0);
    const bool ok = std::abs(t.x_bar - 4.8) <= 1e-9 && t.boundary == Boundary::nonstrict &&
                    std::abs(v.direct - 4.0) <= 3 * v.direct_se &&
                    std::abs(v.ladder_sum - 4.0) <= std::max(3 * v.ladder_se, 1e-9) && std::abs(v_dp - 4.0) <= 1e-6 &&
                    seconds_since(start) < 10.0;
    return {ok, fmt("x_bar=%.12f boundary=%s direct=%.5f+-%.5f ladder=%.9f dp=%.9f", t.x_bar,
                    std::string(to_string(t.boundary)).c_str(), v.direct, v.direct_se, v.ladder_sum, v_dp)};
}

Outcome dp_equivalence() {
    test::Gen g(424242);
    int certified = 0, matched = 0, drawn = 0;
    while (certified < 10 && drawn < 100) {
        ++drawn;
        const int down = g.integer(1, 3);
        std::vector<long> steps;
        std::vector<double> w;
        for (int k = -down; k <= 1; ++k) {
            steps.push_back(k);
            w.push_back(k == 1 ? g.uniform(2, 6) : g.uniform(0.1, 1));
        }
        double total = 0;
        for (const double x : w) total += x;
        for (double& x : w) x /= total;
        ProblemSpec p;
        p.process = StepDistribution::lattice(1.0, steps, w);
        if (!(p.walk()->mean() > 0.05)) continue;
        p.payoff = PayoffSpec::capped(std::round(g.uniform(2, 9)) + 0.5);
        p.cost = CostSpec::affine_positive(g.uniform(0.02, 0.2), g.uniform(0, 0.03));
        const Threshold t = random_walk_threshold(*p.walk(), p, MCConfig{});
        if (!t.assumption2 || t.assumption2->status != Assumption2Status::certified) continue;
        ++certified;
        const DPSolution dp = dp_value_iteration_auto(p, t.x_bar, 1e-12);
        if (dp_threshold_mismatches(dp, t.x_bar, t.boundary == Boundary::strict).empty()) ++matched;
    }
    return {certified == 10 && matched == 10, fmt("%d/%d matched (%d drawn)", matched, certified, drawn)};
}

Outcome brownian_threshold() {
    const ProblemSpec p = test::bm_softplus();
    const Threshold t = find_root(p, -2, 3, MCConfig{}, 1e-10);
    const double slope = 1.0 / (1.0 + std::exp(t.x_bar));
    return {std::abs(t.x_bar) <= 1e-6 && std::abs(slope - 0.5) <= 1e-6, fmt("x_bar=%.3e mu*gamma'=%.9f", t.x_bar, slope)};
}

Outcome max_representation() {
    const ProblemSpec p = test::bm_softplus();
    MCConfig cfg;
    cfg.paths = 100000;
    const auto start = std::chrono::steady_clock::now();
    const IdentityReport r = check_max_representation(*p.levy(), p, -1.0, 2.0, cfg);
    const double secs = seconds_since(start);
    MaxRepOptions flipped;
    flipped.f_override = [](double m) { return 1.0 / (1.0 + std::exp(m)) + 0.5; };
    const IdentityReport n = check_max_representation(*p.levy(), p, -1.0, 2.0, cfg, flipped);
    return {std::abs(r.z) <= 3 && std::abs(n.z) > 3 && secs < 60.0, fmt("z=%.3f (%.1fs) flipped z=%.1f", r.z, secs, n.z)};
}

Outcome continuum_value() {
    MCConfig cfg;
    cfg.paths = 100000;
    const ValueEstimate v = value_of_threshold(test::bm_softplus(), 0.0, Boundary::nonstrict, -1.0, cfg);
    return {std::abs(v.direct - kContinuumValue) <= 3 * v.direct_se,
            fmt("V(-1)=%.5f+-%.5f target %.6f", v.direct, v.direct_se, kContinuumValue)};
}

Outcome spatial_convergence() {
    const auto start = std::chrono::steady_clock::now();
    const ProblemSpec p = test::bm_softplus();
    MCConfig cfg;
    cfg.paths = 100000;
    const DiscretizationReport r = solve_sequence(*p.levy(), p, Scheme::spatial, {1, 2, 3, 4}, {-1.0}, cfg);
    bool ok = r.monotone_thresholds_ok && r.monotone_values_ok && r.limit_estimate &&
              std::abs(*r.limit_estimate) <= 0.01;
    std::string thresholds, values;
    double prev = -1e300;
    for (const LevelResult& l : r.levels) {
        const double oracle = test::spatial_level_root(1.0, 0.5, l.delta);
        ok = ok && std::abs(l.threshold.x_bar - oracle) <= 1e-3 && l.threshold.x_bar > prev;
        prev = l.threshold.x_bar;
        thresholds += fmt(" %.5f", l.threshold.x_bar);
        values += fmt(" %.5f", l.values.at(0).value.direct);
    }
    const ValueEstimate& last = r.levels.back().values.at(0).value;
    ok = ok && std::abs(last.direct - kContinuumValue) <= 3 * last.direct_se && seconds_since(start) < 300.0;
    return {ok, fmt("x_bar_n:%s limit=%.2e V_n(-1):%s (se %.4f)", thresholds.c_str(), r.limit_estimate.value_or(NAN),
                    values.c_str(), last.direct_se)};
}

Outcome fn_convergence() {
    const ProblemSpec p = test::bm_softplus();
    const FnConvergence c = check_fn_convergence(*p.levy(), p, {2, 3, 4, 5}, {-1, 0, 1}, MCConfig{});
    bool ok = true;
    std::string ratios;
    for (const auto& row : c.ratios)
        for (const double q : row) {
            ok = ok && q >= 1.6 && q <= 2.4;
            ratios += fmt(" %.3f", q);
        }
    return {ok && c.halving_ok, "ratios" + ratios};
}

Outcome hat_transform_check() {
    const LevySpec l = LevySpec::bm(1, 1);
    const CostSpec h = CostSpec::constant(0.5);
    const std::vector<double> grid{-3, -1, 0, 1, 3};
    const HatFunction a = hat_transform(l, h, grid, MCConfig{});
    bool ok = true;
    for (const double v : a.values) ok = ok && std::abs(v - 0.5) <= 1e-3;
    MCConfig cfg;
    cfg.paths = 4000;
    HatOptions o;
    o.method = HatOptions::Method::mc_skeleton;
    o.dt = 1.0 / 1024;
    const HatFunction m = hat_transform(l, h, grid, cfg, o);
    double worst = 0;
    for (std::size_t i = 0; i < m.values.size(); ++i) {
        ok = ok && std::abs(m.values[i] - 0.5) <= m.ci_halfwidths[i];
        worst = std::max(worst, std::abs(m.values[i] - 0.5) / m.ci_halfwidths[i]);
    }
    const CostSpec affine = CostSpec::affine_positive(0.2, 0.3);
    double worst_rel = 0;
    for (const auto& [x, y] : {std::pair{-1.0, 0.0}, std::pair{0.0, 2.0}}) {
        const int n = 2000;
        std::vector<double> pts;
        for (int i = 0; i <= n; ++i) pts.push_back(x + (y - x) * i / n);
        const HatFunction hat = hat_transform(l, affine, pts, MCConfig{});
        double simpson = 0;
        for (int i = 0; i <= n; ++i) simpson += hat.values[i] * (i == 0 || i == n ? 1 : (i % 2 ? 4 : 2));
        simpson *= (y - x) / n / 3.0;
        const double green = bm_green_expected_cost(1, 1, x, y, affine);
        worst_rel = std::max(worst_rel, std::abs(simpson - green) / green);
    }
    ok = ok && worst_rel <= 1e-3;
    return {ok, fmt("skeleton |err|/ci max %.2f, integral identity rel err %.2e", worst, worst_rel)};
}

Outcome property_suite() {
    test::Gen g(9001);
    int scale_fail = 0, kappa_fail = 0;
    for (int trial = 0; trial < 20; ++trial) {
        ProblemSpec p = test::cap5(0.1, g.uniform(0.55, 0.95));
        p.payoff = PayoffSpec::capped(g.uniform(1, 8));
        p.cost = CostSpec::affine_positive(g.uniform(0.01, 0.2), g.uniform(0, 0.05));
        const double alpha = g.uniform(0.1, 10);
        ProblemSpec q = p;
        q.payoff.scale = alpha;
        q.cost = CostSpec::affine_positive(alpha * p.cost.a, alpha * p.cost.b);
        if (std::abs(random_walk_threshold(*p.walk(), p, MCConfig{}).x_bar -
                     random_walk_threshold(*q.walk(), q, MCConfig{}).x_bar) > 1e-8)
            ++scale_fail;
        const double kappa = g.uniform(0.1, 10);
        p.weight = CostSpec::constant(kappa);
        EvalOptions w;
        w.variant = FVariant::weighted;
        for (const double y : {-2.0, 0.5, 3.0}) {
            const double f = evaluate_f(p, y, MCConfig{}).f;
            if (std::abs(evaluate_f(p, y, MCConfig{}, w).f * kappa - f) > 1e-12 * std::max(1.0, std::abs(f))) ++kappa_fail;
        }
    }

    const ProblemSpec cap = test::cap5();
    const LadderStats exact = ladder_stats_exact_skipfree(*cap.walk(), cap, 4.5);
    int covered = 0;
    for (std::uint64_t seed = 1; seed <= 100; ++seed) {
        MCConfig cfg;
        cfg.paths = 2000;
        cfg.seed = seed;
        const LadderStats s = ladder_stats_mc(cap, 4.5, cfg);
        if (std::abs(s.phi - exact.phi) <= s.ci_phi && std::abs(s.e_tau_plus - exact.e_tau_plus) <= s.ci_tau_plus) ++covered;
    }

    int large_z = 0;
    for (std::uint64_t seed = 1; seed <= 50; ++seed) {
        MCConfig cfg;
        cfg.paths = 2000;
        cfg.seed = 1000 + seed;
        if (std::abs(check_ladder_sum_identity(cap, 0.0, 4.8, cfg).z) > 3) ++large_z;
    }

    ProblemSpec convex = test::cap5();
    convex.payoff = PayoffSpec::exp(1.0, 0.5);
    std::vector<double> grid;
    for (int i = 0; i <= 40; ++i) grid.push_back(-5 + 0.25 * i);
    bool convex_flagged = false;
    try {
        convex_flagged = validate_assumption2(f_curve(convex, grid, MCConfig{})).status == Assumption2Status::violated;
    } catch (const Error&) {
    }
    ProblemSpec decreasing = test::cap5();
    decreasing.payoff = PayoffSpec::linear(-1.0);
    const bool decreasing_flagged = !validate_problem(decreasing, MCConfig{}).ok();

    const bool ok = scale_fail == 0 && kappa_fail == 0 && covered >= 95 && large_z <= 2 && convex_flagged && decreasing_flagged;
    return {ok, fmt("scale fails %d, kappa fails %d, coverage %d/100, |z|>3 in %d/50, convex %s, decreasing %s", scale_fail,
                    kappa_fail, covered, large_z, convex_flagged ? "flagged" : "missed",
                    decreasing_flagged ? "flagged" : "missed")};
}

}  // namespace

int main() {
    const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria{
        {"skip-free benchmark", skipfree_benchmark},
        {"dp/threshold equivalence", dp_equivalence},
        {"brownian closed-form threshold", brownian_threshold},
        {"maximum representation", max_representation},
        {"continuum value", continuum_value},
        {"spatial discretization", spatial_convergence},
        {"f_n generator convergence", fn_convergence},
        {"cost transform", hat_transform_check},
        {"property suite", property_suite},
    };
    int failed = 0;
    for (std::size_t i = 0; i < criteria.size(); ++i) {
        const auto start = std::chrono::steady_clock::now();
        Outcome o;
        try {
            o = criteria[i].second();
        } catch (const std::exception& e) {
            o = {false, std::string("threw: ") + e.what()};
        }
        const double secs = seconds_since(start);
        if (!o.pass) ++failed;
        std::printf("%s %zu %s: %s [%.1fs]\n", o.pass ? "PASS" : "FAIL", i + 1, criteria[i].first.c_str(), o.detail.c_str(), secs);
        std::fflush(stdout);
    }
    return failed == 0 ? 0 : 1;
}
