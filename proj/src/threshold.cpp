#include "lcstop/threshold.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "lcstop/error.hpp"
#include "lcstop/ladder.hpp"
#include "lcstop/levy_sim.hpp"
#include "lcstop/oracle.hpp"
#include "lcstop/parallel.hpp"
#include "lcstop/stats.hpp"

namespace lcstop {

std::string_view to_string(FVariant v) noexcept {
    switch (v) {
        case FVariant::standard: return "standard";
        case FVariant::weighted: return "weighted";
        case FVariant::levy: return "levy";
    }
    return "unknown";
}

std::string_view to_string(Assumption2Status s) noexcept {
    switch (s) {
        case Assumption2Status::certified: return "certified";
        case Assumption2Status::violated: return "violated";
        case Assumption2Status::inconclusive: return "inconclusive";
    }
    return "unknown";
}

std::string_view to_string(Boundary b) noexcept { return b == Boundary::strict ? "strict" : "nonstrict"; }

// ---------------------------------------------------------------------------
// Discrete f
// ---------------------------------------------------------------------------

FValue f_from_stats(const LadderStats& s, FVariant variant, double ci_level) {
    if (variant == FVariant::levy) throw Error(ErrorCode::invalid_argument, "levy variant has no ladder statistics");
    const bool weighted = variant == FVariant::weighted;
    const double denom = weighted ? s.e_weight : s.e_tau_plus;
    const double gain = s.gain();
    if (s.method != LadderMethod::monte_carlo) {
        if (!(denom > 0.0)) throw Error(ErrorCode::ill_conditioned_ratio, "denominator of f is not positive");
        return {gain / denom, 0.0, true};
    }
    const double n = static_cast<double>(s.n);
    const double var_den = weighted ? s.var_weight : s.var_tau;
    const double cov = weighted ? s.cov_gain_weight : s.cov_gain_tau;
    const double z = critical_value(ci_level);
    const double se_den = std::sqrt(var_den / n);
    if (!(denom - z * se_den > 0.0))
        throw Error(ErrorCode::ill_conditioned_ratio, "confidence interval of the denominator of f contains 0");
    const double f = gain / denom;
    const double var = std::max(0.0, s.var_gain - 2.0 * f * cov + f * f * var_den) / (n * denom * denom);
    return {f, z * std::sqrt(var), false};
}

FValue evaluate_f(const ProblemSpec& p, double y, const MCConfig& cfg, const EvalOptions& opts) {
    if (opts.variant == FVariant::weighted && !p.weight)
        throw Error(ErrorCode::invalid_argument, "weighted variant needs a weight function");
    if (p.levy()) throw Error(ErrorCode::method_inapplicable, "use evaluate_f_levy for Levy processes");
    const auto* walk = p.walk();
    const auto* chain = p.chain();
    const bool skipfree = walk && walk->upward_skip_free();
    const bool exact_available = skipfree || chain;
    if (opts.backend == FBackend::exact && !exact_available)
        throw Error(ErrorCode::method_inapplicable, "no exact ladder backend for this process");
    if (opts.backend != FBackend::monte_carlo && exact_available) {
        const LadderStats s = skipfree ? ladder_stats_exact_skipfree(*walk, p, y, opts.depth)
                                       : ladder_stats_finite_chain(*chain, p, y);
        return f_from_stats(s, opts.variant, cfg.ci_level);
    }
    return f_from_stats(ladder_stats_mc(p, y, cfg), opts.variant, cfg.ci_level);
}

// ---------------------------------------------------------------------------
// Levy f
// ---------------------------------------------------------------------------

namespace {

struct Quotient {
    double f = 0.0;
    double se = 0.0;
};

Quotient passage_quotient(const LevySpec& levy, const ProblemSpec& p, double x, double delta, double dt,
                          const MCConfig& cfg, std::string_view tag) {
    const LevySkeleton sim(levy, dt);
    const std::size_t n = cfg.paths;
    std::vector<double> gain(n), time(n), done(n, 0.0);
    const double gamma_x = p.gamma(x);
    parallel_for(n, [&](std::size_t i) {
        RandomStream rng(cfg.seed, derive_stream(cfg.seed, tag, i));
        const PassagePath path = simulate_passage(sim, x, x + delta, true, p.cost, rng, cfg.max_steps);
        if (path.censored) return;
        gain[i] = p.gamma(path.end) - gamma_x - path.cost;
        time[i] = path.time;
        done[i] = 1.0;
    });
    std::vector<double> g, t;
    for (std::size_t i = 0; i < n; ++i) {
        if (done[i] == 0.0) continue;
        g.push_back(gain[i]);
        t.push_back(time[i]);
    }
    const double censored = 1.0 - static_cast<double>(g.size()) / static_cast<double>(n);
    if (censored > 0.10 || g.size() < 2)
        throw Error(ErrorCode::estimation_failed,
                    "first passage censored on " + std::to_string(100.0 * censored) + "% of paths");
    const RatioEstimate r = ratio_estimate(g, t);
    return {r.ratio, r.std_error};
}

}  // namespace

FValue evaluate_f_levy(const LevySpec& levy, const ProblemSpec& p, double x, const MCConfig& cfg,
                       const LevyFOptions& opts) {
    levy.validate();
    if (!(levy.mean() > 0.0)) throw Error(ErrorCode::method_inapplicable, "Levy threshold function needs E(X1) > 0");
    const bool analytic = opts.backend == LevyFOptions::Backend::bm_analytic ||
                          (opts.backend == LevyFOptions::Backend::automatic && levy.kind == LevyKind::bm_drift);
    if (analytic) {
        if (levy.kind != LevyKind::bm_drift)
            throw Error(ErrorCode::method_inapplicable, "analytic backend needs Brownian motion with drift");
        const double generator = levy.drift * eval_payoff_derivative(p.payoff, x);
        const double hat = bm_hat_value(levy.drift, levy.sigma, p.cost, x);
        return {opts.flip_sign ? generator + hat : generator - hat, 0.0, true};
    }
    if (opts.flip_sign) throw Error(ErrorCode::method_inapplicable, "sign flip applies to the analytic backend only");
    cfg.validate();
    if (!(opts.delta > 0.0)) throw Error(ErrorCode::invalid_argument, "difference-quotient height must be positive");
    const std::string key = std::to_string(x);
    const Quotient coarse = passage_quotient(levy, p, x, opts.delta, opts.dt, cfg, "levy-f/coarse@" + key);
    const Quotient fine = passage_quotient(levy, p, x, 0.5 * opts.delta, opts.dt, cfg, "levy-f/fine@" + key);
    const double f = 2.0 * fine.f - coarse.f;
    const double se = std::sqrt(4.0 * fine.se * fine.se + coarse.se * coarse.se);
    return {f, critical_value(cfg.ci_level) * se, false};
}

FCurve f_curve(const ProblemSpec& p, const std::vector<double>& grid, const MCConfig& cfg, const EvalOptions& opts,
               const LevyFOptions& levy_opts) {
    for (std::size_t i = 1; i < grid.size(); ++i)
        if (!(grid[i] > grid[i - 1])) throw Error(ErrorCode::invalid_argument, "f-curve grid must be strictly increasing");
    FCurve c;
    c.grid = grid;
    c.variant = p.levy() ? FVariant::levy : opts.variant;
    for (const double y : grid) {
        const FValue v = p.levy() ? evaluate_f_levy(*p.levy(), p, y, cfg, levy_opts) : evaluate_f(p, y, cfg, opts);
        c.f_values.push_back(v.f);
        c.ci_halfwidths.push_back(v.ci_halfwidth);
    }
    return c;
}

// ---------------------------------------------------------------------------
// Monotonicity of f
// ---------------------------------------------------------------------------

Assumption2Report validate_assumption2(const FCurve& curve) {
    const std::size_t m = curve.grid.size();
    if (m < 2 || curve.f_values.size() != m || curve.ci_halfwidths.size() != m)
        throw Error(ErrorCode::invalid_argument, "f curve needs at least two points with matching columns");
    // +1 robustly positive, -1 robustly non-positive, 0 undecided.
    std::vector<int> sign(m, 0);
    for (std::size_t i = 0; i < m; ++i) {
        const double f = curve.f_values[i];
        const double ci = curve.ci_halfwidths[i];
        if (f - ci > 0.0) {
            sign[i] = 1;
        } else if (f + ci < 0.0 || (ci == 0.0 && f == 0.0)) {
            sign[i] = -1;
        }
    }
    auto slack = [&](std::size_t i, std::size_t j) { return curve.ci_halfwidths[i] + curve.ci_halfwidths[j] + 1e-12; };
    auto rising = [&](std::size_t i) { return curve.f_values[i + 1] > curve.f_values[i] + slack(i, i + 1); };

    Assumption2Report r;
    bool any_robust = false;
    bool all_zero = true;
    for (std::size_t i = 0; i < m; ++i) {
        if (curve.f_values[i] != 0.0 || curve.ci_halfwidths[i] != 0.0) all_zero = false;
        if (sign[i] == 1 || (sign[i] == -1 && curve.f_values[i] != 0.0)) any_robust = true;
    }
    if (all_zero || !any_robust)
        throw Error(ErrorCode::bracket_not_found, "f has no robust sign on the grid");

    // Sign changes between consecutive decided points.
    std::vector<std::pair<std::size_t, std::size_t>> changes;
    std::optional<std::size_t> prev;
    for (std::size_t i = 0; i < m; ++i) {
        if (sign[i] == 0) continue;
        if (prev && sign[*prev] != sign[i]) changes.emplace_back(*prev, i);
        prev = i;
    }
    if (changes.empty()) {
        if (rising(m - 2)) {
            r.status = Assumption2Status::violated;
            r.offending.emplace_back(m - 2, m - 1);
            r.detail = "f keeps one sign and increases at the upper end of the grid";
            return r;
        }
        throw Error(ErrorCode::bracket_not_found, "f does not change sign on the grid");
    }
    if (changes.size() > 1 || sign[changes.front().first] != 1) {
        r.status = Assumption2Status::violated;
        r.offending = changes;
        r.detail = changes.size() > 1 ? "f changes sign more than once" : "f changes sign from - to +";
        return r;
    }
    r.sign_change = changes.front().first;
    for (std::size_t i = *r.sign_change; i + 1 < m; ++i)
        if (rising(i)) r.offending.emplace_back(i, i + 1);
    if (!r.offending.empty()) {
        r.status = Assumption2Status::violated;
        r.detail = "f increases after its sign change";
        return r;
    }
    // Undecided points away from the crossing mean the grid cannot certify.
    for (std::size_t i = 0; i < m; ++i) {
        const bool in_gap = i > changes.front().first && i < changes.front().second;
        if (sign[i] == 0 && !in_gap) {
            r.status = Assumption2Status::inconclusive;
            r.detail = "confidence intervals straddle 0 away from the sign change";
            return r;
        }
    }
    r.status = Assumption2Status::certified;
    return r;
}

// ---------------------------------------------------------------------------
// Root finding
// ---------------------------------------------------------------------------

namespace {

bool robust_positive(const FValue& v) { return v.exact ? v.f > 0.0 : v.lower() > 0.0; }
bool robust_nonpositive(const FValue& v) { return v.exact ? v.f <= 0.0 : v.upper() < 0.0; }
bool straddles(const FValue& v) { return !robust_positive(v) && !robust_nonpositive(v); }

// Boundary at the root. Exact curves: when the gap f(lo) - f(hi) of the final
// bracket shrank over the last bisection steps, f is continuous at the root and
// f(x_bar) = 0.
void classify_boundary(Threshold& t, const FValue& at_root, bool exact, const std::vector<double>& gaps) {
    t.f_at_root = at_root.f;
    t.f_ci_halfwidth = at_root.ci_halfwidth;
    if (exact) {
        const std::size_t k = std::min<std::size_t>(10, gaps.size() - 1);
        const double last = gaps.back();
        const bool continuous = last <= 1e-12 || (k > 0 && last <= 0.5 * gaps[gaps.size() - 1 - k]);
        if (continuous) {
            t.boundary = Boundary::nonstrict;
            return;
        }
        t.jump = true;
        t.boundary = at_root.f > 0.0 ? Boundary::strict : Boundary::nonstrict;
        return;
    }
    if (at_root.lower() > 0.0) {
        t.boundary = Boundary::strict;
    } else if (at_root.upper() <= 0.0) {
        t.boundary = Boundary::nonstrict;
    } else {
        t.boundary = Boundary::nonstrict;
        t.boundary_inconclusive = true;
    }
}

}  // namespace

Threshold find_root(const FEvaluator& f, double lo, double hi, double tol, std::size_t budget_multiplier) {
    if (!(hi > lo)) throw Error(ErrorCode::invalid_argument, "bracket must satisfy lo < hi");
    if (!(tol > 0.0)) throw Error(ErrorCode::invalid_argument, "tolerance must be positive");
    Threshold t;
    auto eval = [&](double y) {
        std::size_t mult = 1;
        FValue v = f(y, mult);
        ++t.evaluations;
        while (!v.exact && straddles(v) && mult * 4 <= budget_multiplier) {
            mult *= 4;
            v = f(y, mult);
            ++t.evaluations;
        }
        return v;
    };
    FValue vlo = eval(lo);
    FValue vhi = eval(hi);
    if (vlo.exact && vhi.exact && vlo.f == 0.0 && vhi.f == 0.0)
        throw RootInconclusive(lo, hi, "f vanishes at both ends of the bracket");
    if (straddles(vlo) && straddles(vhi)) throw RootInconclusive(lo, hi, "f has no robust sign at either end");
    if (!robust_positive(vlo)) {
        if (robust_nonpositive(vlo)) throw Error(ErrorCode::bracket_not_found, "f(lo) <= 0: the lower end is already in the stopping region");
        throw RootInconclusive(lo, hi, "sign of f at the lower end is undecided");
    }
    if (!robust_nonpositive(vhi)) {
        if (robust_positive(vhi)) throw Error(ErrorCode::bracket_not_found, "f(hi) > 0: the root lies above the bracket");
        throw RootInconclusive(lo, hi, "sign of f at the upper end is undecided");
    }
    const bool exact = vlo.exact && vhi.exact;
    std::vector<double> gaps{vlo.f - vhi.f};
    while (hi - lo > tol) {
        const double mid = 0.5 * (lo + hi);
        if (mid <= lo || mid >= hi) break;
        const FValue v = eval(mid);
        if (straddles(v)) throw RootInconclusive(lo, hi, "confidence interval of f straddles 0 within the path budget");
        if (robust_positive(v)) {
            lo = mid;
            vlo = v;
        } else {
            hi = mid;
            vhi = v;
        }
        gaps.push_back(vlo.f - vhi.f);
    }
    t.bracket_lo = lo;
    t.bracket_hi = hi;
    t.x_bar = 0.5 * (lo + hi);
    const FValue at_root = f(t.x_bar, 1);
    ++t.evaluations;
    classify_boundary(t, at_root, exact, gaps);
    t.method = exact ? "bisection/exact" : "bisection/monte_carlo";
    return t;
}

Threshold find_root(const ProblemSpec& p, double lo, double hi, const MCConfig& cfg, double tol,
                    const EvalOptions& opts, const LevyFOptions& levy_opts) {
    cfg.validate();
    FEvaluator f;
    if (const auto* levy = p.levy()) {
        f = [&, levy](double y, std::size_t m) { return evaluate_f_levy(*levy, p, y, cfg.with_paths(cfg.paths * m), levy_opts); };
    } else {
        f = [&](double y, std::size_t m) { return evaluate_f(p, y, cfg.with_paths(cfg.paths * m), opts); };
    }
    return find_root(f, lo, hi, tol);
}

// ---------------------------------------------------------------------------
// Random walks
// ---------------------------------------------------------------------------

namespace {

// inf{y in [lo, hi] : pred(y)} by bisection, assuming pred(hi) and !pred(lo).
template <class Pred>
std::pair<double, double> bisect(Pred&& pred, double lo, double hi, double tol) {
    while (hi - lo > tol) {
        const double mid = 0.5 * (lo + hi);
        if (mid <= lo || mid >= hi) break;
        if (pred(mid)) {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    return {lo, hi};
}

double step_scale(const StepDistribution& walk) {
    switch (walk.kind) {
        case StepKind::two_point: return std::max(walk.up, walk.down);
        case StepKind::lattice_pmf: return walk.lattice_law.unit;
        case StepKind::gaussian: return std::max(walk.spread, std::abs(walk.location));
        case StepKind::levy_increment: return std::max(std::abs(walk.mean()), std::sqrt(walk.horizon));
    }
    return 1.0;
}

}  // namespace

Threshold random_walk_threshold(const StepDistribution& walk, const ProblemSpec& p, const MCConfig& cfg,
                                const RandomWalkOptions& opts) {
    walk.validate();
    const ProbeRange range = effective_probe_range(p);
    for (const double x : range.points())
        if (p.h(x) < 0.0) throw Error(ErrorCode::assumption_violated, "cost is negative at x=" + std::to_string(x));
    const MonotonicityReport hm = probe_nondecreasing([&](double x) { return p.h(x); }, range);
    if (!hm.ok)
        throw Error(ErrorCode::assumption_violated,
                    "cost decreases on (" + std::to_string(hm.violations.front().first) + ", " +
                        std::to_string(hm.violations.front().second) + ")");
    if (opts.variant == FVariant::weighted && !p.weight)
        throw Error(ErrorCode::invalid_argument, "weighted variant needs a weight function");

    std::optional<SkipFreeLadder> exact;
    std::optional<LadderSample> pool;
    if (walk.upward_skip_free()) {
        exact.emplace(walk, opts.depth);
    } else {
        cfg.validate();
        pool = sample_ladder_excursions(walk, cfg, "random-walk/pool");
        if (pool->censored_fraction() > 0.10)
            throw Error(ErrorCode::estimation_failed, "ladder epochs censored on " +
                                                           std::to_string(100.0 * pool->censored_fraction()) + "% of paths");
    }
    std::size_t evaluations = 0;
    auto f = [&](double y) {
        ++evaluations;
        const LadderStats s = exact ? exact->stats(p, y) : pool->stats(p, y, cfg.ci_level);
        return f_from_stats(s, opts.variant, cfg.ci_level);
    };

    Threshold t;
    t.method = exact ? "random-walk/exact_skipfree" : "random-walk/pooled_monte_carlo";
    const double scale = step_scale(walk);
    double lo = 0.0;
    double hi = 0.0;
    if (opts.bracket) {
        lo = opts.bracket->first;
        hi = opts.bracket->second;
        if (!(hi > lo)) throw Error(ErrorCode::invalid_argument, "bracket must satisfy lo < hi");
    } else {
        lo = -scale;
        hi = scale;
        double width = scale;
        int tries = 0;
        while (f(hi).f > 0.0) {
            if (++tries > 60) throw Error(ErrorCode::bracket_not_found, "f stays positive while expanding upward");
            hi += width;
            width *= 2.0;
        }
        width = scale;
        tries = 0;
        while (f(lo).f <= 0.0 && tries < 60) {
            ++tries;
            lo -= width;
            width *= 2.0;
        }
    }
    const FValue flo = f(lo);
    if (flo.f <= 0.0) {
        t.immediate_stop = true;
        t.x_bar = lo;
        t.bracket_lo = t.bracket_hi = lo;
        t.f_at_root = flo.f;
        t.f_ci_halfwidth = flo.ci_halfwidth;
        t.boundary = Boundary::nonstrict;
        t.evaluations = evaluations;
        return t;
    }
    if (f(hi).f > 0.0) throw Error(ErrorCode::bracket_not_found, "f(hi) > 0: the root lies above the bracket");

    if (exact) {
        const FEvaluator fe = [&](double y, std::size_t) { return f(y); };
        Threshold r = find_root(fe, lo, hi, opts.tol);
        r.method = t.method;
        r.evaluations += evaluations;
        t = std::move(r);
    } else {
        const auto [blo, bhi] = bisect([&](double y) { return f(y).f <= 0.0; }, lo, hi, opts.tol);
        t.bracket_lo = blo;
        t.bracket_hi = bhi;
        t.x_bar = 0.5 * (blo + bhi);
        const FValue at_root = f(t.x_bar);
        classify_boundary(t, at_root, false, {});
        const double left = f(lo).lower() <= 0.0 ? lo : bisect([&](double y) { return f(y).lower() <= 0.0; }, lo, hi, opts.tol).second;
        const double right = f(hi).upper() > 0.0 ? hi : bisect([&](double y) { return f(y).upper() <= 0.0; }, lo, hi, opts.tol).second;
        t.x_bar_ci = std::make_pair(left, right);
        t.evaluations = evaluations;
    }

    // Concavity of gamma on [x_bar, x_bar + span].
    double probe_hi = t.x_bar + std::max(20.0 * scale, 1.0);
    double probe_lo = t.x_bar;
    if (p.payoff.kind == PayoffKind::lookup_table) {
        probe_hi = std::min(probe_hi, p.payoff.table.x.back());
        probe_lo = std::max(probe_lo, p.payoff.table.x.front());
    }
    if (probe_hi > probe_lo) {
        const std::size_t n = 257;
        const double step = (probe_hi - probe_lo) / static_cast<double>(n - 1);
        for (std::size_t i = 1; i + 1 < n; ++i) {
            const double x = probe_lo + step * static_cast<double>(i);
            const double g0 = p.gamma(x - step);
            const double g1 = p.gamma(x);
            const double g2 = p.gamma(x + step);
            if (g0 - 2.0 * g1 + g2 > 1e-9 * (1.0 + std::abs(g1)))
                throw Error(ErrorCode::assumption_violated,
                            "payoff is not concave above the threshold near x=" + std::to_string(x));
        }
    }

    // Certify the monotonicity of f on a grid around the root.
    const double half = std::max(t.x_bar - lo, hi - t.x_bar);
    std::vector<double> grid;
    for (std::size_t i = 0; i < opts.certify_points; ++i)
        grid.push_back(t.x_bar - half + 2.0 * half * static_cast<double>(i) / static_cast<double>(opts.certify_points - 1));
    FCurve curve;
    curve.grid = grid;
    curve.variant = opts.variant;
    for (const double y : grid) {
        const FValue v = f(y);
        curve.f_values.push_back(v.f);
        curve.ci_halfwidths.push_back(v.ci_halfwidth);
    }
    try {
        t.assumption2 = validate_assumption2(curve);
    } catch (const Error& e) {
        if (e.code() != ErrorCode::bracket_not_found) throw;
        Assumption2Report r;
        r.status = Assumption2Status::inconclusive;
        r.detail = e.what();
        t.assumption2 = r;
    }
    return t;
}

// ---------------------------------------------------------------------------
// Values of threshold rules
// ---------------------------------------------------------------------------

namespace {

ValueEstimate summarize_value(const std::vector<double>& direct, const std::vector<double>& ladder,
                              std::size_t attempted, double extra_variance) {
    ValueEstimate v;
    v.censored_fraction = 1.0 - static_cast<double>(direct.size()) / static_cast<double>(attempted);
    if (v.censored_fraction > 0.10 || direct.size() < 2)
        throw Error(ErrorCode::estimation_failed,
                    "stopping rule censored on " + std::to_string(100.0 * v.censored_fraction) + "% of paths");
    std::vector<double> diff(direct.size());
    for (std::size_t i = 0; i < direct.size(); ++i) diff[i] = ladder[i] - direct[i];
    const MeanEstimate d = mean_estimate(direct);
    const MeanEstimate l = mean_estimate(ladder);
    const MeanEstimate r = mean_estimate(diff);
    v.direct = d.mean;
    v.direct_se = d.std_error;
    v.ladder_sum = l.mean;
    v.ladder_se = std::sqrt(l.std_error * l.std_error + extra_variance);
    v.residual = r.mean;
    v.residual_se = std::sqrt(r.std_error * r.std_error + extra_variance);
    if (v.residual_se > 0.0) {
        v.z = v.residual / v.residual_se;
    } else {
        v.z = std::abs(v.residual) < 1e-12 ? 0.0 : std::copysign(std::numeric_limits<double>::infinity(), v.residual);
    }
    return v;
}

}  // namespace

ValueEstimate value_of_threshold(const ProblemSpec& p, double x_stop, Boundary boundary, double y_start,
                                 const MCConfig& cfg, const ValueOptions& opts) {
    cfg.validate();
    const bool strict = boundary == Boundary::strict;
    auto in_stop = [&](double v) { return strict ? v > x_stop : v >= x_stop; };
    if (in_stop(y_start)) {
        ValueEstimate v;
        v.immediate = true;
        v.direct = v.ladder_sum = p.gamma(y_start);
        return v;
    }
    const std::size_t n = cfg.paths;
    std::vector<double> direct(n), ladder(n), epochs(n, 0.0), done(n, 0.0);

    if (const auto* levy = p.levy()) {
        const bool analytic = levy->kind == LevyKind::bm_drift;
        const std::size_t points = analytic ? std::max<std::size_t>(opts.table_points, 2)
                                            : std::min<std::size_t>(std::max<std::size_t>(opts.table_points, 2), 33);
        KnotTable table;
        const double hi = x_stop + 1.0;
        for (std::size_t i = 0; i < points; ++i) {
            const double at = y_start + (hi - y_start) * static_cast<double>(i) / static_cast<double>(points - 1);
            table.x.push_back(at);
            table.y.push_back(evaluate_f_levy(*levy, p, at, cfg).f);
        }
        const std::function<double(double)> f = [&table](double m) { return table.interpolate_clamped(m); };
        const LevySkeleton sim(*levy, opts.dt);
        const double gamma_y = p.gamma(y_start);
        parallel_for(n, [&](std::size_t i) {
            RandomStream rng(cfg.seed, derive_stream(cfg.seed, "value/levy", i));
            const PassagePath path = simulate_passage(sim, y_start, x_stop, strict, p.cost, rng, cfg.max_steps, &f);
            if (path.censored) return;
            direct[i] = p.gamma(path.end) - path.cost;
            ladder[i] = gamma_y + path.max_integral;
            done[i] = 1.0;
        });
        std::vector<double> d, l;
        for (std::size_t i = 0; i < n; ++i)
            if (done[i] != 0.0) {
                d.push_back(direct[i]);
                l.push_back(ladder[i]);
            }
        return summarize_value(d, l, n, 0.0);
    }

    const auto* walk = p.walk();
    const auto* chain = p.chain();
    const double span = std::max(1.0, x_stop - y_start) + (walk ? 10.0 * std::max(1.0, std::abs(walk->mean())) : 0.0);
    const LadderGain gain(p, cfg, y_start - span, x_stop + span);
    const std::optional<std::size_t> start = chain ? chain->index_of(y_start) : std::nullopt;
    if (chain && !start) throw Error(ErrorCode::invalid_argument, "start is not a chain state");
    const double gamma_y = p.gamma(y_start);
    const double first_gain = gain(y_start);
    parallel_for(n, [&](std::size_t i) {
        RandomStream rng(cfg.seed, derive_stream(cfg.seed, "value/discrete", i));
        double pos = y_start;
        std::size_t state = start.value_or(0);
        double running_max = y_start;
        double cost = 0.0;
        double sum = first_gain;
        double count = 1.0;
        for (std::size_t step = 1; step <= cfg.max_steps; ++step) {
            if (chain) {
                state = chain->sample_next(state, rng);
                pos = chain->states[state];
            } else {
                pos += walk->sample(rng);
            }
            cost += p.h(pos);
            if (in_stop(pos)) {
                if (opts.convention == LadderConvention::inclusive) {
                    sum += gain(pos);
                    count += 1.0;
                }
                direct[i] = p.gamma(pos) - cost;
                ladder[i] = gamma_y + sum;
                epochs[i] = count;
                done[i] = 1.0;
                return;
            }
            if (pos > running_max) {
                running_max = pos;
                sum += gain(pos);
                count += 1.0;
            }
        }
    });
    std::vector<double> d, l, e;
    for (std::size_t i = 0; i < n; ++i)
        if (done[i] != 0.0) {
            d.push_back(direct[i]);
            l.push_back(ladder[i]);
            e.push_back(epochs[i]);
        }
    double extra = 0.0;
    if (gain.pool_std_error() > 0.0 && !e.empty()) {
        const double mean_epochs = mean_estimate(e).mean;
        extra = mean_epochs * mean_epochs * gain.pool_std_error() * gain.pool_std_error();
    }
    return summarize_value(d, l, n, extra);
}

}  // namespace lcstop
