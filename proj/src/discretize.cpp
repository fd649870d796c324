#include "lcstop/discretize.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <string>

#include "lcstop/error.hpp"
#include "lcstop/levy_sim.hpp"
#include "lcstop/oracle.hpp"
#include "lcstop/parallel.hpp"
#include "lcstop/stats.hpp"
#include "quadrature.hpp"

namespace lcstop {

namespace {

constexpr double kBound = 1e8;
constexpr std::size_t kCostKnots = 257;
constexpr std::size_t kMcCostKnots = 65;

double level_delta(int n) {
    if (n < 0 || n > 30) throw Error(ErrorCode::invalid_argument, "discretization level must lie in [0, 30]");
    return std::ldexp(1.0, -n);
}

std::size_t ladder_depth(const EmbeddedWalk& w) {
    if (w.scheme != Scheme::spatial) return 64;
    return std::clamp<std::size_t>(static_cast<std::size_t>(8.0 / w.delta), 64, 512);
}

CostSpec tabulate(const ProbeRange& range, std::size_t knots, const std::function<double(double)>& fn) {
    KnotTable t;
    t.x.resize(knots);
    t.y.resize(knots);
    for (std::size_t i = 0; i < knots; ++i)
        t.x[i] = range.lo + (range.hi - range.lo) * static_cast<double>(i) / static_cast<double>(knots - 1);
    for (std::size_t i = 0; i < knots; ++i) t.y[i] = std::max(0.0, fn(t.x[i]));
    return CostSpec::tabulated(std::move(t));
}

// E_x int_0^dt h(x + mu s + sigma W_s) ds.
double bm_step_cost(double mu, double sigma, double dt, const CostSpec& h, double x) {
    const std::vector<double> bps = h.breakpoints();
    auto at_time = [&](double s) {
        const double m = x + mu * s;
        const double v = sigma * std::sqrt(s);
        if (v == 0.0) return eval_cost(h, m);
        std::vector<double> cuts;
        for (const double b : bps) cuts.push_back((b - m) / v);
        return detail::integrate_split(
            [&](double z) { return eval_cost(h, m + v * z) * std::exp(-0.5 * z * z) * 0.3989422804014327; }, -9.0,
            9.0, cuts, 1e-11);
    };
    return detail::integrate_split(at_time, 0.0, dt, {}, 1e-10);
}

// Monte Carlo E_x int_0^dt h(X_s) ds on a fine skeleton.
double mc_step_cost(const LevySpec& levy, double dt, const CostSpec& h, double x, const MCConfig& cfg,
                    std::string_view tag) {
    const std::size_t n = std::min<std::size_t>(cfg.paths, 2000);
    const std::size_t sub = 64;
    const LevySkeleton sim(levy, dt / static_cast<double>(sub));
    std::vector<double> out(n);
    for (std::size_t i = 0; i < n; ++i) {
        RandomStream rng(cfg.seed, derive_stream(cfg.seed, tag, i));
        double pos = x;
        double acc = 0.0;
        double prev = eval_cost(h, pos);
        for (std::size_t k = 0; k < sub; ++k) {
            pos += sim.increment(rng);
            const double cur = eval_cost(h, pos);
            acc += 0.5 * (prev + cur) * sim.dt();
            prev = cur;
        }
        out[i] = acc;
    }
    return mean_estimate(out).mean;
}

void check_bounded(const ProblemSpec& p) {
    for (const double x : effective_probe_range(p).points()) {
        if (!(std::abs(p.gamma(x)) <= kBound) || !(std::abs(p.h(x)) <= kBound))
            throw Error(ErrorCode::method_inapplicable,
                        "payoff or cost exceeds " + std::to_string(kBound) + " at x=" + std::to_string(x) +
                            "; the time scheme needs bounded gamma and h");
    }
}

struct ExitSample {
    std::map<long, double> landing;  ///< grid offset -> probability
    double e_duration = 0.0;
    bool snapped = false;
};

// Exit of X from (-delta, delta) started at 0, landing snapped to delta * Z.
ExitSample mc_exit(const LevySpec& levy, double delta, const MCConfig& cfg) {
    const double dt = std::min(delta * delta, delta) / 64.0;
    const LevySkeleton sim(levy, dt);
    const std::size_t n = cfg.paths;
    std::vector<long> land(n, 0);
    std::vector<double> dur(n, 0.0);
    std::vector<char> done(n, 0);
    parallel_for(n, [&](std::size_t i) {
        RandomStream rng(cfg.seed, derive_stream(cfg.seed, "discretize/exit", i));
        double x = 0.0;
        for (std::size_t step = 1; step <= cfg.max_steps; ++step) {
            const StepExtremes e = sim.step(x, rng);
            x = e.end;
            if (e.max >= delta || e.min <= -delta) {
                long k = std::lround(x / delta);
                if (k == 0) k = e.max >= delta ? 1 : -1;
                land[i] = k;
                dur[i] = static_cast<double>(step) * dt;
                done[i] = 1;
                return;
            }
        }
    });
    ExitSample s;
    std::size_t ok = 0;
    for (std::size_t i = 0; i < n; ++i) {
        if (!done[i]) continue;
        ++ok;
        s.landing[land[i]] += 1.0;
        s.e_duration += dur[i];
        if (std::abs(land[i]) > 1) s.snapped = true;
    }
    if (ok < n * 9 / 10) throw Error(ErrorCode::estimation_failed, "cell exit censored on more than 10% of paths");
    for (auto& [k, w] : s.landing) w /= static_cast<double>(ok);
    s.e_duration /= static_cast<double>(ok);
    if (levy.has_jumps()) s.snapped = true;
    return s;
}

}  // namespace

std::string_view to_string(Scheme s) noexcept { return s == Scheme::time ? "time" : "spatial"; }

ProblemSpec EmbeddedWalk::problem(const ProblemSpec& base) const {
    ProblemSpec q = base;
    q.process = step;
    q.cost = ceil_h;
    q.weight = scheme == Scheme::spatial ? std::optional<CostSpec>(CostSpec::constant(e_duration)) : std::nullopt;
    return q;
}

EmbeddedWalk build_time_discretization(const LevySpec& levy, const ProblemSpec& p, int n, const MCConfig& cfg) {
    levy.validate();
    check_bounded(p);
    EmbeddedWalk w;
    w.level = n;
    w.scheme = Scheme::time;
    w.delta = level_delta(n);
    w.e_duration = w.delta;
    if (levy.kind == LevyKind::bm_drift) {
        w.step = StepDistribution::gaussian(levy.drift * w.delta, levy.sigma * std::sqrt(w.delta));
    } else {
        w.step = StepDistribution::levy_increment(levy, w.delta);
    }
    const ProbeRange range = effective_probe_range(p);
    if (p.cost.is_constant()) {
        w.ceil_h = CostSpec::constant(p.cost.c * w.delta);
        w.method = "time/exact_cost";
    } else if (levy.kind == LevyKind::bm_drift) {
        w.ceil_h = tabulate(range, kCostKnots,
                            [&](double x) { return bm_step_cost(levy.drift, levy.sigma, w.delta, p.cost, x); });
        w.method = "time/quadrature_cost";
    } else {
        const std::string tag = "discretize/time-cost/" + std::to_string(n);
        std::vector<double> xs(kMcCostKnots), ys(kMcCostKnots);
        parallel_for(kMcCostKnots, [&](std::size_t i) {
            xs[i] = range.lo + (range.hi - range.lo) * static_cast<double>(i) / static_cast<double>(kMcCostKnots - 1);
            ys[i] = std::max(0.0, mc_step_cost(levy, w.delta, p.cost, xs[i], cfg, tag + "@" + std::to_string(i)));
        });
        w.ceil_h = CostSpec::tabulated(KnotTable{xs, ys});
        w.method = "time/monte_carlo_cost";
    }
    return w;
}

EmbeddedWalk build_spatial_discretization(const LevySpec& levy, const ProblemSpec& p, int n, const MCConfig& cfg) {
    levy.validate();
    EmbeddedWalk w;
    w.level = n;
    w.scheme = Scheme::spatial;
    w.delta = level_delta(n);
    const double d = w.delta;
    const ProbeRange range = effective_probe_range(p);
    if (levy.kind == LevyKind::bm_drift) {
        const ExitLaw e = bm_scale_exit(levy.drift, levy.sigma, -d, d, 0.0);
        w.p_up = e.p_up;
        w.e_duration = e.e_time;
        w.step = StepDistribution::two_point(e.p_up, d, d);
        if (p.cost.is_constant()) {
            w.ceil_h = CostSpec::constant(p.cost.c * e.e_time);
        } else {
            w.ceil_h = tabulate(range, kCostKnots, [&](double y) {
                return bm_interval_expected_cost(levy.drift, levy.sigma, y - d, y + d, y, p.cost);
            });
        }
        w.method = "spatial/bm_closed_form";
        return w;
    }
    cfg.validate();
    const ExitSample s = mc_exit(levy, d, cfg);
    std::vector<long> steps;
    std::vector<double> probs;
    for (const auto& [k, q] : s.landing) {
        steps.push_back(k);
        probs.push_back(q);
        if (k > 0) w.p_up += q;
    }
    w.step = StepDistribution::lattice(d, steps, probs);
    w.e_duration = s.e_duration;
    w.grid_snap_bias = s.snapped;
    if (p.cost.is_constant()) {
        w.ceil_h = CostSpec::constant(p.cost.c * s.e_duration);
    } else {
        // Expected cost to exit from each knot, by direct simulation.
        const double dt = std::min(d * d, d) / 64.0;
        const LevySkeleton sim(levy, dt);
        const std::size_t m = std::min<std::size_t>(cfg.paths, 2000);
        std::vector<double> xs(kMcCostKnots), ys(kMcCostKnots);
        parallel_for(kMcCostKnots, [&](std::size_t i) {
            const double y = range.lo + (range.hi - range.lo) * static_cast<double>(i) / static_cast<double>(kMcCostKnots - 1);
            xs[i] = y;
            std::vector<double> acc(m, 0.0);
            const std::string tag = "discretize/spatial-cost/" + std::to_string(n) + "@" + std::to_string(i);
            for (std::size_t j = 0; j < m; ++j) {
                RandomStream rng(cfg.seed, derive_stream(cfg.seed, tag, j));
                double x = y;
                double prev = eval_cost(p.cost, x);
                for (std::size_t step = 0; step < cfg.max_steps; ++step) {
                    const StepExtremes e = sim.step(x, rng);
                    const double cur = eval_cost(p.cost, e.end);
                    acc[j] += 0.5 * (prev + cur) * dt;
                    prev = cur;
                    x = e.end;
                    if (e.max >= y + d || e.min <= y - d) break;
                }
            }
            ys[i] = std::max(0.0, mean_estimate(acc).mean);
        });
        w.ceil_h = CostSpec::tabulated(KnotTable{xs, ys});
    }
    w.method = w.grid_snap_bias ? "spatial/monte_carlo_exit_snapped" : "spatial/monte_carlo_exit";
    return w;
}

EmbeddedWalk build_discretization(Scheme scheme, const LevySpec& levy, const ProblemSpec& p, int n,
                                  const MCConfig& cfg) {
    return scheme == Scheme::time ? build_time_discretization(levy, p, n, cfg)
                                  : build_spatial_discretization(levy, p, n, cfg);
}

namespace {

Threshold level_threshold(const EmbeddedWalk& walk, const ProblemSpec& embedded, const MCConfig& cfg) {
    RandomWalkOptions opts;
    opts.variant = walk.scheme == Scheme::spatial ? FVariant::weighted : FVariant::standard;
    opts.depth = ladder_depth(walk);
    return random_walk_threshold(walk.step, embedded, cfg, opts);
}

std::vector<ProbeValue> level_values(const EmbeddedWalk& walk, const ProblemSpec& embedded, const Threshold& t,
                                     const std::vector<double>& probes, const MCConfig& cfg) {
    const double x_stop = t.immediate_stop ? -std::numeric_limits<double>::infinity() : t.x_bar;
    std::vector<ProbeValue> out;
    for (const double probe : probes) {
        ProbeValue v;
        v.probe = probe;
        v.start = walk.scheme == Scheme::spatial ? std::floor(probe / walk.delta) * walk.delta : probe;
        v.value = value_of_threshold(embedded, x_stop, t.boundary, v.start, cfg);
        out.push_back(v);
    }
    return out;
}

std::optional<double> continuum_root(const LevySpec& levy, const ProblemSpec& p, double lo, double hi,
                                     const MCConfig& cfg) {
    if (levy.kind != LevyKind::bm_drift) return std::nullopt;
    auto f = [&](double y) { return evaluate_f_levy(levy, p, y, cfg).f; };
    double width = std::max(1.0, hi - lo);
    for (int i = 0; i < 40 && f(lo) <= 0.0; ++i, width *= 2.0) lo -= width;
    width = std::max(1.0, hi - lo);
    for (int i = 0; i < 40 && f(hi) > 0.0; ++i, width *= 2.0) hi += width;
    try {
        return find_root(p, lo, hi, cfg, 1e-10).x_bar;
    } catch (const Error&) {
        return std::nullopt;
    }
}

}  // namespace

LevelResult solve_level(const EmbeddedWalk& walk, const ProblemSpec& p, const std::vector<double>& probes,
                        const MCConfig& cfg) {
    const ProblemSpec embedded = walk.problem(p);
    LevelResult r;
    r.level = walk.level;
    r.delta = walk.delta;
    r.grid_snap_bias = walk.grid_snap_bias;
    r.threshold = level_threshold(walk, embedded, cfg);
    r.values = level_values(walk, embedded, r.threshold, probes, cfg);
    return r;
}

FnConvergence check_fn_convergence(const LevySpec& levy, const ProblemSpec& p, const std::vector<int>& levels,
                                   const std::vector<double>& probes, const MCConfig& cfg) {
    FnConvergence c;
    c.levels = levels;
    c.probes = probes;
    for (const double x : probes) c.target.push_back(evaluate_f_levy(levy, p, x, cfg).f);
    for (const int n : levels) {
        const EmbeddedWalk walk = build_spatial_discretization(levy, p, n, cfg);
        const ProblemSpec embedded = walk.problem(p);
        EvalOptions opts;
        opts.variant = FVariant::weighted;
        opts.depth = ladder_depth(walk);
        std::vector<double> fs, res;
        for (std::size_t j = 0; j < probes.size(); ++j) {
            const double f = evaluate_f(embedded, probes[j], cfg, opts).f;
            fs.push_back(f);
            res.push_back(std::abs(f - c.target[j]));
        }
        c.f_n.push_back(std::move(fs));
        c.residuals.push_back(std::move(res));
    }
    constexpr double zero = 1e-12;
    c.halving_ok = levels.size() >= 2;
    for (std::size_t i = 0; i + 1 < levels.size(); ++i) {
        const int gap = levels[i + 1] - levels[i];
        const double expected = std::ldexp(1.0, gap);
        std::vector<double> row;
        for (std::size_t j = 0; j < probes.size(); ++j) {
            const double a = c.residuals[i][j];
            const double b = c.residuals[i + 1][j];
            if (a <= zero && b <= zero) {
                row.push_back(0.0);
                continue;
            }
            const double ratio = b > zero ? a / b : std::numeric_limits<double>::infinity();
            row.push_back(std::isfinite(ratio) ? ratio : 0.0);
            if (!(ratio >= 0.8 * expected && ratio <= 1.2 * expected)) c.halving_ok = false;
        }
        c.ratios.push_back(std::move(row));
    }
    const std::size_t m = levels.size();
    if (m >= 3) {
        for (std::size_t j = 0; j < probes.size(); ++j) {
            const double a = c.residuals[m - 3][j];
            const double b = c.residuals[m - 1][j];
            const double span = static_cast<double>(levels[m - 1] - levels[m - 3]);
            c.order.push_back(a > zero && b > zero ? std::log2(a / b) / span : 0.0);
        }
    }
    return c;
}

std::vector<double> default_probes(double x_hat) {
    std::vector<double> out;
    for (int k = 5; k >= 1; --k) out.push_back(x_hat - static_cast<double>(k));
    return out;
}

DiscretizationReport solve_sequence(const LevySpec& levy, const ProblemSpec& p, Scheme scheme,
                                    const std::vector<int>& levels, std::vector<double> probes, const MCConfig& cfg) {
    if (levels.empty()) throw Error(ErrorCode::invalid_argument, "at least one level is needed");
    for (std::size_t i = 1; i < levels.size(); ++i)
        if (levels[i] <= levels[i - 1]) throw Error(ErrorCode::invalid_argument, "levels must be strictly increasing");
    DiscretizationReport rep;
    rep.scheme = scheme;

    std::vector<EmbeddedWalk> walks;
    std::vector<ProblemSpec> embedded;
    for (const int n : levels) {
        walks.push_back(build_discretization(scheme, levy, p, n, cfg));
        embedded.push_back(walks.back().problem(p));
        LevelResult r;
        r.level = n;
        r.delta = walks.back().delta;
        r.grid_snap_bias = walks.back().grid_snap_bias;
        r.threshold = level_threshold(walks.back(), embedded.back(), cfg);
        rep.levels.push_back(std::move(r));
    }

    double lo = rep.levels.front().threshold.x_bar;
    double hi = lo;
    for (const auto& r : rep.levels) {
        lo = std::min(lo, r.threshold.x_bar);
        hi = std::max(hi, r.threshold.x_bar);
    }
    rep.continuum_threshold = continuum_root(levy, p, lo - 1.0, hi + 1.0, cfg);
    if (probes.empty()) probes = default_probes(rep.continuum_threshold.value_or(rep.levels.back().threshold.x_bar));
    rep.probes = probes;
    for (std::size_t i = 0; i < levels.size(); ++i)
        rep.levels[i].values = level_values(walks[i], embedded[i], rep.levels[i].threshold, probes, cfg);

    for (std::size_t i = 0; i + 1 < rep.levels.size(); ++i) {
        const Threshold& a = rep.levels[i].threshold;
        const Threshold& b = rep.levels[i + 1].threshold;
        double slack = 1e-6;
        if (a.x_bar_ci) slack += a.x_bar_ci->second - a.x_bar_ci->first;
        if (b.x_bar_ci) slack += b.x_bar_ci->second - b.x_bar_ci->first;
        if (!a.immediate_stop && !b.immediate_stop && b.x_bar < a.x_bar - slack) rep.monotone_thresholds_ok = false;
        for (std::size_t j = 0; j < probes.size(); ++j) {
            const ValueEstimate& va = rep.levels[i].values[j].value;
            const ValueEstimate& vb = rep.levels[i + 1].values[j].value;
            const double se = std::sqrt(va.direct_se * va.direct_se + vb.direct_se * vb.direct_se);
            if (vb.direct < va.direct - 3.0 * se - 1e-12) {
                rep.monotone_values_ok = false;
                rep.value_violations.emplace_back(i + 1, j);
            }
        }
    }

    const std::size_t m = rep.levels.size();
    if (m >= 2) {
        const double x1 = rep.levels[m - 2].threshold.x_bar;
        const double x2 = rep.levels[m - 1].threshold.x_bar;
        const double ratio = std::ldexp(1.0, levels[m - 1] - levels[m - 2]);
        rep.limit_estimate = x2 + (x2 - x1) / (ratio - 1.0);
    }
    if (m >= 3) {
        const double d1 = rep.levels[m - 2].threshold.x_bar - rep.levels[m - 3].threshold.x_bar;
        const double d2 = rep.levels[m - 1].threshold.x_bar - rep.levels[m - 2].threshold.x_bar;
        if (d1 != 0.0 && d2 != 0.0 && d1 / d2 > 0.0)
            rep.order_estimate = std::log2(d1 / d2) / static_cast<double>(levels[m - 1] - levels[m - 2]);
    }
    if (scheme == Scheme::spatial) {
        try {
            rep.fn = check_fn_convergence(levy, p, levels, probes, cfg);
        } catch (const Error&) {
            rep.fn.reset();
        }
    }
    return rep;
}

}  // namespace lcstop
