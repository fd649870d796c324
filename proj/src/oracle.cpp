#include "lcstop/oracle.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "lcstop/error.hpp"
#include "lcstop/ladder.hpp"
#include "lcstop/levy_sim.hpp"
#include "lcstop/parallel.hpp"
#include "lcstop/stats.hpp"
#include "lcstop/threshold.hpp"
#include "quadrature.hpp"

namespace lcstop {

namespace {

constexpr double kStopTol = 1e-9;
constexpr double kInf = std::numeric_limits<double>::infinity();

}  // namespace

// ---------------------------------------------------------------------------
// Dynamic programming
// ---------------------------------------------------------------------------

std::optional<double> DPSolution::value_at(double y) const {
    for (std::size_t i = 0; i < states.size(); ++i)
        if (std::abs(states[i] - y) <= 1e-9 * std::max(1.0, std::abs(y))) return values[i];
    return std::nullopt;
}

namespace {

// One Bellman target: V_next(a) = max(gamma(a), base[a] + sum w * V(idx)).
struct Transition {
    std::size_t to;
    double prob;
};

DPSolution iterate(std::vector<double> states, std::vector<double> gamma, std::vector<double> base,
                   std::vector<std::vector<Transition>> moves, double tol, std::size_t max_sweeps) {
    const std::size_t m = states.size();
    DPSolution out;
    out.values = gamma;
    std::vector<double> next(m);
    for (std::size_t sweep = 1; sweep <= max_sweeps; ++sweep) {
        double delta = 0.0;
        for (std::size_t a = 0; a < m; ++a) {
            double cont = base[a];
            for (const auto& t : moves[a]) cont += t.prob * out.values[t.to];
            next[a] = std::max(gamma[a], cont);
            delta = std::max(delta, std::abs(next[a] - out.values[a]));
        }
        out.values.swap(next);
        out.iterations = sweep;
        out.residual = delta;
        if (delta < tol) break;
    }
    if (!(out.residual < tol))
        throw Error(ErrorCode::dp_failed, "value iteration did not converge in " + std::to_string(max_sweeps) + " sweeps");
    out.states = std::move(states);
    out.gamma = std::move(gamma);
    out.stopping_set.resize(m);
    for (std::size_t a = 0; a < m; ++a) out.stopping_set[a] = out.values[a] - out.gamma[a] <= kStopTol;
    out.trusted.assign(m, true);
    return out;
}

}  // namespace

DPSolution dp_value_iteration(const ProblemSpec& p, double lo, double hi, double tol, std::size_t max_sweeps) {
    if (!(tol > 0.0)) throw Error(ErrorCode::invalid_argument, "DP tolerance must be positive");
    if (const auto* chain = p.chain()) {
        chain->validate();
        const std::size_t m = chain->states.size();
        std::vector<double> gamma(m), base(m, 0.0);
        std::vector<std::vector<Transition>> moves(m);
        for (std::size_t a = 0; a < m; ++a) {
            gamma[a] = p.gamma(chain->states[a]);
            for (std::size_t b = 0; b < m; ++b) {
                const double q = chain->kernel[a][b];
                if (q == 0.0) continue;
                base[a] -= q * p.h(chain->states[b]);
                moves[a].push_back({b, q});
            }
        }
        DPSolution out = iterate(chain->states, std::move(gamma), std::move(base), std::move(moves), tol, max_sweeps);
        out.lo = chain->states.front();
        out.hi = chain->states.back();
        return out;
    }
    const auto* walk = p.walk();
    if (!walk) throw Error(ErrorCode::method_inapplicable, "DP oracle needs a lattice walk or a finite chain");
    const auto law = walk->lattice();
    if (!law) throw Error(ErrorCode::method_inapplicable, "DP oracle needs lattice increments");
    if (!(hi > lo)) throw Error(ErrorCode::invalid_argument, "DP domain must have lo < hi");
    const double u = law->unit;
    const long kmin = static_cast<long>(std::ceil(lo / u - 1e-9));
    const long kmax = static_cast<long>(std::floor(hi / u + 1e-9));
    if (kmax <= kmin) throw Error(ErrorCode::invalid_argument, "DP domain holds fewer than two lattice states");
    const std::size_t m = static_cast<std::size_t>(kmax - kmin + 1);
    const double lo_state = static_cast<double>(kmin) * u;
    const double gamma_lo = p.gamma(lo_state);
    const double penalty = gamma_lo - 10.0 * (1.0 + std::abs(gamma_lo));

    std::vector<double> states(m), gamma(m), base(m, 0.0);
    std::vector<std::vector<Transition>> moves(m);
    for (std::size_t a = 0; a < m; ++a) {
        const long k = kmin + static_cast<long>(a);
        states[a] = static_cast<double>(k) * u;
        gamma[a] = p.gamma(states[a]);
        for (std::size_t s = 0; s < law->steps.size(); ++s) {
            const double q = law->probs[s];
            if (q == 0.0) continue;
            const long t = k + law->steps[s];
            const double w = static_cast<double>(t) * u;
            if (t > kmax) {
                base[a] += q * (p.gamma(w) - p.h(w));
            } else if (t < kmin) {
                base[a] += q * (penalty - p.h(std::max(w, lo_state)));
            } else {
                base[a] -= q * p.h(w);
                moves[a].push_back({static_cast<std::size_t>(t - kmin), q});
            }
        }
    }
    DPSolution out = iterate(std::move(states), std::move(gamma), std::move(base), std::move(moves), tol, max_sweeps);
    out.lo = lo_state;
    out.hi = static_cast<double>(kmax) * u;
    return out;
}

DPSolution dp_value_iteration_auto(const ProblemSpec& p, double x_guess, double tol) {
    if (p.chain()) return dp_value_iteration(p, 0.0, 1.0, tol);
    const auto* walk = p.walk();
    const auto law = walk ? walk->lattice() : std::nullopt;
    if (!law) throw Error(ErrorCode::method_inapplicable, "DP oracle needs a lattice walk or a finite chain");
    const double u = law->unit;
    double lo = x_guess - 40.0 * u;
    double hi = x_guess + 15.0 * u;
    for (int attempt = 0; attempt < 6; ++attempt) {
        const DPSolution base = dp_value_iteration(p, lo, hi, tol);
        DPSolution wide = dp_value_iteration(p, lo - 40.0 * u, hi + 15.0 * u, tol);
        bool probes_ok = true;
        for (std::size_t i = 0; i < wide.states.size(); ++i) {
            // Moves above the base domain stop at once there.
            const auto v = wide.states[i] > base.hi ? std::optional<double>(p.gamma(wide.states[i]))
                                                    : base.value_at(wide.states[i]);
            wide.trusted[i] = v && std::abs(*v - wide.values[i]) <= 10.0 * tol &&
                              (*v - p.gamma(wide.states[i]) <= kStopTol) == wide.stopping_set[i];
            const bool probe = wide.states[i] >= x_guess - 10.0 * u && wide.states[i] <= hi;
            if (probe && !wide.trusted[i]) probes_ok = false;
        }
        if (probes_ok) return wide;
        lo -= 40.0 * u * static_cast<double>(1 << attempt);
        hi += 15.0 * u;
    }
    throw Error(ErrorCode::dp_failed, "values near the threshold stay sensitive to the truncated domain");
}

std::vector<double> dp_threshold_mismatches(const DPSolution& dp, double x_bar, bool strict_entry) {
    std::vector<double> bad;
    const double slack = 1e-9 * std::max(1.0, std::abs(x_bar));
    for (std::size_t i = 0; i < dp.states.size(); ++i) {
        if (!dp.trusted[i]) continue;
        const double s = dp.states[i];
        const bool rule = strict_entry ? s > x_bar + slack : s >= x_bar - slack;
        if (rule != dp.stopping_set[i]) bad.push_back(s);
    }
    return bad;
}

// ---------------------------------------------------------------------------
// Brownian closed forms
// ---------------------------------------------------------------------------

ExitLaw bm_scale_exit(double mu, double sigma, double a, double b, double x) {
    if (!(a < x && x < b)) throw Error(ErrorCode::invalid_argument, "bm_scale_exit needs a < x < b");
    if (!(sigma >= 0.0)) throw Error(ErrorCode::invalid_argument, "sigma must be non-negative");
    if (sigma == 0.0) {
        if (mu > 0.0) return {1.0, (b - x) / mu};
        if (mu < 0.0) return {0.0, (x - a) / -mu};
        throw Error(ErrorCode::invalid_argument, "degenerate process: mu = sigma = 0");
    }
    const double s2 = sigma * sigma;
    const double theta = 2.0 * mu / s2;
    if (std::abs(theta * (b - a)) < 1e-7) return {(x - a) / (b - a), (x - a) * (b - x) / s2};
    const double p = std::expm1(-theta * (x - a)) / std::expm1(-theta * (b - a));
    return {p, (p * b + (1.0 - p) * a - x) / mu};
}

double bm_green_expected_cost(double mu, double sigma, double x, double y, const CostSpec& h) {
    if (!(mu > 0.0)) throw Error(ErrorCode::invalid_argument, "first-passage Green function needs mu > 0");
    if (x > y) throw Error(ErrorCode::invalid_argument, "bm_green_expected_cost needs x <= y");
    if (x == y) return 0.0;
    if (h.is_constant()) return h.c * (y - x) / mu;
    if (sigma == 0.0) return detail::integrate_split([&](double z) { return eval_cost(h, z); }, x, y, h.breakpoints()) / mu;
    const double theta = 2.0 * mu / (sigma * sigma);
    auto density = [&](double z) {
        if (z >= x) return -std::expm1(-theta * (y - z)) / mu;
        return std::exp(-theta * (x - z)) * -std::expm1(-theta * (y - x)) / mu;
    };
    std::vector<double> cuts = h.breakpoints();
    cuts.push_back(x);
    return detail::integrate_split([&](double z) { return eval_cost(h, z) * density(z); }, -kInf, y, cuts, 1e-8);
}

double bm_interval_expected_cost(double mu, double sigma, double a, double b, double x, const CostSpec& h) {
    const ExitLaw exit = bm_scale_exit(mu, sigma, a, b, x);
    if (h.is_constant()) return h.c * exit.e_time;
    if (sigma == 0.0) {
        const double end = mu > 0.0 ? b : a;
        return detail::integrate_split([&](double z) { return eval_cost(h, z); }, std::min(x, end), std::max(x, end),
                                       h.breakpoints()) /
               std::abs(mu);
    }
    const double s2 = sigma * sigma;
    const double theta = 2.0 * mu / s2;
    const bool flat = std::abs(theta * (b - a)) < 1e-7;
    auto scale = [&](double z) { return flat ? z - a : -std::expm1(-theta * (z - a)) / theta; };
    auto speed = [&](double z) { return flat ? 1.0 : std::exp(-theta * (z - a)); };
    const double sb = scale(b);
    const double sx = scale(x);
    auto density = [&](double z) {
        const double lo = std::min(sx, scale(z));
        const double hi = std::max(sx, scale(z));
        return 2.0 * lo * (sb - hi) / (sb * s2 * speed(z));
    };
    std::vector<double> cuts = h.breakpoints();
    cuts.push_back(x);
    return detail::integrate_split([&](double z) { return eval_cost(h, z) * density(z); }, a, b, cuts, 1e-10);
}

double bm_hat_value(double mu, double sigma, const CostSpec& h, double y) {
    if (!(mu > 0.0)) throw Error(ErrorCode::method_inapplicable, "cost transform needs positive drift");
    if (h.is_constant()) return h.c;
    if (sigma == 0.0) return eval_cost(h, y);
    const double theta = 2.0 * mu / (sigma * sigma);
    std::vector<double> cuts;
    for (const double bp : h.breakpoints()) cuts.push_back(y - bp);
    return detail::integrate_split([&](double s) { return theta * eval_cost(h, y - s) * std::exp(-theta * s); }, 0.0,
                                   kInf, cuts, 1e-10);
}

// ---------------------------------------------------------------------------
// Identity checks
// ---------------------------------------------------------------------------

bool IdentityReport::passed(double bound) const noexcept { return std::abs(z) <= bound; }

namespace {

IdentityReport finish_report(double lhs, const std::vector<double>& rhs_samples, const std::vector<double>& residuals,
                             double extra_variance, std::size_t attempted) {
    IdentityReport r;
    r.paths = residuals.size();
    r.censored_fraction = attempted == 0 ? 0.0 : 1.0 - static_cast<double>(residuals.size()) / static_cast<double>(attempted);
    if (r.censored_fraction > 0.10 || residuals.size() < 2)
        throw Error(ErrorCode::estimation_failed,
                    "identity paths censored on " + std::to_string(100.0 * r.censored_fraction) + "% of paths");
    const MeanEstimate res = mean_estimate(residuals);
    r.rhs = mean_estimate(rhs_samples).mean;
    r.lhs = lhs;
    r.residual = res.mean;
    r.std_error = std::sqrt(res.std_error * res.std_error + extra_variance);
    if (r.std_error > 0.0) {
        r.z = r.residual / r.std_error;
    } else {
        r.z = std::abs(r.residual) < 1e-12 ? 0.0 : std::copysign(kInf, r.residual);
    }
    return r;
}

}  // namespace

IdentityReport check_max_representation(const LevySpec& levy, const ProblemSpec& p, double x, double y_bar,
                                        const MCConfig& cfg, const MaxRepOptions& opts) {
    cfg.validate();
    if (x > y_bar) throw Error(ErrorCode::invalid_argument, "check_max_representation needs x <= y_bar");
    std::function<double(double)> f = opts.f_override;
    if (!f) {
        const std::size_t n = std::max<std::size_t>(opts.table_points, 2);
        KnotTable table;
        const double lo = x;
        const double hi = y_bar + 1.0;
        for (std::size_t i = 0; i < n; ++i) {
            const double at = lo + (hi - lo) * static_cast<double>(i) / static_cast<double>(n - 1);
            table.x.push_back(at);
            table.y.push_back(evaluate_f_levy(levy, p, at, cfg).f);
        }
        f = [table = std::move(table)](double m) { return table.interpolate_clamped(m); };
    }
    const LevySkeleton sim(levy, opts.dt);
    const std::size_t n = cfg.paths;
    std::vector<double> rhs(n), done(n, 0.0);
    parallel_for(n, [&](std::size_t i) {
        RandomStream rng(cfg.seed, derive_stream(cfg.seed, "identity/max-representation", i));
        const PassagePath path = simulate_passage(sim, x, y_bar, true, p.cost, rng, cfg.max_steps, &f);
        if (path.censored) return;
        done[i] = 1.0;
        rhs[i] = -path.max_integral + p.gamma(path.end) - path.cost;
    });
    const double lhs = p.gamma(x);
    std::vector<double> kept, residuals;
    for (std::size_t i = 0; i < n; ++i) {
        if (done[i] == 0.0) continue;
        kept.push_back(rhs[i]);
        residuals.push_back(rhs[i] - lhs);
    }
    return finish_report(lhs, kept, residuals, 0.0, n);
}

IdentityReport check_ladder_sum_identity(const ProblemSpec& p, double x, double y, const MCConfig& cfg,
                                         LadderConvention convention) {
    cfg.validate();
    if (x > y) throw Error(ErrorCode::invalid_argument, "check_ladder_sum_identity needs x <= y");
    if (p.levy()) throw Error(ErrorCode::method_inapplicable, "ladder-sum identity needs a discrete process");

    const auto* walk = p.walk();
    const auto* chain = p.chain();
    const double span = std::max(1.0, y - x) + (walk ? 10.0 * std::max(1.0, std::abs(walk->mean())) : 0.0);
    const LadderGain gain(p, cfg, x - span, y + span);
    const double pool_variance = gain.pool_std_error() * gain.pool_std_error();

    const std::size_t n = cfg.paths;
    std::vector<double> lhs(n), rhs(n), epochs(n, 0.0), done(n, 0.0);
    const double gamma_x = p.gamma(x);
    const std::optional<std::size_t> chain_start = chain ? chain->index_of(x) : std::nullopt;
    if (chain && !chain_start) throw Error(ErrorCode::invalid_argument, "start is not a chain state");
    parallel_for(n, [&](std::size_t i) {
        RandomStream rng(cfg.seed, derive_stream(cfg.seed, "identity/ladder-sum", i));
        double pos = x;
        std::size_t state = chain_start.value_or(0);
        double running_max = x;
        double cost = 0.0;
        double sum = gain(x);
        double count = 1.0;
        for (std::size_t step = 1; step <= cfg.max_steps; ++step) {
            if (chain) {
                state = chain->sample_next(state, rng);
                pos = chain->states[state];
            } else {
                pos += walk->sample(rng);
            }
            cost += p.h(pos);
            if (pos > y) {
                if (convention == LadderConvention::inclusive) {
                    sum += gain(pos);
                    count += 1.0;
                }
                lhs[i] = p.gamma(pos) - cost;
                rhs[i] = gamma_x + sum;
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
    std::vector<double> kept_lhs, kept_rhs, residuals, kept_epochs;
    for (std::size_t i = 0; i < n; ++i) {
        if (done[i] == 0.0) continue;
        kept_lhs.push_back(lhs[i]);
        kept_rhs.push_back(rhs[i]);
        residuals.push_back(rhs[i] - lhs[i]);
        kept_epochs.push_back(epochs[i]);
    }
    double extra = 0.0;
    if (pool_variance > 0.0 && !kept_epochs.empty()) {
        const double mean_epochs = mean_estimate(kept_epochs).mean;
        extra = mean_epochs * mean_epochs * pool_variance;
    }
    IdentityReport r = finish_report(0.0, kept_rhs, residuals, extra, n);
    r.lhs = kept_lhs.empty() ? 0.0 : mean_estimate(kept_lhs).mean;
    return r;
}

}  // namespace lcstop
