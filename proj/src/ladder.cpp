#include "lcstop/ladder.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <string>

#include <Eigen/Dense>

#include "lcstop/error.hpp"
#include "lcstop/levy_sim.hpp"
#include "lcstop/oracle.hpp"
#include "lcstop/parallel.hpp"
#include "lcstop/stats.hpp"

namespace lcstop {

std::string_view to_string(LadderMethod m) noexcept {
    switch (m) {
        case LadderMethod::exact_skipfree: return "exact_skipfree";
        case LadderMethod::exact_chain: return "exact_chain";
        case LadderMethod::monte_carlo: return "monte_carlo";
    }
    return "unknown";
}

std::string_view to_string(HatMethod m) noexcept {
    return m == HatMethod::analytic_bm ? "analytic_bm" : "mc_skeleton";
}

namespace {

std::string keyed_tag(std::string_view base, double y) {
    std::uint64_t bits = 0;
    std::memcpy(&bits, &y, sizeof bits);
    return std::string(base) + "@" + std::to_string(bits);
}

}  // namespace

// ---------------------------------------------------------------------------
// Skip-free lattice walks
// ---------------------------------------------------------------------------

SkipFreeLadder::SkipFreeLadder(const StepDistribution& walk, std::size_t depth) {
    const auto law = walk.lattice();
    if (!law || law->max_up() != 1)
        throw Error(ErrorCode::method_inapplicable, "walk is not an upward skip-free lattice walk");
    const double drift_units = law->mean_units();
    if (!(drift_units > 0.0))
        throw Error(ErrorCode::ladder_epoch_not_integrable, "lattice walk has non-positive drift");
    unit_ = law->unit;
    e_tau_plus_ = 1.0 / drift_units;

    // Killed chain on levels 0, -1, ..., -depth relative to the start.
    const auto m = static_cast<Eigen::Index>(depth + 1);
    Eigen::MatrixXd a = Eigen::MatrixXd::Identity(m, m);
    for (Eigen::Index j = 0; j < m; ++j) {
        for (std::size_t s = 0; s < law->steps.size(); ++s) {
            const long target = -static_cast<long>(j) + law->steps[s];
            if (target > 0) continue;
            const long k = -target;
            if (k > static_cast<long>(depth)) continue;
            a(j, static_cast<Eigen::Index>(k)) -= law->probs[s];
        }
    }
    // Row 0 of the Green matrix: solve N^T e_0 via the transposed system.
    Eigen::VectorXd e0 = Eigen::VectorXd::Zero(m);
    e0(0) = 1.0;
    const Eigen::VectorXd row0 = a.transpose().fullPivLu().solve(e0);
    visits_.assign(depth + 1, 0.0);
    double total = 0.0;
    for (Eigen::Index k = 0; k < m; ++k) {
        visits_[static_cast<std::size_t>(k)] = std::max(0.0, row0(k) - (k == 0 ? 1.0 : 0.0));
        total += visits_[static_cast<std::size_t>(k)];
    }
    remaining_ = std::max(0.0, e_tau_plus_ - 1.0 - total);
}

double SkipFreeLadder::expected_sum(const std::function<double(double)>& fn, double y, double* tail_bound) const {
    constexpr double negligible = 1e-16;
    double sum = fn(y + unit_);
    for (std::size_t k = 0; k < visits_.size(); ++k)
        if (visits_[k] > negligible) sum += visits_[k] * fn(y - static_cast<double>(k) * unit_);
    double bound = 0.0;
    if (remaining_ > negligible) {
        const double deep = fn(y - static_cast<double>(visits_.size()) * unit_);
        sum += remaining_ * deep;
        bound = remaining_ * std::max(std::abs(fn(y)), std::abs(deep));
    }
    if (tail_bound) *tail_bound = bound;
    return sum;
}

LadderStats SkipFreeLadder::stats(const ProblemSpec& p, double y) const {
    LadderStats s;
    s.y = y;
    s.method = LadderMethod::exact_skipfree;
    s.e_tau_plus = e_tau_plus_;
    s.gamma_y = p.gamma(y);
    s.exit_payoff = p.gamma(y + unit_);
    double bound = 0.0;
    s.e_cost = expected_sum([&](double x) { return p.h(x); }, y, &bound);
    s.truncation_bound = bound;
    s.e_weight = p.weight ? expected_sum([&](double x) { return p.g(x); }, y) : e_tau_plus_;
    s.phi = s.exit_payoff - s.e_cost;
    return s;
}

LadderStats ladder_stats_exact_skipfree(const StepDistribution& walk, const ProblemSpec& p, double y,
                                        std::size_t depth) {
    return SkipFreeLadder(walk, depth).stats(p, y);
}

// ---------------------------------------------------------------------------
// Finite chains
// ---------------------------------------------------------------------------

LadderStats ladder_stats_finite_chain(const FiniteChainSpec& chain, const ProblemSpec& p, double y) {
    chain.validate();
    const auto idx = chain.index_of(y);
    if (!idx) throw Error(ErrorCode::invalid_argument, "start " + std::to_string(y) + " is not a chain state");
    const std::size_t total = chain.states.size();
    const std::size_t below = *idx + 1;
    const auto n = static_cast<Eigen::Index>(below);

    Eigen::MatrixXd q(n, n);
    for (Eigen::Index r = 0; r < n; ++r)
        for (Eigen::Index c = 0; c < n; ++c)
            q(r, c) = chain.kernel[static_cast<std::size_t>(r)][static_cast<std::size_t>(c)];
    const Eigen::VectorXcd ev = q.eigenvalues();
    double rho = 0.0;
    for (Eigen::Index k = 0; k < ev.size(); ++k) rho = std::max(rho, std::abs(ev(k)));
    if (rho >= 1.0 - 1e-9)
        throw Error(ErrorCode::ladder_epoch_not_integrable,
                    "chain cannot leave the states at or below " + std::to_string(y) + " (spectral radius " +
                        std::to_string(rho) + ")");

    Eigen::MatrixXd rhs = Eigen::MatrixXd::Zero(n, 4);
    for (Eigen::Index a = 0; a < n; ++a) {
        const auto& row = chain.kernel[static_cast<std::size_t>(a)];
        rhs(a, 0) = 1.0;
        for (std::size_t b = 0; b < total; ++b) {
            if (row[b] == 0.0) continue;
            const double s = chain.states[b];
            rhs(a, 1) += row[b] * p.h(s);
            rhs(a, 2) += row[b] * p.g(s);
            if (b >= below) rhs(a, 3) += row[b] * p.gamma(s);
        }
    }
    const Eigen::MatrixXd system = Eigen::MatrixXd::Identity(n, n) - q;
    const Eigen::MatrixXd v = system.fullPivLu().solve(rhs);
    const Eigen::Index i = n - 1;

    LadderStats s;
    s.y = y;
    s.method = LadderMethod::exact_chain;
    s.e_tau_plus = v(i, 0);
    s.e_cost = v(i, 1);
    s.e_weight = v(i, 2);
    s.exit_payoff = v(i, 3);
    s.gamma_y = p.gamma(y);
    s.phi = s.exit_payoff - s.e_cost;
    return s;
}

// ---------------------------------------------------------------------------
// Monte Carlo
// ---------------------------------------------------------------------------

namespace {

struct PathTotals {
    double tau = 0.0;
    double gain = 0.0;
    double weight = 0.0;
    double cost = 0.0;
    double payoff = 0.0;
    bool censored = false;
};

LadderStats summarize(const std::vector<PathTotals>& totals, double y, double gamma_y, double ci_level) {
    std::vector<double> tau, gain, weight, cost, payoff;
    std::size_t censored = 0;
    for (const auto& t : totals) {
        if (t.censored) {
            ++censored;
            continue;
        }
        tau.push_back(t.tau);
        gain.push_back(t.gain);
        weight.push_back(t.weight);
        cost.push_back(t.cost);
        payoff.push_back(t.payoff);
    }
    LadderStats s;
    s.y = y;
    s.method = LadderMethod::monte_carlo;
    s.gamma_y = gamma_y;
    s.censored_fraction = totals.empty() ? 0.0 : static_cast<double>(censored) / static_cast<double>(totals.size());
    if (s.censored_fraction > 0.10 || tau.size() < 2) {
        throw Error(ErrorCode::estimation_failed,
                    "ladder epoch censored on " + std::to_string(100.0 * s.censored_fraction) + "% of paths");
    }
    s.unreliable = s.censored_fraction > 0.01;
    const double z = critical_value(ci_level);
    const MeanEstimate mt = mean_estimate(tau);
    const MeanEstimate mg = mean_estimate(gain);
    const MeanEstimate mw = mean_estimate(weight);
    const MeanEstimate mc = mean_estimate(cost);
    const MeanEstimate mp = mean_estimate(payoff);
    s.n = tau.size();
    s.e_tau_plus = mt.mean;
    s.e_cost = mc.mean;
    s.e_weight = mw.mean;
    s.exit_payoff = mp.mean;
    s.phi = gamma_y + mg.mean;
    s.ci_tau_plus = z * mt.std_error;
    s.ci_phi = z * mg.std_error;
    s.ci_cost = z * mc.std_error;
    s.ci_weight = z * mw.std_error;
    s.var_gain = mg.variance;
    s.var_tau = mt.variance;
    s.var_weight = mw.variance;
    s.cov_gain_tau = sample_covariance(gain, tau);
    s.cov_gain_weight = sample_covariance(gain, weight);
    return s;
}

}  // namespace

double LadderSample::censored_fraction() const noexcept {
    return attempted == 0 ? 0.0 : static_cast<double>(censored) / static_cast<double>(attempted);
}

LadderSample sample_ladder_excursions(const StepDistribution& walk, const MCConfig& cfg, std::string_view tag) {
    cfg.validate();
    std::vector<std::vector<double>> slots(cfg.paths);
    std::vector<char> cut(cfg.paths, 0);
    parallel_for(cfg.paths, [&](std::size_t i) {
        RandomStream rng(cfg.seed, derive_stream(cfg.seed, tag, i));
        std::vector<double> path;
        double s = 0.0;
        for (std::size_t n = 0; n < cfg.max_steps; ++n) {
            s += walk.sample(rng);
            path.push_back(s);
            if (s > 0.0) {
                slots[i] = std::move(path);
                return;
            }
        }
        cut[i] = 1;
    });
    LadderSample out;
    out.attempted = cfg.paths;
    for (std::size_t i = 0; i < cfg.paths; ++i) {
        if (cut[i]) {
            ++out.censored;
            continue;
        }
        out.paths.push_back(std::move(slots[i]));
    }
    return out;
}

LadderStats LadderSample::stats(const ProblemSpec& p, double y, double ci_level) const {
    std::vector<PathTotals> totals(attempted);
    const double gamma_y = p.gamma(y);
    parallel_for(paths.size(), [&](std::size_t i) {
        const auto& path = paths[i];
        PathTotals t;
        t.tau = static_cast<double>(path.size());
        for (const double s : path) {
            t.cost += p.h(y + s);
            t.weight += p.g(y + s);
        }
        t.payoff = p.gamma(y + path.back());
        t.gain = t.payoff - t.cost - gamma_y;
        totals[i] = t;
    });
    for (std::size_t i = paths.size(); i < attempted; ++i) totals[i].censored = true;
    return summarize(totals, y, gamma_y, ci_level);
}

LadderStats ladder_stats_mc(const ProblemSpec& p, double y, const MCConfig& cfg) {
    cfg.validate();
    if (const auto* walk = p.walk()) {
        const LadderSample sample = sample_ladder_excursions(*walk, cfg, keyed_tag("ladder-mc", y));
        return sample.stats(p, y, cfg.ci_level);
    }
    if (const auto* chain = p.chain()) {
        const auto start = chain->index_of(y);
        if (!start) throw Error(ErrorCode::invalid_argument, "start is not a chain state");
        const double gamma_y = p.gamma(y);
        std::vector<PathTotals> totals(cfg.paths);
        const std::string tag = keyed_tag("ladder-mc-chain", y);
        parallel_for(cfg.paths, [&](std::size_t i) {
            RandomStream rng(cfg.seed, derive_stream(cfg.seed, tag, i));
            PathTotals t;
            std::size_t state = *start;
            t.censored = true;
            for (std::size_t n = 1; n <= cfg.max_steps; ++n) {
                state = chain->sample_next(state, rng);
                const double v = chain->states[state];
                t.cost += p.h(v);
                t.weight += p.g(v);
                if (v > y) {
                    t.tau = static_cast<double>(n);
                    t.payoff = p.gamma(v);
                    t.gain = t.payoff - t.cost - gamma_y;
                    t.censored = false;
                    break;
                }
            }
            totals[i] = t;
        });
        return summarize(totals, y, gamma_y, cfg.ci_level);
    }
    throw Error(ErrorCode::method_inapplicable, "discrete ladder epochs need a random walk or a finite chain");
}

// ---------------------------------------------------------------------------
// Cost transform
// ---------------------------------------------------------------------------

namespace {

struct SkeletonRound {
    std::vector<double> values;
    std::vector<double> std_errors;
    double kappa_sensitivity = 0.0;
    std::size_t censored = 0;
};

// Estimates at step dt (coarse) and dt/2 (fine) from the same fine paths.
std::pair<SkeletonRound, SkeletonRound> skeleton_round(const LevySpec& levy, const CostSpec& cost,
                                                       const std::vector<double>& grid, const MCConfig& cfg,
                                                       double dt, double margin, std::size_t round) {
    const double fine_dt = 0.5 * dt;
    const LevySkeleton fine(levy, fine_dt);
    const std::size_t n = cfg.paths;
    const std::size_t g = grid.size();
    const std::size_t max_fine_steps = 2 * cfg.max_steps;
    const std::string suffix = "/" + std::to_string(round);

    // Calibration: strict ascending ladder epochs up to heights 1 and 2.
    struct Calibration {
        double n_up[2][2] = {{0, 0}, {0, 0}};  // [resolution][height]
        double time[2][2] = {{0, 0}, {0, 0}};
        bool censored = false;
    };
    std::vector<Calibration> cal(n);
    const std::string cal_tag = "hat/calibrate" + suffix;
    parallel_for(n, [&](std::size_t i) {
        RandomStream rng(cfg.seed, derive_stream(cfg.seed, cal_tag, i));
        Calibration c;
        double x = 0.0;
        double max_f = 0.0;
        double max_c = 0.0;
        int done_f = 0;
        int done_c = 0;
        std::size_t steps = 0;
        while (done_c < 2 || done_f < 2) {
            if (steps >= max_fine_steps) {
                c.censored = true;
                break;
            }
            x += fine.increment(rng);
            ++steps;
            if (x > max_f) {
                max_f = x;
                for (int h = done_f; h < 2; ++h) c.n_up[1][h] += 1.0;
                while (done_f < 2 && max_f > static_cast<double>(done_f + 1)) {
                    c.time[1][done_f] = static_cast<double>(steps) * fine_dt;
                    ++done_f;
                }
            }
            if (steps % 2 == 0 && x > max_c) {
                max_c = x;
                for (int h = done_c; h < 2; ++h) c.n_up[0][h] += 1.0;
                while (done_c < 2 && max_c > static_cast<double>(done_c + 1)) {
                    c.time[0][done_c] = static_cast<double>(steps) * fine_dt;
                    ++done_c;
                }
            }
        }
        cal[i] = c;
    });

    // Descending ladder: weak new minima of the skeleton, starting with time 0.
    const bool flat = cost.is_constant();
    std::vector<double> sums(n * g * 2, 0.0);
    std::vector<char> cut(n, 0);
    const std::string desc_tag = "hat/descend" + suffix;
    parallel_for(n, [&](std::size_t i) {
        RandomStream rng(cfg.seed, derive_stream(cfg.seed, desc_tag, i));
        double* coarse = &sums[(i * 2 + 0) * g];
        double* fine_sum = &sums[(i * 2 + 1) * g];
        double count_c = 1.0;
        double count_f = 1.0;
        auto add = [&](double* dst, double m) {
            for (std::size_t j = 0; j < g; ++j) dst[j] += eval_cost(cost, grid[j] + m);
        };
        if (!flat) {
            add(coarse, 0.0);
            add(fine_sum, 0.0);
        }
        double x = 0.0;
        double min_f = 0.0;
        double min_c = 0.0;
        std::size_t steps = 0;
        while (x - min_c < margin) {
            if (steps >= max_fine_steps) {
                cut[i] = 1;
                break;
            }
            x += fine.increment(rng);
            ++steps;
            if (x <= min_f) {
                min_f = x;
                count_f += 1.0;
                if (!flat) add(fine_sum, x);
            }
            if (steps % 2 == 0 && x <= min_c) {
                min_c = x;
                count_c += 1.0;
                if (!flat) add(coarse, x);
            }
        }
        if (flat) {
            for (std::size_t j = 0; j < g; ++j) {
                coarse[j] = cost.c * count_c;
                fine_sum[j] = cost.c * count_f;
            }
        }
    });

    std::size_t cal_censored = 0;
    for (const auto& c : cal) cal_censored += c.censored ? 1 : 0;
    std::size_t desc_censored = 0;
    for (const char c : cut) desc_censored += c ? 1 : 0;
    const double censored_fraction =
        static_cast<double>(std::max(cal_censored, desc_censored)) / static_cast<double>(n);
    if (censored_fraction > 0.10)
        throw Error(ErrorCode::estimation_failed, "skeleton paths censored on " +
                                                       std::to_string(100.0 * censored_fraction) + "% of paths");

    std::pair<SkeletonRound, SkeletonRound> out;
    for (int res = 0; res < 2; ++res) {
        const double step = res == 0 ? dt : fine_dt;
        std::vector<double> a1, c1, a2, c2;
        for (const auto& c : cal) {
            if (c.censored) continue;
            a1.push_back(c.n_up[res][0]);
            c1.push_back(c.time[res][0]);
            a2.push_back(c.n_up[res][1]);
            c2.push_back(c.time[res][1]);
        }
        const MeanEstimate ma = mean_estimate(a1);
        const MeanEstimate mc = mean_estimate(c1);
        const double cov_ac = sample_covariance(a1, c1);
        const double kappa = step * ma.mean / mc.mean;
        const double kappa2 = step * mean_estimate(a2).mean / mean_estimate(c2).mean;
        const double rel_var_kappa =
            (ma.variance / (ma.mean * ma.mean) + mc.variance / (mc.mean * mc.mean) - 2.0 * cov_ac / (ma.mean * mc.mean)) /
            static_cast<double>(a1.size());

        SkeletonRound r;
        r.kappa_sensitivity = std::abs(kappa2 - kappa) / kappa;
        r.censored = desc_censored;
        r.values.resize(g);
        r.std_errors.resize(g);
        for (std::size_t j = 0; j < g; ++j) {
            std::vector<double> b;
            b.reserve(n);
            for (std::size_t i = 0; i < n; ++i)
                if (!cut[i]) b.push_back(sums[(i * 2 + static_cast<std::size_t>(res)) * g + j]);
            const MeanEstimate mb = mean_estimate(b);
            r.values[j] = kappa * mb.mean;
            const double var = kappa * kappa * mb.std_error * mb.std_error +
                               r.values[j] * r.values[j] * std::max(0.0, rel_var_kappa);
            r.std_errors[j] = std::sqrt(var);
        }
        (res == 0 ? out.first : out.second) = std::move(r);
    }
    return out;
}

}  // namespace

HatFunction hat_transform(const LevySpec& levy, const CostSpec& cost, const std::vector<double>& grid,
                          const MCConfig& cfg, const HatOptions& opts) {
    levy.validate();
    cost.validate();
    for (std::size_t i = 1; i < grid.size(); ++i)
        if (!(grid[i] > grid[i - 1])) throw Error(ErrorCode::invalid_argument, "hat grid must be strictly increasing");
    if (!(levy.mean() > 0.0))
        throw Error(ErrorCode::method_inapplicable, "cost transform needs E(X1) > 0");

    bool analytic = opts.method == HatOptions::Method::analytic_bm ||
                    (opts.method == HatOptions::Method::automatic && levy.kind == LevyKind::bm_drift);
    if (analytic && levy.kind != LevyKind::bm_drift)
        throw Error(ErrorCode::method_inapplicable, "analytic cost transform needs Brownian motion with drift");

    HatFunction out;
    out.grid = grid;
    out.values.assign(grid.size(), 0.0);
    out.ci_halfwidths.assign(grid.size(), 0.0);
    if (analytic) {
        out.method = HatMethod::analytic_bm;
        for (std::size_t i = 0; i < grid.size(); ++i)
            out.values[i] = bm_hat_value(levy.drift, levy.sigma, cost, grid[i]);
        return out;
    }

    cfg.validate();
    out.method = HatMethod::mc_skeleton;
    const double z = critical_value(cfg.ci_level);
    double dt = opts.dt;
    SkeletonRound best;
    std::size_t rounds = 0;
    for (std::size_t r = 0; r <= opts.max_refinements; ++r) {
        auto [coarse, fine] = skeleton_round(levy, cost, grid, cfg, dt, opts.margin, r);
        rounds = r + 1;
        double change = 0.0;
        for (std::size_t j = 0; j < grid.size(); ++j) {
            const double scale = std::max(std::abs(coarse.values[j]), 1e-12);
            change = std::max(change, std::abs(fine.values[j] - coarse.values[j]) / scale);
        }
        best = std::move(fine);
        out.dt_used = 0.5 * dt;
        if (change < opts.refine_tolerance) break;
        dt *= 0.5;
    }
    out.refinements = rounds;
    out.calibration_sensitivity = best.kappa_sensitivity;
    for (std::size_t j = 0; j < grid.size(); ++j) {
        out.values[j] = std::max(0.0, best.values[j]);
        out.ci_halfwidths[j] = z * best.std_errors[j];
    }
    return out;
}

}  // namespace lcstop

namespace lcstop {

// ---------------------------------------------------------------------------
// Ladder gain
// ---------------------------------------------------------------------------

LadderGain::LadderGain(const ProblemSpec& p, const MCConfig& cfg, double lo, double hi) : p_(&p) {
    if (const auto* walk = p.walk(); walk && walk->upward_skip_free()) {
        skipfree_.emplace(*walk);
        return;
    }
    if (const auto* chain = p.chain()) {
        chain_gain_.resize(chain->states.size());
        for (std::size_t i = 0; i + 1 < chain->states.size(); ++i) {
            try {
                chain_gain_[i] = ladder_stats_finite_chain(*chain, p, chain->states[i]).gain();
            } catch (const Error& e) {
                if (e.code() != ErrorCode::ladder_epoch_not_integrable) throw;
            }
        }
        return;
    }
    const auto* walk = p.walk();
    if (!walk) throw Error(ErrorCode::method_inapplicable, "ladder gain needs a discrete process");
    if (!(hi > lo)) throw Error(ErrorCode::invalid_argument, "ladder gain table needs lo < hi");
    const LadderSample sample = sample_ladder_excursions(*walk, cfg, "ladder-gain/pool");
    const double z = critical_value(cfg.ci_level);
    const std::size_t knots = 257;
    KnotTable t;
    for (std::size_t i = 0; i < knots; ++i) {
        const double at = lo + (hi - lo) * static_cast<double>(i) / static_cast<double>(knots - 1);
        const LadderStats st = sample.stats(p, at, cfg.ci_level);
        t.x.push_back(at);
        t.y.push_back(st.gain());
        pool_se_ = std::max(pool_se_, st.ci_phi / z);
    }
    table_ = std::move(t);
}

double LadderGain::operator()(double y) const {
    if (skipfree_) return skipfree_->stats(*p_, y).gain();
    if (table_) return table_->interpolate_clamped(y);
    const auto idx = p_->chain()->index_of(y);
    if (!idx) throw Error(ErrorCode::invalid_argument, "ladder gain requested off the chain states");
    if (!chain_gain_[*idx]) throw Error(ErrorCode::ladder_epoch_not_integrable, "no ladder epoch from this state");
    return *chain_gain_[*idx];
}

}  // namespace lcstop
