#include "lcstop/model.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <sstream>

#include <Eigen/Dense>

#include "lcstop/error.hpp"
#include "lcstop/parallel.hpp"
#include "lcstop/stats.hpp"

namespace lcstop {

namespace {

constexpr double kProbTol = 1e-12;

bool is_integer(double v, double tol = 1e-9) { return std::abs(v - std::round(v)) <= tol * std::max(1.0, std::abs(v)); }

double softplus_neg(double z) {
    // log(1 + exp(-z)) without overflow.
    return z > 0.0 ? std::log1p(std::exp(-z)) : -z + std::log1p(std::exp(z));
}

}  // namespace

// ---------------------------------------------------------------------------
// KnotTable
// ---------------------------------------------------------------------------

void KnotTable::validate(const char* what) const {
    if (x.size() < 2 || x.size() != y.size())
        throw Error(ErrorCode::invalid_argument, std::string(what) + ": table needs >= 2 knots with matching values");
    for (std::size_t i = 1; i < x.size(); ++i)
        if (!(x[i] > x[i - 1]))
            throw Error(ErrorCode::invalid_argument, std::string(what) + ": knots must be strictly increasing");
    for (std::size_t i = 0; i < x.size(); ++i)
        if (!std::isfinite(x[i]) || !std::isfinite(y[i]))
            throw Error(ErrorCode::invalid_argument, std::string(what) + ": non-finite knot");
}

double KnotTable::interpolate(double at) const {
    if (at < x.front() || at > x.back()) {
        std::ostringstream msg;
        msg << "x=" << at << " outside knot range [" << x.front() << ", " << x.back() << "]";
        throw Error(ErrorCode::extrapolation_error, msg.str());
    }
    return interpolate_clamped(at);
}

double KnotTable::interpolate_clamped(double at) const {
    if (at <= x.front()) return y.front();
    if (at >= x.back()) return y.back();
    const auto it = std::upper_bound(x.begin(), x.end(), at);
    const std::size_t i = static_cast<std::size_t>(it - x.begin());
    const double t = (at - x[i - 1]) / (x[i] - x[i - 1]);
    return y[i - 1] + t * (y[i] - y[i - 1]);
}

double KnotTable::slope_at(double at) const {
    if (at < x.front() || at > x.back())
        throw Error(ErrorCode::extrapolation_error, "derivative requested outside knot range");
    auto it = std::upper_bound(x.begin(), x.end(), at);
    if (it == x.end()) --it;
    const std::size_t i = static_cast<std::size_t>(it - x.begin());
    return (y[i] - y[i - 1]) / (x[i] - x[i - 1]);
}

// ---------------------------------------------------------------------------
// Payoff
// ---------------------------------------------------------------------------

PayoffSpec PayoffSpec::capped(double cap) {
    PayoffSpec s;
    s.kind = PayoffKind::piecewise_linear_cap;
    s.cap = cap;
    return s;
}

PayoffSpec PayoffSpec::softplus(double location, double width) {
    PayoffSpec s;
    s.kind = PayoffKind::softplus_concave;
    s.location = location;
    s.width = width;
    return s;
}

PayoffSpec PayoffSpec::lookup(KnotTable table) {
    PayoffSpec s;
    s.kind = PayoffKind::lookup_table;
    s.table = std::move(table);
    return s;
}

PayoffSpec PayoffSpec::linear(double slope, double intercept) {
    PayoffSpec s;
    s.kind = PayoffKind::affine;
    s.slope = slope;
    s.intercept = intercept;
    return s;
}

PayoffSpec PayoffSpec::constant(double value) { return linear(0.0, value); }

PayoffSpec PayoffSpec::exp(double amplitude, double rate) {
    PayoffSpec s;
    s.kind = PayoffKind::exponential;
    s.amplitude = amplitude;
    s.rate = rate;
    return s;
}

void PayoffSpec::validate() const {
    if (!(scale > 0.0) || !std::isfinite(offset))
        throw Error(ErrorCode::invalid_argument, "payoff scale must be positive and offset finite");
    switch (kind) {
        case PayoffKind::piecewise_linear_cap:
            if (!std::isfinite(cap)) throw Error(ErrorCode::invalid_argument, "payoff cap must be finite");
            break;
        case PayoffKind::softplus_concave:
            if (!(width > 0.0)) throw Error(ErrorCode::invalid_argument, "softplus width must be positive");
            break;
        case PayoffKind::lookup_table: table.validate("payoff"); break;
        case PayoffKind::affine:
            if (!std::isfinite(slope) || !std::isfinite(intercept))
                throw Error(ErrorCode::invalid_argument, "affine payoff needs finite slope and intercept");
            break;
        case PayoffKind::exponential:
            if (!std::isfinite(amplitude) || !std::isfinite(rate))
                throw Error(ErrorCode::invalid_argument, "exponential payoff needs finite parameters");
            break;
    }
}

double eval_payoff(const PayoffSpec& spec, double x) {
    double base = 0.0;
    switch (spec.kind) {
        case PayoffKind::piecewise_linear_cap: base = std::min(x, spec.cap); break;
        case PayoffKind::softplus_concave:
            base = -spec.width * softplus_neg((x - spec.location) / spec.width);
            break;
        case PayoffKind::lookup_table: base = spec.table.interpolate(x); break;
        case PayoffKind::affine: base = spec.intercept + spec.slope * x; break;
        case PayoffKind::exponential: base = spec.amplitude * std::exp(spec.rate * x); break;
    }
    return spec.offset + spec.scale * base;
}

double eval_payoff_derivative(const PayoffSpec& spec, double x) {
    double base = 0.0;
    switch (spec.kind) {
        case PayoffKind::piecewise_linear_cap: base = x < spec.cap ? 1.0 : 0.0; break;
        case PayoffKind::softplus_concave: {
            const double z = (x - spec.location) / spec.width;
            // d/dx of -w log(1+e^{-z}) = 1 / (1 + e^{z})
            base = z > 0.0 ? std::exp(-z) / (1.0 + std::exp(-z)) : 1.0 / (1.0 + std::exp(z));
            break;
        }
        case PayoffKind::lookup_table: base = spec.table.slope_at(x); break;
        case PayoffKind::affine: base = spec.slope; break;
        case PayoffKind::exponential: base = spec.amplitude * spec.rate * std::exp(spec.rate * x); break;
    }
    return spec.scale * base;
}

// ---------------------------------------------------------------------------
// Cost
// ---------------------------------------------------------------------------

CostSpec CostSpec::constant(double c) {
    CostSpec s;
    s.kind = CostKind::constant;
    s.c = c;
    return s;
}

CostSpec CostSpec::affine_positive(double a, double b) {
    CostSpec s;
    s.kind = CostKind::affine_positive;
    s.a = a;
    s.b = b;
    return s;
}

CostSpec CostSpec::lookup(KnotTable table) {
    CostSpec s;
    s.kind = CostKind::lookup_table;
    s.table = std::move(table);
    return s;
}

CostSpec CostSpec::tabulated(KnotTable table) {
    CostSpec s;
    s.kind = CostKind::tabulated;
    s.table = std::move(table);
    return s;
}

std::vector<double> CostSpec::breakpoints() const {
    switch (kind) {
        case CostKind::constant: return {};
        case CostKind::affine_positive:
            if (b != 0.0) return {-a / b};
            return {};
        case CostKind::lookup_table:
        case CostKind::tabulated: return table.x;
    }
    return {};
}

void CostSpec::validate() const {
    switch (kind) {
        case CostKind::constant:
            if (!std::isfinite(c)) throw Error(ErrorCode::invalid_argument, "constant cost must be finite");
            break;
        case CostKind::affine_positive:
            if (!std::isfinite(a) || !std::isfinite(b))
                throw Error(ErrorCode::invalid_argument, "affine cost needs finite parameters");
            break;
        case CostKind::lookup_table:
        case CostKind::tabulated: table.validate("cost"); break;
    }
}

double eval_cost(const CostSpec& spec, double x) {
    switch (spec.kind) {
        case CostKind::constant: return spec.c;
        case CostKind::affine_positive: return std::max(spec.a + spec.b * x, 0.0);
        case CostKind::lookup_table: return spec.table.interpolate(x);
        case CostKind::tabulated: return spec.table.interpolate_clamped(x);
    }
    return 0.0;
}

// ---------------------------------------------------------------------------
// Step distributions
// ---------------------------------------------------------------------------

long LatticeLaw::max_up() const { return *std::max_element(steps.begin(), steps.end()); }
long LatticeLaw::max_down() const { return *std::min_element(steps.begin(), steps.end()); }

double LatticeLaw::mean_units() const {
    double m = 0.0;
    for (std::size_t i = 0; i < steps.size(); ++i) m += probs[i] * static_cast<double>(steps[i]);
    return m;
}

StepDistribution StepDistribution::two_point(double p, double up, double down) {
    StepDistribution s;
    s.kind = StepKind::two_point;
    s.p = p;
    s.up = up;
    s.down = down;
    return s;
}

StepDistribution StepDistribution::lattice(double unit, std::vector<long> steps, std::vector<double> probs) {
    StepDistribution s;
    s.kind = StepKind::lattice_pmf;
    s.lattice_law.unit = unit;
    s.lattice_law.steps = std::move(steps);
    s.lattice_law.probs = std::move(probs);
    return s;
}

StepDistribution StepDistribution::gaussian(double mean, double stddev) {
    StepDistribution s;
    s.kind = StepKind::gaussian;
    s.location = mean;
    s.spread = stddev;
    return s;
}

StepDistribution StepDistribution::levy_increment(const LevySpec& levy, double horizon) {
    StepDistribution s;
    s.kind = StepKind::levy_increment;
    s.levy = std::make_shared<const LevySpec>(levy);
    s.horizon = horizon;
    return s;
}

double StepDistribution::mean() const {
    switch (kind) {
        case StepKind::two_point: return p * up - (1.0 - p) * down;
        case StepKind::lattice_pmf: return lattice_law.unit * lattice_law.mean_units();
        case StepKind::gaussian: return location;
        case StepKind::levy_increment: return levy->mean() * horizon;
    }
    return 0.0;
}

double StepDistribution::prob_positive() const {
    switch (kind) {
        case StepKind::two_point: return up > 0.0 ? p : 0.0;
        case StepKind::lattice_pmf: {
            double s = 0.0;
            for (std::size_t i = 0; i < lattice_law.steps.size(); ++i)
                if (lattice_law.steps[i] > 0) s += lattice_law.probs[i];
            return s;
        }
        case StepKind::gaussian:
            if (spread == 0.0) return location > 0.0 ? 1.0 : 0.0;
            return 0.5 * std::erfc(-location / (spread * std::sqrt(2.0)));
        case StepKind::levy_increment: {
            const LevySpec& l = *levy;
            if (l.sigma > 0.0 || l.has_jumps()) return 1.0;  // continuous or jump mass on both sides
            return l.drift > 0.0 ? 1.0 : 0.0;
        }
    }
    return 0.0;
}

std::optional<LatticeLaw> StepDistribution::lattice() const {
    if (kind == StepKind::lattice_pmf) return lattice_law;
    if (kind != StepKind::two_point) return std::nullopt;
    if (p >= 1.0) return LatticeLaw{up, {1}, {1.0}};
    if (!(up > 0.0) || !is_integer(down / up)) return std::nullopt;
    const long k = static_cast<long>(std::llround(down / up));
    if (p <= 0.0) return LatticeLaw{up, {-k}, {1.0}};
    return LatticeLaw{up, {1, -k}, {p, 1.0 - p}};
}

bool StepDistribution::upward_skip_free() const {
    const auto law = lattice();
    return law && law->max_up() == 1;
}

double StepDistribution::sample(RandomStream& rng) const {
    switch (kind) {
        case StepKind::two_point: return rng.uniform() < p ? up : -down;
        case StepKind::lattice_pmf: {
            double u = rng.uniform();
            const auto& law = lattice_law;
            for (std::size_t i = 0; i + 1 < law.steps.size(); ++i) {
                if (u < law.probs[i]) return law.unit * static_cast<double>(law.steps[i]);
                u -= law.probs[i];
            }
            return law.unit * static_cast<double>(law.steps.back());
        }
        case StepKind::gaussian: return location + spread * rng.normal();
        case StepKind::levy_increment: return sample_levy_increment(*levy, horizon, rng);
    }
    return 0.0;
}

void StepDistribution::validate() const {
    switch (kind) {
        case StepKind::two_point:
            if (!(p >= 0.0 && p <= 1.0)) throw Error(ErrorCode::invalid_argument, "two_point p must lie in [0,1]");
            if (!(up > 0.0) || !(down >= 0.0))
                throw Error(ErrorCode::invalid_argument, "two_point needs up > 0 and down >= 0");
            break;
        case StepKind::lattice_pmf: {
            const auto& law = lattice_law;
            if (law.steps.empty() || law.steps.size() != law.probs.size())
                throw Error(ErrorCode::invalid_argument, "lattice_pmf needs matching steps and probs");
            if (!(law.unit > 0.0)) throw Error(ErrorCode::invalid_argument, "lattice unit must be positive");
            double total = 0.0;
            for (const double q : law.probs) {
                if (q < 0.0) throw Error(ErrorCode::invalid_argument, "lattice_pmf probabilities must be >= 0");
                total += q;
            }
            if (std::abs(total - 1.0) > kProbTol) {
                std::ostringstream msg;
                msg << "lattice_pmf probabilities sum to " << total << ", not 1";
                throw Error(ErrorCode::invalid_argument, msg.str());
            }
            break;
        }
        case StepKind::gaussian:
            if (!(spread >= 0.0) || !std::isfinite(location))
                throw Error(ErrorCode::invalid_argument, "gaussian step needs finite mean and std >= 0");
            break;
        case StepKind::levy_increment:
            if (!levy || !(horizon > 0.0))
                throw Error(ErrorCode::invalid_argument, "levy increment needs a process and positive horizon");
            levy->validate();
            break;
    }
    if (!(prob_positive() > 0.0)) throw Error(ErrorCode::infeasible_problem, "P(X1 > 0) = 0");
}

// ---------------------------------------------------------------------------
// Finite chains
// ---------------------------------------------------------------------------

void FiniteChainSpec::validate() const {
    const std::size_t m = states.size();
    if (m < 2) throw Error(ErrorCode::invalid_argument, "finite chain needs at least two states");
    for (std::size_t i = 1; i < m; ++i)
        if (!(states[i] > states[i - 1]))
            throw Error(ErrorCode::invalid_argument, "chain states must be strictly increasing");
    if (kernel.size() != m) throw Error(ErrorCode::invalid_argument, "kernel must be square over the states");
    for (std::size_t i = 0; i < m; ++i) {
        if (kernel[i].size() != m) throw Error(ErrorCode::invalid_argument, "kernel must be square over the states");
        double total = 0.0;
        for (const double q : kernel[i]) {
            if (q < 0.0) throw Error(ErrorCode::infeasible_problem, "negative transition probability");
            total += q;
        }
        if (std::abs(total - 1.0) > kProbTol) {
            std::ostringstream msg;
            msg << "kernel row " << i << " sums to " << total << ", not 1";
            throw Error(ErrorCode::infeasible_problem, msg.str());
        }
    }
    bool any_up = false;
    for (std::size_t i = 0; i < m && !any_up; ++i)
        for (std::size_t j = i + 1; j < m; ++j)
            if (kernel[i][j] > 0.0) {
                any_up = true;
                break;
            }
    if (!any_up) throw Error(ErrorCode::infeasible_problem, "chain never moves up: P(X1 > 0) = 0");
}

std::optional<std::size_t> FiniteChainSpec::index_of(double y) const {
    const auto it = std::lower_bound(states.begin(), states.end(), y - 1e-12 * std::max(1.0, std::abs(y)));
    if (it == states.end()) return std::nullopt;
    if (std::abs(*it - y) > 1e-12 * std::max(1.0, std::abs(y))) return std::nullopt;
    return static_cast<std::size_t>(it - states.begin());
}

std::size_t FiniteChainSpec::sample_next(std::size_t from, RandomStream& rng) const {
    double u = rng.uniform();
    const auto& row = kernel[from];
    for (std::size_t j = 0; j + 1 < row.size(); ++j) {
        if (u < row[j]) return j;
        u -= row[j];
    }
    // Guard against rounding in the last bucket: fall back to the last state with mass.
    for (std::size_t j = row.size(); j-- > 0;)
        if (row[j] > 0.0) return j;
    return from;
}

// ---------------------------------------------------------------------------
// Levy
// ---------------------------------------------------------------------------

LevySpec LevySpec::bm(double mu, double sigma) {
    LevySpec s;
    s.kind = LevyKind::bm_drift;
    s.drift = mu;
    s.sigma = sigma;
    return s;
}

LevySpec LevySpec::compound_poisson(double drift, double rate, StepDistribution jump) {
    LevySpec s;
    s.kind = LevyKind::cpp_drift;
    s.drift = drift;
    s.rate = rate;
    s.jump = std::move(jump);
    return s;
}

LevySpec LevySpec::jump_diffusion(double mu, double sigma, double rate, StepDistribution jump) {
    LevySpec s;
    s.kind = LevyKind::jump_diffusion;
    s.drift = mu;
    s.sigma = sigma;
    s.rate = rate;
    s.jump = std::move(jump);
    return s;
}

double LevySpec::mean() const {
    const double jumps = has_jumps() ? rate * jump.mean() : 0.0;
    return drift + jumps;
}

void LevySpec::validate() const {
    if (!std::isfinite(drift) || !(sigma >= 0.0))
        throw Error(ErrorCode::invalid_argument, "levy process needs finite drift and sigma >= 0");
    switch (kind) {
        case LevyKind::bm_drift:
            if (!(sigma > 0.0)) throw Error(ErrorCode::invalid_argument, "bm_drift needs sigma > 0");
            break;
        case LevyKind::cpp_drift:
        case LevyKind::jump_diffusion:
            if (!(rate >= 0.0)) throw Error(ErrorCode::invalid_argument, "jump rate must be >= 0");
            if (jump.kind == StepKind::levy_increment)
                throw Error(ErrorCode::invalid_argument, "jump law cannot itself be a levy increment");
            break;
    }
}

double sample_levy_increment(const LevySpec& levy, double horizon, RandomStream& rng) {
    double x = levy.drift * horizon;
    if (levy.sigma > 0.0) x += levy.sigma * std::sqrt(horizon) * rng.normal();
    if (levy.has_jumps()) {
        const std::uint64_t k = rng.poisson(levy.rate * horizon);
        for (std::uint64_t i = 0; i < k; ++i) x += levy.jump.sample(rng);
    }
    return x;
}

// ---------------------------------------------------------------------------
// Probes and diagnostics
// ---------------------------------------------------------------------------

std::vector<double> ProbeRange::points() const {
    std::vector<double> pts(count);
    if (count == 1) {
        pts[0] = lo;
        return pts;
    }
    const double step = (hi - lo) / static_cast<double>(count - 1);
    for (std::size_t i = 0; i < count; ++i) pts[i] = lo + step * static_cast<double>(i);
    pts.back() = hi;
    return pts;
}

void MCConfig::validate() const {
    if (paths < 100) throw Error(ErrorCode::invalid_argument, "MCConfig.paths must be >= 100");
    if (max_steps < 1) throw Error(ErrorCode::invalid_argument, "MCConfig.max_steps must be >= 1");
    if (!(ci_level > 0.0 && ci_level < 1.0)) throw Error(ErrorCode::invalid_argument, "ci_level must lie in (0,1)");
}

MonotonicityReport probe_nondecreasing(const std::function<double(double)>& fn, const ProbeRange& range) {
    MonotonicityReport report;
    const auto pts = range.points();
    double prev = fn(pts.front());
    for (std::size_t i = 1; i < pts.size(); ++i) {
        const double cur = fn(pts[i]);
        if (cur < prev - 1e-12 * std::max(1.0, std::abs(prev))) {
            report.ok = false;
            report.violations.emplace_back(pts[i - 1], pts[i]);
        }
        prev = cur;
    }
    return report;
}

ProbeRange effective_probe_range(const ProblemSpec& p) {
    ProbeRange r = p.probe;
    auto clip = [&r](const KnotTable& t) {
        r.lo = std::max(r.lo, t.x.front());
        r.hi = std::min(r.hi, t.x.back());
    };
    if (p.payoff.kind == PayoffKind::lookup_table) clip(p.payoff.table);
    if (p.cost.kind == CostKind::lookup_table) clip(p.cost.table);
    if (p.weight && p.weight->kind == CostKind::lookup_table) clip(p.weight->table);
    if (!(r.hi > r.lo)) throw Error(ErrorCode::invalid_argument, "probe range does not intersect the table domains");
    return r;
}

namespace {

// Sub-kernel spectral radius check for a chain: the ladder epoch from state i
// is integrable iff the chain restricted to {states <= s_i} is transient.
bool chain_ladder_integrable(const FiniteChainSpec& chain, std::size_t i) {
    const auto n = static_cast<Eigen::Index>(i + 1);
    Eigen::MatrixXd q(n, n);
    for (Eigen::Index r = 0; r < n; ++r)
        for (Eigen::Index c = 0; c < n; ++c)
            q(r, c) = chain.kernel[static_cast<std::size_t>(r)][static_cast<std::size_t>(c)];
    const Eigen::VectorXcd ev = q.eigenvalues();
    double rho = 0.0;
    for (Eigen::Index k = 0; k < ev.size(); ++k) rho = std::max(rho, std::abs(ev(k)));
    return rho < 1.0 - 1e-9;
}

}  // namespace

Diagnostics validate_problem(const ProblemSpec& p, const MCConfig& cfg) {
    cfg.validate();
    p.payoff.validate();
    p.cost.validate();
    if (p.weight) p.weight->validate();

    Diagnostics d;
    const ProbeRange range = effective_probe_range(p);

    // Drift.
    const std::size_t draws = std::max<std::size_t>(cfg.paths, 100000);
    std::vector<double> increments(draws);
    double start = 0.0;
    if (const auto* walk = p.walk()) {
        walk->validate();
        d.drift_exact = walk->mean();
        parallel_for(draws, [&](std::size_t i) {
            RandomStream rng(cfg.seed, derive_stream(cfg.seed, "validate/drift", i));
            increments[i] = walk->sample(rng);
        });
    } else if (const auto* levy = p.levy()) {
        levy->validate();
        d.drift_exact = levy->mean();
        parallel_for(draws, [&](std::size_t i) {
            RandomStream rng(cfg.seed, derive_stream(cfg.seed, "validate/drift", i));
            increments[i] = sample_levy_increment(*levy, 1.0, rng);
        });
    } else {
        const auto& chain = *p.chain();
        chain.validate();
        const std::size_t m = chain.states.size();
        // Increment of one step from a uniformly drawn state.
        parallel_for(draws, [&](std::size_t i) {
            RandomStream rng(cfg.seed, derive_stream(cfg.seed, "validate/drift", i));
            const std::size_t from = static_cast<std::size_t>(rng.uniform() * static_cast<double>(m)) % m;
            increments[i] = chain.states[chain.sample_next(from, rng)] - chain.states[from];
        });
        start = chain.states.front();
    }
    const MeanEstimate drift = mean_estimate(increments);
    d.drift_estimate = drift.mean;
    d.drift_std_error = drift.std_error;

    if (const auto* chain = p.chain()) {
        bool all = true;
        for (std::size_t i = 0; i + 1 < chain->states.size(); ++i)
            if (!chain_ladder_integrable(*chain, i)) {
                all = false;
                d.warnings.push_back("ladder epoch not integrable from state " + std::to_string(chain->states[i]));
            }
        d.drift_positive = all;
    } else {
        d.drift_positive = *d.drift_exact > 0.0;
        if (!d.drift_positive) d.warnings.push_back("non-positive drift E(X1) = " + std::to_string(*d.drift_exact));
    }

    // Monotonicity and sign probes.
    d.payoff_monotone = probe_nondecreasing([&](double x) { return p.gamma(x); }, range);
    if (!d.payoff_monotone.ok)
        d.warnings.push_back("payoff decreases on " + std::to_string(d.payoff_monotone.violations.size()) +
                             " probe intervals");
    d.cost_monotone = probe_nondecreasing([&](double x) { return p.h(x); }, range);
    if (!d.cost_monotone.ok) d.warnings.push_back("cost is not non-decreasing; random-walk theorem does not apply");
    for (const double x : range.points()) {
        if (p.h(x) < 0.0) d.cost_nonnegative = false;
        if (p.weight && !(p.g(x) > 0.0)) d.weight_positive = false;
    }
    if (!d.cost_nonnegative) d.warnings.push_back("cost takes negative values");
    if (!d.weight_positive) d.warnings.push_back("weight is not strictly positive");

    // Transience heuristic: the running objective should peak in the first half
    // of the simulated horizon on almost every path.
    const std::size_t n_paths = std::min<std::size_t>(cfg.paths, 500);
    const std::size_t horizon = std::min<std::size_t>(cfg.max_steps, 5000);
    std::vector<double> early(n_paths, 0.0);
    auto safe_gamma = [&](double x) {
        if (p.payoff.kind == PayoffKind::lookup_table) x = std::clamp(x, p.payoff.table.x.front(), p.payoff.table.x.back());
        return p.gamma(x);
    };
    auto safe_h = [&](double x) {
        if (p.cost.kind == CostKind::lookup_table) x = std::clamp(x, p.cost.table.x.front(), p.cost.table.x.back());
        return p.h(x);
    };
    parallel_for(n_paths, [&](std::size_t i) {
        RandomStream rng(cfg.seed, derive_stream(cfg.seed, "validate/transience", i));
        double y = start;
        std::size_t state = 0;
        double cost = 0.0;
        double best = safe_gamma(y);
        std::size_t argmax = 0;
        for (std::size_t n = 1; n <= horizon; ++n) {
            if (const auto* walk = p.walk()) {
                y += walk->sample(rng);
            } else if (const auto* levy = p.levy()) {
                y += sample_levy_increment(*levy, 1.0, rng);
            } else {
                state = p.chain()->sample_next(state, rng);
                y = p.chain()->states[state];
            }
            cost += safe_h(y);
            const double z = safe_gamma(y) - cost;
            if (z > best) {
                best = z;
                argmax = n;
            }
        }
        early[i] = argmax < horizon / 2 ? 1.0 : 0.0;
    });
    d.transient_fraction = pairwise_sum(early) / static_cast<double>(n_paths);
    d.transient_ok = d.transient_fraction >= 0.95;
    if (!d.transient_ok)
        d.warnings.push_back("running objective still rising late on " +
                             std::to_string(100.0 * (1.0 - d.transient_fraction)) + "% of paths");
    return d;
}

}  // namespace lcstop
