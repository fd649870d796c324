#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include "lcstop/rng.hpp"

namespace lcstop {

/// Sorted knots for piecewise-linear interpolation.
struct KnotTable {
    std::vector<double> x;
    std::vector<double> y;

    void validate(const char* what) const;
    /// Linear interpolation; throws extrapolation-error outside [x.front(), x.back()].
    double interpolate(double at) const;
    double interpolate_clamped(double at) const;
    double slope_at(double at) const;
};

// ---------------------------------------------------------------------------
// Payoff gamma
// ---------------------------------------------------------------------------

enum class PayoffKind {
    piecewise_linear_cap,  ///< min(x, cap)
    softplus_concave,      ///< -width * log(1 + exp(-(x - location) / width))
    lookup_table,          ///< linear interpolation, no extrapolation
    affine,                ///< intercept + slope * x (slope 0 gives a constant payoff)
    exponential,           ///< amplitude * exp(rate * x)
};

/// Payoff description. Every kind is post-composed with offset + scale * base(x),
/// which is how scaled instances are built.
struct PayoffSpec {
    PayoffKind kind = PayoffKind::affine;
    double cap = 0.0;
    double location = 0.0;
    double width = 1.0;
    double intercept = 0.0;
    double slope = 1.0;
    double amplitude = 1.0;
    double rate = 1.0;
    KnotTable table;
    double scale = 1.0;
    double offset = 0.0;

    static PayoffSpec capped(double cap);
    static PayoffSpec softplus(double location = 0.0, double width = 1.0);
    static PayoffSpec lookup(KnotTable table);
    static PayoffSpec linear(double slope, double intercept = 0.0);
    static PayoffSpec constant(double value);
    static PayoffSpec exp(double amplitude, double rate);

    /// Kinds with a closed-form derivative everywhere except isolated kinks.
    bool analytic() const noexcept { return kind != PayoffKind::lookup_table; }
    void validate() const;
};

double eval_payoff(const PayoffSpec& spec, double x);
double eval_payoff_derivative(const PayoffSpec& spec, double x);

// ---------------------------------------------------------------------------
// Running cost h (also used for the positive weight g)
// ---------------------------------------------------------------------------

enum class CostKind {
    constant,         ///< c
    affine_positive,  ///< max(a + b x, 0)
    lookup_table,     ///< linear interpolation, no extrapolation
    tabulated,        ///< linear interpolation, flat extrapolation (internal use)
};

struct CostSpec {
    CostKind kind = CostKind::constant;
    double c = 0.0;
    double a = 0.0;
    double b = 0.0;
    KnotTable table;

    static CostSpec constant(double c);
    static CostSpec affine_positive(double a, double b);
    static CostSpec lookup(KnotTable table);
    static CostSpec tabulated(KnotTable table);

    bool is_constant() const noexcept { return kind == CostKind::constant; }
    /// Points where the cost may have a kink; quadrature splits there.
    std::vector<double> breakpoints() const;
    void validate() const;
};

double eval_cost(const CostSpec& spec, double x);

// ---------------------------------------------------------------------------
// Processes
// ---------------------------------------------------------------------------

struct LevySpec;

/// Integer-step representation of a lattice walk: X = unit * k with P(k = steps[i]) = probs[i].
struct LatticeLaw {
    double unit = 1.0;
    std::vector<long> steps;
    std::vector<double> probs;

    long max_up() const;
    long max_down() const;
    double mean_units() const;
};

enum class StepKind { two_point, lattice_pmf, gaussian, levy_increment };

/// Law of one random-walk increment.
struct StepDistribution {
    StepKind kind = StepKind::gaussian;
    double p = 0.5;      ///< two_point: P(+up)
    double up = 1.0;
    double down = 1.0;
    LatticeLaw lattice_law;  ///< lattice_pmf
    double location = 0.0;   ///< gaussian mean
    double spread = 1.0;     ///< gaussian standard deviation
    std::shared_ptr<const LevySpec> levy;  ///< levy_increment: X over `horizon`
    double horizon = 1.0;

    static StepDistribution two_point(double p, double up, double down);
    static StepDistribution lattice(double unit, std::vector<long> steps, std::vector<double> probs);
    static StepDistribution gaussian(double mean, double stddev);
    static StepDistribution levy_increment(const LevySpec& levy, double horizon);

    double mean() const;
    double prob_positive() const;
    /// Lattice structure when the increments live on unit * Z.
    std::optional<LatticeLaw> lattice() const;
    /// Lattice walk whose largest upward step is exactly one unit.
    bool upward_skip_free() const;
    double sample(RandomStream& rng) const;
    void validate() const;
};

/// Finite-state chain on an increasing real grid.
struct FiniteChainSpec {
    std::vector<double> states;
    std::vector<std::vector<double>> kernel;

    void validate() const;
    std::optional<std::size_t> index_of(double y) const;
    std::size_t sample_next(std::size_t from, RandomStream& rng) const;
};

enum class LevyKind { bm_drift, cpp_drift, jump_diffusion };

/// Levy process X_t = drift t + sigma W_t + compound Poisson(rate, jump).
/// bm_drift has no jumps; cpp_drift has sigma = 0.
struct LevySpec {
    LevyKind kind = LevyKind::bm_drift;
    double drift = 0.0;
    double sigma = 0.0;
    double rate = 0.0;
    StepDistribution jump = StepDistribution::gaussian(0.0, 0.0);

    static LevySpec bm(double mu, double sigma);
    static LevySpec compound_poisson(double drift, double rate, StepDistribution jump);
    static LevySpec jump_diffusion(double mu, double sigma, double rate, StepDistribution jump);

    double mean() const;
    bool has_jumps() const noexcept { return kind != LevyKind::bm_drift && rate > 0.0; }
    void validate() const;
};

/// Exact draw of X_t - X_0 for a Levy process over a fixed horizon.
double sample_levy_increment(const LevySpec& levy, double horizon, RandomStream& rng);

using Process = std::variant<StepDistribution, FiniteChainSpec, LevySpec>;

/// Equally spaced probe grid used for monotonicity and boundedness checks.
struct ProbeRange {
    double lo = -20.0;
    double hi = 20.0;
    std::size_t count = 512;

    std::vector<double> points() const;
};

struct ProblemSpec {
    Process process;
    PayoffSpec payoff;
    CostSpec cost;
    std::optional<CostSpec> weight;  ///< g in the weighted threshold function; defaults to 1
    ProbeRange probe;

    const StepDistribution* walk() const noexcept { return std::get_if<StepDistribution>(&process); }
    const FiniteChainSpec* chain() const noexcept { return std::get_if<FiniteChainSpec>(&process); }
    const LevySpec* levy() const noexcept { return std::get_if<LevySpec>(&process); }

    double gamma(double x) const { return eval_payoff(payoff, x); }
    double h(double x) const { return eval_cost(cost, x); }
    double g(double x) const { return weight ? eval_cost(*weight, x) : 1.0; }
};

struct MCConfig {
    std::size_t paths = 10000;
    std::uint64_t seed = 20240601;
    std::size_t max_steps = 100000;
    double ci_level = 0.99;

    void validate() const;
    MCConfig with_paths(std::size_t n) const {
        MCConfig c = *this;
        c.paths = n;
        return c;
    }
    MCConfig with_seed(std::uint64_t s) const {
        MCConfig c = *this;
        c.seed = s;
        return c;
    }
};

// ---------------------------------------------------------------------------
// Diagnostics
// ---------------------------------------------------------------------------

struct MonotonicityReport {
    bool ok = true;
    /// Consecutive probe pairs (x_i, x_{i+1}) where the function decreased.
    std::vector<std::pair<double, double>> violations;
};

MonotonicityReport probe_nondecreasing(const std::function<double(double)>& fn, const ProbeRange& range);
/// Probe range clipped to the knot range of any table-backed function in the problem.
ProbeRange effective_probe_range(const ProblemSpec& p);

struct Diagnostics {
    double drift_estimate = 0.0;
    double drift_std_error = 0.0;
    std::optional<double> drift_exact;
    bool drift_positive = false;
    bool transient_ok = false;
    double transient_fraction = 0.0;  ///< share of paths whose running objective peaked early
    MonotonicityReport payoff_monotone;
    MonotonicityReport cost_monotone;
    bool cost_nonnegative = true;
    bool weight_positive = true;
    std::vector<std::string> warnings;

    bool ok() const noexcept {
        return drift_positive && transient_ok && payoff_monotone.ok && cost_nonnegative && weight_positive;
    }
};

/// Heuristic feasibility report. Never proves integrability; it reports evidence.
Diagnostics validate_problem(const ProblemSpec& p, const MCConfig& cfg);

}  // namespace lcstop
