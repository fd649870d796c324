#pragma once

#include <cstddef>
#include <functional>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "lcstop/ladder.hpp"
#include "lcstop/model.hpp"
#include "lcstop/oracle.hpp"

namespace lcstop {

enum class FVariant { standard, weighted, levy };
std::string_view to_string(FVariant v) noexcept;

enum class FBackend { automatic, exact, monte_carlo };

struct FValue {
    double f = 0.0;
    double ci_halfwidth = 0.0;
    bool exact = false;

    double lower() const noexcept { return f - ci_halfwidth; }
    double upper() const noexcept { return f + ci_halfwidth; }
};

struct FCurve {
    std::vector<double> grid;
    std::vector<double> f_values;
    std::vector<double> ci_halfwidths;
    FVariant variant = FVariant::standard;
};

struct EvalOptions {
    FBackend backend = FBackend::automatic;
    FVariant variant = FVariant::standard;
    std::size_t depth = 64;
};

/// (phi - gamma) / E tau+ (standard) or / E sum g (weighted), with a
/// delta-method interval for Monte Carlo statistics.
FValue f_from_stats(const LadderStats& s, FVariant variant, double ci_level);

FValue evaluate_f(const ProblemSpec& p, double y, const MCConfig& cfg, const EvalOptions& opts = {});

struct LevyFOptions {
    enum class Backend { automatic, bm_analytic, difference_quotient } backend = Backend::automatic;
    /// Passage height of the difference quotient; Richardson uses delta and delta / 2.
    double delta = 0.25;
    double dt = 1.0 / 1024.0;
    /// Adds the cost transform instead of subtracting it (negative tests only).
    bool flip_sign = false;
};

/// Continuous-time threshold function f = A gamma - h_hat.
FValue evaluate_f_levy(const LevySpec& levy, const ProblemSpec& p, double x, const MCConfig& cfg,
                       const LevyFOptions& opts = {});

/// Threshold function on a grid; Levy processes use evaluate_f_levy.
FCurve f_curve(const ProblemSpec& p, const std::vector<double>& grid, const MCConfig& cfg,
               const EvalOptions& opts = {}, const LevyFOptions& levy_opts = {});

// ---------------------------------------------------------------------------
// Monotonicity of f
// ---------------------------------------------------------------------------

enum class Assumption2Status { certified, violated, inconclusive };
std::string_view to_string(Assumption2Status s) noexcept;

struct Assumption2Report {
    Assumption2Status status = Assumption2Status::inconclusive;
    /// Last grid index with a positive sign before f turns non-positive.
    std::optional<std::size_t> sign_change;
    /// Offending consecutive grid index pairs.
    std::vector<std::pair<std::size_t, std::size_t>> offending;
    std::string detail;
};

/// Checks for a single + to - sign change with f non-increasing afterwards.
/// Signs are CI-robust: positive iff the lower bound is > 0, negative iff the
/// upper bound is < 0. Exact zeros count as non-positive.
Assumption2Report validate_assumption2(const FCurve& curve);

// ---------------------------------------------------------------------------
// Roots
// ---------------------------------------------------------------------------

enum class Boundary {
    strict,     ///< enter (x_bar, inf)
    nonstrict,  ///< enter [x_bar, inf)
};
std::string_view to_string(Boundary b) noexcept;

struct Threshold {
    double x_bar = 0.0;
    Boundary boundary = Boundary::nonstrict;
    double f_at_root = 0.0;
    double f_ci_halfwidth = 0.0;
    /// The interval at x_bar straddles 0; the boundary defaulted to nonstrict.
    bool boundary_inconclusive = false;
    /// f jumps across x_bar (exact backends); the boundary follows f at x_bar.
    bool jump = false;
    /// f <= 0 already at the lower end: stop at once everywhere on the bracket.
    bool immediate_stop = false;
    double bracket_lo = 0.0;
    double bracket_hi = 0.0;
    /// Interval of roots of the lower and upper confidence bounds (Monte Carlo).
    std::optional<std::pair<double, double>> x_bar_ci;
    std::optional<Assumption2Report> assumption2;
    std::size_t evaluations = 0;
    std::string method;
};

/// f evaluated at y with the path budget multiplied by the second argument.
using FEvaluator = std::function<FValue(double, std::size_t)>;

/// CI-aware bisection for inf{y : f(y) <= 0} on [lo, hi].
Threshold find_root(const FEvaluator& f, double lo, double hi, double tol, std::size_t budget_multiplier = 16);

Threshold find_root(const ProblemSpec& p, double lo, double hi, const MCConfig& cfg, double tol,
                    const EvalOptions& opts = {}, const LevyFOptions& levy_opts = {});

struct RandomWalkOptions {
    std::optional<std::pair<double, double>> bracket;
    double tol = 1e-9;
    FVariant variant = FVariant::standard;
    std::size_t depth = 64;
    /// Grid points of the f curve used to certify monotonicity.
    std::size_t certify_points = 33;
};

/// Threshold for a random walk. Skip-free lattice walks use closed forms;
/// other walks share one pooled excursion sample across all y.
Threshold random_walk_threshold(const StepDistribution& walk, const ProblemSpec& p, const MCConfig& cfg,
                                const RandomWalkOptions& opts = {});

// ---------------------------------------------------------------------------
// Values of threshold rules
// ---------------------------------------------------------------------------

struct ValueEstimate {
    double direct = 0.0;
    double direct_se = 0.0;
    double ladder_sum = 0.0;
    double ladder_se = 0.0;
    /// ladder_sum - direct, with the paired standard error.
    double residual = 0.0;
    double residual_se = 0.0;
    double z = 0.0;
    bool immediate = false;
    double censored_fraction = 0.0;
};

struct ValueOptions {
    LadderConvention convention = LadderConvention::strict;
    /// Skeleton step for Levy processes.
    double dt = 1.0 / 1024.0;
    /// Points used to tabulate f along the running maximum (Levy processes).
    std::size_t table_points = 2049;
};

/// Value of "stop on entry into [x_stop, inf)" (or the open interval) from
/// y_start, by direct simulation and by summing ladder gains over the ladder
/// epochs before stopping (f along the running maximum for Levy processes).
ValueEstimate value_of_threshold(const ProblemSpec& p, double x_stop, Boundary boundary, double y_start,
                                 const MCConfig& cfg, const ValueOptions& opts = {});

}  // namespace lcstop
