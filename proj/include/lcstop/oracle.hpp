#pragma once

#include <cstddef>
#include <functional>
#include <optional>
#include <vector>

#include "lcstop/model.hpp"

namespace lcstop {

// ---------------------------------------------------------------------------
// Dynamic programming
// ---------------------------------------------------------------------------

struct DPSolution {
    std::vector<double> states;
    std::vector<double> values;
    std::vector<double> gamma;
    std::vector<bool> stopping_set;
    /// States whose value is insensitive to the lower truncation. Always true
    /// for finite chains.
    std::vector<bool> trusted;
    std::size_t iterations = 0;
    double residual = 0.0;
    double lo = 0.0;
    double hi = 0.0;

    std::optional<double> value_at(double y) const;
};

/// Jacobi value iteration from V = gamma. Lattice walks live on unit * Z within
/// [lo, hi]: moves above hi stop at once, moves below lo are worth the penalty
/// gamma(lo) - 10 (1 + |gamma(lo)|). Finite chains ignore the domain.
DPSolution dp_value_iteration(const ProblemSpec& p, double lo, double hi, double tol,
                              std::size_t max_sweeps = 1000000);

/// Runs value iteration on [x_guess - 40 u, x_guess + 15 u] and on a domain
/// extended 40 units further down, widening until values on the upper half
/// agree to 10 tol. Marks each state trusted when both solves agree there.
DPSolution dp_value_iteration_auto(const ProblemSpec& p, double x_guess, double tol);

/// Compares a DP stopping set with the lattice trace of a threshold rule on
/// trusted states. Returns the offending states (empty when they match).
std::vector<double> dp_threshold_mismatches(const DPSolution& dp, double x_bar, bool strict_entry);

// ---------------------------------------------------------------------------
// Brownian closed forms
// ---------------------------------------------------------------------------

struct ExitLaw {
    double p_up = 0.0;
    double e_time = 0.0;
};

/// Exit of x + mu t + sigma W_t from (a, b): probability of leaving at b and
/// expected exit time.
ExitLaw bm_scale_exit(double mu, double sigma, double a, double b, double x);

/// E_x of the integral of h(X_s) up to the first passage above y, for Brownian
/// motion with drift mu > 0.
double bm_green_expected_cost(double mu, double sigma, double x, double y, const CostSpec& h);

/// E_x of the integral of h(X_s) up to the exit from (a, b).
double bm_interval_expected_cost(double mu, double sigma, double a, double b, double x, const CostSpec& h);

/// Cost transform along the descending ladder for Brownian motion with drift:
/// theta * int_0^inf h(y - s) exp(-theta s) ds with theta = 2 mu / sigma^2.
double bm_hat_value(double mu, double sigma, const CostSpec& h, double y);

// ---------------------------------------------------------------------------
// Identity checks
// ---------------------------------------------------------------------------

struct IdentityReport {
    double lhs = 0.0;
    double rhs = 0.0;
    double residual = 0.0;
    double std_error = 0.0;
    double z = 0.0;
    std::size_t paths = 0;
    double censored_fraction = 0.0;

    bool passed(double bound = 3.0) const noexcept;
};

struct MaxRepOptions {
    double dt = 1.0 / 1024.0;
    /// Overrides the threshold function (used for the sign negative test).
    std::function<double(double)> f_override;
    /// Number of table points used to tabulate f on [x, y_bar + 1].
    std::size_t table_points = 2049;
};

/// Checks gamma(x) = E_x[-int f(M_t) dt + gamma(X_T) - int h(X_t) dt] with T
/// the first passage above y_bar and M the running maximum.
IdentityReport check_max_representation(const LevySpec& levy, const ProblemSpec& p, double x, double y_bar,
                                        const MCConfig& cfg, const MaxRepOptions& opts = {});

enum class LadderConvention {
    strict,     ///< ladder epochs strictly before the stopping time
    inclusive,  ///< also counts an epoch that coincides with the stopping time
};

/// Checks E_x[gamma(Y_T) - sum h(Y_i)] = gamma(x) + E_x sum (phi - gamma)(Y_sigma)
/// over ascending ladder epochs sigma, with T the first time Y > y.
IdentityReport check_ladder_sum_identity(const ProblemSpec& p, double x, double y, const MCConfig& cfg,
                                         LadderConvention convention = LadderConvention::strict);

}  // namespace lcstop
