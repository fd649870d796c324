#pragma once

#include <cstddef>
#include <functional>
#include <optional>
#include <string_view>
#include <vector>

#include "lcstop/model.hpp"

namespace lcstop {

enum class LadderMethod { exact_skipfree, exact_chain, monte_carlo };
std::string_view to_string(LadderMethod m) noexcept;

/// Statistics of the first strict ascending ladder epoch tau+ started from y.
struct LadderStats {
    double y = 0.0;
    double e_tau_plus = 0.0;   ///< E_y tau+
    double phi = 0.0;          ///< E_y[gamma(Y_tau+) - sum_{i<=tau+} h(Y_i)]
    double e_cost = 0.0;       ///< E_y sum_{i<=tau+} h(Y_i)
    double e_weight = 0.0;     ///< E_y sum_{i<=tau+} g(Y_i)
    double exit_payoff = 0.0;  ///< E_y gamma(Y_tau+)

    double ci_tau_plus = 0.0;
    double ci_phi = 0.0;
    double ci_cost = 0.0;
    double ci_weight = 0.0;

    LadderMethod method = LadderMethod::monte_carlo;

    /// Bound on the cost mass that truncation of the downward lattice moved to
    /// the deepest level (skip-free backend only).
    double truncation_bound = 0.0;
    double censored_fraction = 0.0;
    bool unreliable = false;

    // Sample moments of the per-path gain G = gamma(Y_tau+) - sum h - gamma(y),
    // tau+ and the weight sum; zero for exact methods.
    std::size_t n = 0;
    double var_gain = 0.0;
    double var_tau = 0.0;
    double var_weight = 0.0;
    double cov_gain_tau = 0.0;
    double cov_gain_weight = 0.0;

    double gamma_y = 0.0;  ///< gamma(y)

    /// phi(y) - gamma(y)
    double gain() const noexcept { return phi - gamma_y; }
};

/// Closed-form ladder statistics for an upward skip-free lattice walk. The
/// expected number of visits to each level below the start before tau+ does
/// not depend on the start, so it is solved once and reused.
class SkipFreeLadder {
public:
    explicit SkipFreeLadder(const StepDistribution& walk, std::size_t depth = 64);

    double unit() const noexcept { return unit_; }
    double e_tau_plus() const noexcept { return e_tau_plus_; }
    /// visits()[k]: expected visits to y - k u at times 1 .. tau+ - 1.
    const std::vector<double>& visits() const noexcept { return visits_; }
    /// Expected time spent below the truncation depth.
    double remaining_mass() const noexcept { return remaining_; }

    /// Expected sum of fn over Y_1 .. Y_tau+ from y.
    double expected_sum(const std::function<double(double)>& fn, double y, double* tail_bound = nullptr) const;
    LadderStats stats(const ProblemSpec& p, double y) const;

private:
    double unit_ = 1.0;
    double e_tau_plus_ = 1.0;
    std::vector<double> visits_;
    double remaining_ = 0.0;
};

LadderStats ladder_stats_exact_skipfree(const StepDistribution& walk, const ProblemSpec& p, double y,
                                        std::size_t depth = 64);

/// Exact ladder statistics for a finite chain by solving (I - Q) v = r on the
/// states at or below y.
LadderStats ladder_stats_finite_chain(const FiniteChainSpec& chain, const ProblemSpec& p, double y);

/// Pooled excursions of a random walk from 0 up to its first strict ascending
/// ladder epoch. The ladder law of a random walk does not depend on the start,
/// so one sample serves every y (common random numbers).
struct LadderSample {
    std::vector<std::vector<double>> paths;  ///< partial sums S_1 .. S_tau+ of each complete excursion
    std::size_t attempted = 0;
    std::size_t censored = 0;

    double censored_fraction() const noexcept;
    LadderStats stats(const ProblemSpec& p, double y, double ci_level) const;
};

LadderSample sample_ladder_excursions(const StepDistribution& walk, const MCConfig& cfg, std::string_view tag);

/// Monte Carlo ladder statistics from y (random walks and finite chains).
LadderStats ladder_stats_mc(const ProblemSpec& p, double y, const MCConfig& cfg);

/// The ladder gain d(y) = phi(y) - gamma(y) as a function of y, from the exact
/// skip-free or chain backend when available and otherwise from a pooled
/// excursion sample tabulated on [lo, hi].
class LadderGain {
public:
    LadderGain(const ProblemSpec& p, const MCConfig& cfg, double lo, double hi);

    double operator()(double y) const;
    bool exact() const noexcept { return !table_; }
    /// Largest standard error of the tabulated gain (0 for exact backends).
    double pool_std_error() const noexcept { return pool_se_; }

private:
    const ProblemSpec* p_;
    std::optional<SkipFreeLadder> skipfree_;
    std::vector<std::optional<double>> chain_gain_;
    std::optional<KnotTable> table_;
    double pool_se_ = 0.0;
};

// ---------------------------------------------------------------------------
// Cost transform for Levy processes
// ---------------------------------------------------------------------------

enum class HatMethod { analytic_bm, mc_skeleton };
std::string_view to_string(HatMethod m) noexcept;

struct HatFunction {
    std::vector<double> grid;
    std::vector<double> values;
    std::vector<double> ci_halfwidths;
    HatMethod method = HatMethod::analytic_bm;
    double dt_used = 0.0;
    std::size_t refinements = 0;
    /// Relative change of the normalization when calibrated at height 2
    /// instead of 1 (skeleton method only).
    double calibration_sensitivity = 0.0;
};

struct HatOptions {
    enum class Method { automatic, analytic_bm, mc_skeleton } method = Method::automatic;
    double dt = 1.0 / 4096.0;
    std::size_t max_refinements = 2;
    double refine_tolerance = 0.02;
    /// A path stops once it is this far above its running minimum.
    double margin = 8.0;
};

HatFunction hat_transform(const LevySpec& levy, const CostSpec& cost, const std::vector<double>& grid,
                          const MCConfig& cfg, const HatOptions& opts = {});

}  // namespace lcstop
