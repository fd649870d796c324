#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "lcstop/model.hpp"
#include "lcstop/threshold.hpp"

namespace lcstop {

enum class Scheme { time, spatial };
std::string_view to_string(Scheme s) noexcept;

/// Discrete problem embedded in a Levy problem at level n.
struct EmbeddedWalk {
    int level = 0;
    Scheme scheme = Scheme::time;
    double delta = 1.0;  ///< 2^-n: step length in time (time scheme) or space (spatial scheme)
    StepDistribution step;
    /// Expected cost accumulated during one step started at x.
    CostSpec ceil_h;
    /// Expected real time of one step.
    double e_duration = 1.0;
    /// Probability of leaving the cell upward (spatial scheme).
    double p_up = 0.0;
    /// Jumps overshoot the cell and were snapped to the nearest grid point.
    bool grid_snap_bias = false;
    std::string method;

    /// The discrete problem: same payoff, cost ceil_h, and for the spatial
    /// scheme the step duration as weight.
    ProblemSpec problem(const ProblemSpec& base) const;
};

EmbeddedWalk build_time_discretization(const LevySpec& levy, const ProblemSpec& p, int n, const MCConfig& cfg);
EmbeddedWalk build_spatial_discretization(const LevySpec& levy, const ProblemSpec& p, int n, const MCConfig& cfg);
EmbeddedWalk build_discretization(Scheme scheme, const LevySpec& levy, const ProblemSpec& p, int n,
                                  const MCConfig& cfg);

struct ProbeValue {
    double probe = 0.0;    ///< requested point
    double start = 0.0;    ///< grid point the walk starts from
    ValueEstimate value;
};

struct LevelResult {
    int level = 0;
    double delta = 0.0;
    Threshold threshold;
    std::vector<ProbeValue> values;
    bool grid_snap_bias = false;
};

/// Threshold of the embedded problem and the value of its threshold rule at
/// the probes (snapped down to the grid for the spatial scheme).
LevelResult solve_level(const EmbeddedWalk& walk, const ProblemSpec& p, const std::vector<double>& probes,
                        const MCConfig& cfg);

struct FnConvergence {
    std::vector<int> levels;
    std::vector<double> probes;
    /// A gamma - h_hat at each probe.
    std::vector<double> target;
    /// f_n[level][probe] and |f_n - target|.
    std::vector<std::vector<double>> f_n;
    std::vector<std::vector<double>> residuals;
    /// residual_n / residual_{n+1} per consecutive level pair and probe.
    std::vector<std::vector<double>> ratios;
    /// Slope of -log2 residual per level over the last three levels, per probe.
    std::vector<double> order;
    bool halving_ok = false;
};

/// f_n of the spatial scheme (ladder-epoch real time as denominator) against
/// the continuous threshold function.
FnConvergence check_fn_convergence(const LevySpec& levy, const ProblemSpec& p, const std::vector<int>& levels,
                                   const std::vector<double>& probes, const MCConfig& cfg);

struct DiscretizationReport {
    Scheme scheme = Scheme::spatial;
    std::vector<LevelResult> levels;
    std::vector<double> probes;
    bool monotone_values_ok = true;
    bool monotone_thresholds_ok = true;
    /// Probe indices where V_n dropped beyond 3 standard errors, as (level index, probe index).
    std::vector<std::pair<std::size_t, std::size_t>> value_violations;
    std::optional<double> limit_estimate;
    std::optional<double> order_estimate;
    std::optional<double> continuum_threshold;
    std::optional<FnConvergence> fn;
};

/// Default probes: 5 points spaced 1 apart strictly below `x_hat`.
std::vector<double> default_probes(double x_hat);

DiscretizationReport solve_sequence(const LevySpec& levy, const ProblemSpec& p, Scheme scheme,
                                    const std::vector<int>& levels, std::vector<double> probes, const MCConfig& cfg);

}  // namespace lcstop
