#pragma once

#include <cstddef>
#include <functional>

#include "lcstop/model.hpp"
#include "lcstop/rng.hpp"

namespace lcstop {

/// End point of one skeleton step plus the extremes reached inside it.
struct StepExtremes {
    double end = 0.0;
    double max = 0.0;
    double min = 0.0;
};

/// Fixed-step simulator for a Levy process. Increments are drawn from the
/// exact law; within-step extremes use the Brownian-bridge law on every
/// jump-free piece, so level crossings inside a step are not missed.
/// The max and min are each exact in law but drawn independently.
class LevySkeleton {
public:
    LevySkeleton(const LevySpec& levy, double dt);

    double dt() const noexcept { return dt_; }
    const LevySpec& levy() const noexcept { return levy_; }

    double increment(RandomStream& rng) const;
    StepExtremes step(double x, RandomStream& rng) const;

private:
    LevySpec levy_;
    double dt_;
};

/// One path run from x until its running maximum passes `level`.
struct PassagePath {
    double time = 0.0;        ///< steps * dt at the end of the crossing step
    double end = 0.0;         ///< position at the end of the crossing step
    double cost = 0.0;        ///< trapezoid integral of h along the path
    double max_integral = 0.0;  ///< trapezoid integral of q(running max), when q is given
    bool censored = false;
};

/// Simulates to the first step whose within-step maximum exceeds `level`
/// (strictly above when `strict`, else at or above). The path stops at the end
/// of that step; the overshoot bias is of order dt.
PassagePath simulate_passage(const LevySkeleton& sim, double x, double level, bool strict, const CostSpec& cost,
                             RandomStream& rng, std::size_t max_steps,
                             const std::function<double(double)>* running_max_integrand = nullptr);

}  // namespace lcstop
