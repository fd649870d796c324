#include "lcstop/levy_sim.hpp"

#include <algorithm>
#include <cmath>
#include <vector>

#include "lcstop/error.hpp"

namespace lcstop {

namespace {

// Bridge extremes of drift + sigma W over a piece of length tau from a to b.
double bridge_max(double a, double b, double sigma, double tau, RandomStream& rng) {
    if (sigma <= 0.0) return std::max(a, b);
    const double d = b - a;
    return 0.5 * (a + b + std::sqrt(d * d - 2.0 * sigma * sigma * tau * std::log(rng.uniform())));
}

double bridge_min(double a, double b, double sigma, double tau, RandomStream& rng) {
    if (sigma <= 0.0) return std::min(a, b);
    const double d = b - a;
    return 0.5 * (a + b - std::sqrt(d * d - 2.0 * sigma * sigma * tau * std::log(rng.uniform())));
}

}  // namespace

LevySkeleton::LevySkeleton(const LevySpec& levy, double dt) : levy_(levy), dt_(dt) {
    levy_.validate();
    if (!(dt > 0.0)) throw Error(ErrorCode::invalid_argument, "skeleton step must be positive");
}

double LevySkeleton::increment(RandomStream& rng) const { return sample_levy_increment(levy_, dt_, rng); }

StepExtremes LevySkeleton::step(double x, RandomStream& rng) const {
    const double sqdt = std::sqrt(dt_);
    if (!levy_.has_jumps()) {
        const double end = x + levy_.drift * dt_ + levy_.sigma * sqdt * rng.normal();
        return {end, bridge_max(x, end, levy_.sigma, dt_, rng), bridge_min(x, end, levy_.sigma, dt_, rng)};
    }
    const std::uint64_t k = rng.poisson(levy_.rate * dt_);
    if (k == 0) {
        const double end = x + levy_.drift * dt_ + levy_.sigma * sqdt * rng.normal();
        return {end, bridge_max(x, end, levy_.sigma, dt_, rng), bridge_min(x, end, levy_.sigma, dt_, rng)};
    }
    std::vector<double> times(k);
    for (auto& t : times) t = rng.uniform() * dt_;
    std::sort(times.begin(), times.end());
    times.push_back(dt_);

    StepExtremes out{x, x, x};
    double pos = x;
    double prev = 0.0;
    for (std::size_t i = 0; i < times.size(); ++i) {
        const double tau = times[i] - prev;
        const double end = pos + levy_.drift * tau + levy_.sigma * std::sqrt(tau) * rng.normal();
        out.max = std::max(out.max, bridge_max(pos, end, levy_.sigma, tau, rng));
        out.min = std::min(out.min, bridge_min(pos, end, levy_.sigma, tau, rng));
        pos = end;
        if (i + 1 < times.size()) {
            pos += levy_.jump.sample(rng);
            out.max = std::max(out.max, pos);
            out.min = std::min(out.min, pos);
        }
        prev = times[i];
    }
    out.end = pos;
    return out;
}

PassagePath simulate_passage(const LevySkeleton& sim, double x, double level, bool strict, const CostSpec& cost,
                             RandomStream& rng, std::size_t max_steps,
                             const std::function<double(double)>* running_max_integrand) {
    PassagePath out;
    const double dt = sim.dt();
    const bool flat_cost = cost.is_constant();
    double pos = x;
    double running_max = x;
    double h_prev = flat_cost ? cost.c : eval_cost(cost, pos);
    double q_prev = running_max_integrand ? (*running_max_integrand)(running_max) : 0.0;
    auto passed = [&](double m) { return strict ? m > level : m >= level; };
    if (passed(x)) {
        out.end = x;
        return out;
    }
    for (std::size_t n = 1; n <= max_steps; ++n) {
        const StepExtremes s = sim.step(pos, rng);
        pos = s.end;
        const bool new_max = s.max > running_max;
        if (new_max) running_max = s.max;
        const double h_cur = flat_cost ? cost.c : eval_cost(cost, pos);
        out.cost += 0.5 * (h_prev + h_cur) * dt;
        h_prev = h_cur;
        if (running_max_integrand) {
            const double q_cur = new_max ? (*running_max_integrand)(running_max) : q_prev;
            out.max_integral += 0.5 * (q_prev + q_cur) * dt;
            q_prev = q_cur;
        }
        if (passed(running_max)) {
            out.time = static_cast<double>(n) * dt;
            out.end = pos;
            return out;
        }
    }
    out.time = static_cast<double>(max_steps) * dt;
    out.end = pos;
    out.censored = true;
    return out;
}

}  // namespace lcstop
