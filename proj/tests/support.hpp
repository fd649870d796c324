#pragma once

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <functional>
#include <sstream>
#include <string>

#include "lcstop/model.hpp"

namespace lcstop::test {

/// SplitMix64 generator for property-test instances.
class Gen {
public:
    explicit Gen(std::uint64_t seed) : state_(seed) {}

    std::uint64_t next() {
        std::uint64_t z = (state_ += 0x9e3779b97f4a7c15ULL);
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
        return z ^ (z >> 31);
    }
    double uniform(double lo, double hi) { return lo + (hi - lo) * static_cast<double>(next() >> 11) * 0x1.0p-53; }
    int integer(int lo, int hi) { return lo + static_cast<int>(next() % static_cast<std::uint64_t>(hi - lo + 1)); }

private:
    std::uint64_t state_;
};

inline ProblemSpec cap5(double c = 0.1, double p = 0.75) {
    ProblemSpec s;
    s.process = StepDistribution::two_point(p, 1.0, 1.0);
    s.payoff = PayoffSpec::capped(5.0);
    s.cost = CostSpec::constant(c);
    return s;
}

inline ProblemSpec bm_softplus(double mu = 1.0, double sigma = 1.0, double c = 0.5) {
    ProblemSpec s;
    s.process = LevySpec::bm(mu, sigma);
    s.payoff = PayoffSpec::softplus(0.0, 1.0);
    s.cost = CostSpec::constant(c);
    return s;
}

inline double softplus(double x) { return -std::log1p(std::exp(-x)); }

/// Bisection for the sign change of a decreasing function on [lo, hi].
inline double bisect_root(const std::function<double(double)>& f, double lo, double hi, double tol = 1e-13) {
    while (hi - lo > tol) {
        const double mid = 0.5 * (lo + hi);
        if (f(mid) > 0.0) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    return 0.5 * (lo + hi);
}

/// Root of the level-n spatial threshold function mu (gamma(x + d) - gamma(x)) / d - c.
inline double spatial_level_root(double mu, double c, double d) {
    return bisect_root([&](double x) { return mu * (softplus(x + d) - softplus(x)) / d - c; }, -5.0, 5.0);
}

inline std::string slurp(const std::filesystem::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream s;
    s << in.rdbuf();
    return s.str();
}

inline std::filesystem::path fresh_dir(const std::string& name) {
    const auto dir = std::filesystem::temp_directory_path() / ("lcstop_test_" + name);
    std::filesystem::remove_all(dir);
    std::filesystem::create_directories(dir);
    return dir;
}

}  // namespace lcstop::test
