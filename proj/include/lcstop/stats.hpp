#pragma once

#include <cstddef>
#include <span>

namespace lcstop {

/// Standard normal quantile.
double normal_quantile(double p);

/// Two-sided critical value for a confidence level, e.g. 0.99 -> 2.5758.
double critical_value(double ci_level);

struct MeanEstimate {
    double mean = 0.0;
    double std_error = 0.0;
    double variance = 0.0;
    std::size_t n = 0;
};

MeanEstimate mean_estimate(std::span<const double> samples);

/// Unbiased sample covariance; both spans must have equal length >= 2.
double sample_covariance(std::span<const double> a, std::span<const double> b);

/// Ratio of means with a delta-method standard error.
struct RatioEstimate {
    double ratio = 0.0;
    double std_error = 0.0;
    MeanEstimate numerator;
    MeanEstimate denominator;
};

RatioEstimate ratio_estimate(std::span<const double> numerator, std::span<const double> denominator);

/// Delta-method variance of mean(a)/mean(b) from summary moments.
double ratio_variance(double mean_a, double mean_b, double var_a, double var_b, double cov_ab, std::size_t n);

}  // namespace lcstop
