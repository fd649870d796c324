#include "lcstop/stats.hpp"

#include <cmath>
#include <vector>

#include <boost/math/distributions/normal.hpp>

#include "lcstop/error.hpp"
#include "lcstop/parallel.hpp"

namespace lcstop {

double normal_quantile(double p) {
    if (!(p > 0.0 && p < 1.0)) throw Error(ErrorCode::invalid_argument, "normal quantile needs p in (0,1)");
    return boost::math::quantile(boost::math::normal_distribution<double>(), p);
}

double critical_value(double ci_level) {
    if (!(ci_level > 0.0 && ci_level < 1.0))
        throw Error(ErrorCode::invalid_argument, "ci_level must lie in (0,1)");
    return normal_quantile(0.5 + 0.5 * ci_level);
}

MeanEstimate mean_estimate(std::span<const double> samples) {
    MeanEstimate est;
    est.n = samples.size();
    if (est.n == 0) return est;
    est.mean = pairwise_sum(samples) / static_cast<double>(est.n);
    if (est.n < 2) return est;
    std::vector<double> sq(est.n);
    for (std::size_t i = 0; i < est.n; ++i) {
        const double d = samples[i] - est.mean;
        sq[i] = d * d;
    }
    est.variance = pairwise_sum(sq) / static_cast<double>(est.n - 1);
    est.std_error = std::sqrt(est.variance / static_cast<double>(est.n));
    return est;
}

double sample_covariance(std::span<const double> a, std::span<const double> b) {
    if (a.size() != b.size() || a.size() < 2)
        throw Error(ErrorCode::invalid_argument, "covariance needs two equal-length samples of size >= 2");
    const double n = static_cast<double>(a.size());
    const double ma = pairwise_sum(a) / n;
    const double mb = pairwise_sum(b) / n;
    std::vector<double> prod(a.size());
    for (std::size_t i = 0; i < a.size(); ++i) prod[i] = (a[i] - ma) * (b[i] - mb);
    return pairwise_sum(prod) / (n - 1.0);
}

double ratio_variance(double mean_a, double mean_b, double var_a, double var_b, double cov_ab, std::size_t n) {
    const double r = mean_a / mean_b;
    const double v = (var_a - 2.0 * r * cov_ab + r * r * var_b) / (mean_b * mean_b * static_cast<double>(n));
    return v > 0.0 ? v : 0.0;
}

RatioEstimate ratio_estimate(std::span<const double> numerator, std::span<const double> denominator) {
    RatioEstimate est;
    est.numerator = mean_estimate(numerator);
    est.denominator = mean_estimate(denominator);
    est.ratio = est.numerator.mean / est.denominator.mean;
    if (numerator.size() >= 2) {
        const double cov = sample_covariance(numerator, denominator);
        est.std_error = std::sqrt(ratio_variance(est.numerator.mean, est.denominator.mean, est.numerator.variance,
                                                 est.denominator.variance, cov, numerator.size()));
    }
    return est;
}

}  // namespace lcstop
