#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <vector>

#include <boost/math/quadrature/gauss_kronrod.hpp>

#include "lcstop/error.hpp"

namespace lcstop::detail {

/// Adaptive Gauss-Kronrod over [a, b] split at the given interior points.
/// b may be +infinity and a may be -infinity.
template <class F>
double integrate_split(F&& f, double a, double b, std::vector<double> cuts, double abs_tol = 1e-10) {
    using boost::math::quadrature::gauss_kronrod;
    if (!(b > a)) return 0.0;
    cuts.erase(std::remove_if(cuts.begin(), cuts.end(), [&](double c) { return !(c > a && c < b); }), cuts.end());
    std::sort(cuts.begin(), cuts.end());
    cuts.erase(std::unique(cuts.begin(), cuts.end()), cuts.end());
    std::vector<double> edges;
    edges.push_back(a);
    edges.insert(edges.end(), cuts.begin(), cuts.end());
    edges.push_back(b);
    const double share = abs_tol / static_cast<double>(edges.size() - 1);
    double total = 0.0;
    for (std::size_t i = 0; i + 1 < edges.size(); ++i) {
        double err = 0.0;
        const double piece = gauss_kronrod<double, 31>::integrate(f, edges[i], edges[i + 1], 20, 1e-12, &err);
        if (!std::isfinite(piece) || err > std::max(share, 1e-9 * std::abs(piece)) * 100.0)
            throw Error(ErrorCode::oracle_failed, "quadrature did not converge");
        total += piece;
    }
    return total;
}

}  // namespace lcstop::detail
