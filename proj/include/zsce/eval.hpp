#pragma once

#include <cstddef>
#include <vector>

#include "zsce/util.hpp"

namespace zsce {

/// Q-error: max(p/a, a/p). Both inputs must be positive (callers compare in
/// 1+cost space, so actuals are always >= 1).
double qerror(double predicted, double actual);

/// Quantile with linear interpolation between order statistics (type 7,
/// h = (n-1)p). Takes the values by value and sorts internally.
double quantile_type7(std::vector<double> values, double p);

struct Metrics {
    double median = 0;
    double p95 = 0;
    double max = 0;
    size_t count = 0;
};

Metrics compute_metrics(std::vector<double> qerrors);

/// Least-squares line actual ~ a*analytic + b. A constant regressor
/// degenerates to the intercept-only fit.
struct LinearFit {
    double a = 0;
    double b = 0;
    bool degenerate = false;

    double predict(double analytic) const { return a * analytic + b; }
};

LinearFit fit_least_squares(const std::vector<double>& x, const std::vector<double>& y);

} // namespace zsce
