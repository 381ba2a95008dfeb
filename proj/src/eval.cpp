#include "zsce/eval.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace zsce {

double qerror(double predicted, double actual) {
    if (!(predicted > 0) || !(actual > 0))
        throw std::runtime_error("qerror requires positive inputs");
    return std::max(predicted / actual, actual / predicted);
}

double quantile_type7(std::vector<double> values, double p) {
    if (values.empty()) throw std::runtime_error("quantile of an empty set");
    std::sort(values.begin(), values.end());
    double h = (static_cast<double>(values.size()) - 1.0) * p;
    auto lo = static_cast<size_t>(std::floor(h));
    auto hi = std::min(lo + 1, values.size() - 1);
    double frac = h - std::floor(h);
    return values[lo] + frac * (values[hi] - values[lo]);
}

Metrics compute_metrics(std::vector<double> qerrors) {
    if (qerrors.empty()) throw std::runtime_error("metrics of an empty set");
    Metrics m;
    m.count = qerrors.size();
    m.max = *std::max_element(qerrors.begin(), qerrors.end());
    m.median = quantile_type7(qerrors, 0.5);
    m.p95 = quantile_type7(std::move(qerrors), 0.95);
    return m;
}

LinearFit fit_least_squares(const std::vector<double>& x, const std::vector<double>& y) {
    if (x.size() != y.size() || x.size() < 2)
        throw std::runtime_error("least squares needs at least two paired samples");
    double n = static_cast<double>(x.size());
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    for (size_t i = 0; i < x.size(); ++i) {
        sx += x[i];
        sy += y[i];
        sxx += x[i] * x[i];
        sxy += x[i] * y[i];
    }
    double det = n * sxx - sx * sx;
    LinearFit fit;
    if (std::abs(det) < 1e-9 * std::max(1.0, n * sxx)) { // constant regressor
        fit.degenerate = true;
        fit.a = 0;
        fit.b = sy / n;
        return fit;
    }
    fit.a = (n * sxy - sx * sy) / det;
    fit.b = (sy - fit.a * sx) / n;
    return fit;
}

} // namespace zsce
