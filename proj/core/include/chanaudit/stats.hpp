#pragma once

#include <algorithm>
#include <cmath>
#include <span>
#include <vector>

namespace chanaudit {

/// Empirical quantile with linear interpolation between order statistics.
/// `sorted` must be ascending and nonempty.
inline double quantile_sorted(std::span<const double> sorted, double q) {
    const std::size_t n = sorted.size();
    if (n == 1) return sorted[0];
    const double h = q * static_cast<double>(n - 1);
    const std::size_t lo = static_cast<std::size_t>(h);
    if (lo + 1 >= n) return sorted[n - 1];
    const double frac = h - static_cast<double>(lo);
    return sorted[lo] + frac * (sorted[lo + 1] - sorted[lo]);
}

inline double quantile(std::vector<double> values, double q) {
    std::sort(values.begin(), values.end());
    return quantile_sorted(values, q);
}

inline double mean(std::span<const double> values) {
    double acc = 0.0;
    for (double v : values) acc += v;
    return values.empty() ? 0.0 : acc / static_cast<double>(values.size());
}

/// Sample standard deviation (n-1 denominator); 0 for fewer than two values.
inline double sample_sd(std::span<const double> values) {
    if (values.size() < 2) return 0.0;
    const double m = mean(values);
    double acc = 0.0;
    for (double v : values) acc += (v - m) * (v - m);
    return std::sqrt(acc / static_cast<double>(values.size() - 1));
}

/// Binomial standard error sqrt(p(1-p)/n).
inline double binomial_se(double p, double n) {
    return n > 0 ? std::sqrt(p * (1.0 - p) / n) : 0.0;
}

}  // namespace chanaudit
