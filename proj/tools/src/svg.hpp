#pragma once

#include <string>
#include <vector>

namespace chanaudit::cli {

struct ScatterPoint {
    double x = 0.0;
    double y = 0.0;
    std::string label;
};

struct Ray {
    double slope = 0.0;  // y = slope * x through the origin
    std::string label;
};

/// Phase-plane scatter: (gamma, c) points with break-even rays. Generated
/// from the same rows the CSV reports, so plots cannot diverge from tested
/// numbers.
std::string phase_scatter_svg(const std::vector<ScatterPoint>& points,
                              const std::vector<Ray>& rays);

/// Bar chart of the original-chosen-index distribution with a uniform 1/K
/// reference line.
std::string index_distribution_svg(const std::vector<double>& baseline,
                                   const std::vector<double>& shuffled,
                                   double uniform_ref);

}  // namespace chanaudit::cli
