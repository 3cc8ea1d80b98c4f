#include "svg.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <sstream>

namespace chanaudit::cli {

namespace {

constexpr double kWidth = 640.0;
constexpr double kHeight = 480.0;
constexpr double kMargin = 56.0;

std::string num(double v) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.2f", v);
    return buf;
}

}  // namespace

std::string phase_scatter_svg(const std::vector<ScatterPoint>& points,
                              const std::vector<Ray>& rays) {
    double max_x = 0.05, max_y = 0.05;
    for (const auto& p : points) {
        max_x = std::max(max_x, p.x);
        max_y = std::max(max_y, p.y);
    }
    max_x *= 1.15;
    max_y *= 1.15;
    const double plot_w = kWidth - 2 * kMargin;
    const double plot_h = kHeight - 2 * kMargin;
    auto sx = [&](double x) { return kMargin + x / max_x * plot_w; };
    auto sy = [&](double y) { return kHeight - kMargin - y / max_y * plot_h; };

    std::ostringstream svg;
    svg << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << kWidth
        << "\" height=\"" << kHeight << "\" viewBox=\"0 0 " << kWidth << " "
        << kHeight << "\">\n";
    svg << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
    // axes
    svg << "<line x1=\"" << num(sx(0)) << "\" y1=\"" << num(sy(0)) << "\" x2=\""
        << num(sx(max_x)) << "\" y2=\"" << num(sy(0))
        << "\" stroke=\"black\" stroke-width=\"1\"/>\n";
    svg << "<line x1=\"" << num(sx(0)) << "\" y1=\"" << num(sy(0)) << "\" x2=\""
        << num(sx(0)) << "\" y2=\"" << num(sy(max_y))
        << "\" stroke=\"black\" stroke-width=\"1\"/>\n";
    svg << "<text x=\"" << num(kWidth / 2) << "\" y=\"" << num(kHeight - 12)
        << "\" font-size=\"14\" text-anchor=\"middle\">corruption rate</text>\n";
    svg << "<text x=\"16\" y=\"" << num(kHeight / 2)
        << "\" font-size=\"14\" text-anchor=\"middle\" transform=\"rotate(-90 16 "
        << num(kHeight / 2) << ")\">correction rate</text>\n";

    for (const auto& ray : rays) {
        // Clip the ray y = slope * x to the plot box.
        double end_x = max_x;
        double end_y = ray.slope * max_x;
        if (end_y > max_y && ray.slope > 0) {
            end_y = max_y;
            end_x = max_y / ray.slope;
        }
        svg << "<line x1=\"" << num(sx(0)) << "\" y1=\"" << num(sy(0)) << "\" x2=\""
            << num(sx(end_x)) << "\" y2=\"" << num(sy(end_y))
            << "\" stroke=\"#888888\" stroke-dasharray=\"5,4\"/>\n";
        svg << "<text x=\"" << num(sx(end_x) - 4) << "\" y=\"" << num(sy(end_y) - 6)
            << "\" font-size=\"11\" fill=\"#555555\" text-anchor=\"end\">" << ray.label
            << "</text>\n";
    }
    for (const auto& p : points) {
        svg << "<circle cx=\"" << num(sx(p.x)) << "\" cy=\"" << num(sy(p.y))
            << "\" r=\"4\" fill=\"#1f77b4\"/>\n";
        svg << "<text x=\"" << num(sx(p.x) + 6) << "\" y=\"" << num(sy(p.y) - 6)
            << "\" font-size=\"11\">" << p.label << "</text>\n";
    }
    svg << "</svg>\n";
    return svg.str();
}

std::string index_distribution_svg(const std::vector<double>& baseline,
                                   const std::vector<double>& shuffled,
                                   double uniform_ref) {
    const std::size_t k = std::max(baseline.size(), shuffled.size());
    const double plot_w = kWidth - 2 * kMargin;
    const double plot_h = kHeight - 2 * kMargin;
    double max_y = uniform_ref;
    for (double v : baseline) max_y = std::max(max_y, v);
    for (double v : shuffled) max_y = std::max(max_y, v);
    max_y *= 1.15;
    auto sy = [&](double y) { return kHeight - kMargin - y / max_y * plot_h; };

    std::ostringstream svg;
    svg << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << kWidth
        << "\" height=\"" << kHeight << "\" viewBox=\"0 0 " << kWidth << " "
        << kHeight << "\">\n";
    svg << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
    const double group_w = plot_w / static_cast<double>(k);
    const double bar_w = group_w * 0.35;
    for (std::size_t i = 0; i < k; ++i) {
        const double x0 = kMargin + group_w * static_cast<double>(i);
        if (i < baseline.size()) {
            svg << "<rect x=\"" << num(x0 + group_w * 0.1) << "\" y=\""
                << num(sy(baseline[i])) << "\" width=\"" << num(bar_w)
                << "\" height=\"" << num(sy(0) - sy(baseline[i]))
                << "\" fill=\"#1f77b4\"/>\n";
        }
        if (i < shuffled.size()) {
            svg << "<rect x=\"" << num(x0 + group_w * 0.5) << "\" y=\""
                << num(sy(shuffled[i])) << "\" width=\"" << num(bar_w)
                << "\" height=\"" << num(sy(0) - sy(shuffled[i]))
                << "\" fill=\"#ff7f0e\"/>\n";
        }
        svg << "<text x=\"" << num(x0 + group_w / 2) << "\" y=\""
            << num(kHeight - kMargin + 18)
            << "\" font-size=\"12\" text-anchor=\"middle\">" << i << "</text>\n";
    }
    svg << "<line x1=\"" << num(kMargin) << "\" y1=\"" << num(sy(uniform_ref))
        << "\" x2=\"" << num(kWidth - kMargin) << "\" y2=\"" << num(sy(uniform_ref))
        << "\" stroke=\"#d62728\" stroke-dasharray=\"6,4\"/>\n";
    svg << "<text x=\"" << num(kWidth - kMargin) << "\" y=\""
        << num(sy(uniform_ref) - 6)
        << "\" font-size=\"11\" fill=\"#d62728\" text-anchor=\"end\">uniform 1/K"
        << "</text>\n";
    svg << "<text x=\"" << num(kWidth / 2) << "\" y=\"" << num(kHeight - 12)
        << "\" font-size=\"14\" text-anchor=\"middle\">original candidate index"
        << "</text>\n";
    svg << "</svg>\n";
    return svg.str();
}

}  // namespace chanaudit::cli
