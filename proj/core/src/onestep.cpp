#include "chanaudit/onestep.hpp"

#include <cmath>
#include <limits>

#include "chanaudit/errors.hpp"

namespace chanaudit {

namespace {

constexpr double kRowTol = 1e-12;

void check_probability(double p, const char* what) {
    if (!(p >= 0.0 && p <= 1.0)) {
        throw DomainError(std::string(what) + " must lie in [0,1]");
    }
}

void require_complete(const ChannelEstimate& channel) {
    if (!channel.c_hat) throw IncompleteChannelError("channel has no correction rate");
    if (!channel.gamma_hat) throw IncompleteChannelError("channel has no corruption rate");
}

}  // namespace

Kernel2 Kernel2::from_rates(double c, double gamma) {
    check_probability(c, "correction rate");
    check_probability(gamma, "corruption rate");
    Kernel2 k;
    k.m = {{{1.0 - c, c}, {gamma, 1.0 - gamma}}};
    return k;
}

Kernel2 Kernel2::from_channel(const ChannelEstimate& channel) {
    require_complete(channel);
    return from_rates(*channel.c_hat, *channel.gamma_hat);
}

void Kernel2::validate() const {
    for (int row = 0; row < 2; ++row) {
        for (int col = 0; col < 2; ++col) {
            const double v = m[static_cast<std::size_t>(row)][static_cast<std::size_t>(col)];
            if (!(v >= 0.0 && v <= 1.0)) {
                throw InvariantError("kernel entry outside [0,1]");
            }
        }
        const double sum = m[static_cast<std::size_t>(row)][0] +
                           m[static_cast<std::size_t>(row)][1];
        if (std::fabs(sum - 1.0) > kRowTol) {
            throw InvariantError("kernel row does not sum to 1");
        }
    }
}

double predict_post(double p0, double c, double gamma) {
    check_probability(p0, "p0");
    check_probability(c, "correction rate");
    check_probability(gamma, "corruption rate");
    return p0 + (1.0 - p0) * c - p0 * gamma;
}

double predict_post(double p0, const ChannelEstimate& channel) {
    require_complete(channel);
    return predict_post(p0, *channel.c_hat, *channel.gamma_hat);
}

double gain(double p0, double c, double gamma) {
    check_probability(p0, "p0");
    check_probability(c, "correction rate");
    check_probability(gamma, "corruption rate");
    return (1.0 - p0) * c - p0 * gamma;
}

double gain(double p0, const ChannelEstimate& channel) {
    require_complete(channel);
    return gain(p0, *channel.c_hat, *channel.gamma_hat);
}

double breakeven_factor(double p0) {
    check_probability(p0, "p0");
    if (p0 == 1.0) return std::numeric_limits<double>::infinity();
    return p0 / (1.0 - p0);
}

double breakeven_correction(double p0, double gamma) {
    check_probability(p0, "p0");
    check_probability(gamma, "corruption rate");
    if (p0 >= 1.0) throw DomainError("break-even boundary is infinite at p0 = 1");
    return p0 / (1.0 - p0) * gamma;
}

double surplus(double p0, double p1) {
    check_probability(p0, "p0");
    check_probability(p1, "p1");
    if (p0 >= 1.0) throw DomainError("surplus is undefined at p0 = 1");
    return (p1 - p0) / (1.0 - p0);
}

std::array<double, 2> propagate(const std::array<double, 2>& pi0, const Kernel2& kernel) {
    kernel.validate();
    if (!(pi0[0] >= 0.0 && pi0[1] >= 0.0) || std::fabs(pi0[0] + pi0[1] - 1.0) > kRowTol) {
        throw DomainError("pi0 is not a probability distribution");
    }
    return {pi0[0] * kernel.m[0][0] + pi0[1] * kernel.m[1][0],
            pi0[0] * kernel.m[0][1] + pi0[1] * kernel.m[1][1]};
}

void MixtureWeights::normalize() {
    double total = 0.0;
    for (const auto& [label, weight] : w) {
        if (weight < 0.0) throw DomainError("negative mixture weight for " + label);
        total += weight;
    }
    if (total <= 0.0) throw DomainError("mixture weights sum to zero");
    for (auto& [label, weight] : w) weight /= total;
}

MixtureWeights MixtureWeights::uniform(std::span<const std::string> labels) {
    MixtureWeights mw;
    for (const auto& label : labels) mw.w[label] = 1.0;
    mw.normalize();
    return mw;
}

MixtureWeights MixtureWeights::delta(const std::string& label) {
    MixtureWeights mw;
    mw.w[label] = 1.0;
    return mw;
}

double mixture_predict(const SlicedChannels& slices,
                       const std::map<std::string, double>& p0_by_slice,
                       const MixtureWeights& weights) {
    MixtureWeights norm = weights;
    norm.normalize();
    double acc = 0.0;
    for (const auto& [label, weight] : norm.w) {
        if (weight == 0.0) continue;
        const auto chan_it = slices.by_slice.find(label);
        if (chan_it == slices.by_slice.end()) {
            throw MissingSliceError("no channel for weighted slice " + label);
        }
        const auto p0_it = p0_by_slice.find(label);
        if (p0_it == p0_by_slice.end()) {
            throw MissingSliceError("no baseline for weighted slice " + label);
        }
        acc += weight * predict_post(p0_it->second, chan_it->second);
    }
    return acc;
}

AuditReport phase_plane_table(
    std::span<const std::pair<std::string, ChannelEstimate>> channels,
    std::span<const double> baselines) {
    AuditReport report;
    report.title = "phase plane";
    report.columns = {"kind",  "label",    "gamma_hat",     "c_hat",
                      "baseline", "boundary_slope", "classification"};
    for (double p : baselines) {
        check_probability(p, "baseline");
        report.add_row({std::string("ray"), std::monostate{}, std::monostate{},
                        std::monostate{}, p, breakeven_factor(p), std::monostate{}});
    }
    for (const auto& [label, channel] : channels) {
        if (!channel.c_hat || !channel.gamma_hat) {
            report.add_row({std::string("point"), label, std::monostate{},
                            std::monostate{}, std::monostate{}, std::monostate{},
                            std::string("incomplete")});
            continue;
        }
        const double c = *channel.c_hat;
        const double g = *channel.gamma_hat;
        for (double p : baselines) {
            std::string cls;
            if (p == 1.0) {
                // gain(1, c, gamma) = -gamma: never above break-even.
                cls = g == 0.0 ? "break-even" : "below";
            } else {
                const double boundary = breakeven_correction(p, g);
                if (std::fabs(c - boundary) <= kRowTol) {
                    cls = "break-even";
                } else {
                    cls = c > boundary ? "above" : "below";
                }
            }
            report.add_row({std::string("point"), label, g, c, p,
                            breakeven_factor(p), cls});
        }
    }
    return report;
}

}  // namespace chanaudit
