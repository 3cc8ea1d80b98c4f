#pragma once

#include <array>
#include <map>
#include <span>
#include <string>
#include <utility>

#include "chanaudit/channel.hpp"
#include "chanaudit/report.hpp"

namespace chanaudit {

/// Row-stochastic 2x2 correctness kernel: row 0 = (1-c, c), row 1 =
/// (gamma, 1-gamma). Rows/columns are ordered incorrect=0, correct=1.
struct Kernel2 {
    std::array<std::array<double, 2>, 2> m{{{1.0, 0.0}, {0.0, 1.0}}};

    static Kernel2 from_rates(double c, double gamma);
    /// Throws IncompleteChannelError when a rate is absent.
    static Kernel2 from_channel(const ChannelEstimate& channel);

    double c() const { return m[0][1]; }
    double gamma() const { return m[1][0]; }

    /// Throws InvariantError unless rows sum to 1 (±1e-12) with entries in [0,1].
    void validate() const;
};

/// One-step law: p1 = p0 + (1-p0)c - p0*gamma.
double predict_post(double p0, double c, double gamma);
double predict_post(double p0, const ChannelEstimate& channel);

/// Gain: (1-p0)c - p0*gamma.
double gain(double p0, double c, double gamma);
double gain(double p0, const ChannelEstimate& channel);

/// Corruption amplification factor p0 / (1 - p0); +inf at p0 = 1 is the
/// caller's concern (breakeven_correction refuses it).
double breakeven_factor(double p0);

/// Break-even boundary: the step helps iff c > p0/(1-p0) * gamma.
/// Throws DomainError at p0 = 1.
double breakeven_correction(double p0, double gamma);

/// Surplus above break-even, identifiable from marginals alone:
/// sigma = (p1 - p0) / (1 - p0). Throws DomainError at p0 = 1.
double surplus(double p0, double p1);

/// Marginal propagation pi1 = pi0 * T (row vector times kernel).
/// Throws InvariantError for a non-stochastic kernel and DomainError when
/// pi0 is not a distribution.
std::array<double, 2> propagate(const std::array<double, 2>& pi0, const Kernel2& kernel);

/// Nonnegative slice weights; normalize() scales them to sum to 1.
struct MixtureWeights {
    std::map<std::string, double> w;

    void normalize();
    static MixtureWeights uniform(std::span<const std::string> labels);
    static MixtureWeights delta(const std::string& label);
};

/// Weighted one-step prediction over slices. Every weighted slice needs a
/// channel and a baseline; otherwise MissingSliceError.
double mixture_predict(const SlicedChannels& slices,
                       const std::map<std::string, double>& p0_by_slice,
                       const MixtureWeights& weights);

/// Phase-plane data: one row per (channel, baseline) with the break-even
/// classification, plus one ray row per baseline. Ray slope is p/(1-p);
/// baselines at 1 serialize the slope as inf.
AuditReport phase_plane_table(
    std::span<const std::pair<std::string, ChannelEstimate>> channels,
    std::span<const double> baselines);

}  // namespace chanaudit
