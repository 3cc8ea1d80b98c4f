#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>

#include "chanaudit/record.hpp"
#include "chanaudit/report.hpp"

namespace chanaudit {

enum class Smoothing { Jeffreys, Mle };

std::string_view smoothing_name(Smoothing s);
std::optional<Smoothing> smoothing_from_name(std::string_view name);

struct Interval {
    double lo = 0.0;
    double hi = 1.0;
};

/// Estimated correction/corruption rates with their conditional supports.
/// Under Jeffreys smoothing both rates are always defined (= 1/2 at zero
/// support, flagged); under MLE a rate is absent when its support is empty.
struct ChannelEstimate {
    std::optional<double> c_hat;
    std::optional<double> gamma_hat;
    std::int64_t n0 = 0;
    std::int64_t n1 = 0;
    Smoothing smoothing = Smoothing::Jeffreys;
    std::optional<Interval> c_interval;
    std::optional<Interval> gamma_interval;
    double interval_level = 0.95;
    bool c_zero_support = false;      // n0 == 0
    bool gamma_zero_support = false;  // n1 == 0
    bool low_support = false;         // min(n0, n1) below the floor

    bool complete() const { return c_hat.has_value() && gamma_hat.has_value(); }
};

struct EstimateOptions {
    Smoothing smoothing = Smoothing::Jeffreys;
    bool intervals = true;          // Jeffreys-posterior intervals (skipped under MLE)
    double interval_level = 0.95;
    std::int64_t low_support_floor = 10;
};

/// Jeffreys: c = (n01 + 1/2) / (n0 + 1), gamma = (n10 + 1/2) / (n1 + 1).
/// MLE: c = n01 / n0 (absent when n0 = 0), symmetrically for gamma.
/// Degenerate supports are flagged, never errors.
ChannelEstimate estimate_channel(const TransitionCounts& counts,
                                 const EstimateOptions& opts);
ChannelEstimate estimate_channel(const TransitionCounts& counts,
                                 Smoothing smoothing = Smoothing::Jeffreys);

/// Equal-tailed interval of the Jeffreys posterior Beta(successes + 1/2,
/// failures + 1/2). Throws DomainError unless 0 < level < 1 and
/// 0 <= successes <= total.
Interval credible_interval(std::int64_t successes, std::int64_t total, double level);

/// Maps a record to its slice label; nullopt means pooled-only.
using SliceFn = std::function<std::optional<std::string>(const PairedRecord&)>;

/// Default slice map: the record's own slice field.
SliceFn slice_field();

/// Per-slice channels plus the pooled channel over all records (labeled or
/// not). Records without a label are counted in `unlabeled` and take part
/// only in the pooled estimate.
struct SlicedChannels {
    ChannelEstimate pooled;
    TransitionCounts pooled_counts;
    std::map<std::string, ChannelEstimate> by_slice;
    std::map<std::string, TransitionCounts> counts_by_slice;
    std::size_t unlabeled = 0;

    /// CSV rows: slice, n0, n1, c_hat, c_lo, c_hi, gamma_hat, gamma_lo,
    /// gamma_hi, flags.
    AuditReport to_report() const;
};

SlicedChannels estimate_sliced(std::span<const PairedRecord> records,
                               const SliceFn& slice_of,
                               const EstimateOptions& opts = {},
                               BitField from_field = BitField::E0,
                               BitField to_field = BitField::E1);

}  // namespace chanaudit
