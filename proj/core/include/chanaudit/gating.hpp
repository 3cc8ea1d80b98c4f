#pragma once

#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "chanaudit/channel.hpp"
#include "chanaudit/record.hpp"
#include "chanaudit/report.hpp"

namespace chanaudit {

/// One deployment decision: enable the step iff predicted gain exceeds the
/// threshold (ties resolve to OFF).
struct GateDecision {
    std::string slice;
    double predicted_gain = 0.0;
    bool on = false;
    double threshold = 0.0;
    std::string fold;       // channel provenance
    std::int64_t n0 = 0;    // conditional supports behind the channel
    std::int64_t n1 = 0;
};

/// Throws IncompleteChannelError when the channel lacks a rate.
GateDecision gate_decision(double p0, const ChannelEstimate& channel, double threshold);

struct GatePolicyRow {
    std::string fold;
    std::string slice;
    bool on = false;
    double predicted_gain = 0.0;
    std::int64_t n = 0;       // holdout records in this cell
    double always_off = 0.0;  // holdout p0
    double always_on = 0.0;   // holdout p1
    double gated = 0.0;       // p1 where ON, p0 where OFF
    double gain_vs_on = 0.0;  // gated - always_on
    bool consistent = false;  // sign(p1 - p0) matches the decision
};

struct GatePolicyResult {
    std::vector<GatePolicyRow> rows;         // per (fold, slice)
    std::vector<GatePolicyRow> slice_means;  // fold-averaged per slice
    GatePolicyRow mean;                      // equal-weight mean over slices
    std::vector<std::string> dropped;

    AuditReport to_report() const;
    /// Machine-readable gate file: slice -> {decision, gain, supports}.
    nlohmann::json gate_file() const;
};

/// Leave-one-seed-out gating: per fold, channels and baseline accuracies fit
/// on the calibration seeds drive the decision; holdout accuracies evaluate
/// it. Requires at least two seeds.
GatePolicyResult evaluate_policy(
    const std::map<std::int64_t, std::vector<PairedRecord>>& datasets,
    const SliceFn& slice_of, double threshold, const EstimateOptions& opts = {});

/// Quantile or fixed-edge binning of a numeric proxy feature.
struct BinAssignment {
    struct Bin {
        std::string label;  // "(lo, hi]" carrying edge values
        double lo = 0.0;
        double hi = 0.0;
        std::int64_t count = 0;
    };
    std::vector<std::string> label_per_record;
    std::vector<Bin> bins;
};

/// Quantile bins of near-equal counts. Throws MissingFieldError if the
/// feature is absent on any record and DegenerateBinsError when the feature
/// cannot produce distinct bins.
BinAssignment proxy_bins(std::span<const PairedRecord> records,
                         const std::string& feature, int n_bins);

/// User-supplied ascending edges; bin j is (edges[j-1], edges[j]].
BinAssignment proxy_bins(std::span<const PairedRecord> records,
                         const std::string& feature, std::span<const double> edges);

/// Sets each record's slice to its bin label.
void apply_bins(std::vector<PairedRecord>& records, const BinAssignment& assignment);

}  // namespace chanaudit
