#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <span>

#include "chanaudit/onestep.hpp"
#include "chanaudit/record.hpp"
#include "chanaudit/transfer.hpp"

namespace chanaudit {

/// Matrix product of two row-stochastic kernels; validates both inputs.
Kernel2 compose_kernels(const Kernel2& t01, const Kernel2& t12);

/// Markov state-sufficiency diagnostic: the entrywise discrepancy between the
/// directly estimated two-step kernel and the product of adjacent one-step
/// kernels, with an optional resampled null band.
struct CompositionGap {
    double mean_gap = 0.0;  // half the summed entrywise |deviation|
    double max_gap = 0.0;   // largest entrywise |deviation|
    std::array<std::int64_t, 2> support_e0{{0, 0}};  // direct-kernel row supports
    std::array<std::int64_t, 2> support_e1{{0, 0}};  // step-2 row supports
    std::optional<Interval> mean_band;  // 2.5/97.5 percentiles under the Markov null
    std::optional<Interval> max_band;
    bool mle_fallback = false;  // empty conditioning row forced Jeffreys
    Kernel2 t01, t12, t02_direct, t02_composed;

    AuditReport to_report() const;
};

/// Fits T01, T12 and the direct T02 on the same records and reports the gap.
/// The noise band resamples e2 from the fitted T12 given e1 (Markov null),
/// refits, and takes 2.5/97.5 percentiles over `resamples` draws; pass 0 to
/// skip. Deterministic for a fixed rng_seed. Records lacking e2 raise
/// MissingFieldError.
CompositionGap composition_gap(std::span<const PairedRecord> records,
                               Smoothing smoothing, int resamples,
                               std::int64_t rng_seed);

/// Stacked transfer: predict the test split's p2 from its p0 via
/// pi0 * T01 * T12 with kernels fit on the train split, pooled and per
/// slice. Both splits need (e0, e1, e2).
TransferResult stacked_transfer(std::span<const PairedRecord> train,
                                std::span<const PairedRecord> test,
                                Conditioning conditioning,
                                const EstimateOptions& opts = {},
                                const std::string& fold_label = "stack");

}  // namespace chanaudit
