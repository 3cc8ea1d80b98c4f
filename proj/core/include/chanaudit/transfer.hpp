#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "chanaudit/channel.hpp"
#include "chanaudit/onestep.hpp"
#include "chanaudit/record.hpp"
#include "chanaudit/report.hpp"

namespace chanaudit {

/// Which channel generates predictions: a single pooled fit, slice-conditioned
/// fits, or both side by side.
enum class Conditioning { Pooled, Sliced, Both };

std::string_view conditioning_name(Conditioning c);
std::optional<Conditioning> conditioning_from_name(std::string_view name);

/// One (fold, slice) prediction. Rows with slice "ALL" compare the fold-level
/// marginal against the pooled-channel prediction.
struct TransferRow {
    std::string fold;
    std::string slice;
    std::int64_t n_target = 0;
    double p0_target = 0.0;
    double post_emp = 0.0;
    std::optional<double> pred_pooled;
    std::optional<double> pred_sliced;
    std::optional<double> resid_pooled;  // post_emp - pred
    std::optional<double> resid_sliced;
};

/// Residual aggregates over the slice rows of a fold. mae/bias/ae95/max are
/// unweighted over slices; wmae/wbias weight by target slice counts.
struct TransferAggregate {
    double mae = 0.0;
    double bias = 0.0;
    double ae95 = 0.0;  // empirical 95th percentile of |residual|
    double max_abs = 0.0;
    double wmae = 0.0;
    double wbias = 0.0;
    std::int64_t n_slices = 0;
    std::int64_t n_records = 0;
};

struct FoldSummary {
    std::string fold;
    std::optional<TransferAggregate> pooled;
    std::optional<TransferAggregate> sliced;
};

/// Aggregates the slice rows of one fold ("ALL" rows are skipped); absent
/// when no row carries the requested residual.
std::optional<TransferAggregate> aggregate_transfer_rows(
    std::span<const TransferRow> rows, bool sliced_residual);

struct TransferResult {
    Conditioning conditioning = Conditioning::Both;
    std::string post_bit = "e1";  // "e2" for stacked transfer
    std::vector<TransferRow> rows;
    std::vector<FoldSummary> folds;
    std::optional<TransferAggregate> overall_pooled;  // fold-averaged
    std::optional<TransferAggregate> overall_sliced;
    std::vector<std::string> dropped;  // slices without support or channel

    AuditReport to_report() const;
};

/// Leave-one-seed-out transfer: fit channels on the remaining seeds, predict
/// each held-out slice's post accuracy from its own baseline. Requires at
/// least two seeds (DomainError); an empty target fold raises FoldError.
TransferResult seed_holdout(const std::map<std::int64_t, std::vector<PairedRecord>>& datasets,
                            Conditioning conditioning,
                            const EstimateOptions& opts = {});

/// One evaluation mixture: target weights over slices, optionally paired with
/// a counterfactual calibration mixture used to refit the pooled channel.
struct MixtureScenario {
    std::string name;
    MixtureWeights target;
    std::optional<MixtureWeights> calibration;
};

struct MixtureStressRow {
    std::string scenario;
    std::optional<double> c_pool;
    std::optional<double> gamma_pool;
    double p0_test = 0.0;
    double p1_true = 0.0;  // weight-aggregated empirical post accuracy
    std::optional<double> pred_pooled;
    std::optional<double> resid_pooled;
    std::optional<double> pred_sliced;
    std::optional<double> resid_sliced;
};

struct MixtureStressResult {
    std::vector<MixtureStressRow> rows;
    std::vector<std::string> notes;

    AuditReport to_report() const;
};

/// Mixture-shift stress test: channels fit on the calibration stream are
/// evaluated under counterfactual slice weights on the target stream.
/// A scenario weighting an unsupported slice raises MissingSliceError.
MixtureStressResult mixture_stress(std::span<const PairedRecord> calibration,
                                   std::span<const PairedRecord> target,
                                   std::span<const MixtureScenario> scenarios,
                                   Conditioning conditioning,
                                   const EstimateOptions& opts = {});

struct SplitTransferResult {
    double train_fraction = 0.0;
    std::int64_t n_train = 0;
    std::int64_t n_test = 0;
    int repeats = 0;
    std::vector<double> residuals;  // one per repeat
    double mae = 0.0;
    double bias = 0.0;
    double sd = 0.0;
    double p10 = 0.0;
    double p50 = 0.0;
    double p90 = 0.0;
    int skipped = 0;  // repeats with an incomplete MLE channel

    AuditReport to_report() const;
};

/// Repeated random within-pool splits: fit pooled on the train side, predict
/// the test side. Deterministic for a fixed rng_seed. A fraction producing
/// an empty side raises SplitError.
SplitTransferResult split_transfer(std::span<const PairedRecord> pool,
                                   double train_fraction, int repeats,
                                   std::int64_t rng_seed,
                                   const EstimateOptions& opts = {});

struct ResidualRow {
    std::string slice;
    std::int64_t n = 0;
    double p0 = 0.0;
    double p1 = 0.0;
    double pred = 0.0;
    double resid = 0.0;
    std::optional<double> se;  // absent when p1 is 0 or 1
    std::optional<double> z;
};

struct ResidualTable {
    std::vector<ResidualRow> rows;
    AuditReport to_report() const;
};

/// Per-slice residuals against a pooled-channel prediction with binomial
/// standardization: z = (p1(s) - pred(s)) / sqrt(p1(1-p1)/N).
ResidualTable standardized_residuals(std::span<const PairedRecord> records,
                                     const ChannelEstimate& pooled_channel,
                                     const SliceFn& slice_of = slice_field());

struct ConvergenceBand {
    double median = 0.0;
    double lo = 0.0;  // 10th percentile
    double hi = 0.0;  // 90th percentile
};

struct ConvergenceRow {
    std::size_t n = 0;
    ConvergenceBand p0;
    ConvergenceBand p1;
    ConvergenceBand c_hat;
    ConvergenceBand gamma_hat;
    std::optional<ConvergenceBand> p_oracle;  // only when judge fields present
};

struct ConvergenceResult {
    std::vector<ConvergenceRow> rows;
    int n_permutations = 0;
    AuditReport to_report() const;
};

/// Order-robustness audit: medians and 10th-90th percentile bands of the
/// rates and Jeffreys channel across random permutations, per prefix size.
/// Prefix sizes beyond the pool raise GridError.
ConvergenceResult convergence_audit(std::span<const PairedRecord> records,
                                    int n_permutations, std::int64_t rng_seed,
                                    std::span<const std::size_t> grid);

}  // namespace chanaudit
