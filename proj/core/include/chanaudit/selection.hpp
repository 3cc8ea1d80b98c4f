#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "chanaudit/channel.hpp"
#include "chanaudit/record.hpp"
#include "chanaudit/report.hpp"

namespace chanaudit {

/// Aggregate view of a judge-K pool: anchor accuracy, judge-selected
/// accuracy, the empirical best-of-K oracle rate, and the fitted channel.
struct SelectionSummary {
    std::int64_t n = 0;
    double p0 = 0.0;
    double p1 = 0.0;
    double p_oracle = 0.0;
    double gap = 0.0;  // p_oracle - p1
    ChannelEstimate channel;
};

/// Requires candidate_correct and a valid anchor on every record
/// (SchemaError otherwise).
SelectionSummary selection_summary(std::span<const PairedRecord> records,
                                   const EstimateOptions& opts = {});

/// The deterministic per-item permutation used by the posshuffle audit:
/// presented slot -> original index, a pure function of (audit_seed, task_id).
std::vector<int> posshuffle_permutation(std::int64_t audit_seed,
                                        std::string_view task_id, int k);

/// Sets presented_order to the audit permutation and recomputes
/// chosen_original_index from the existing chosen_presented_index (the
/// presented-slot choice is held fixed; the mapping back to original
/// candidates changes). Requires k.
PairedRecord apply_posshuffle(const PairedRecord& record, std::int64_t audit_seed);
std::vector<PairedRecord> apply_posshuffle(std::span<const PairedRecord> records,
                                           std::int64_t audit_seed);

struct PositionStats {
    std::int64_t n = 0;
    double uniform_ref = 0.0;  // mean of 1/k
    double p_choose_presented0 = 0.0;
    double p_choose_anchor = 0.0;
    std::optional<double> p_choose_anchor_given_e0_1;  // absent on zero support
    std::optional<double> p_choose_anchor_given_e0_0;
    std::vector<double> original_index_dist;  // P(chosen original index = i)

    AuditReport to_report() const;
};

/// Position-bias statistics. Requires presented_order and chosen indices
/// (MissingFieldError otherwise).
PositionStats position_stats(std::span<const PairedRecord> records);

/// Side-by-side comparison of two presentation settings with a delta row.
AuditReport position_compare(const PositionStats& baseline,
                             const PositionStats& shuffled);

/// Candidate-set structure strata; a partition of any judge-K pool.
enum class Stratum { NoDiversity, DiversityNoHeadroom, Headroom };

std::string_view stratum_name(Stratum s);

/// Classifies one record by its candidate set: all candidates sharing one
/// normalized answer; diversity with no correct alternative to the anchor;
/// or oracle headroom (anchor wrong, some candidate correct). Requires
/// candidate_answers; answers that fail to normalize under both scalar and
/// pair contracts fall back to exact-string equality classes.
Stratum classify_candidate_set(const PairedRecord& record);

struct StratumSummary {
    Stratum stratum = Stratum::NoDiversity;
    SelectionSummary summary;
};

struct StrataResult {
    std::vector<StratumSummary> strata;  // ordered: no diversity, diversity, headroom
    std::size_t excluded = 0;            // records lacking candidate_answers

    AuditReport to_report() const;
};

/// Per-stratum summaries. gamma is reported absent in strata with no
/// E0 = 1 support regardless of smoothing.
StrataResult stratify_by_structure(std::span<const PairedRecord> records,
                                   const EstimateOptions& opts = {});

}  // namespace chanaudit
