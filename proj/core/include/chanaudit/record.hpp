#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "chanaudit/errors.hpp"

namespace chanaudit {

enum class Regime { Indep, Alt, Ver, VerFix, JudgeK, Stack };

std::string_view regime_name(Regime r);
std::optional<Regime> regime_from_name(std::string_view name);

/// One evaluation item's paired outcome under the uniform logging contract.
/// e0/e1 are the pre/post correctness bits; e2 and the judge-K fields are
/// optional so a single record type serves every regime.
struct PairedRecord {
    std::string task_id;
    std::int64_t root_seed = 0;
    Regime regime = Regime::Indep;
    std::optional<std::string> slice;
    int e0 = 0;
    int e1 = 0;
    std::optional<int> e2;

    // judge-K fields
    std::optional<int> k;
    std::optional<int> anchor_index;
    std::optional<int> chosen_presented_index;
    std::optional<int> chosen_original_index;
    std::optional<std::vector<int>> presented_order;    // presented slot -> original index
    std::optional<std::vector<int>> candidate_correct;  // per original index
    std::optional<std::vector<std::string>> candidate_answers;

    std::map<std::string, double> features;  // proxy features (chars, sentences, ...)
    nlohmann::json extra;  // unknown fields, preserved on round-trip, ignored by analysis

    /// Slice label used by sliced analyses; records without one participate
    /// only in pooled estimates.
    static constexpr std::string_view kPooledOnly = "pooled-only";
};

/// Parses and validates one JSON-lines record. Derives chosen_original_index
/// from presented_order when absent. Throws ParseError on malformed text and
/// SchemaError (naming the field) on invariant violations.
PairedRecord parse_record(std::string_view line);

/// Inverse of parse_record up to field order; unknown fields round-trip.
std::string serialize_record(const PairedRecord& rec);

std::vector<PairedRecord> read_jsonl(const std::string& path);
void write_jsonl(const std::string& path, std::span<const PairedRecord> records);

struct SliceSupport {
    std::int64_t root_seed = 0;
    std::string regime;
    std::string slice;
    std::int64_t count = 0;
};

struct DatasetSummary {
    std::size_t count = 0;
    std::vector<SliceSupport> supports;  // per (seed, regime, slice), sorted
    std::size_t missing_slice = 0;       // pooled-only records
    std::size_t missing_e2 = 0;
    std::size_t missing_judge_fields = 0;  // records without candidate_correct
    nlohmann::json to_json() const;
};

/// Validates key uniqueness and reports per-(seed, regime, slice) supports.
/// Throws DuplicateError if two records share (task_id, root_seed, regime).
DatasetSummary validate_dataset(std::span<const PairedRecord> records);

/// Which correctness bit a transition count conditions on / transitions to.
enum class BitField { E0, E1, E2 };

/// The 2x2 paired counts for a filtered record set: n_ij = #{from=i, to=j}.
struct TransitionCounts {
    std::int64_t n00 = 0;
    std::int64_t n01 = 0;
    std::int64_t n10 = 0;
    std::int64_t n11 = 0;

    std::int64_t n0() const { return n00 + n01; }
    std::int64_t n1() const { return n10 + n11; }
    std::int64_t total() const { return n00 + n01 + n10 + n11; }

    TransitionCounts& operator+=(const TransitionCounts& o) {
        n00 += o.n00;
        n01 += o.n01;
        n10 += o.n10;
        n11 += o.n11;
        return *this;
    }
};

using RecordFilter = std::function<bool(const PairedRecord&)>;

/// Counts transitions from one bit to a strictly later one. Throws
/// MissingFieldError if a filtered record lacks the target bit and
/// DomainError if from_field does not precede to_field.
TransitionCounts count_transitions(std::span<const PairedRecord> records,
                                   BitField from_field, BitField to_field,
                                   const RecordFilter& filter = {});

/// Groups records by root_seed (ordered, deterministic).
std::map<std::int64_t, std::vector<PairedRecord>> group_by_seed(
    std::span<const PairedRecord> records);

}  // namespace chanaudit
