#include "chanaudit/selection.hpp"

#include <algorithm>
#include <numeric>
#include <set>

#include "chanaudit/answer.hpp"
#include "chanaudit/errors.hpp"
#include "chanaudit/rng.hpp"

namespace chanaudit {

namespace {

void require_judge_fields(const PairedRecord& rec) {
    if (!rec.k || !rec.anchor_index || !rec.candidate_correct) {
        throw SchemaError("candidate_correct",
                          "judge-K analysis requires k, anchor_index and "
                          "candidate_correct on record " +
                              rec.task_id);
    }
}

int oracle_bit(const PairedRecord& rec) {
    for (int bit : *rec.candidate_correct) {
        if (bit) return 1;
    }
    return 0;
}

}  // namespace

SelectionSummary selection_summary(std::span<const PairedRecord> records,
                                   const EstimateOptions& opts) {
    SelectionSummary out;
    TransitionCounts counts;
    std::int64_t oracle_hits = 0;
    std::int64_t pre_hits = 0;
    std::int64_t post_hits = 0;
    for (const auto& rec : records) {
        require_judge_fields(rec);
        pre_hits += rec.e0;
        post_hits += rec.e1;
        oracle_hits += oracle_bit(rec);
        if (rec.e0 == 0) {
            (rec.e1 == 0 ? counts.n00 : counts.n01) += 1;
        } else {
            (rec.e1 == 0 ? counts.n10 : counts.n11) += 1;
        }
    }
    out.n = static_cast<std::int64_t>(records.size());
    if (out.n > 0) {
        const double n = static_cast<double>(out.n);
        out.p0 = static_cast<double>(pre_hits) / n;
        out.p1 = static_cast<double>(post_hits) / n;
        out.p_oracle = static_cast<double>(oracle_hits) / n;
    }
    out.gap = out.p_oracle - out.p1;
    out.channel = estimate_channel(counts, opts);
    return out;
}

std::vector<int> posshuffle_permutation(std::int64_t audit_seed,
                                        std::string_view task_id, int k) {
    if (k < 1) throw DomainError("posshuffle requires k >= 1");
    std::vector<int> perm(static_cast<std::size_t>(k));
    std::iota(perm.begin(), perm.end(), 0);
    SplitRng rng = SplitRng::keyed(
        KeyHash().add(audit_seed).add(task_id).add(std::uint64_t{0x706f73ull}));
    rng.shuffle(perm);
    return perm;
}

PairedRecord apply_posshuffle(const PairedRecord& record, std::int64_t audit_seed) {
    if (!record.k) throw SchemaError("k", "posshuffle requires k");
    PairedRecord out = record;
    out.presented_order = posshuffle_permutation(audit_seed, record.task_id, *record.k);
    if (out.chosen_presented_index) {
        out.chosen_original_index = (*out.presented_order)[static_cast<std::size_t>(
            *out.chosen_presented_index)];
    }
    return out;
}

std::vector<PairedRecord> apply_posshuffle(std::span<const PairedRecord> records,
                                           std::int64_t audit_seed) {
    std::vector<PairedRecord> out;
    out.reserve(records.size());
    for (const auto& rec : records) out.push_back(apply_posshuffle(rec, audit_seed));
    return out;
}

PositionStats position_stats(std::span<const PairedRecord> records) {
    PositionStats stats;
    std::int64_t sum_pres0 = 0;
    std::int64_t sum_anchor = 0;
    std::int64_t sum_anchor_e1 = 0, n_e1 = 0;
    std::int64_t sum_anchor_e0 = 0, n_e0 = 0;
    double sum_inv_k = 0.0;
    int max_k = 0;
    std::vector<std::int64_t> orig_counts;

    for (const auto& rec : records) {
        if (!rec.k || !rec.anchor_index || !rec.presented_order ||
            !rec.chosen_presented_index || !rec.chosen_original_index) {
            throw MissingFieldError(
                "position audit requires presented_order and chosen indices on record " +
                rec.task_id);
        }
        const int chosen_orig = *rec.chosen_original_index;
        max_k = std::max(max_k, *rec.k);
        if (static_cast<std::size_t>(max_k) > orig_counts.size()) {
            orig_counts.resize(static_cast<std::size_t>(max_k), 0);
        }
        ++orig_counts[static_cast<std::size_t>(chosen_orig)];
        sum_inv_k += 1.0 / static_cast<double>(*rec.k);
        sum_pres0 += *rec.chosen_presented_index == 0 ? 1 : 0;
        const int hit_anchor = chosen_orig == *rec.anchor_index ? 1 : 0;
        sum_anchor += hit_anchor;
        if (rec.e0 == 1) {
            ++n_e1;
            sum_anchor_e1 += hit_anchor;
        } else {
            ++n_e0;
            sum_anchor_e0 += hit_anchor;
        }
    }

    stats.n = static_cast<std::int64_t>(records.size());
    if (stats.n == 0) return stats;
    const double n = static_cast<double>(stats.n);
    stats.uniform_ref = sum_inv_k / n;
    stats.p_choose_presented0 = static_cast<double>(sum_pres0) / n;
    stats.p_choose_anchor = static_cast<double>(sum_anchor) / n;
    if (n_e1 > 0) {
        stats.p_choose_anchor_given_e0_1 =
            static_cast<double>(sum_anchor_e1) / static_cast<double>(n_e1);
    }
    if (n_e0 > 0) {
        stats.p_choose_anchor_given_e0_0 =
            static_cast<double>(sum_anchor_e0) / static_cast<double>(n_e0);
    }
    stats.original_index_dist.resize(orig_counts.size());
    for (std::size_t i = 0; i < orig_counts.size(); ++i) {
        stats.original_index_dist[i] = static_cast<double>(orig_counts[i]) / n;
    }
    return stats;
}

namespace {

std::vector<Cell> position_row(const std::string& label, const PositionStats& s) {
    return {label,
            s.n,
            s.p_choose_presented0,
            s.p_choose_anchor,
            s.p_choose_anchor_given_e0_1 ? Cell{*s.p_choose_anchor_given_e0_1}
                                         : Cell{std::monostate{}},
            s.p_choose_anchor_given_e0_0 ? Cell{*s.p_choose_anchor_given_e0_0}
                                         : Cell{std::monostate{}},
            s.uniform_ref};
}

}  // namespace

AuditReport PositionStats::to_report() const {
    AuditReport report;
    report.title = "position stats";
    report.columns = {"setting",        "n",
                      "p_choose_presented0", "p_choose_anchor",
                      "p_choose_anchor_e0_1", "p_choose_anchor_e0_0",
                      "uniform_ref"};
    report.add_row(position_row("all", *this));
    for (std::size_t i = 0; i < original_index_dist.size(); ++i) {
        report.notes.push_back("P(original index " + std::to_string(i) +
                               ") = " + format_double(original_index_dist[i]));
    }
    return report;
}

AuditReport position_compare(const PositionStats& baseline,
                             const PositionStats& shuffled) {
    AuditReport report;
    report.title = "position-bias audit";
    report.columns = {"setting",        "n",
                      "p_choose_presented0", "p_choose_anchor",
                      "p_choose_anchor_e0_1", "p_choose_anchor_e0_0",
                      "uniform_ref"};
    report.add_row(position_row("baseline", baseline));
    report.add_row(position_row("posshuffle", shuffled));

    auto delta = [](const std::optional<double>& a, const std::optional<double>& b) {
        if (!a || !b) return Cell{std::monostate{}};
        return Cell{*b - *a};
    };
    report.add_row({std::string("delta"), std::monostate{},
                    shuffled.p_choose_presented0 - baseline.p_choose_presented0,
                    shuffled.p_choose_anchor - baseline.p_choose_anchor,
                    delta(baseline.p_choose_anchor_given_e0_1,
                          shuffled.p_choose_anchor_given_e0_1),
                    delta(baseline.p_choose_anchor_given_e0_0,
                          shuffled.p_choose_anchor_given_e0_0),
                    std::monostate{}});
    return report;
}

std::string_view stratum_name(Stratum s) {
    switch (s) {
        case Stratum::NoDiversity: return "no_diversity";
        case Stratum::DiversityNoHeadroom: return "diversity_no_headroom";
        case Stratum::Headroom: return "headroom";
    }
    return "no_diversity";
}

namespace {

/// Normalized equality key for one candidate answer. Unparseable answers
/// are their own class keyed by the trimmed raw string.
std::string answer_class(const std::string& raw) {
    for (Contract contract : {Contract::Scalar, Contract::Pair}) {
        try {
            return normalize_answer(raw, contract).to_string();
        } catch (const ContractError&) {
        }
    }
    std::string trimmed = raw;
    const auto first = trimmed.find_first_not_of(" \t");
    const auto last = trimmed.find_last_not_of(" \t");
    if (first == std::string::npos) return "<empty>";
    return "raw:" + trimmed.substr(first, last - first + 1);
}

}  // namespace

Stratum classify_candidate_set(const PairedRecord& record) {
    require_judge_fields(record);
    if (!record.candidate_answers) {
        throw SchemaError("candidate_answers", "required for strata on record " +
                                                   record.task_id);
    }
    std::set<std::string> classes;
    for (const auto& raw : *record.candidate_answers) classes.insert(answer_class(raw));
    if (classes.size() <= 1) return Stratum::NoDiversity;
    if (record.e0 == 0 && oracle_bit(record) == 1) return Stratum::Headroom;
    return Stratum::DiversityNoHeadroom;
}

StrataResult stratify_by_structure(std::span<const PairedRecord> records,
                                   const EstimateOptions& opts) {
    std::map<Stratum, std::vector<PairedRecord>> groups;
    StrataResult out;
    for (const auto& rec : records) {
        if (!rec.candidate_answers) {
            ++out.excluded;
            continue;
        }
        groups[classify_candidate_set(rec)].push_back(rec);
    }
    for (Stratum s : {Stratum::NoDiversity, Stratum::DiversityNoHeadroom,
                      Stratum::Headroom}) {
        auto it = groups.find(s);
        if (it == groups.end()) continue;
        StratumSummary row;
        row.stratum = s;
        row.summary = selection_summary(it->second, opts);
        if (row.summary.channel.gamma_zero_support) {
            row.summary.channel.gamma_hat.reset();
            row.summary.channel.gamma_interval.reset();
        }
        if (row.summary.channel.c_zero_support) {
            row.summary.channel.c_hat.reset();
            row.summary.channel.c_interval.reset();
        }
        out.strata.push_back(std::move(row));
    }
    return out;
}

AuditReport StrataResult::to_report() const {
    AuditReport report;
    report.title = "candidate-set strata";
    report.columns = {"stratum", "n",     "p0",        "p1",
                      "p_oracle", "gap",  "c_hat",     "gamma_hat"};
    for (const auto& row : strata) {
        const auto& s = row.summary;
        report.add_row({std::string(stratum_name(row.stratum)), s.n, s.p0, s.p1,
                        s.p_oracle, s.gap,
                        s.channel.c_hat ? Cell{*s.channel.c_hat} : Cell{std::monostate{}},
                        s.channel.gamma_hat ? Cell{*s.channel.gamma_hat}
                                            : Cell{std::monostate{}}});
    }
    if (excluded > 0) {
        report.notes.push_back(std::to_string(excluded) +
                               " record(s) excluded (no candidate_answers)");
    }
    return report;
}

}  // namespace chanaudit
