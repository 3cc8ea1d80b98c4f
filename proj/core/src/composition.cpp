#include "chanaudit/composition.hpp"

#include <algorithm>
#include <cmath>

#include "chanaudit/errors.hpp"
#include "chanaudit/rng.hpp"
#include "chanaudit/stats.hpp"

namespace chanaudit {

Kernel2 compose_kernels(const Kernel2& t01, const Kernel2& t12) {
    t01.validate();
    t12.validate();
    Kernel2 out;
    for (int row = 0; row < 2; ++row) {
        for (int col = 0; col < 2; ++col) {
            out.m[static_cast<std::size_t>(row)][static_cast<std::size_t>(col)] =
                t01.m[static_cast<std::size_t>(row)][0] *
                    t12.m[0][static_cast<std::size_t>(col)] +
                t01.m[static_cast<std::size_t>(row)][1] *
                    t12.m[1][static_cast<std::size_t>(col)];
        }
    }
    out.validate();
    return out;
}

namespace {

struct GapPair {
    double mean_gap = 0.0;
    double max_gap = 0.0;
};

GapPair gap_between(const Kernel2& direct, const Kernel2& composed) {
    GapPair gap;
    double total = 0.0;
    for (int row = 0; row < 2; ++row) {
        for (int col = 0; col < 2; ++col) {
            const double d = std::fabs(
                direct.m[static_cast<std::size_t>(row)][static_cast<std::size_t>(col)] -
                composed.m[static_cast<std::size_t>(row)][static_cast<std::size_t>(col)]);
            total += d;
            gap.max_gap = std::max(gap.max_gap, d);
        }
    }
    gap.mean_gap = total / 2.0;
    return gap;
}

bool has_empty_row(const TransitionCounts& counts) {
    return counts.n0() == 0 || counts.n1() == 0;
}

}  // namespace

AuditReport CompositionGap::to_report() const {
    AuditReport report;
    report.title = "composition gap";
    report.columns = {"mean_gap", "max_gap",  "n_e0_0",   "n_e0_1",  "n_e1_0",
                      "n_e1_1",   "mean_lo",  "mean_hi",  "max_lo",  "max_hi",
                      "flags"};
    report.add_row({mean_gap, max_gap, support_e0[0], support_e0[1], support_e1[0],
                    support_e1[1],
                    mean_band ? Cell{mean_band->lo} : Cell{std::monostate{}},
                    mean_band ? Cell{mean_band->hi} : Cell{std::monostate{}},
                    max_band ? Cell{max_band->lo} : Cell{std::monostate{}},
                    max_band ? Cell{max_band->hi} : Cell{std::monostate{}},
                    std::string(mle_fallback ? "jeffreys_fallback" : "")});
    return report;
}

CompositionGap composition_gap(std::span<const PairedRecord> records,
                               Smoothing smoothing, int resamples,
                               std::int64_t rng_seed) {
    const TransitionCounts c01 = count_transitions(records, BitField::E0, BitField::E1);
    const TransitionCounts c12 = count_transitions(records, BitField::E1, BitField::E2);
    const TransitionCounts c02 = count_transitions(records, BitField::E0, BitField::E2);

    CompositionGap result;
    Smoothing effective = smoothing;
    if (smoothing == Smoothing::Mle &&
        (has_empty_row(c01) || has_empty_row(c12) || has_empty_row(c02))) {
        // An empty conditioning row leaves a kernel undefined under MLE;
        // fall back to Jeffreys for all three so the gap compares
        // like-for-like estimators.
        effective = Smoothing::Jeffreys;
        result.mle_fallback = true;
    }

    EstimateOptions opts;
    opts.smoothing = effective;
    opts.intervals = false;
    auto fit = [&](const TransitionCounts& counts) {
        return Kernel2::from_channel(estimate_channel(counts, opts));
    };
    result.t01 = fit(c01);
    result.t12 = fit(c12);
    result.t02_direct = fit(c02);
    result.t02_composed = compose_kernels(result.t01, result.t12);
    const GapPair gap = gap_between(result.t02_direct, result.t02_composed);
    result.mean_gap = gap.mean_gap;
    result.max_gap = gap.max_gap;
    result.support_e0 = {c02.n0(), c02.n1()};
    result.support_e1 = {c12.n0(), c12.n1()};

    if (resamples > 0) {
        // Parametric resampling under the fitted Markov null: redraw e2 from
        // T12 given e1, refit T12 and T02, recompute both gaps.
        const double p_e2_given_e1_0 = result.t12.c();
        const double p_e2_given_e1_1 = 1.0 - result.t12.gamma();
        std::vector<double> mean_gaps, max_gaps;
        mean_gaps.reserve(static_cast<std::size_t>(resamples));
        max_gaps.reserve(static_cast<std::size_t>(resamples));
        for (int rep = 0; rep < resamples; ++rep) {
            SplitRng rng =
                SplitRng::keyed(KeyHash().add(rng_seed).add(std::int64_t{rep}));
            TransitionCounts r12, r02;
            for (const auto& rec : records) {
                const double p = rec.e1 == 0 ? p_e2_given_e1_0 : p_e2_given_e1_1;
                const int e2 = rng.bernoulli(p) ? 1 : 0;
                if (rec.e1 == 0) {
                    (e2 == 0 ? r12.n00 : r12.n01) += 1;
                } else {
                    (e2 == 0 ? r12.n10 : r12.n11) += 1;
                }
                if (rec.e0 == 0) {
                    (e2 == 0 ? r02.n00 : r02.n01) += 1;
                } else {
                    (e2 == 0 ? r02.n10 : r02.n11) += 1;
                }
            }
            const Kernel2 t12_star = fit(r12);
            const Kernel2 t02_star = fit(r02);
            const GapPair g = gap_between(t02_star, compose_kernels(result.t01, t12_star));
            mean_gaps.push_back(g.mean_gap);
            max_gaps.push_back(g.max_gap);
        }
        std::sort(mean_gaps.begin(), mean_gaps.end());
        std::sort(max_gaps.begin(), max_gaps.end());
        result.mean_band =
            Interval{quantile_sorted(mean_gaps, 0.025), quantile_sorted(mean_gaps, 0.975)};
        result.max_band =
            Interval{quantile_sorted(max_gaps, 0.025), quantile_sorted(max_gaps, 0.975)};
    }
    return result;
}

TransferResult stacked_transfer(std::span<const PairedRecord> train,
                                std::span<const PairedRecord> test,
                                Conditioning conditioning, const EstimateOptions& opts,
                                const std::string& fold_label) {
    EstimateOptions fit_opts = opts;
    fit_opts.intervals = false;

    const SlicedChannels t01 =
        estimate_sliced(train, slice_field(), fit_opts, BitField::E0, BitField::E1);
    const SlicedChannels t12 =
        estimate_sliced(train, slice_field(), fit_opts, BitField::E1, BitField::E2);

    auto predict_p2 = [](double p0, const ChannelEstimate& step1,
                         const ChannelEstimate& step2) {
        const Kernel2 composed =
            compose_kernels(Kernel2::from_channel(step1), Kernel2::from_channel(step2));
        return propagate({1.0 - p0, p0}, composed)[1];
    };

    struct Acc {
        std::int64_t n = 0, pre = 0, post = 0;
    };
    std::map<std::string, Acc> accs;
    for (const auto& rec : test) {
        if (!rec.e2) throw MissingFieldError("record " + rec.task_id + " lacks e2");
        auto bump = [&](const std::string& key) {
            Acc& a = accs[key];
            ++a.n;
            a.pre += rec.e0;
            a.post += *rec.e2;
        };
        bump("");
        if (rec.slice) bump(*rec.slice);
    }
    if (accs.empty()) throw FoldError("stacked transfer has no test records");

    TransferResult result;
    result.conditioning = conditioning;
    result.post_bit = "e2";
    for (const auto& [slice, a] : accs) {
        TransferRow row;
        row.fold = fold_label;
        row.slice = slice.empty() ? "ALL" : slice;
        row.n_target = a.n;
        const double n = static_cast<double>(a.n);
        row.p0_target = static_cast<double>(a.pre) / n;
        row.post_emp = static_cast<double>(a.post) / n;
        if (t01.pooled.complete() && t12.pooled.complete()) {
            row.pred_pooled = predict_p2(row.p0_target, t01.pooled, t12.pooled);
            row.resid_pooled = row.post_emp - *row.pred_pooled;
        } else {
            result.dropped.push_back("pooled kernels incomplete under MLE");
        }
        if (!slice.empty()) {
            const auto s1 = t01.by_slice.find(slice);
            const auto s2 = t12.by_slice.find(slice);
            if (s1 != t01.by_slice.end() && s2 != t12.by_slice.end() &&
                s1->second.complete() && s2->second.complete()) {
                row.pred_sliced = predict_p2(row.p0_target, s1->second, s2->second);
                row.resid_sliced = row.post_emp - *row.pred_sliced;
            } else {
                result.dropped.push_back("slice " + slice + ": no train kernels");
            }
        }
        result.rows.push_back(std::move(row));
    }
    FoldSummary summary;
    summary.fold = fold_label;
    if (conditioning != Conditioning::Sliced) {
        summary.pooled = aggregate_transfer_rows(result.rows, false);
    }
    if (conditioning != Conditioning::Pooled) {
        summary.sliced = aggregate_transfer_rows(result.rows, true);
    }
    result.overall_pooled = summary.pooled;
    result.overall_sliced = summary.sliced;
    result.folds.push_back(std::move(summary));
    return result;
}

}  // namespace chanaudit
