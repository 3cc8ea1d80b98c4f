#include "chanaudit/transfer.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "chanaudit/errors.hpp"
#include "chanaudit/rng.hpp"
#include "chanaudit/stats.hpp"

namespace chanaudit {

std::string_view conditioning_name(Conditioning c) {
    switch (c) {
        case Conditioning::Pooled: return "pooled";
        case Conditioning::Sliced: return "sliced";
        case Conditioning::Both: return "both";
    }
    return "both";
}

std::optional<Conditioning> conditioning_from_name(std::string_view name) {
    if (name == "pooled") return Conditioning::Pooled;
    if (name == "sliced") return Conditioning::Sliced;
    if (name == "both") return Conditioning::Both;
    return std::nullopt;
}

namespace {

struct SliceMarginals {
    std::int64_t n = 0;
    double p0 = 0.0;
    double post = 0.0;  // empirical e1 (or e2) rate
};

/// Per-slice baseline and post rates; key "" holds the whole-stream marginal.
std::map<std::string, SliceMarginals> slice_marginals(
    std::span<const PairedRecord> records, bool use_e2) {
    struct Acc {
        std::int64_t n = 0, pre = 0, post = 0;
    };
    std::map<std::string, Acc> accs;
    for (const auto& rec : records) {
        int post_bit;
        if (use_e2) {
            if (!rec.e2) throw MissingFieldError("record " + rec.task_id + " lacks e2");
            post_bit = *rec.e2;
        } else {
            post_bit = rec.e1;
        }
        auto bump = [&](const std::string& key) {
            Acc& a = accs[key];
            ++a.n;
            a.pre += rec.e0;
            a.post += post_bit;
        };
        bump("");
        if (rec.slice) bump(*rec.slice);
    }
    std::map<std::string, SliceMarginals> out;
    for (const auto& [key, a] : accs) {
        const double n = static_cast<double>(a.n);
        out[key] = {a.n, static_cast<double>(a.pre) / n, static_cast<double>(a.post) / n};
    }
    return out;
}

Cell opt_cell(const std::optional<double>& v) {
    return v ? Cell{*v} : Cell{std::monostate{}};
}

}  // namespace

std::optional<TransferAggregate> aggregate_transfer_rows(
    std::span<const TransferRow> rows, bool sliced_residual) {
    std::vector<double> residuals;
    std::vector<double> abs_residuals;
    double wsum = 0.0, wmae = 0.0, wbias = 0.0;
    std::int64_t n_records = 0;
    for (const auto& row : rows) {
        if (row.slice == "ALL") continue;
        const auto& resid = sliced_residual ? row.resid_sliced : row.resid_pooled;
        if (!resid) continue;
        residuals.push_back(*resid);
        abs_residuals.push_back(std::fabs(*resid));
        const double w = static_cast<double>(row.n_target);
        wsum += w;
        wmae += w * std::fabs(*resid);
        wbias += w * *resid;
        n_records += row.n_target;
    }
    if (residuals.empty()) return std::nullopt;
    TransferAggregate agg;
    agg.mae = mean(abs_residuals);
    agg.bias = mean(residuals);
    std::sort(abs_residuals.begin(), abs_residuals.end());
    agg.ae95 = quantile_sorted(abs_residuals, 0.95);
    agg.max_abs = abs_residuals.back();
    agg.wmae = wsum > 0 ? wmae / wsum : 0.0;
    agg.wbias = wsum > 0 ? wbias / wsum : 0.0;
    agg.n_slices = static_cast<std::int64_t>(residuals.size());
    agg.n_records = n_records;
    return agg;
}

namespace {

std::optional<TransferAggregate> mean_of(
    const std::vector<std::optional<TransferAggregate>>& parts) {
    TransferAggregate total;
    int n = 0;
    for (const auto& part : parts) {
        if (!part) continue;
        ++n;
        total.mae += part->mae;
        total.bias += part->bias;
        total.ae95 += part->ae95;
        total.max_abs = std::max(total.max_abs, part->max_abs);
        total.wmae += part->wmae;
        total.wbias += part->wbias;
        total.n_slices += part->n_slices;
        total.n_records += part->n_records;
    }
    if (n == 0) return std::nullopt;
    const double d = static_cast<double>(n);
    total.mae /= d;
    total.bias /= d;
    total.ae95 /= d;
    total.wmae /= d;
    total.wbias /= d;
    return total;
}

}  // namespace

AuditReport TransferResult::to_report() const {
    AuditReport report;
    report.title = "transfer";
    const std::string post = post_bit;
    report.columns = {"fold",        "slice",        "n",
                      "p0",          "p_" + post + "_emp",
                      "pred_pooled", "pred_sliced",  "resid_pooled",
                      "resid_sliced"};
    for (const auto& row : rows) {
        report.add_row({row.fold, row.slice, row.n_target, row.p0_target, row.post_emp,
                        opt_cell(row.pred_pooled), opt_cell(row.pred_sliced),
                        opt_cell(row.resid_pooled), opt_cell(row.resid_sliced)});
    }
    auto agg_note = [&](const std::string& label,
                        const std::optional<TransferAggregate>& agg) {
        if (!agg) return;
        report.notes.push_back(label + ": mae=" + format_double(agg->mae) +
                               " bias=" + format_double(agg->bias) +
                               " ae95=" + format_double(agg->ae95) +
                               " max=" + format_double(agg->max_abs) +
                               " wmae=" + format_double(agg->wmae) +
                               " wbias=" + format_double(agg->wbias));
    };
    for (const auto& fold : folds) {
        agg_note("fold " + fold.fold + " pooled", fold.pooled);
        agg_note("fold " + fold.fold + " sliced", fold.sliced);
    }
    agg_note("overall pooled", overall_pooled);
    agg_note("overall sliced", overall_sliced);
    for (const auto& note : dropped) report.notes.push_back(note);
    return report;
}

TransferResult seed_holdout(
    const std::map<std::int64_t, std::vector<PairedRecord>>& datasets,
    Conditioning conditioning, const EstimateOptions& opts) {
    if (datasets.size() < 2) {
        throw DomainError("seed holdout requires at least two seeds");
    }
    TransferResult result;
    result.conditioning = conditioning;

    std::vector<std::optional<TransferAggregate>> pooled_parts, sliced_parts;
    for (const auto& [held_out, target] : datasets) {
        if (target.empty()) {
            throw FoldError("held-out seed " + std::to_string(held_out) +
                            " has no records");
        }
        std::vector<PairedRecord> calibration;
        for (const auto& [seed, recs] : datasets) {
            if (seed == held_out) continue;
            calibration.insert(calibration.end(), recs.begin(), recs.end());
        }
        const SlicedChannels cal = estimate_sliced(calibration, slice_field(), opts);
        const auto marginals = slice_marginals(target, false);
        const std::string fold = std::to_string(held_out);

        std::vector<TransferRow> fold_rows;
        for (const auto& [slice, m] : marginals) {
            TransferRow row;
            row.fold = fold;
            row.slice = slice.empty() ? "ALL" : slice;
            row.n_target = m.n;
            row.p0_target = m.p0;
            row.post_emp = m.post;
            if (cal.pooled.complete()) {
                row.pred_pooled = predict_post(m.p0, cal.pooled);
                row.resid_pooled = m.post - *row.pred_pooled;
            } else {
                result.dropped.push_back("fold " + fold +
                                         ": pooled channel incomplete under MLE");
            }
            if (!slice.empty()) {
                const auto it = cal.by_slice.find(slice);
                if (it != cal.by_slice.end() && it->second.complete()) {
                    row.pred_sliced = predict_post(m.p0, it->second);
                    row.resid_sliced = m.post - *row.pred_sliced;
                } else {
                    result.dropped.push_back("fold " + fold + " slice " + slice +
                                             ": no calibration channel");
                }
            }
            fold_rows.push_back(std::move(row));
        }

        FoldSummary summary;
        summary.fold = fold;
        if (conditioning != Conditioning::Sliced) {
            summary.pooled = aggregate_transfer_rows(fold_rows, false);
        }
        if (conditioning != Conditioning::Pooled) {
            summary.sliced = aggregate_transfer_rows(fold_rows, true);
        }
        pooled_parts.push_back(summary.pooled);
        sliced_parts.push_back(summary.sliced);
        result.folds.push_back(std::move(summary));
        result.rows.insert(result.rows.end(), fold_rows.begin(), fold_rows.end());
    }
    result.overall_pooled = mean_of(pooled_parts);
    result.overall_sliced = mean_of(sliced_parts);
    return result;
}

namespace {

/// Fractional transition counts for mixture-reweighted channel fits.
struct WeightedCounts {
    double n00 = 0, n01 = 0, n10 = 0, n11 = 0;
    double n0() const { return n00 + n01; }
    double n1() const { return n10 + n11; }
};

ChannelEstimate estimate_weighted(const WeightedCounts& counts, Smoothing smoothing) {
    ChannelEstimate est;
    est.smoothing = smoothing;
    est.n0 = static_cast<std::int64_t>(std::llround(counts.n0()));
    est.n1 = static_cast<std::int64_t>(std::llround(counts.n1()));
    if (smoothing == Smoothing::Jeffreys) {
        est.c_hat = (counts.n01 + 0.5) / (counts.n0() + 1.0);
        est.gamma_hat = (counts.n10 + 0.5) / (counts.n1() + 1.0);
    } else {
        if (counts.n0() > 0) est.c_hat = counts.n01 / counts.n0();
        if (counts.n1() > 0) est.gamma_hat = counts.n10 / counts.n1();
    }
    est.c_zero_support = counts.n0() == 0;
    est.gamma_zero_support = counts.n1() == 0;
    return est;
}

}  // namespace

AuditReport MixtureStressResult::to_report() const {
    AuditReport report;
    report.title = "mixture stress";
    report.columns = {"scenario",    "c_pool",      "gamma_pool", "p0_test",
                      "p1_true",     "pred_pooled", "resid_pooled",
                      "pred_sliced", "resid_sliced"};
    for (const auto& row : rows) {
        report.add_row({row.scenario, opt_cell(row.c_pool), opt_cell(row.gamma_pool),
                        row.p0_test, row.p1_true, opt_cell(row.pred_pooled),
                        opt_cell(row.resid_pooled), opt_cell(row.pred_sliced),
                        opt_cell(row.resid_sliced)});
    }
    report.notes = notes;
    return report;
}

MixtureStressResult mixture_stress(std::span<const PairedRecord> calibration,
                                   std::span<const PairedRecord> target,
                                   std::span<const MixtureScenario> scenarios,
                                   Conditioning conditioning,
                                   const EstimateOptions& opts) {
    MixtureStressResult result;
    const SlicedChannels cal = estimate_sliced(calibration, slice_field(), opts);
    if (cal.unlabeled > 0) {
        result.notes.push_back(std::to_string(cal.unlabeled) +
                               " unlabeled calibration record(s) used only in the "
                               "pooled fit");
    }
    auto target_marginals = slice_marginals(target, false);
    target_marginals.erase("");

    std::int64_t cal_labeled = 0;
    for (const auto& [slice, counts] : cal.counts_by_slice) cal_labeled += counts.total();

    for (const auto& scenario : scenarios) {
        MixtureWeights weights = scenario.target;
        weights.normalize();

        // Pooled channel: the plain calibration fit, or a reweighted fit when
        // the scenario names a counterfactual calibration mixture.
        ChannelEstimate pooled = cal.pooled;
        if (scenario.calibration) {
            MixtureWeights cal_weights = *scenario.calibration;
            cal_weights.normalize();
            WeightedCounts weighted;
            for (const auto& [slice, weight] : cal_weights.w) {
                if (weight == 0.0) continue;
                const auto it = cal.counts_by_slice.find(slice);
                if (it == cal.counts_by_slice.end() || it->second.total() == 0) {
                    throw MissingSliceError("calibration mixture weights empty slice " +
                                            slice);
                }
                const double scale = weight * static_cast<double>(cal_labeled) /
                                     static_cast<double>(it->second.total());
                weighted.n00 += scale * static_cast<double>(it->second.n00);
                weighted.n01 += scale * static_cast<double>(it->second.n01);
                weighted.n10 += scale * static_cast<double>(it->second.n10);
                weighted.n11 += scale * static_cast<double>(it->second.n11);
            }
            pooled = estimate_weighted(weighted, opts.smoothing);
        }

        MixtureStressRow row;
        row.scenario = scenario.name;
        row.c_pool = pooled.c_hat;
        row.gamma_pool = pooled.gamma_hat;

        double p0_test = 0.0, p1_true = 0.0;
        double pred_pooled = 0.0, pred_sliced = 0.0;
        bool pooled_ok = pooled.complete() && conditioning != Conditioning::Sliced;
        bool sliced_ok = conditioning != Conditioning::Pooled;
        for (const auto& [slice, weight] : weights.w) {
            if (weight == 0.0) continue;
            const auto tgt = target_marginals.find(slice);
            if (tgt == target_marginals.end()) {
                throw MissingSliceError("scenario " + scenario.name +
                                        " weights empty target slice " + slice);
            }
            p0_test += weight * tgt->second.p0;
            p1_true += weight * tgt->second.post;
            if (pooled_ok) {
                pred_pooled += weight * predict_post(tgt->second.p0, pooled);
            }
            if (sliced_ok) {
                const auto chan = cal.by_slice.find(slice);
                if (chan == cal.by_slice.end() || !chan->second.complete()) {
                    throw MissingSliceError("scenario " + scenario.name +
                                            " weights slice " + slice +
                                            " with no calibration channel");
                }
                pred_sliced += weight * predict_post(tgt->second.p0, chan->second);
            }
        }
        row.p0_test = p0_test;
        row.p1_true = p1_true;
        if (pooled_ok) {
            row.pred_pooled = pred_pooled;
            row.resid_pooled = p1_true - pred_pooled;
        }
        if (sliced_ok) {
            row.pred_sliced = pred_sliced;
            row.resid_sliced = p1_true - pred_sliced;
        }
        result.rows.push_back(std::move(row));
    }
    return result;
}

AuditReport SplitTransferResult::to_report() const {
    AuditReport report;
    report.title = "split transfer";
    report.columns = {"frac", "n_train", "n_test", "repeats", "mae",
                      "bias", "sd",      "p10",    "p50",     "p90"};
    report.add_row({train_fraction, n_train, n_test, static_cast<std::int64_t>(repeats),
                    mae, bias, sd, p10, p50, p90});
    if (skipped > 0) {
        report.notes.push_back(std::to_string(skipped) +
                               " repeat(s) skipped: incomplete MLE channel");
    }
    return report;
}

SplitTransferResult split_transfer(std::span<const PairedRecord> pool,
                                   double train_fraction, int repeats,
                                   std::int64_t rng_seed, const EstimateOptions& opts) {
    if (!(train_fraction > 0.0 && train_fraction < 1.0)) {
        throw DomainError("train fraction must lie strictly between 0 and 1");
    }
    if (repeats < 1) throw DomainError("repeats must be positive");
    const std::size_t n = pool.size();
    const auto n_train =
        static_cast<std::size_t>(train_fraction * static_cast<double>(n));
    if (n_train == 0 || n_train >= n) {
        throw SplitError("train fraction yields an empty split side");
    }

    SplitTransferResult result;
    result.train_fraction = train_fraction;
    result.n_train = static_cast<std::int64_t>(n_train);
    result.n_test = static_cast<std::int64_t>(n - n_train);
    result.repeats = repeats;

    std::vector<std::size_t> index(n);
    for (int rep = 0; rep < repeats; ++rep) {
        std::iota(index.begin(), index.end(), 0);
        SplitRng rng = SplitRng::keyed(KeyHash().add(rng_seed).add(std::int64_t{rep}));
        rng.shuffle(index);

        TransitionCounts train_counts;
        std::int64_t test_pre = 0, test_post = 0;
        for (std::size_t pos = 0; pos < n; ++pos) {
            const PairedRecord& rec = pool[index[pos]];
            if (pos < n_train) {
                if (rec.e0 == 0) {
                    (rec.e1 == 0 ? train_counts.n00 : train_counts.n01) += 1;
                } else {
                    (rec.e1 == 0 ? train_counts.n10 : train_counts.n11) += 1;
                }
            } else {
                test_pre += rec.e0;
                test_post += rec.e1;
            }
        }
        const ChannelEstimate channel = estimate_channel(train_counts, opts.smoothing);
        if (!channel.complete()) {
            ++result.skipped;
            continue;
        }
        const double n_test = static_cast<double>(n - n_train);
        const double p0 = static_cast<double>(test_pre) / n_test;
        const double p1 = static_cast<double>(test_post) / n_test;
        result.residuals.push_back(p1 - predict_post(p0, channel));
    }

    if (!result.residuals.empty()) {
        std::vector<double> abs_resid;
        abs_resid.reserve(result.residuals.size());
        for (double r : result.residuals) abs_resid.push_back(std::fabs(r));
        result.mae = mean(abs_resid);
        result.bias = mean(result.residuals);
        result.sd = sample_sd(result.residuals);
        std::vector<double> sorted = result.residuals;
        std::sort(sorted.begin(), sorted.end());
        result.p10 = quantile_sorted(sorted, 0.10);
        result.p50 = quantile_sorted(sorted, 0.50);
        result.p90 = quantile_sorted(sorted, 0.90);
    }
    return result;
}

AuditReport ResidualTable::to_report() const {
    AuditReport report;
    report.title = "standardized residuals";
    report.columns = {"slice", "n", "p0", "p1", "pred", "resid", "se", "z", "flags"};
    for (const auto& row : rows) {
        report.add_row({row.slice, row.n, row.p0, row.p1, row.pred, row.resid,
                        opt_cell(row.se), opt_cell(row.z),
                        row.se ? std::string() : std::string("se_zero")});
    }
    return report;
}

ResidualTable standardized_residuals(std::span<const PairedRecord> records,
                                     const ChannelEstimate& pooled_channel,
                                     const SliceFn& slice_of) {
    struct Acc {
        std::int64_t n = 0, pre = 0, post = 0;
    };
    std::map<std::string, Acc> accs;
    for (const auto& rec : records) {
        if (auto label = slice_of(rec)) {
            Acc& a = accs[*label];
            ++a.n;
            a.pre += rec.e0;
            a.post += rec.e1;
        }
    }
    ResidualTable table;
    for (const auto& [slice, a] : accs) {
        ResidualRow row;
        row.slice = slice;
        row.n = a.n;
        const double n = static_cast<double>(a.n);
        row.p0 = static_cast<double>(a.pre) / n;
        row.p1 = static_cast<double>(a.post) / n;
        row.pred = predict_post(row.p0, pooled_channel);
        row.resid = row.p1 - row.pred;
        if (row.p1 > 0.0 && row.p1 < 1.0) {
            row.se = binomial_se(row.p1, n);
            row.z = row.resid / *row.se;
        }
        table.rows.push_back(std::move(row));
    }
    return table;
}

namespace {

ConvergenceBand band_of(std::vector<double> values) {
    std::sort(values.begin(), values.end());
    ConvergenceBand band;
    band.median = quantile_sorted(values, 0.50);
    band.lo = quantile_sorted(values, 0.10);
    band.hi = quantile_sorted(values, 0.90);
    return band;
}

}  // namespace

AuditReport ConvergenceResult::to_report() const {
    AuditReport report;
    report.title = "convergence audit";
    report.columns = {"n",
                      "p0_med",     "p0_lo",     "p0_hi",
                      "p1_med",     "p1_lo",     "p1_hi",
                      "c_med",      "c_lo",      "c_hi",
                      "gamma_med",  "gamma_lo",  "gamma_hi",
                      "oracle_med", "oracle_lo", "oracle_hi"};
    for (const auto& row : rows) {
        std::vector<Cell> cells{static_cast<std::int64_t>(row.n),
                                row.p0.median,     row.p0.lo,     row.p0.hi,
                                row.p1.median,     row.p1.lo,     row.p1.hi,
                                row.c_hat.median,  row.c_hat.lo,  row.c_hat.hi,
                                row.gamma_hat.median, row.gamma_hat.lo,
                                row.gamma_hat.hi};
        if (row.p_oracle) {
            cells.push_back(row.p_oracle->median);
            cells.push_back(row.p_oracle->lo);
            cells.push_back(row.p_oracle->hi);
        } else {
            cells.push_back(std::monostate{});
            cells.push_back(std::monostate{});
            cells.push_back(std::monostate{});
        }
        report.add_row(std::move(cells));
    }
    report.notes.push_back("permutations: " + std::to_string(n_permutations));
    return report;
}

ConvergenceResult convergence_audit(std::span<const PairedRecord> records,
                                    int n_permutations, std::int64_t rng_seed,
                                    std::span<const std::size_t> grid) {
    if (n_permutations < 2) throw DomainError("convergence audit needs >= 2 permutations");
    const std::size_t n = records.size();
    for (std::size_t g : grid) {
        if (g == 0 || g > n) {
            throw GridError("prefix size " + std::to_string(g) +
                            " outside pool of " + std::to_string(n));
        }
    }
    bool have_oracle = !records.empty();
    for (const auto& rec : records) {
        if (!rec.candidate_correct) {
            have_oracle = false;
            break;
        }
    }

    // metrics[g][perm] per statistic
    std::vector<std::vector<double>> p0s(grid.size()), p1s(grid.size()),
        cs(grid.size()), gs(grid.size()), oracles(grid.size());

    std::vector<std::size_t> index(n);
    for (int perm = 0; perm < n_permutations; ++perm) {
        std::iota(index.begin(), index.end(), 0);
        SplitRng rng = SplitRng::keyed(KeyHash().add(rng_seed).add(std::int64_t{perm}));
        rng.shuffle(index);

        // Running counts let every grid point share one pass.
        std::vector<std::size_t> sorted_grid(grid.begin(), grid.end());
        std::sort(sorted_grid.begin(), sorted_grid.end());
        sorted_grid.erase(std::unique(sorted_grid.begin(), sorted_grid.end()),
                          sorted_grid.end());
        TransitionCounts counts;
        std::int64_t oracle_hits = 0;
        std::size_t next = 0;
        for (std::size_t pos = 0; pos < n && next < sorted_grid.size(); ++pos) {
            const PairedRecord& rec = records[index[pos]];
            if (rec.e0 == 0) {
                (rec.e1 == 0 ? counts.n00 : counts.n01) += 1;
            } else {
                (rec.e1 == 0 ? counts.n10 : counts.n11) += 1;
            }
            if (have_oracle) {
                for (int bit : *rec.candidate_correct) {
                    if (bit) {
                        ++oracle_hits;
                        break;
                    }
                }
            }
            while (next < sorted_grid.size() && pos + 1 == sorted_grid[next]) {
                const double m = static_cast<double>(pos + 1);
                // Map back to the caller's grid order.
                for (std::size_t slot = 0; slot < grid.size(); ++slot) {
                    if (grid[slot] != sorted_grid[next]) continue;
                    p0s[slot].push_back(static_cast<double>(counts.n1()) / m);
                    p1s[slot].push_back(
                        static_cast<double>(counts.n01 + counts.n11) / m);
                    const ChannelEstimate est =
                        estimate_channel(counts, Smoothing::Jeffreys);
                    cs[slot].push_back(*est.c_hat);
                    gs[slot].push_back(*est.gamma_hat);
                    if (have_oracle) {
                        oracles[slot].push_back(static_cast<double>(oracle_hits) / m);
                    }
                }
                ++next;
            }
        }
    }

    ConvergenceResult result;
    result.n_permutations = n_permutations;
    for (std::size_t slot = 0; slot < grid.size(); ++slot) {
        ConvergenceRow row;
        row.n = grid[slot];
        row.p0 = band_of(p0s[slot]);
        row.p1 = band_of(p1s[slot]);
        row.c_hat = band_of(cs[slot]);
        row.gamma_hat = band_of(gs[slot]);
        if (have_oracle) row.p_oracle = band_of(oracles[slot]);
        result.rows.push_back(row);
    }
    return result;
}

}  // namespace chanaudit
