#include "chanaudit/gating.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <set>

#include "chanaudit/errors.hpp"
#include "chanaudit/onestep.hpp"
#include "chanaudit/stats.hpp"

namespace chanaudit {

GateDecision gate_decision(double p0, const ChannelEstimate& channel, double threshold) {
    GateDecision decision;
    decision.predicted_gain = gain(p0, channel);
    decision.threshold = threshold;
    decision.on = decision.predicted_gain > threshold;
    decision.n0 = channel.n0;
    decision.n1 = channel.n1;
    return decision;
}

namespace {

struct Marginal {
    std::int64_t n = 0, pre = 0, post = 0;
    double p0() const { return n ? static_cast<double>(pre) / static_cast<double>(n) : 0.0; }
    double p1() const { return n ? static_cast<double>(post) / static_cast<double>(n) : 0.0; }
};

std::map<std::string, Marginal> marginals_by_slice(std::span<const PairedRecord> records,
                                                   const SliceFn& slice_of) {
    std::map<std::string, Marginal> out;
    for (const auto& rec : records) {
        if (auto label = slice_of(rec)) {
            Marginal& m = out[*label];
            ++m.n;
            m.pre += rec.e0;
            m.post += rec.e1;
        }
    }
    return out;
}

}  // namespace

GatePolicyResult evaluate_policy(
    const std::map<std::int64_t, std::vector<PairedRecord>>& datasets,
    const SliceFn& slice_of, double threshold, const EstimateOptions& opts) {
    if (datasets.size() < 2) {
        throw DomainError("gating policy evaluation requires at least two seeds");
    }
    GatePolicyResult result;

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
        const SlicedChannels cal = estimate_sliced(calibration, slice_of, opts);
        const auto cal_marginals = marginals_by_slice(calibration, slice_of);
        const auto tgt_marginals = marginals_by_slice(target, slice_of);
        const std::string fold = std::to_string(held_out);

        for (const auto& [slice, tgt] : tgt_marginals) {
            const auto chan = cal.by_slice.find(slice);
            const auto cal_m = cal_marginals.find(slice);
            if (chan == cal.by_slice.end() || !chan->second.complete() ||
                cal_m == cal_marginals.end()) {
                result.dropped.push_back("fold " + fold + " slice " + slice +
                                         ": no calibration channel");
                continue;
            }
            GateDecision decision =
                gate_decision(cal_m->second.p0(), chan->second, threshold);
            GatePolicyRow row;
            row.fold = fold;
            row.slice = slice;
            row.on = decision.on;
            row.predicted_gain = decision.predicted_gain;
            row.n = tgt.n;
            row.always_off = tgt.p0();
            row.always_on = tgt.p1();
            row.gated = row.on ? row.always_on : row.always_off;
            row.gain_vs_on = row.gated - row.always_on;
            const double delta = row.always_on - row.always_off;
            row.consistent = row.on ? delta > 0 : delta <= 0;
            result.rows.push_back(std::move(row));
        }
    }

    // Fold-averaged per-slice summary, then an equal-weight mean over slices
    // (matching the shape of per-depth gating tables).
    std::set<std::string> slices;
    for (const auto& row : result.rows) slices.insert(row.slice);
    for (const auto& slice : slices) {
        GatePolicyRow avg;
        avg.fold = "mean";
        avg.slice = slice;
        int n_folds = 0;
        int n_on = 0;
        int n_consistent = 0;
        for (const auto& row : result.rows) {
            if (row.slice != slice) continue;
            ++n_folds;
            n_on += row.on ? 1 : 0;
            n_consistent += row.consistent ? 1 : 0;
            avg.predicted_gain += row.predicted_gain;
            avg.n += row.n;
            avg.always_off += row.always_off;
            avg.always_on += row.always_on;
            avg.gated += row.gated;
            avg.gain_vs_on += row.gain_vs_on;
        }
        if (n_folds == 0) continue;
        const double d = static_cast<double>(n_folds);
        avg.predicted_gain /= d;
        avg.always_off /= d;
        avg.always_on /= d;
        avg.gated /= d;
        avg.gain_vs_on /= d;
        avg.on = n_on == n_folds;  // unanimity; mixed folds read as OFF-leaning
        avg.consistent = n_consistent == n_folds;
        result.slice_means.push_back(std::move(avg));
    }

    result.mean.fold = "mean";
    result.mean.slice = "mean";
    if (!result.slice_means.empty()) {
        const double d = static_cast<double>(result.slice_means.size());
        for (const auto& row : result.slice_means) {
            result.mean.predicted_gain += row.predicted_gain;
            result.mean.n += row.n;
            result.mean.always_off += row.always_off;
            result.mean.always_on += row.always_on;
            result.mean.gated += row.gated;
            result.mean.gain_vs_on += row.gain_vs_on;
        }
        result.mean.predicted_gain /= d;
        result.mean.always_off /= d;
        result.mean.always_on /= d;
        result.mean.gated /= d;
        result.mean.gain_vs_on /= d;
    }
    return result;
}

namespace {

std::vector<Cell> policy_cells(const GatePolicyRow& row, bool with_decision) {
    return {row.fold,
            row.slice,
            with_decision ? Cell{std::string(row.on ? "ON" : "OFF")}
                          : Cell{std::monostate{}},
            row.predicted_gain,
            row.n,
            row.always_off,
            row.always_on,
            row.gated,
            row.gain_vs_on,
            with_decision ? Cell{std::string(row.consistent ? "yes" : "no")}
                          : Cell{std::monostate{}}};
}

}  // namespace

AuditReport GatePolicyResult::to_report() const {
    AuditReport report;
    report.title = "gating policy";
    report.columns = {"fold",       "slice",      "decision", "predicted_gain",
                      "n",          "always_off", "always_on", "gated",
                      "gain_vs_on", "consistent"};
    for (const auto& row : rows) report.add_row(policy_cells(row, true));
    for (const auto& row : slice_means) report.add_row(policy_cells(row, true));
    report.add_row(policy_cells(mean, false));
    for (const auto& note : dropped) report.notes.push_back(note);
    return report;
}

nlohmann::json GatePolicyResult::gate_file() const {
    nlohmann::json gates = nlohmann::json::object();
    for (const auto& row : slice_means) {
        int n_folds = 0;
        int n_on = 0;
        std::int64_t n0 = 0, n1 = 0;  // slice supports pooled over seeds
        for (const auto& r : rows) {
            if (r.slice != row.slice) continue;
            ++n_folds;
            n_on += r.on ? 1 : 0;
            const auto hits = static_cast<std::int64_t>(
                std::llround(r.always_off * static_cast<double>(r.n)));
            n1 += hits;
            n0 += r.n - hits;
        }
        std::string decision = "MIXED";
        if (n_on == n_folds) decision = "ON";
        if (n_on == 0) decision = "OFF";
        gates[row.slice] = {{"decision", decision},
                            {"gain", row.predicted_gain},
                            {"supports", {{"n0", n0}, {"n1", n1}}}};
    }
    return gates;
}

namespace {

std::string format_edge(double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%g", v);
    return buf;
}

std::string bin_label(double lo, double hi) {
    return "(" + format_edge(lo) + ", " + format_edge(hi) + "]";
}

std::vector<double> feature_values(std::span<const PairedRecord> records,
                                   const std::string& feature) {
    std::vector<double> values;
    values.reserve(records.size());
    for (const auto& rec : records) {
        const auto it = rec.features.find(feature);
        if (it == rec.features.end()) {
            throw MissingFieldError("record " + rec.task_id + " lacks feature " +
                                    feature);
        }
        values.push_back(it->second);
    }
    return values;
}

BinAssignment assign_to_edges(std::span<const PairedRecord> records,
                              const std::vector<double>& values,
                              const std::vector<double>& inner_edges, double lo,
                              double hi) {
    BinAssignment out;
    std::vector<double> uppers = inner_edges;
    uppers.push_back(hi);
    double prev = lo;
    for (double upper : uppers) {
        out.bins.push_back({bin_label(prev, upper), prev, upper, 0});
        prev = upper;
    }
    out.label_per_record.reserve(records.size());
    for (double v : values) {
        std::size_t bin = 0;
        while (bin + 1 < out.bins.size() && v > out.bins[bin].hi) ++bin;
        ++out.bins[bin].count;
        out.label_per_record.push_back(out.bins[bin].label);
    }
    return out;
}

}  // namespace

BinAssignment proxy_bins(std::span<const PairedRecord> records,
                         const std::string& feature, int n_bins) {
    if (n_bins < 1) throw DomainError("n_bins must be positive");
    if (records.empty()) throw DomainError("cannot bin an empty record set");
    const std::vector<double> values = feature_values(records, feature);
    std::vector<double> sorted = values;
    std::sort(sorted.begin(), sorted.end());
    if (sorted.front() == sorted.back() && n_bins > 1) {
        throw DegenerateBinsError("feature " + feature +
                                  " is constant; quantile bins are degenerate");
    }
    std::vector<double> inner;
    for (int j = 1; j < n_bins; ++j) {
        inner.push_back(quantile_sorted(sorted, static_cast<double>(j) /
                                                    static_cast<double>(n_bins)));
    }
    // Ties can collapse adjacent quantile edges; keep the distinct ones.
    inner.erase(std::unique(inner.begin(), inner.end()), inner.end());
    while (!inner.empty() && inner.front() <= sorted.front()) {
        inner.erase(inner.begin());
    }
    while (!inner.empty() && inner.back() >= sorted.back()) {
        inner.pop_back();
    }
    // The lowest edge sits just under the minimum so the label interval
    // "(lo, hi]" covers it.
    return assign_to_edges(records, values, inner, sorted.front() - 0.001,
                           sorted.back());
}

BinAssignment proxy_bins(std::span<const PairedRecord> records,
                         const std::string& feature, std::span<const double> edges) {
    if (records.empty()) throw DomainError("cannot bin an empty record set");
    std::vector<double> inner(edges.begin(), edges.end());
    if (!std::is_sorted(inner.begin(), inner.end())) {
        throw DomainError("fixed bin edges must be ascending");
    }
    const std::vector<double> values = feature_values(records, feature);
    std::vector<double> sorted = values;
    std::sort(sorted.begin(), sorted.end());
    double hi = sorted.back();
    if (!inner.empty() && inner.back() >= hi) {
        hi = inner.back();
        inner.pop_back();
    }
    return assign_to_edges(records, values, inner, sorted.front() - 0.001, hi);
}

void apply_bins(std::vector<PairedRecord>& records, const BinAssignment& assignment) {
    if (records.size() != assignment.label_per_record.size()) {
        throw DomainError("bin assignment does not match record count");
    }
    for (std::size_t i = 0; i < records.size(); ++i) {
        records[i].slice = assignment.label_per_record[i];
    }
}

}  // namespace chanaudit
