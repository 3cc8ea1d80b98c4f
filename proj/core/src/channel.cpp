#include "chanaudit/channel.hpp"

#include <boost/math/distributions/beta.hpp>

#include "chanaudit/errors.hpp"

namespace chanaudit {

std::string_view smoothing_name(Smoothing s) {
    return s == Smoothing::Jeffreys ? "jeffreys" : "mle";
}

std::optional<Smoothing> smoothing_from_name(std::string_view name) {
    if (name == "jeffreys") return Smoothing::Jeffreys;
    if (name == "mle") return Smoothing::Mle;
    return std::nullopt;
}

Interval credible_interval(std::int64_t successes, std::int64_t total, double level) {
    if (!(level > 0.0 && level < 1.0)) {
        throw DomainError("credible level must lie strictly between 0 and 1");
    }
    if (successes < 0 || total < 0 || successes > total) {
        throw DomainError("invalid success/total counts for credible interval");
    }
    const boost::math::beta_distribution<double> post(
        static_cast<double>(successes) + 0.5,
        static_cast<double>(total - successes) + 0.5);
    const double tail = (1.0 - level) / 2.0;
    return {quantile(post, tail), quantile(post, 1.0 - tail)};
}

ChannelEstimate estimate_channel(const TransitionCounts& counts,
                                 const EstimateOptions& opts) {
    ChannelEstimate est;
    est.n0 = counts.n0();
    est.n1 = counts.n1();
    est.smoothing = opts.smoothing;
    est.c_zero_support = est.n0 == 0;
    est.gamma_zero_support = est.n1 == 0;
    est.low_support = std::min(est.n0, est.n1) < opts.low_support_floor;
    est.interval_level = opts.interval_level;

    if (opts.smoothing == Smoothing::Jeffreys) {
        est.c_hat = (static_cast<double>(counts.n01) + 0.5) /
                    (static_cast<double>(est.n0) + 1.0);
        est.gamma_hat = (static_cast<double>(counts.n10) + 0.5) /
                        (static_cast<double>(est.n1) + 1.0);
        if (opts.intervals) {
            est.c_interval = credible_interval(counts.n01, est.n0, opts.interval_level);
            est.gamma_interval =
                credible_interval(counts.n10, est.n1, opts.interval_level);
        }
    } else {
        if (est.n0 > 0) {
            est.c_hat = static_cast<double>(counts.n01) / static_cast<double>(est.n0);
        }
        if (est.n1 > 0) {
            est.gamma_hat = static_cast<double>(counts.n10) / static_cast<double>(est.n1);
        }
    }
    return est;
}

ChannelEstimate estimate_channel(const TransitionCounts& counts, Smoothing smoothing) {
    EstimateOptions opts;
    opts.smoothing = smoothing;
    return estimate_channel(counts, opts);
}

SliceFn slice_field() {
    return [](const PairedRecord& rec) { return rec.slice; };
}

SlicedChannels estimate_sliced(std::span<const PairedRecord> records,
                               const SliceFn& slice_of, const EstimateOptions& opts,
                               BitField from_field, BitField to_field) {
    if (static_cast<int>(from_field) >= static_cast<int>(to_field) ||
        from_field == BitField::E2) {
        throw DomainError("from_field must strictly precede to_field");
    }
    SlicedChannels out;
    for (const auto& rec : records) {
        const int from = from_field == BitField::E0 ? rec.e0 : rec.e1;
        int to;
        if (to_field == BitField::E1) {
            to = rec.e1;
        } else {
            if (!rec.e2) throw MissingFieldError("record " + rec.task_id + " lacks e2");
            to = *rec.e2;
        }
        auto bump = [&](TransitionCounts& counts) {
            if (from == 0) {
                (to == 0 ? counts.n00 : counts.n01) += 1;
            } else {
                (to == 0 ? counts.n10 : counts.n11) += 1;
            }
        };
        bump(out.pooled_counts);
        if (auto label = slice_of(rec)) {
            bump(out.counts_by_slice[*label]);
        } else {
            ++out.unlabeled;
        }
    }
    out.pooled = estimate_channel(out.pooled_counts, opts);
    for (const auto& [label, counts] : out.counts_by_slice) {
        out.by_slice[label] = estimate_channel(counts, opts);
    }
    return out;
}

namespace {

Cell opt_cell(const std::optional<double>& v) {
    if (!v) return std::monostate{};
    return *v;
}

void channel_row(AuditReport& report, const std::string& label,
                 const ChannelEstimate& est) {
    std::string flags;
    auto add_flag = [&](const char* f) {
        if (!flags.empty()) flags += ';';
        flags += f;
    };
    if (est.c_zero_support) add_flag("c_zero_support");
    if (est.gamma_zero_support) add_flag("gamma_zero_support");
    if (est.low_support) add_flag("low_support");

    report.add_row({label, est.n0, est.n1, opt_cell(est.c_hat),
                    est.c_interval ? Cell{est.c_interval->lo} : Cell{std::monostate{}},
                    est.c_interval ? Cell{est.c_interval->hi} : Cell{std::monostate{}},
                    opt_cell(est.gamma_hat),
                    est.gamma_interval ? Cell{est.gamma_interval->lo}
                                       : Cell{std::monostate{}},
                    est.gamma_interval ? Cell{est.gamma_interval->hi}
                                       : Cell{std::monostate{}},
                    flags});
}

}  // namespace

AuditReport SlicedChannels::to_report() const {
    AuditReport report;
    report.title = "channel estimates";
    report.columns = {"slice", "n0",        "n1",       "c_hat",    "c_lo",
                      "c_hi",  "gamma_hat", "gamma_lo", "gamma_hi", "flags"};
    channel_row(report, "pooled", pooled);
    for (const auto& [label, est] : by_slice) channel_row(report, label, est);
    if (unlabeled > 0) {
        report.notes.push_back(std::to_string(unlabeled) +
                               " record(s) without slice label (pooled-only)");
    }
    return report;
}

}  // namespace chanaudit
