#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"

#include "chanaudit/bench.hpp"
#include "chanaudit/channel.hpp"
#include "chanaudit/composition.hpp"
#include "chanaudit/gating.hpp"
#include "chanaudit/onestep.hpp"
#include "chanaudit/record.hpp"
#include "chanaudit/selection.hpp"
#include "chanaudit/transfer.hpp"

#include "io_util.hpp"
#include "svg.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace chanaudit::cli {

namespace {

Smoothing parse_smoothing(const std::string& name) {
    const auto parsed = smoothing_from_name(name);
    if (!parsed) throw DomainError("unknown smoothing: " + name);
    return *parsed;
}

Conditioning parse_conditioning(const std::string& name) {
    const auto parsed = conditioning_from_name(name);
    if (!parsed) throw DomainError("unknown conditioning: " + name);
    return *parsed;
}

std::vector<PairedRecord> load_records(const std::string& path) {
    auto records = read_jsonl(path);
    validate_dataset(records);
    return records;
}

/// Applies --feature/--bins/--edges binning when requested, replacing the
/// slice labels in place.
void maybe_rebin(std::vector<PairedRecord>& records, const std::string& feature,
                 int bins, const std::string& edges_csv) {
    if (feature.empty()) return;
    BinAssignment assignment;
    if (!edges_csv.empty()) {
        const auto edges = parse_double_list(edges_csv);
        assignment = proxy_bins(records, feature, edges);
    } else {
        assignment = proxy_bins(records, feature, bins);
    }
    apply_bins(records, assignment);
}

json slice_options_config(const std::string& feature, int bins,
                          const std::string& edges) {
    json j;
    j["feature"] = feature;
    j["bins"] = bins;
    j["edges"] = edges;
    return j;
}

// ---- simulate ----------------------------------------------------------

struct SimulateOpts {
    std::string out;
    std::string seeds = "123,124,125";
    int n_per_slice = 100;
    std::string regime = "alt";
    std::string profile_path;
    double p0 = 0.6;
    double c = 0.5;
    double gamma = 0.1;
    double c2 = 0.3;
    double gamma2 = 0.15;
    std::string history = "markov";
    double anchor_shift = 0.0;
    int k = 2;
    double per_candidate_acc = 0.6;
    std::string judge = "slot0";
    double judge_param = 0.0;
    std::int64_t sim_seed = 0;
    std::int64_t posshuffle_seed = -1;  // <0 means off
    int workers = 1;
    bool dump_tasks = false;
};

BaselineAccuracy baseline_from_json(const json& j) {
    BaselineAccuracy acc;
    for (const auto& [key, value] : j.items()) {
        if (key == "default") {
            acc.fallback = value.get<double>();
        } else {
            acc.by_slice[key] = value.get<double>();
        }
    }
    return acc;
}

StepProfile step_from_json(const json& j) {
    StepProfile step;
    for (const auto& [key, value] : j.items()) {
        if (key == "history") {
            const std::string name = value.get<std::string>();
            if (name == "markov") {
                step.history = HistoryRule::Markov;
            } else if (name == "anchor_haunted") {
                step.history = HistoryRule::AnchorHaunted;
            } else {
                throw DomainError("unknown history rule: " + name);
            }
        } else if (key == "anchor_shift") {
            step.anchor_shift = value.get<double>();
        } else if (key == "default") {
            step.fallback = Rates{value.at("c").get<double>(),
                                  value.at("gamma").get<double>()};
        } else {
            step.by_slice[key] = Rates{value.at("c").get<double>(),
                                       value.at("gamma").get<double>()};
        }
    }
    return step;
}

JudgeSpec judge_from_name(const std::string& name, double param) {
    if (name == "slot0") return JudgeSpec::slot0();
    if (name == "sticky") return JudgeSpec::anchor_sticky(param);
    if (name == "oracle") return JudgeSpec::oracle();
    if (name == "noisy") return JudgeSpec::noisy_oracle(param);
    throw DomainError("unknown judge: " + name);
}

int run_simulate(const SimulateOpts& opts) {
    OutputWriter writer(opts.out);
    std::vector<std::string> inputs;

    BaselineAccuracy baseline = BaselineAccuracy::constant(opts.p0);
    StepProfile step1 = StepProfile::constant({opts.c, opts.gamma});
    StepProfile step2 = StepProfile::constant({opts.c2, opts.gamma2});
    step2.history = opts.history == "anchor_haunted" ? HistoryRule::AnchorHaunted
                                                     : HistoryRule::Markov;
    step2.anchor_shift = opts.anchor_shift;
    if (!opts.profile_path.empty()) {
        std::ifstream in(opts.profile_path);
        if (!in) throw ParseError("cannot open " + opts.profile_path);
        json profile;
        try {
            profile = json::parse(in);
        } catch (const json::exception& e) {
            throw ParseError("invalid profile JSON: " + std::string(e.what()));
        }
        if (profile.contains("baseline")) baseline = baseline_from_json(profile["baseline"]);
        if (profile.contains("step1")) step1 = step_from_json(profile["step1"]);
        if (profile.contains("step2")) step2 = step_from_json(profile["step2"]);
        inputs.push_back(opts.profile_path);
    }

    std::vector<PairedRecord> all_records;
    std::vector<Task> all_tasks;
    for (std::int64_t seed : parse_int_list(opts.seeds)) {
        const auto tasks = standard_suite(seed, opts.n_per_slice);
        std::vector<PairedRecord> records;
        if (opts.regime == "alt") {
            records = simulate_protocol(tasks, baseline, step1, opts.sim_seed,
                                        opts.workers);
        } else if (opts.regime == "stack") {
            records = simulate_stack(tasks, baseline, step1, step2, opts.sim_seed,
                                     opts.workers);
        } else if (opts.regime == "judgek") {
            std::optional<std::int64_t> shuffle;
            if (opts.posshuffle_seed >= 0) shuffle = opts.posshuffle_seed;
            records = simulate_judgek(tasks, opts.per_candidate_acc, opts.k,
                                      judge_from_name(opts.judge, opts.judge_param),
                                      opts.sim_seed, shuffle, opts.workers);
        } else {
            throw DomainError("unknown regime: " + opts.regime);
        }
        all_records.insert(all_records.end(), records.begin(), records.end());
        if (opts.dump_tasks) {
            all_tasks.insert(all_tasks.end(), tasks.begin(), tasks.end());
        }
    }

    std::string log;
    for (const auto& rec : all_records) log += serialize_record(rec) + "\n";
    writer.write_text("log.jsonl", log);
    if (opts.dump_tasks) {
        std::string dump;
        for (const auto& task : all_tasks) dump += task_to_json(task).dump() + "\n";
        writer.write_text("tasks.jsonl", dump);
    }

    json config;
    config["seeds"] = opts.seeds;
    config["n_per_slice"] = opts.n_per_slice;
    config["regime"] = opts.regime;
    config["profile"] = opts.profile_path;
    config["p0"] = opts.p0;
    config["step1"] = {{"c", opts.c}, {"gamma", opts.gamma}};
    config["step2"] = {{"c", opts.c2},
                       {"gamma", opts.gamma2},
                       {"history", opts.history},
                       {"anchor_shift", opts.anchor_shift}};
    config["k"] = opts.k;
    config["per_candidate_acc"] = opts.per_candidate_acc;
    config["judge"] = opts.judge;
    config["judge_param"] = opts.judge_param;
    config["sim_seed"] = opts.sim_seed;
    config["posshuffle_seed"] = opts.posshuffle_seed;
    writer.finish("simulate", config, inputs);
    return 0;
}

// ---- estimate ----------------------------------------------------------

struct EstimateOpts {
    std::string input;
    std::string out;
    std::string smoothing = "jeffreys";
    double level = 0.95;
    std::string feature;
    int bins = 5;
    std::string edges;
};

int run_estimate(const EstimateOpts& opts) {
    OutputWriter writer(opts.out);
    auto records = read_jsonl(opts.input);
    const DatasetSummary summary = validate_dataset(records);
    maybe_rebin(records, opts.feature, opts.bins, opts.edges);

    EstimateOptions est;
    est.smoothing = parse_smoothing(opts.smoothing);
    est.interval_level = opts.level;
    const SlicedChannels sliced = estimate_sliced(records, slice_field(), est);
    writer.write_report("channels", sliced.to_report());
    writer.write_json("dataset_summary.json", summary.to_json());

    json config;
    config["input"] = opts.input;
    config["smoothing"] = opts.smoothing;
    config["level"] = opts.level;
    config["slicing"] = slice_options_config(opts.feature, opts.bins, opts.edges);
    writer.finish("estimate", config, {opts.input});
    return 0;
}

// ---- predict -----------------------------------------------------------

struct PredictOpts {
    std::string input;
    std::string out;
    std::string smoothing = "jeffreys";
    std::string p0_list;
    std::string target;
};

int run_predict(const PredictOpts& opts) {
    OutputWriter writer(opts.out);
    const auto calibration = load_records(opts.input);
    EstimateOptions est;
    est.smoothing = parse_smoothing(opts.smoothing);
    const SlicedChannels cal = estimate_sliced(calibration, slice_field(), est);

    AuditReport report;
    report.title = "one-step predictions";
    report.columns = {"source", "slice", "p0", "c_hat", "gamma_hat", "p1_pred", "gain"};
    auto add_prediction = [&](const std::string& source, const std::string& slice,
                              double p0, const ChannelEstimate& channel) {
        report.add_row({source, slice, p0, *channel.c_hat, *channel.gamma_hat,
                        predict_post(p0, channel), gain(p0, channel)});
    };
    std::vector<std::string> inputs = {opts.input};
    if (!opts.p0_list.empty()) {
        for (double p0 : parse_double_list(opts.p0_list)) {
            add_prediction("flag", "pooled", p0, cal.pooled);
        }
    }
    if (!opts.target.empty()) {
        const auto target = load_records(opts.target);
        inputs.push_back(opts.target);
        struct Acc {
            std::int64_t n = 0, pre = 0;
        };
        std::map<std::string, Acc> accs;
        Acc all;
        for (const auto& rec : target) {
            ++all.n;
            all.pre += rec.e0;
            if (rec.slice) {
                auto& a = accs[*rec.slice];
                ++a.n;
                a.pre += rec.e0;
            }
        }
        add_prediction("target", "ALL",
                       static_cast<double>(all.pre) / static_cast<double>(all.n),
                       cal.pooled);
        for (const auto& [slice, a] : accs) {
            const auto chan = cal.by_slice.find(slice);
            if (chan == cal.by_slice.end() || !chan->second.complete()) {
                report.notes.push_back("slice " + slice + ": no calibration channel");
                continue;
            }
            add_prediction("target", slice,
                           static_cast<double>(a.pre) / static_cast<double>(a.n),
                           chan->second);
        }
    }
    if (report.rows.empty()) {
        throw DomainError("predict needs --p0 values or a --target log");
    }
    writer.write_report("predictions", report);

    json config;
    config["input"] = opts.input;
    config["smoothing"] = opts.smoothing;
    config["p0"] = opts.p0_list;
    config["target"] = opts.target;
    writer.finish("predict", config, inputs);
    return 0;
}

// ---- phase -------------------------------------------------------------

struct PhaseOpts {
    std::string input;
    std::string out;
    std::string smoothing = "jeffreys";
    std::string baselines = "0.5,0.9";
    bool svg = false;
};

int run_phase(const PhaseOpts& opts) {
    OutputWriter writer(opts.out);
    const auto records = load_records(opts.input);
    EstimateOptions est;
    est.smoothing = parse_smoothing(opts.smoothing);
    const SlicedChannels sliced = estimate_sliced(records, slice_field(), est);

    std::vector<std::pair<std::string, ChannelEstimate>> channels;
    channels.emplace_back("pooled", sliced.pooled);
    for (const auto& [label, channel] : sliced.by_slice) {
        channels.emplace_back(label, channel);
    }
    const auto baselines = parse_double_list(opts.baselines);
    writer.write_report("phase", phase_plane_table(channels, baselines));

    if (opts.svg) {
        std::vector<ScatterPoint> points;
        for (const auto& [label, channel] : channels) {
            if (!channel.complete()) continue;
            points.push_back({*channel.gamma_hat, *channel.c_hat, label});
        }
        std::vector<Ray> rays;
        for (double p : baselines) {
            if (p >= 1.0) continue;
            rays.push_back({breakeven_factor(p), "p=" + format_double(p, 3)});
        }
        writer.write_text("phase.svg", phase_scatter_svg(points, rays));
    }

    json config;
    config["input"] = opts.input;
    config["smoothing"] = opts.smoothing;
    config["baselines"] = opts.baselines;
    config["svg"] = opts.svg;
    writer.finish("phase", config, {opts.input});
    return 0;
}

// ---- holdout -----------------------------------------------------------

struct HoldoutOpts {
    std::string input;
    std::string out;
    std::string smoothing = "jeffreys";
    std::string conditioning = "both";
};

int run_holdout(const HoldoutOpts& opts) {
    OutputWriter writer(opts.out);
    const auto records = load_records(opts.input);
    EstimateOptions est;
    est.smoothing = parse_smoothing(opts.smoothing);
    const TransferResult result = seed_holdout(
        group_by_seed(records), parse_conditioning(opts.conditioning), est);
    writer.write_report("transfer", result.to_report());

    json config;
    config["input"] = opts.input;
    config["smoothing"] = opts.smoothing;
    config["conditioning"] = opts.conditioning;
    writer.finish("holdout", config, {opts.input});
    return 0;
}

// ---- mixshift ----------------------------------------------------------

struct MixshiftOpts {
    std::string input;
    std::string target;
    std::string scenarios;
    std::string out;
    std::string smoothing = "jeffreys";
    std::string conditioning = "both";
};

MixtureWeights weights_from_json(const json& j) {
    MixtureWeights weights;
    for (const auto& [slice, w] : j.items()) {
        weights.w[slice] = w.get<double>();
    }
    return weights;
}

int run_mixshift(const MixshiftOpts& opts) {
    OutputWriter writer(opts.out);
    const auto calibration = load_records(opts.input);
    const auto target = load_records(opts.target);

    std::ifstream in(opts.scenarios);
    if (!in) throw ParseError("cannot open " + opts.scenarios);
    json spec;
    try {
        spec = json::parse(in);
    } catch (const json::exception& e) {
        throw ParseError("invalid scenarios JSON: " + std::string(e.what()));
    }
    std::vector<MixtureScenario> scenarios;
    for (const auto& entry : spec.at("scenarios")) {
        MixtureScenario scenario;
        scenario.name = entry.at("name").get<std::string>();
        scenario.target = weights_from_json(entry.at("target"));
        if (entry.contains("calibration")) {
            scenario.calibration = weights_from_json(entry["calibration"]);
        }
        scenarios.push_back(std::move(scenario));
    }

    EstimateOptions est;
    est.smoothing = parse_smoothing(opts.smoothing);
    const auto result = mixture_stress(calibration, target, scenarios,
                                       parse_conditioning(opts.conditioning), est);
    writer.write_report("mixshift", result.to_report());

    json config;
    config["input"] = opts.input;
    config["target"] = opts.target;
    config["scenarios"] = opts.scenarios;
    config["smoothing"] = opts.smoothing;
    config["conditioning"] = opts.conditioning;
    writer.finish("mixshift", config, {opts.input, opts.target, opts.scenarios});
    return 0;
}

// ---- split -------------------------------------------------------------

struct SplitOpts {
    std::string input;
    std::string out;
    std::string smoothing = "jeffreys";
    std::string fractions = "0.5";
    int repeats = 200;
    std::int64_t seed = 0;
};

int run_split(const SplitOpts& opts) {
    OutputWriter writer(opts.out);
    const auto records = load_records(opts.input);
    EstimateOptions est;
    est.smoothing = parse_smoothing(opts.smoothing);

    AuditReport report;
    report.title = "split transfer";
    report.columns = {"frac", "n_train", "n_test", "repeats", "mae",
                      "bias", "sd",      "p10",    "p50",     "p90"};
    for (double fraction : parse_double_list(opts.fractions)) {
        const auto result =
            split_transfer(records, fraction, opts.repeats, opts.seed, est);
        report.add_row({result.train_fraction, result.n_train, result.n_test,
                        static_cast<std::int64_t>(result.repeats), result.mae,
                        result.bias, result.sd, result.p10, result.p50, result.p90});
        if (result.skipped > 0) {
            report.notes.push_back("frac " + format_double(fraction, 3) + ": " +
                                   std::to_string(result.skipped) +
                                   " repeat(s) skipped");
        }
    }
    writer.write_report("split", report);

    json config;
    config["input"] = opts.input;
    config["smoothing"] = opts.smoothing;
    config["fractions"] = opts.fractions;
    config["repeats"] = opts.repeats;
    config["seed"] = opts.seed;
    writer.finish("split", config, {opts.input});
    return 0;
}

// ---- converge ----------------------------------------------------------

struct ConvergeOpts {
    std::string input;
    std::string out;
    std::string grid;
    int permutations = 50;
    std::int64_t seed = 0;
};

int run_converge(const ConvergeOpts& opts) {
    OutputWriter writer(opts.out);
    const auto records = load_records(opts.input);

    std::vector<std::size_t> grid;
    if (!opts.grid.empty()) {
        for (std::int64_t g : parse_int_list(opts.grid)) {
            grid.push_back(static_cast<std::size_t>(g));
        }
    } else {
        // Halving prefix grid down to 25 items.
        for (std::size_t g = records.size(); g >= 25; g /= 2) grid.push_back(g);
        std::reverse(grid.begin(), grid.end());
    }
    const auto result = convergence_audit(records, opts.permutations, opts.seed, grid);
    writer.write_report("converge", result.to_report());

    json config;
    config["input"] = opts.input;
    config["grid"] = opts.grid;
    config["permutations"] = opts.permutations;
    config["seed"] = opts.seed;
    writer.finish("converge", config, {opts.input});
    return 0;
}

// ---- compose -----------------------------------------------------------

struct ComposeOpts {
    std::string input;
    std::string out;
    std::string smoothing = "jeffreys";
    int resamples = 200;
    std::int64_t seed = 0;
    std::int64_t split_seed = -1;  // <0: no stacked transfer
    std::string conditioning = "both";
};

int run_compose(const ComposeOpts& opts) {
    OutputWriter writer(opts.out);
    const auto records = load_records(opts.input);
    const Smoothing smoothing = parse_smoothing(opts.smoothing);

    AuditReport gaps;
    gaps.title = "composition gaps";
    gaps.columns = {"slice", "seed", "n",      "mean_gap", "max_gap", "mean_lo",
                    "mean_hi", "max_lo", "max_hi", "outside_band", "flags"};
    const auto by_seed = group_by_seed(records);

    // Per-(seed, slice) audits plus a pooled row per seed; a slice is flagged
    // persistent when its max gap exceeds the null band in every seed.
    std::map<std::string, int> outside_count, seen_count;
    auto add_gap_row = [&](const std::string& slice, const std::string& seed,
                           std::span<const PairedRecord> group) {
        const CompositionGap gap =
            composition_gap(group, smoothing, opts.resamples, opts.seed);
        const bool outside = gap.max_band && gap.max_gap > gap.max_band->hi;
        gaps.add_row({slice, seed, static_cast<std::int64_t>(group.size()),
                      gap.mean_gap, gap.max_gap,
                      gap.mean_band ? Cell{gap.mean_band->lo} : Cell{std::monostate{}},
                      gap.mean_band ? Cell{gap.mean_band->hi} : Cell{std::monostate{}},
                      gap.max_band ? Cell{gap.max_band->lo} : Cell{std::monostate{}},
                      gap.max_band ? Cell{gap.max_band->hi} : Cell{std::monostate{}},
                      std::string(outside ? "yes" : "no"),
                      std::string(gap.mle_fallback ? "jeffreys_fallback" : "")});
        if (slice != "pooled") {
            ++seen_count[slice];
            outside_count[slice] += outside ? 1 : 0;
        }
    };
    for (const auto& [seed, seed_records] : by_seed) {
        add_gap_row("pooled", std::to_string(seed), seed_records);
        std::map<std::string, std::vector<PairedRecord>> groups;
        for (const auto& rec : seed_records) {
            if (rec.slice) groups[*rec.slice].push_back(rec);
        }
        for (const auto& [slice, group] : groups) {
            add_gap_row(slice, std::to_string(seed), group);
        }
    }
    for (const auto& [slice, seen] : seen_count) {
        if (seen == static_cast<int>(by_seed.size()) &&
            outside_count[slice] == seen) {
            gaps.notes.push_back("persistent gap in slice " + slice +
                                 " (outside the null band in every seed)");
        }
    }
    writer.write_report("gap", gaps);

    if (opts.split_seed >= 0) {
        std::vector<PairedRecord> train, test;
        for (const auto& [seed, seed_records] : by_seed) {
            auto& side = seed == opts.split_seed ? test : train;
            side.insert(side.end(), seed_records.begin(), seed_records.end());
        }
        if (train.empty() || test.empty()) {
            throw FoldError("split seed " + std::to_string(opts.split_seed) +
                            " leaves an empty side");
        }
        EstimateOptions est;
        est.smoothing = smoothing;
        const TransferResult stacked =
            stacked_transfer(train, test, parse_conditioning(opts.conditioning), est,
                             std::to_string(opts.split_seed));
        writer.write_report("stacked", stacked.to_report());
    }

    json config;
    config["input"] = opts.input;
    config["smoothing"] = opts.smoothing;
    config["resamples"] = opts.resamples;
    config["seed"] = opts.seed;
    config["split_seed"] = opts.split_seed;
    config["conditioning"] = opts.conditioning;
    writer.finish("compose", config, {opts.input});
    return 0;
}

// ---- judge-audit -------------------------------------------------------

struct JudgeAuditOpts {
    std::string input;
    std::string compare;
    std::string out;
    std::string smoothing = "jeffreys";
    bool svg = false;
};

int run_judge_audit(const JudgeAuditOpts& opts) {
    OutputWriter writer(opts.out);
    const auto baseline = load_records(opts.input);
    EstimateOptions est;
    est.smoothing = parse_smoothing(opts.smoothing);

    std::vector<std::pair<std::string, std::vector<PairedRecord>>> settings;
    settings.emplace_back("baseline", baseline);
    std::vector<std::string> inputs = {opts.input};
    if (!opts.compare.empty()) {
        settings.emplace_back("posshuffle", load_records(opts.compare));
        inputs.push_back(opts.compare);
    }

    AuditReport selection;
    selection.title = "judge-K selection summary";
    selection.columns = {"setting", "n",   "p0",    "p1",       "p_oracle",
                         "gap",     "c_hat", "gamma_hat"};
    AuditReport strata_report;
    strata_report.title = "candidate-set strata";
    strata_report.columns = {"setting", "stratum", "n",     "p0",       "p1",
                             "p_oracle", "gap",    "c_hat", "gamma_hat"};
    for (const auto& [name, records] : settings) {
        const SelectionSummary summary = selection_summary(records, est);
        selection.add_row({name, summary.n, summary.p0, summary.p1, summary.p_oracle,
                           summary.gap,
                           summary.channel.c_hat ? Cell{*summary.channel.c_hat}
                                                 : Cell{std::monostate{}},
                           summary.channel.gamma_hat
                               ? Cell{*summary.channel.gamma_hat}
                               : Cell{std::monostate{}}});
        const StrataResult strata = stratify_by_structure(records, est);
        for (const auto& row : strata.strata) {
            const auto& s = row.summary;
            strata_report.add_row(
                {name, std::string(stratum_name(row.stratum)), s.n, s.p0, s.p1,
                 s.p_oracle, s.gap,
                 s.channel.c_hat ? Cell{*s.channel.c_hat} : Cell{std::monostate{}},
                 s.channel.gamma_hat ? Cell{*s.channel.gamma_hat}
                                     : Cell{std::monostate{}}});
        }
        if (strata.excluded > 0) {
            strata_report.notes.push_back(name + ": " + std::to_string(strata.excluded) +
                                          " record(s) without candidate_answers");
        }
    }
    writer.write_report("selection", selection);
    writer.write_report("strata", strata_report);

    const PositionStats base_stats = position_stats(baseline);
    if (settings.size() == 2) {
        const PositionStats shuffled_stats = position_stats(settings[1].second);
        writer.write_report("positions", position_compare(base_stats, shuffled_stats));
        if (opts.svg) {
            writer.write_text("positions.svg",
                              index_distribution_svg(base_stats.original_index_dist,
                                                     shuffled_stats.original_index_dist,
                                                     base_stats.uniform_ref));
        }
    } else {
        writer.write_report("positions", base_stats.to_report());
        if (opts.svg) {
            writer.write_text("positions.svg",
                              index_distribution_svg(base_stats.original_index_dist, {},
                                                     base_stats.uniform_ref));
        }
    }

    json config;
    config["input"] = opts.input;
    config["compare"] = opts.compare;
    config["smoothing"] = opts.smoothing;
    config["svg"] = opts.svg;
    writer.finish("judge-audit", config, inputs);
    return 0;
}

// ---- gate --------------------------------------------------------------

struct GateOpts {
    std::string input;
    std::string out;
    std::string smoothing = "jeffreys";
    double threshold = 0.0;
    std::string feature;
    int bins = 5;
    std::string edges;
};

int run_gate(const GateOpts& opts) {
    OutputWriter writer(opts.out);
    auto records = load_records(opts.input);
    maybe_rebin(records, opts.feature, opts.bins, opts.edges);
    EstimateOptions est;
    est.smoothing = parse_smoothing(opts.smoothing);
    const GatePolicyResult result =
        evaluate_policy(group_by_seed(records), slice_field(), opts.threshold, est);
    writer.write_report("gate", result.to_report());
    writer.write_json("gates.json", result.gate_file());

    json config;
    config["input"] = opts.input;
    config["smoothing"] = opts.smoothing;
    config["threshold"] = opts.threshold;
    config["slicing"] = slice_options_config(opts.feature, opts.bins, opts.edges);
    writer.finish("gate", config, {opts.input});
    return 0;
}

// ---- wiring ------------------------------------------------------------

int dispatch(int argc, char** argv) {
    CLI::App app{"chanaudit: paired-outcome protocol audit toolkit"};
    app.require_subcommand(1);
    int rc = 0;

    SimulateOpts sim;
    auto* sim_cmd = app.add_subcommand(
        "simulate", "generate synthetic paired logs with known channels");
    sim_cmd->add_option("--out", sim.out, "output directory")->required();
    sim_cmd->add_option("--seeds", sim.seeds, "root seeds (comma list)");
    sim_cmd->add_option("--n-per-slice", sim.n_per_slice, "tasks per slice");
    sim_cmd->add_option("--regime", sim.regime, "alt | stack | judgek");
    sim_cmd->add_option("--profile", sim.profile_path, "JSON step/baseline profile");
    sim_cmd->add_option("--p0", sim.p0, "baseline accuracy (all slices)");
    sim_cmd->add_option("--c", sim.c, "step-1 correction rate");
    sim_cmd->add_option("--gamma", sim.gamma, "step-1 corruption rate");
    sim_cmd->add_option("--c2", sim.c2, "step-2 correction rate");
    sim_cmd->add_option("--gamma2", sim.gamma2, "step-2 corruption rate");
    sim_cmd->add_option("--history", sim.history, "markov | anchor_haunted");
    sim_cmd->add_option("--anchor-shift", sim.anchor_shift,
                        "step-2 rate shift when e0 = 1");
    sim_cmd->add_option("--k", sim.k, "judge-K candidate count");
    sim_cmd->add_option("--per-candidate-acc", sim.per_candidate_acc,
                        "judge-K per-candidate accuracy");
    sim_cmd->add_option("--judge", sim.judge, "slot0 | sticky | oracle | noisy");
    sim_cmd->add_option("--judge-param", sim.judge_param,
                        "theta for sticky, eps for noisy");
    sim_cmd->add_option("--seed", sim.sim_seed, "simulation seed")->required();
    sim_cmd->add_option("--posshuffle-seed", sim.posshuffle_seed,
                        "apply posshuffle before judging (judgek)");
    sim_cmd->add_option("--workers", sim.workers, "worker threads");
    sim_cmd->add_flag("--dump-tasks", sim.dump_tasks, "also write tasks.jsonl");
    sim_cmd->callback([&] { rc = run_simulate(sim); });

    EstimateOpts est;
    auto* est_cmd =
        app.add_subcommand("estimate", "estimate (c, gamma) channels from a log");
    est_cmd->add_option("--input", est.input, "JSONL log")->required();
    est_cmd->add_option("--out", est.out, "output directory")->required();
    est_cmd->add_option("--smoothing", est.smoothing, "jeffreys | mle");
    est_cmd->add_option("--level", est.level, "credible level");
    est_cmd->add_option("--feature", est.feature, "bin on this proxy feature");
    est_cmd->add_option("--bins", est.bins, "quantile bin count");
    est_cmd->add_option("--edges", est.edges, "fixed bin edges (comma list)");
    est_cmd->callback([&] { rc = run_estimate(est); });

    PredictOpts pred;
    auto* pred_cmd =
        app.add_subcommand("predict", "one-step predictions from a calibrated channel");
    pred_cmd->add_option("--input", pred.input, "calibration JSONL log")->required();
    pred_cmd->add_option("--out", pred.out, "output directory")->required();
    pred_cmd->add_option("--smoothing", pred.smoothing, "jeffreys | mle");
    pred_cmd->add_option("--p0", pred.p0_list, "baseline accuracies (comma list)");
    pred_cmd->add_option("--target", pred.target, "target JSONL log");
    pred_cmd->callback([&] { rc = run_predict(pred); });

    PhaseOpts phase;
    auto* phase_cmd =
        app.add_subcommand("phase", "phase-plane table with break-even rays");
    phase_cmd->add_option("--input", phase.input, "JSONL log")->required();
    phase_cmd->add_option("--out", phase.out, "output directory")->required();
    phase_cmd->add_option("--smoothing", phase.smoothing, "jeffreys | mle");
    phase_cmd->add_option("--baselines", phase.baselines, "baseline accuracies");
    phase_cmd->add_flag("--svg", phase.svg, "write phase.svg");
    phase_cmd->callback([&] { rc = run_phase(phase); });

    HoldoutOpts hold;
    auto* hold_cmd =
        app.add_subcommand("holdout", "leave-one-seed-out transfer evaluation");
    hold_cmd->add_option("--input", hold.input, "multi-seed JSONL log")->required();
    hold_cmd->add_option("--out", hold.out, "output directory")->required();
    hold_cmd->add_option("--smoothing", hold.smoothing, "jeffreys | mle");
    hold_cmd->add_option("--conditioning", hold.conditioning, "pooled | sliced | both");
    hold_cmd->callback([&] { rc = run_holdout(hold); });

    MixshiftOpts mix;
    auto* mix_cmd =
        app.add_subcommand("mixshift", "counterfactual mixture-shift stress test");
    mix_cmd->add_option("--input", mix.input, "calibration JSONL log")->required();
    mix_cmd->add_option("--target", mix.target, "target JSONL log")->required();
    mix_cmd->add_option("--scenarios", mix.scenarios, "scenario JSON file")->required();
    mix_cmd->add_option("--out", mix.out, "output directory")->required();
    mix_cmd->add_option("--smoothing", mix.smoothing, "jeffreys | mle");
    mix_cmd->add_option("--conditioning", mix.conditioning, "pooled | sliced | both");
    mix_cmd->callback([&] { rc = run_mixshift(mix); });

    SplitOpts split;
    auto* split_cmd =
        app.add_subcommand("split", "repeated random within-pool transfer");
    split_cmd->add_option("--input", split.input, "JSONL log")->required();
    split_cmd->add_option("--out", split.out, "output directory")->required();
    split_cmd->add_option("--smoothing", split.smoothing, "jeffreys | mle");
    split_cmd->add_option("--fractions", split.fractions, "train fractions");
    split_cmd->add_option("--repeats", split.repeats, "random splits per fraction");
    split_cmd->add_option("--seed", split.seed, "rng seed")->required();
    split_cmd->callback([&] { rc = run_split(split); });

    ConvergeOpts conv;
    auto* conv_cmd =
        app.add_subcommand("converge", "order-robust convergence audit");
    conv_cmd->add_option("--input", conv.input, "JSONL log")->required();
    conv_cmd->add_option("--out", conv.out, "output directory")->required();
    conv_cmd->add_option("--grid", conv.grid, "prefix sizes (comma list)");
    conv_cmd->add_option("--permutations", conv.permutations, "permutation count");
    conv_cmd->add_option("--seed", conv.seed, "rng seed")->required();
    conv_cmd->callback([&] { rc = run_converge(conv); });

    ComposeOpts comp;
    auto* comp_cmd =
        app.add_subcommand("compose", "two-step composition-gap audit");
    comp_cmd->add_option("--input", comp.input, "stack JSONL log (e0,e1,e2)")
        ->required();
    comp_cmd->add_option("--out", comp.out, "output directory")->required();
    comp_cmd->add_option("--smoothing", comp.smoothing, "jeffreys | mle");
    comp_cmd->add_option("--resamples", comp.resamples, "null-band resamples");
    comp_cmd->add_option("--seed", comp.seed, "rng seed")->required();
    comp_cmd->add_option("--split-seed", comp.split_seed,
                         "also run stacked transfer holding out this seed");
    comp_cmd->add_option("--conditioning", comp.conditioning,
                         "pooled | sliced | both");
    comp_cmd->callback([&] { rc = run_compose(comp); });

    JudgeAuditOpts judge;
    auto* judge_cmd =
        app.add_subcommand("judge-audit", "judge-K selection and position-bias audit");
    judge_cmd->add_option("--input", judge.input, "judge-K JSONL log")->required();
    judge_cmd->add_option("--compare", judge.compare,
                          "second setting (e.g. posshuffle) to compare");
    judge_cmd->add_option("--out", judge.out, "output directory")->required();
    judge_cmd->add_option("--smoothing", judge.smoothing, "jeffreys | mle");
    judge_cmd->add_flag("--svg", judge.svg, "write positions.svg");
    judge_cmd->callback([&] { rc = run_judge_audit(judge); });

    GateOpts gate;
    auto* gate_cmd =
        app.add_subcommand("gate", "leave-one-seed-out gain gating");
    gate_cmd->add_option("--input", gate.input, "multi-seed JSONL log")->required();
    gate_cmd->add_option("--out", gate.out, "output directory")->required();
    gate_cmd->add_option("--smoothing", gate.smoothing, "jeffreys | mle");
    gate_cmd->add_option("--threshold", gate.threshold, "gain threshold");
    gate_cmd->add_option("--feature", gate.feature, "bin on this proxy feature");
    gate_cmd->add_option("--bins", gate.bins, "quantile bin count");
    gate_cmd->add_option("--edges", gate.edges, "fixed bin edges (comma list)");
    gate_cmd->callback([&] { rc = run_gate(gate); });

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 2;  // bad flags are input errors
    }
    return rc;
}

}  // namespace

}  // namespace chanaudit::cli

namespace {

void emit_error(const char* type, const std::string& message) {
    nlohmann::json err;
    err["error"] = {{"type", type}, {"message", message}};
    std::cerr << err.dump() << "\n";
}

}  // namespace

int main(int argc, char** argv) {
    using namespace chanaudit;
    try {
        return cli::dispatch(argc, argv);
    } catch (const ParseError& e) {
        emit_error("parse", e.what());
        return 2;
    } catch (const SchemaError& e) {
        emit_error("schema", e.what());
        return 2;
    } catch (const DuplicateError& e) {
        emit_error("duplicate", e.what());
        return 2;
    } catch (const MissingFieldError& e) {
        emit_error("missing_field", e.what());
        return 2;
    } catch (const Error& e) {
        emit_error("analysis", e.what());
        return 1;
    } catch (const std::exception& e) {
        emit_error("internal", e.what());
        return 1;
    }
}
