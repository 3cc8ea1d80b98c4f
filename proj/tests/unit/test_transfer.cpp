#include "doctest.h"

#include <cmath>

#include "chanaudit/bench.hpp"
#include "chanaudit/stats.hpp"
#include "chanaudit/transfer.hpp"

using namespace chanaudit;

namespace {

StepProfile depth_step() {
    StepProfile step;
    const double cs[5] = {0.8, 0.65, 0.5, 0.35, 0.15};
    const double gs[5] = {0.05, 0.10, 0.15, 0.20, 0.30};
    for (int d = 1; d <= 5; ++d) {
        step.by_slice["depth_" + std::to_string(d)] = {cs[d - 1], gs[d - 1]};
    }
    step.by_slice["2x2"] = {0.4, 0.12};
    return step;
}

BaselineAccuracy depth_baseline() {
    BaselineAccuracy acc;
    const double ps[5] = {0.9, 0.8, 0.6, 0.4, 0.3};
    for (int d = 1; d <= 5; ++d) {
        acc.by_slice["depth_" + std::to_string(d)] = ps[d - 1];
    }
    acc.by_slice["2x2"] = 0.55;
    return acc;
}

std::map<std::int64_t, std::vector<PairedRecord>> simulated_seeds(
    int n_per_slice, std::initializer_list<std::int64_t> seeds) {
    std::map<std::int64_t, std::vector<PairedRecord>> datasets;
    for (std::int64_t seed : seeds) {
        datasets[seed] = simulate_protocol(standard_suite(seed, n_per_slice),
                                           depth_baseline(), depth_step(), 1000 + seed);
    }
    return datasets;
}

}  // namespace

TEST_CASE("self-transfer residuals vanish under MLE") {
    auto datasets = simulated_seeds(100, {123});
    // Duplicate the same records as a second "seed": each fold's calibration
    // equals its target, so the MLE closure is exact.
    datasets[124] = datasets[123];
    for (auto& rec : datasets[124]) rec.root_seed = 124;

    EstimateOptions opts;
    opts.smoothing = Smoothing::Mle;
    const TransferResult result = seed_holdout(datasets, Conditioning::Both, opts);
    REQUIRE_FALSE(result.rows.empty());
    // Each channel closes exactly at its own granularity: the pooled fit on
    // the fold marginal, the slice fits on their slices.
    for (const auto& row : result.rows) {
        if (row.slice == "ALL") {
            CHECK(std::fabs(*row.resid_pooled) <= 1e-12);
        } else {
            CHECK(std::fabs(*row.resid_sliced) <= 1e-12);
        }
    }
    REQUIRE(result.overall_sliced.has_value());
    CHECK(result.overall_sliced->mae <= 1e-12);
}

TEST_CASE("seed holdout tracks stable channels within noise") {
    const auto datasets = simulated_seeds(500, {123, 124, 125});
    const TransferResult result = seed_holdout(datasets, Conditioning::Both);
    REQUIRE(result.folds.size() == 3);
    REQUIRE(result.overall_sliced.has_value());
    // Residual scale: binomial noise at 500 records/slice plus calibration
    // error from 1000 records/slice; well under 0.06 in expectation.
    CHECK(result.overall_sliced->mae < 0.06);
    CHECK(std::fabs(result.overall_sliced->bias) < 0.04);
    CHECK(result.overall_sliced->mae >= std::fabs(result.overall_sliced->bias));
    for (const auto& fold : result.folds) {
        REQUIRE(fold.sliced.has_value());
        CHECK(fold.sliced->n_slices == 6);
    }
}

TEST_CASE("seed holdout rejects degenerate inputs") {
    auto datasets = simulated_seeds(20, {123});
    CHECK_THROWS_AS(seed_holdout(datasets, Conditioning::Both), DomainError);
    datasets[124] = {};
    CHECK_THROWS_AS(seed_holdout(datasets, Conditioning::Both), FoldError);
}

TEST_CASE("mixture stress with empirical target weights matches the holdout wbias") {
    const auto datasets = simulated_seeds(200, {123, 124});
    const auto& cal = datasets.at(123);
    const auto& tgt = datasets.at(124);

    EstimateOptions opts;
    opts.smoothing = Smoothing::Mle;

    // Empirical target weights per slice.
    std::map<std::string, std::int64_t> counts;
    for (const auto& rec : tgt) ++counts[*rec.slice];
    MixtureScenario scenario;
    scenario.name = "empirical";
    for (const auto& [slice, n] : counts) {
        scenario.target.w[slice] = static_cast<double>(n);
    }

    const auto stress = mixture_stress(cal, tgt, {&scenario, 1}, Conditioning::Both, opts);
    REQUIRE(stress.rows.size() == 1);

    std::map<std::int64_t, std::vector<PairedRecord>> datasets_for_fold = {
        {123, cal}, {124, tgt}};
    const TransferResult holdout =
        seed_holdout(datasets_for_fold, Conditioning::Both, opts);
    const auto fold124 = std::find_if(holdout.folds.begin(), holdout.folds.end(),
                                      [](const FoldSummary& f) { return f.fold == "124"; });
    REQUIRE(fold124 != holdout.folds.end());
    REQUIRE(fold124->sliced.has_value());
    CHECK(*stress.rows[0].resid_sliced ==
          doctest::Approx(fold124->sliced->wbias).epsilon(1e-10));
}

TEST_CASE("matched uniform mixture on a homogeneous channel has near-zero residuals") {
    BaselineAccuracy acc = depth_baseline();
    const StepProfile step = StepProfile::constant({0.5, 0.1});
    const auto cal =
        simulate_protocol(standard_suite(123, 2000), acc, step, 1);
    const auto tgt =
        simulate_protocol(standard_suite(124, 2000), acc, step, 2);

    MixtureScenario scenario;
    scenario.name = "match";
    for (int d = 1; d <= 5; ++d) scenario.target.w["depth_" + std::to_string(d)] = 1.0;
    scenario.target.w["2x2"] = 1.0;

    const auto stress = mixture_stress(cal, tgt, {&scenario, 1}, Conditioning::Both);
    REQUIRE(stress.rows.size() == 1);
    CHECK(std::fabs(*stress.rows[0].resid_pooled) < 0.02);
    CHECK(std::fabs(*stress.rows[0].resid_sliced) < 0.02);
}

TEST_CASE("delta-focus mixtures expose pooled bias under heterogeneity") {
    const auto cal = simulate_protocol(standard_suite(123, 2000), depth_baseline(),
                                       depth_step(), 41);
    const auto tgt = simulate_protocol(standard_suite(124, 2000), depth_baseline(),
                                       depth_step(), 42);
    std::vector<MixtureScenario> scenarios;
    for (int d = 1; d <= 5; ++d) {
        MixtureScenario s;
        s.name = "focus_d" + std::to_string(d);
        s.target = MixtureWeights::delta("depth_" + std::to_string(d));
        scenarios.push_back(std::move(s));
    }
    const auto stress = mixture_stress(cal, tgt, scenarios, Conditioning::Both);
    int pooled_worse = 0;
    for (const auto& row : stress.rows) {
        if (std::fabs(*row.resid_pooled) > std::fabs(*row.resid_sliced)) ++pooled_worse;
    }
    CHECK(pooled_worse >= 4);
}

TEST_CASE("scenario weight on an empty slice raises") {
    const auto datasets = simulated_seeds(50, {123, 124});
    MixtureScenario scenario;
    scenario.name = "bad";
    scenario.target = MixtureWeights::delta("depth_99");
    CHECK_THROWS_AS(mixture_stress(datasets.at(123), datasets.at(124), {&scenario, 1},
                                   Conditioning::Both, EstimateOptions{}),
                    MissingSliceError);
}

TEST_CASE("split transfer under a deterministic channel has zero residuals") {
    // e1 == e0 everywhere, so any train fit gives (c, gamma) = (0, 0) under
    // MLE and the prediction equals the test baseline exactly.
    const auto records = simulate_protocol(standard_suite(123, 200),
                                           BaselineAccuracy::constant(0.5),
                                           StepProfile::constant({0.0, 0.0}), 7);
    EstimateOptions opts;
    opts.smoothing = Smoothing::Mle;
    const auto result = split_transfer(records, 0.5, 50, 99, opts);
    CHECK(result.skipped == 0);
    for (double r : result.residuals) CHECK(r == 0.0);
    CHECK(result.mae == 0.0);
}

TEST_CASE("split transfer statistics behave at matched scale") {
    const auto records = simulate_protocol(standard_suite(123, 220),
                                           BaselineAccuracy::constant(0.7),
                                           StepProfile::constant({0.3, 0.05}), 17);
    const auto result = split_transfer(records, 0.5, 200, 5);
    CHECK(result.n_train == 660);
    CHECK(result.n_test == 660);
    CHECK(std::fabs(result.bias) < 0.01);
    CHECK(result.mae > 0.0);
    CHECK(result.mae < 0.05);
    CHECK(result.p10 < result.p50);
    CHECK(result.p50 < result.p90);

    SUBCASE("MAE grows as the test side thins") {
        const auto wide = split_transfer(records, 0.5, 200, 5);
        const auto thin = split_transfer(records, 0.97, 200, 5);
        CHECK(thin.mae > wide.mae);
    }
    SUBCASE("same seed gives byte-identical reports") {
        const auto a = split_transfer(records, 0.3, 50, 12).to_report().to_csv();
        const auto b = split_transfer(records, 0.3, 50, 12).to_report().to_csv();
        CHECK(a == b);
    }
    SUBCASE("degenerate fractions raise") {
        CHECK_THROWS_AS(split_transfer(records, 0.0, 10, 1), DomainError);
        CHECK_THROWS_AS(split_transfer(records, 1.0, 10, 1), DomainError);
        std::vector<PairedRecord> tiny(records.begin(), records.begin() + 3);
        CHECK_THROWS_AS(split_transfer(tiny, 0.05, 10, 1), SplitError);
    }
}

TEST_CASE("standardized residuals are exact in-sample for the full set") {
    const auto records = simulate_protocol(standard_suite(123, 300),
                                           BaselineAccuracy::constant(0.6),
                                           StepProfile::constant({0.4, 0.1}), 3);
    EstimateOptions opts;
    opts.smoothing = Smoothing::Mle;
    // One slice covering everything: the pooled prediction closes exactly.
    const auto table = standardized_residuals(
        records, estimate_sliced(records, slice_field(), opts).pooled,
        [](const PairedRecord&) { return std::optional<std::string>("all"); });
    REQUIRE(table.rows.size() == 1);
    CHECK(std::fabs(table.rows[0].resid) <= 1e-12);
}

TEST_CASE("standardized residuals recover a planted slice offset") {
    // All slices share the channel except depth_5, whose corruption is
    // heavier; its residual against the homogeneous pooled fit is negative
    // and large relative to SE.
    StepProfile step = StepProfile::constant({0.4, 0.05});
    step.by_slice["depth_5"] = {0.4, 0.45};
    const auto records = simulate_protocol(standard_suite(123, 3000),
                                           BaselineAccuracy::constant(0.7), step, 13);
    const auto sliced = estimate_sliced(records, slice_field(), EstimateOptions{});
    const auto table = standardized_residuals(records, sliced.pooled);
    // The contaminated slice drags the pooled corruption estimate up, so the
    // clean slices sit above the pooled prediction and depth_5 well below it.
    bool found = false;
    for (const auto& row : table.rows) {
        if (row.slice != "depth_5") {
            CHECK(row.resid > 0.0);
            continue;
        }
        found = true;
        CHECK(row.resid < -0.02);
        CHECK(*row.z < -3.0);
        for (const auto& other : table.rows) {
            if (other.slice != "depth_5") CHECK(*row.z < *other.z);
        }
    }
    CHECK(found);

    SUBCASE("degenerate p1 omits z") {
        std::vector<PairedRecord> all_correct;
        for (int i = 0; i < 10; ++i) {
            PairedRecord rec;
            rec.task_id = "c" + std::to_string(i);
            rec.root_seed = 1;
            rec.regime = Regime::Alt;
            rec.slice = "s";
            rec.e0 = 1;
            rec.e1 = 1;
            all_correct.push_back(rec);
        }
        const auto degenerate =
            standardized_residuals(all_correct, sliced.pooled);
        REQUIRE(degenerate.rows.size() == 1);
        CHECK_FALSE(degenerate.rows[0].se.has_value());
        CHECK_FALSE(degenerate.rows[0].z.has_value());
    }
}

TEST_CASE("convergence audit: full prefix has zero band width") {
    const auto records = simulate_protocol(standard_suite(123, 100),
                                           BaselineAccuracy::constant(0.6),
                                           StepProfile::constant({0.5, 0.1}), 21);
    const std::size_t grid[] = {records.size()};
    const auto result = convergence_audit(records, 20, 8, grid);
    REQUIRE(result.rows.size() == 1);
    const auto& row = result.rows[0];
    CHECK(row.p0.hi - row.p0.lo == 0.0);
    CHECK(row.p1.hi - row.p1.lo == 0.0);
    CHECK(row.c_hat.hi - row.c_hat.lo == 0.0);
    // And the values equal the full-sample estimates.
    const auto counts = count_transitions(records, BitField::E0, BitField::E1);
    const auto est = estimate_channel(counts, Smoothing::Jeffreys);
    CHECK(row.c_hat.median == doctest::Approx(*est.c_hat).epsilon(1e-12));
}

TEST_CASE("convergence bands narrow at the root-n rate") {
    const auto records = simulate_protocol(standard_suite(123, 4000),
                                           BaselineAccuracy::constant(0.6),
                                           StepProfile::constant({0.5, 0.1}), 23);
    const std::size_t grid[] = {1000, 4000};
    const auto result = convergence_audit(records, 400, 15, grid);
    REQUIRE(result.rows.size() == 2);
    const double width_n = result.rows[0].p1.hi - result.rows[0].p1.lo;
    const double width_4n = result.rows[1].p1.hi - result.rows[1].p1.lo;
    // Quadrupling the prefix should halve the p-rate band, within 30%.
    const double ratio = width_4n / width_n;
    CHECK(ratio > 0.5 * 0.7);
    CHECK(ratio < 0.5 * 1.3);

    SUBCASE("grid beyond the pool raises") {
        const std::size_t bad[] = {records.size() + 1};
        CHECK_THROWS_AS(convergence_audit(records, 10, 1, bad), GridError);
    }
    SUBCASE("too few permutations raise") {
        const std::size_t ok[] = {100};
        CHECK_THROWS_AS(convergence_audit(records, 1, 1, ok), DomainError);
    }
}
