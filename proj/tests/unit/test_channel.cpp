#include "doctest.h"

#include <cmath>

#include "chanaudit/channel.hpp"
#include "chanaudit/rng.hpp"

using namespace chanaudit;

namespace {

// Independent incomplete-beta oracle. The Beta(a, b) CDF is computed by
// Simpson quadrature after the substitution t = sin^2(theta), which removes
// the endpoint singularities for a, b >= 1/2:
//   F(x) = int_0^asin(sqrt(x)) 2 sin^(2a-1) cos^(2b-1) dtheta / B(a, b).
double beta_cdf_quadrature(double x, double a, double b) {
    if (x <= 0.0) return 0.0;
    if (x >= 1.0) return 1.0;
    const double upper = std::asin(std::sqrt(x));
    const int n = 20000;  // even
    const double h = upper / n;
    auto f = [&](double theta) {
        return 2.0 * std::pow(std::sin(theta), 2.0 * a - 1.0) *
               std::pow(std::cos(theta), 2.0 * b - 1.0);
    };
    double acc = f(0.0) + f(upper);
    for (int i = 1; i < n; ++i) {
        acc += f(h * i) * (i % 2 == 1 ? 4.0 : 2.0);
    }
    const double integral = acc * h / 3.0;
    const double log_beta = std::lgamma(a) + std::lgamma(b) - std::lgamma(a + b);
    return integral / std::exp(log_beta);
}

double beta_quantile_quadrature(double q, double a, double b) {
    double lo = 0.0, hi = 1.0;
    for (int iter = 0; iter < 200; ++iter) {
        const double mid = (lo + hi) / 2.0;
        (beta_cdf_quadrature(mid, a, b) < q ? lo : hi) = mid;
    }
    return (lo + hi) / 2.0;
}

TransitionCounts counts(std::int64_t n00, std::int64_t n01, std::int64_t n10,
                        std::int64_t n11) {
    return {n00, n01, n10, n11};
}

}  // namespace

TEST_CASE("Jeffreys estimator matches the closed form") {
    const auto est = estimate_channel(counts(7, 3, 1, 9), Smoothing::Jeffreys);
    CHECK(*est.c_hat == doctest::Approx(3.5 / 11.0).epsilon(1e-12));
    CHECK(*est.gamma_hat == doctest::Approx(1.5 / 11.0).epsilon(1e-12));
    CHECK(est.n0 == 10);
    CHECK(est.n1 == 10);
    CHECK_FALSE(est.low_support);
}

TEST_CASE("zero-support counts give the prior mean, flagged") {
    const auto est = estimate_channel(counts(0, 0, 0, 0), Smoothing::Jeffreys);
    CHECK(*est.c_hat == 0.5);
    CHECK(*est.gamma_hat == 0.5);
    CHECK(est.c_zero_support);
    CHECK(est.gamma_zero_support);
    CHECK(est.low_support);
}

TEST_CASE("MLE leaves empty-support rates absent") {
    const auto est = estimate_channel(counts(5, 5, 0, 0), Smoothing::Mle);
    CHECK(*est.c_hat == 0.5);
    CHECK_FALSE(est.gamma_hat.has_value());
    CHECK(est.gamma_zero_support);
}

TEST_CASE("credible intervals match an independent quadrature oracle") {
    struct Case {
        std::int64_t s, n;
    };
    for (const Case c : {Case{0, 0}, Case{100, 100}, Case{50, 100}, Case{3, 10},
                         Case{1, 1000}, Case{999, 1000}}) {
        CAPTURE(c.s);
        CAPTURE(c.n);
        const Interval got = credible_interval(c.s, c.n, 0.95);
        const double a = static_cast<double>(c.s) + 0.5;
        const double b = static_cast<double>(c.n - c.s) + 0.5;
        CHECK(got.lo == doctest::Approx(beta_quantile_quadrature(0.025, a, b))
                            .epsilon(1e-6));
        CHECK(got.hi == doctest::Approx(beta_quantile_quadrature(0.975, a, b))
                            .epsilon(1e-6));
    }
}

TEST_CASE("credible interval spot values") {
    // Beta(1/2, 1/2) quantiles: sin^2(pi q / 2) in closed form.
    const Interval flat = credible_interval(0, 0, 0.95);
    CHECK(flat.lo == doctest::Approx(0.0015413).epsilon(1e-3));
    CHECK(flat.hi == doctest::Approx(0.9984587).epsilon(1e-3));
    // Contains the posterior mean.
    CHECK(flat.lo < 0.5);
    CHECK(flat.hi > 0.5);

    const Interval all = credible_interval(100, 100, 0.95);
    CHECK(all.lo > 0.96);
    CHECK(all.hi < 1.0);

    const Interval half = credible_interval(50, 100, 0.95);
    CHECK(half.lo == doctest::Approx(0.403).epsilon(5e-3));
    CHECK(half.hi == doctest::Approx(0.597).epsilon(5e-3));
    // Symmetric posterior: the interval is symmetric about 1/2.
    CHECK(half.lo + half.hi == doctest::Approx(1.0).epsilon(1e-9));

    CHECK_THROWS_AS(credible_interval(1, 2, 0.0), DomainError);
    CHECK_THROWS_AS(credible_interval(1, 2, 1.0), DomainError);
    CHECK_THROWS_AS(credible_interval(3, 2, 0.95), DomainError);
}

TEST_CASE("Jeffreys converges to the MLE at rate 1/(n+1)") {
    SplitRng rng(5);
    for (int trial = 0; trial < 200; ++trial) {
        const TransitionCounts c =
            counts(rng.next_int(1, 200), rng.next_int(1, 200), rng.next_int(1, 200),
                   rng.next_int(1, 200));
        const auto jeffreys = estimate_channel(c, Smoothing::Jeffreys);
        const auto mle = estimate_channel(c, Smoothing::Mle);
        CHECK(std::fabs(*jeffreys.c_hat - *mle.c_hat) <=
              1.0 / static_cast<double>(c.n0() + 1));
        CHECK(std::fabs(*jeffreys.gamma_hat - *mle.gamma_hat) <=
              1.0 / static_cast<double>(c.n1() + 1));
    }
}

namespace {

std::vector<PairedRecord> sliced_records(SplitRng& rng, int n, int n_slices) {
    std::vector<PairedRecord> records;
    for (int i = 0; i < n; ++i) {
        PairedRecord rec;
        rec.task_id = "r" + std::to_string(i);
        rec.root_seed = 1;
        rec.regime = Regime::Alt;
        rec.slice = "s" + std::to_string(i % n_slices);
        rec.e0 = rng.bernoulli(0.6) ? 1 : 0;
        rec.e1 = rng.bernoulli(0.5) ? 1 : 0;
        records.push_back(rec);
    }
    return records;
}

}  // namespace

TEST_CASE("pooled MLE channel is the support-weighted slice average") {
    SplitRng rng(17);
    const auto records = sliced_records(rng, 400, 4);
    EstimateOptions opts;
    opts.smoothing = Smoothing::Mle;
    const auto sliced = estimate_sliced(records, slice_field(), opts);

    double weighted_c = 0.0, total_n0 = 0.0;
    double weighted_g = 0.0, total_n1 = 0.0;
    for (const auto& [label, est] : sliced.by_slice) {
        weighted_c += static_cast<double>(est.n0) * *est.c_hat;
        total_n0 += static_cast<double>(est.n0);
        weighted_g += static_cast<double>(est.n1) * *est.gamma_hat;
        total_n1 += static_cast<double>(est.n1);
    }
    CHECK(*sliced.pooled.c_hat == doctest::Approx(weighted_c / total_n0).epsilon(1e-12));
    CHECK(*sliced.pooled.gamma_hat ==
          doctest::Approx(weighted_g / total_n1).epsilon(1e-12));

    // Slice counts partition the labeled records.
    std::int64_t slice_total = 0;
    for (const auto& [label, c] : sliced.counts_by_slice) slice_total += c.total();
    CHECK(slice_total + static_cast<std::int64_t>(sliced.unlabeled) ==
          sliced.pooled_counts.total());
}

TEST_CASE("estimates are invariant to record order and dataset duplication") {
    SplitRng rng(29);
    auto records = sliced_records(rng, 300, 3);
    EstimateOptions opts;
    opts.smoothing = Smoothing::Mle;
    const auto base = estimate_sliced(records, slice_field(), opts);

    std::vector<PairedRecord> shuffled = records;
    rng.shuffle(shuffled);
    const auto reordered = estimate_sliced(shuffled, slice_field(), opts);
    CHECK(*base.pooled.c_hat == *reordered.pooled.c_hat);
    CHECK(*base.pooled.gamma_hat == *reordered.pooled.gamma_hat);

    std::vector<PairedRecord> doubled = records;
    doubled.insert(doubled.end(), records.begin(), records.end());
    const auto dup = estimate_sliced(doubled, slice_field(), opts);
    CHECK(*dup.pooled.c_hat == doctest::Approx(*base.pooled.c_hat).epsilon(1e-15));
    CHECK(*dup.pooled.gamma_hat ==
          doctest::Approx(*base.pooled.gamma_hat).epsilon(1e-15));
}

TEST_CASE("single-slice dataset: sliced equals pooled exactly") {
    SplitRng rng(31);
    const auto records = sliced_records(rng, 200, 1);
    const auto sliced = estimate_sliced(records, slice_field(), EstimateOptions{});
    REQUIRE(sliced.by_slice.size() == 1);
    const auto& only = sliced.by_slice.begin()->second;
    CHECK(*only.c_hat == *sliced.pooled.c_hat);
    CHECK(*only.gamma_hat == *sliced.pooled.gamma_hat);
    CHECK(only.n0 == sliced.pooled.n0);
    CHECK(only.n1 == sliced.pooled.n1);
}

TEST_CASE("channel report rows carry supports, intervals and flags") {
    SplitRng rng(37);
    auto records = sliced_records(rng, 120, 2);
    records.front().slice.reset();
    const auto sliced = estimate_sliced(records, slice_field(), EstimateOptions{});
    const AuditReport report = sliced.to_report();
    CHECK(report.columns.size() == 10);
    CHECK(report.rows.size() == 3);  // pooled + 2 slices
    REQUIRE(report.notes.size() == 1);
    CHECK(report.notes.front().find("pooled-only") != std::string::npos);
    const std::string csv = report.to_csv();
    CHECK(csv.find("slice,n0,n1,c_hat") == 0);
}
