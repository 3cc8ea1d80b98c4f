#include "doctest.h"

#include <cmath>

#include "chanaudit/onestep.hpp"
#include "chanaudit/rng.hpp"

using namespace chanaudit;

namespace {

ChannelEstimate make_channel(double c, double gamma) {
    ChannelEstimate est;
    est.c_hat = c;
    est.gamma_hat = gamma;
    return est;
}

}  // namespace

TEST_CASE("predict_post applies the one-step law") {
    CHECK(predict_post(0.5, 0.2, 0.1) == doctest::Approx(0.55).epsilon(1e-12));
    CHECK(predict_post(0.3, 0.0, 0.0) == 0.3);  // identity channel
    // Pooled per-seed summary row: (p0, c, gamma) = (0.8373, 0.3963, 0.2726)
    // predicts 0.673530, matching the reported 0.6737 to reporting precision.
    CHECK(predict_post(0.8373, 0.3963, 0.2726) ==
          doctest::Approx(0.673530).epsilon(1e-5));
    CHECK(std::fabs(predict_post(0.8373, 0.3963, 0.2726) - 0.6737) < 2e-3);

    ChannelEstimate incomplete;
    incomplete.c_hat = 0.5;
    CHECK_THROWS_AS(predict_post(0.5, incomplete), IncompleteChannelError);
}

TEST_CASE("gain splits rescued from destroyed mass") {
    CHECK(gain(0.5373, 0.0397, 0.0753) == doctest::Approx(-0.02209).epsilon(1e-3));
    CHECK(gain(0.0, 0.37, 0.9) == doctest::Approx(0.37).epsilon(1e-12));
    CHECK(gain(1.0, 0.37, 0.12) == doctest::Approx(-0.12).epsilon(1e-12));
}

TEST_CASE("break-even boundary") {
    CHECK(breakeven_correction(0.5, 0.3) == doctest::Approx(0.3).epsilon(1e-12));
    CHECK(breakeven_correction(0.9, 0.1) == doctest::Approx(0.9).epsilon(1e-12));
    CHECK(breakeven_factor(0.955) == doctest::Approx(21.2222).epsilon(1e-4));
    CHECK(std::isinf(breakeven_factor(1.0)));
    CHECK_THROWS_AS(breakeven_correction(1.0, 0.5), DomainError);
}

TEST_CASE("surplus from marginals") {
    CHECK(surplus(0.955, 0.915) == doctest::Approx(-0.888889).epsilon(1e-5));
    CHECK(surplus(0.955, 0.975) == doctest::Approx(0.444444).epsilon(1e-5));
    CHECK(surplus(0.42, 0.42) == 0.0);
    CHECK_THROWS_AS(surplus(1.0, 0.5), DomainError);
}

TEST_CASE("propagate is row-vector times kernel") {
    const Kernel2 identity = Kernel2::from_rates(0.0, 0.0);
    const auto same = propagate({0.5, 0.5}, identity);
    CHECK(same[0] == 0.5);
    CHECK(same[1] == 0.5);

    const Kernel2 k = Kernel2::from_rates(0.7, 0.0);
    const auto mass = propagate({1.0, 0.0}, k);
    CHECK(mass[0] == doctest::Approx(0.3).epsilon(1e-12));
    CHECK(mass[1] == doctest::Approx(0.7).epsilon(1e-12));

    const auto mixed = propagate({0.4, 0.6}, Kernel2::from_rates(0.5, 0.1));
    CHECK(mixed[0] == doctest::Approx(0.26).epsilon(1e-12));
    CHECK(mixed[1] == doctest::Approx(0.74).epsilon(1e-12));

    Kernel2 broken;
    broken.m = {{{0.5, 0.6}, {0.1, 0.9}}};
    CHECK_THROWS_AS(propagate({0.5, 0.5}, broken), InvariantError);
    CHECK_THROWS_AS(propagate({0.7, 0.7}, identity), DomainError);
}

TEST_CASE("propagate agrees with predict_post") {
    SplitRng rng(3);
    for (int i = 0; i < 300; ++i) {
        const double p0 = rng.next_unit();
        const double c = rng.next_unit();
        const double g = rng.next_unit();
        const auto pi1 = propagate({1.0 - p0, p0}, Kernel2::from_rates(c, g));
        CHECK(std::fabs(pi1[1] - predict_post(p0, c, g)) < 1e-12);
    }
}

TEST_CASE("in-sample closure is exact under MLE") {
    SplitRng rng(13);
    for (int i = 0; i < 1000; ++i) {
        const double n00 = static_cast<double>(rng.next_int(0, 50));
        const double n01 = static_cast<double>(rng.next_int(1, 50));
        const double n10 = static_cast<double>(rng.next_int(1, 50));
        const double n11 = static_cast<double>(rng.next_int(0, 50));
        const double n0 = n00 + n01, n1 = n10 + n11, total = n0 + n1;
        const double p0 = n1 / total;
        const double p1 = (n01 + n11) / total;
        const double c = n01 / n0;
        const double g = n10 / n1;
        CHECK(std::fabs(predict_post(p0, c, g) - p1) <= 1e-12);
    }
}

TEST_CASE("sign of gain matches the break-even comparison") {
    SplitRng rng(19);
    for (int i = 0; i < 500; ++i) {
        const double p0 = 0.01 + 0.98 * rng.next_unit();
        const double c = rng.next_unit();
        const double g = rng.next_unit();
        const double delta = gain(p0, c, g);
        const double boundary = breakeven_correction(p0, g);
        if (delta > 1e-14) CHECK(c > boundary);
        if (delta < -1e-14) CHECK(c < boundary);
    }
}

TEST_CASE("surplus identity under a shared MLE fit") {
    SplitRng rng(23);
    for (int i = 0; i < 300; ++i) {
        const double n00 = static_cast<double>(rng.next_int(2, 60));
        const double n01 = static_cast<double>(rng.next_int(2, 60));
        const double n10 = static_cast<double>(rng.next_int(2, 60));
        const double n11 = static_cast<double>(rng.next_int(2, 60));
        const double n0 = n00 + n01, n1 = n10 + n11, total = n0 + n1;
        const double p0 = n1 / total;
        const double p1 = (n01 + n11) / total;
        const double sigma = surplus(p0, p1);
        const double direct = n01 / n0 - p0 / (1.0 - p0) * (n10 / n1);
        CHECK(sigma == doctest::Approx(direct).epsilon(1e-10));
    }
}

TEST_CASE("mixture_predict") {
    SlicedChannels slices;
    slices.by_slice["a"] = make_channel(0.2, 0.1);
    slices.by_slice["b"] = make_channel(0.2, 0.1);
    slices.pooled = make_channel(0.2, 0.1);
    std::map<std::string, double> p0 = {{"a", 0.5}, {"b", 0.5}};

    SUBCASE("homogeneous slices equal the pooled prediction") {
        MixtureWeights w;
        w.w = {{"a", 2.0}, {"b", 1.0}};
        CHECK(mixture_predict(slices, p0, w) ==
              doctest::Approx(predict_post(0.5, slices.pooled)).epsilon(1e-12));
    }
    SUBCASE("delta mixture reduces to the focused slice") {
        slices.by_slice["b"] = make_channel(0.9, 0.0);
        p0["b"] = 0.2;
        CHECK(mixture_predict(slices, p0, MixtureWeights::delta("b")) ==
              doctest::Approx(predict_post(0.2, slices.by_slice["b"])).epsilon(1e-12));
    }
    SUBCASE("missing slice raises") {
        MixtureWeights w;
        w.w = {{"a", 0.5}, {"zzz", 0.5}};
        CHECK_THROWS_AS(mixture_predict(slices, p0, w), MissingSliceError);
    }
    SUBCASE("weights must normalize") {
        MixtureWeights w;
        w.w = {{"a", -1.0}};
        CHECK_THROWS_AS(w.normalize(), DomainError);
        MixtureWeights zero;
        zero.w = {{"a", 0.0}};
        CHECK_THROWS_AS(zero.normalize(), DomainError);
    }
}

TEST_CASE("phase plane classification") {
    std::vector<std::pair<std::string, ChannelEstimate>> channels;
    channels.emplace_back("pooled", make_channel(0.1193, 0.0164));
    channels.emplace_back("boundary", make_channel(0.1, 0.1));
    const std::vector<double> baselines = {0.5, 0.718};
    const AuditReport report = phase_plane_table(channels, baselines);

    // Two ray rows, then one point row per (channel, baseline).
    REQUIRE(report.rows.size() == 2 + 2 * 2);
    auto classification = [&](std::size_t row) {
        return std::get<std::string>(report.rows[row].back());
    };
    // GSM8K pooled channel at p = 0.718: 0.718/0.282 * 0.0164 = 0.0418 < 0.1193.
    CHECK(classification(3) == "above");
    // (c, gamma) = (0.1, 0.1) at p = 0.5 sits exactly on the boundary.
    CHECK(classification(4) == "break-even");
    const std::string csv = report.to_csv();
    CHECK(csv.find("ray") != std::string::npos);
}
