#include "doctest.h"

#include "chanaudit/answer.hpp"
#include "chanaudit/rng.hpp"

using namespace chanaudit;

namespace {

Rational rat(std::int64_t n, std::int64_t d = 1) { return Rational(n, d); }

}  // namespace

TEST_CASE("normalize reduces rationals") {
    const auto a = normalize_answer("Answer = 4/8", Contract::Scalar);
    CHECK(a.kind == AnswerKind::Rational);
    CHECK(a.scalar == rat(1, 2));

    const auto b = normalize_answer("Answer = 6/2", Contract::Scalar);
    CHECK(b.kind == AnswerKind::Integer);
    CHECK(b.scalar == rat(3));

    const auto c = normalize_answer("Answer = -6/4", Contract::Scalar);
    CHECK(c.scalar == rat(-3, 2));
    CHECK(c.to_string() == "-3/2");
}

TEST_CASE("normalize maps terminating decimals to exact rationals") {
    CHECK(normalize_answer("Answer = 0.25", Contract::Scalar).scalar == rat(1, 4));
    CHECK(normalize_answer("Answer = 0.1", Contract::Scalar).scalar == rat(1, 10));
    CHECK(normalize_answer("Answer = -0.5", Contract::Scalar).scalar == rat(-1, 2));
    CHECK(normalize_answer("Answer = 2.50", Contract::Scalar).scalar == rat(5, 2));
    CHECK(normalize_answer("Answer = 3.0", Contract::Scalar).kind ==
          AnswerKind::Integer);

    NormalizeOptions no_decimals;
    no_decimals.allow_decimals = false;
    CHECK_THROWS_AS(normalize_answer("Answer = 0.25", Contract::Scalar, no_decimals),
                    ContractError);
}

TEST_CASE("normalize handles pairs") {
    const auto a = normalize_answer("Answer = (2, 6/4)", Contract::Pair);
    CHECK(a.kind == AnswerKind::Tuple2);
    CHECK(a.scalar == rat(2));
    CHECK(a.second == rat(3, 2));

    const auto b = normalize_answer("Answer = (2, -4/2)", Contract::Pair);
    CHECK(b.scalar == rat(2));
    CHECK(b.second == rat(-2));
}

TEST_CASE("normalize handles verdicts") {
    CHECK(normalize_answer("Answer = correct", Contract::Verdict).verdict == 1);
    CHECK(normalize_answer("answer = INCORRECT", Contract::Verdict).verdict == 0);
}

TEST_CASE("whitespace and sign placement variants normalize identically") {
    const auto reference = normalize_answer("-1/2", Contract::Scalar);
    for (const char* variant :
         {"Answer = -1/2", "  answer =  - 1/2 ", "ANSWER=-1 / 2", "- 1/2"}) {
        CAPTURE(variant);
        CHECK(normalize_answer(variant, Contract::Scalar) == reference);
    }
}

TEST_CASE("contract errors carry a category") {
    auto category_of = [](const char* raw, Contract contract) {
        try {
            normalize_answer(raw, contract);
        } catch (const ContractError& e) {
            return e.category;
        }
        FAIL("expected ContractError");
        return ParseCategory::Malformed;
    };
    CHECK(category_of("", Contract::Scalar) == ParseCategory::NoAnswer);
    CHECK(category_of("Answer =", Contract::Scalar) == ParseCategory::NoAnswer);
    CHECK(category_of("Answer = banana", Contract::Scalar) == ParseCategory::Malformed);
    CHECK(category_of("Answer = 3/0", Contract::Scalar) == ParseCategory::Malformed);
    CHECK(category_of("Answer = 1e5", Contract::Scalar) == ParseCategory::Malformed);
    CHECK(category_of("Answer = 3 extra", Contract::Scalar) == ParseCategory::Malformed);
    CHECK(category_of("Answer = (1, 2)", Contract::Scalar) == ParseCategory::WrongType);
    CHECK(category_of("Answer = 3", Contract::Pair) == ParseCategory::WrongType);
}

TEST_CASE("score_exact_match compares canonical forms") {
    CHECK(score_exact_match(CanonicalAnswer::from_scalar(rat(1, 2)),
                            CanonicalAnswer::from_scalar(rat(1, 2))) == 1);
    CHECK(score_exact_match(CanonicalAnswer::from_pair(rat(2), rat(3)),
                            CanonicalAnswer::from_pair(rat(2), rat(4))) == 0);
    // 6/2 normalizes to Integer 3, so the match succeeds.
    CHECK(score_exact_match(CanonicalAnswer::from_scalar(rat(3)),
                            normalize_answer("Answer = 6/2", Contract::Scalar)) == 1);
    CHECK_THROWS_AS(score_exact_match(CanonicalAnswer::from_pair(rat(1), rat(2)),
                                      CanonicalAnswer::from_scalar(rat(1))),
                    AnswerTypeError);
    CHECK_THROWS_AS(score_exact_match(CanonicalAnswer::from_verdict(1),
                                      CanonicalAnswer::from_scalar(rat(1))),
                    AnswerTypeError);
}

TEST_CASE("normalize is idempotent over generated payloads") {
    SplitRng rng(42);
    for (int i = 0; i < 500; ++i) {
        const std::int64_t num = rng.next_int(-400, 400);
        const std::int64_t den = rng.next_int(1, 40);
        const Contract contract = rng.bernoulli(0.5) ? Contract::Scalar : Contract::Pair;
        CanonicalAnswer first;
        if (contract == Contract::Scalar) {
            first = normalize_answer(
                "Answer = " + std::to_string(num) + "/" + std::to_string(den),
                Contract::Scalar);
        } else {
            first = normalize_answer("Answer = (" + std::to_string(num) + "/" +
                                         std::to_string(den) + ", " +
                                         std::to_string(rng.next_int(-50, 50)) + ")",
                                     Contract::Pair);
        }
        const CanonicalAnswer second =
            normalize_answer("Answer = " + first.to_string(), contract);
        CAPTURE(first.to_string());
        CHECK(first == second);
        CHECK(score_exact_match(first, second) == 1);
        CHECK(score_exact_match(second, first) == 1);  // symmetry
    }
}
