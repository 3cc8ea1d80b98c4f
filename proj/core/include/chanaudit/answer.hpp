#pragma once

#include <optional>
#include <string>
#include <string_view>

#include "chanaudit/errors.hpp"
#include "chanaudit/rational.hpp"

namespace chanaudit {

enum class AnswerKind { Integer, Rational, Tuple2, Verdict };

/// Output contract a raw line is parsed against.
enum class Contract { Scalar, Pair, Verdict };

/// Why a contract line failed to parse. Kept separate from correctness so
/// formatting failures can be audited on their own.
enum class ParseCategory { NoAnswer, Malformed, WrongType };

struct ContractError : Error {
    ContractError(ParseCategory cat, const std::string& msg)
        : Error(msg), category(cat) {}
    ParseCategory category;
};

/// Mismatched answer kinds passed to score_exact_match.
struct AnswerTypeError : Error {
    using Error::Error;
};

/// Canonical answer under the scoring contract. Scalars are exact rationals
/// with the sign on the numerator; denominator 1 means Integer kind.
struct CanonicalAnswer {
    AnswerKind kind = AnswerKind::Integer;
    Rational scalar;    // Integer / Rational value, or first tuple coordinate
    Rational second;    // second tuple coordinate
    int verdict = 0;    // Verdict bit

    static CanonicalAnswer from_scalar(const Rational& r) {
        CanonicalAnswer a;
        a.kind = r.is_integer() ? AnswerKind::Integer : AnswerKind::Rational;
        a.scalar = r;
        return a;
    }
    static CanonicalAnswer from_pair(const Rational& x, const Rational& y) {
        CanonicalAnswer a;
        a.kind = AnswerKind::Tuple2;
        a.scalar = x;
        a.second = y;
        return a;
    }
    static CanonicalAnswer from_verdict(int bit) {
        CanonicalAnswer a;
        a.kind = AnswerKind::Verdict;
        a.verdict = bit ? 1 : 0;
        return a;
    }

    bool operator==(const CanonicalAnswer& other) const = default;

    /// Contract payload form: "3", "-1/2", "(2, 3/2)", "correct".
    std::string to_string() const;
};

struct NormalizeOptions {
    /// Terminating decimals map to exact base-10 rationals when enabled for
    /// the task family; scientific notation is always rejected.
    bool allow_decimals = true;
};

/// Parses one formatter output line ("Answer = <payload>", keyword
/// case-insensitive, arbitrary surrounding whitespace) into canonical form.
/// A bare payload without the keyword is also accepted; a line with no
/// parsable payload throws ContractError with the failure category.
CanonicalAnswer normalize_answer(std::string_view raw, Contract contract,
                                 const NormalizeOptions& opts = {});

/// Exact-match scoring: 1 iff canonical forms are identical (all coordinates
/// for pairs). Comparing different kinds (other than Integer vs Rational,
/// which cannot collide after normalization) throws AnswerTypeError.
int score_exact_match(const CanonicalAnswer& candidate, const CanonicalAnswer& truth);

}  // namespace chanaudit
