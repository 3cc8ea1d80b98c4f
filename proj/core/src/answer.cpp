#include "chanaudit/answer.hpp"

#include <algorithm>
#include <cctype>
#include <cstdlib>

namespace chanaudit {

namespace {

void skip_ws(std::string_view s, std::size_t& pos) {
    while (pos < s.size() && std::isspace(static_cast<unsigned char>(s[pos]))) ++pos;
}

bool match_keyword_ci(std::string_view s, std::size_t& pos, std::string_view word) {
    if (s.size() - pos < word.size()) return false;
    for (std::size_t i = 0; i < word.size(); ++i) {
        if (std::tolower(static_cast<unsigned char>(s[pos + i])) != word[i]) return false;
    }
    pos += word.size();
    return true;
}

[[noreturn]] void fail(ParseCategory cat, const std::string& msg) {
    throw ContractError(cat, msg);
}

struct SignedInt {
    std::int64_t magnitude = 0;
    bool negative = false;
    std::int64_t value() const { return negative ? -magnitude : magnitude; }
};

/// Parses an optionally signed integer literal; whitespace may separate the
/// sign from the digits ("- 1" == "-1"). The sign is reported separately so
/// "-0.5" keeps its sign through decimal parsing.
SignedInt parse_int(std::string_view s, std::size_t& pos) {
    skip_ws(s, pos);
    SignedInt out;
    if (pos < s.size() && (s[pos] == '-' || s[pos] == '+')) {
        out.negative = s[pos] == '-';
        ++pos;
        skip_ws(s, pos);
    }
    if (pos >= s.size() || !std::isdigit(static_cast<unsigned char>(s[pos]))) {
        fail(ParseCategory::Malformed, "expected digits");
    }
    int ndigits = 0;
    while (pos < s.size() && std::isdigit(static_cast<unsigned char>(s[pos]))) {
        if (++ndigits > 18) fail(ParseCategory::Malformed, "integer literal too long");
        out.magnitude = out.magnitude * 10 + (s[pos] - '0');
        ++pos;
    }
    return out;
}

/// Scalar payload: integer, rational a/b, or (when enabled) a terminating
/// decimal mapped to an exact base-10 rational.
Rational parse_scalar(std::string_view s, std::size_t& pos, const NormalizeOptions& opts) {
    const SignedInt head = parse_int(s, pos);
    if (pos < s.size() && (s[pos] == 'e' || s[pos] == 'E')) {
        fail(ParseCategory::Malformed, "scientific notation is not part of the contract");
    }
    if (pos < s.size() && s[pos] == '.') {
        if (!opts.allow_decimals) {
            fail(ParseCategory::Malformed, "decimal answers disabled for this family");
        }
        ++pos;
        std::int64_t frac = 0;
        std::int64_t den = 1;
        int ndigits = 0;
        while (pos < s.size() && std::isdigit(static_cast<unsigned char>(s[pos]))) {
            if (++ndigits > 17) fail(ParseCategory::Malformed, "decimal literal too long");
            frac = frac * 10 + (s[pos] - '0');
            den *= 10;
            ++pos;
        }
        if (ndigits == 0) fail(ParseCategory::Malformed, "decimal point with no digits");
        if (pos < s.size() && (s[pos] == 'e' || s[pos] == 'E')) {
            fail(ParseCategory::Malformed, "scientific notation is not part of the contract");
        }
        Rational mag = Rational(head.magnitude) + Rational(frac, den);
        return head.negative ? -mag : mag;
    }
    skip_ws(s, pos);
    if (pos < s.size() && s[pos] == '/') {
        ++pos;
        const SignedInt den = parse_int(s, pos);
        if (den.value() == 0) fail(ParseCategory::Malformed, "zero denominator");
        return Rational(head.value(), den.value());
    }
    return Rational(head.value());
}

Rational parse_scalar_full(std::string_view s, std::size_t& pos, const NormalizeOptions& opts) {
    Rational r = parse_scalar(s, pos, opts);
    skip_ws(s, pos);
    return r;
}

}  // namespace

std::string CanonicalAnswer::to_string() const {
    switch (kind) {
        case AnswerKind::Integer:
        case AnswerKind::Rational:
            return scalar.to_string();
        case AnswerKind::Tuple2:
            return "(" + scalar.to_string() + ", " + second.to_string() + ")";
        case AnswerKind::Verdict:
            return verdict ? "correct" : "incorrect";
    }
    return "";
}

CanonicalAnswer normalize_answer(std::string_view raw, Contract contract,
                                 const NormalizeOptions& opts) {
    std::size_t pos = 0;
    skip_ws(raw, pos);
    if (pos == raw.size()) fail(ParseCategory::NoAnswer, "empty line");

    // Optional "Answer =" prefix.
    {
        std::size_t probe = pos;
        if (match_keyword_ci(raw, probe, "answer")) {
            skip_ws(raw, probe);
            if (probe < raw.size() && raw[probe] == '=') {
                pos = probe + 1;
            } else {
                fail(ParseCategory::NoAnswer, "keyword without '='");
            }
        }
    }
    skip_ws(raw, pos);
    if (pos == raw.size()) fail(ParseCategory::NoAnswer, "no payload after keyword");

    CanonicalAnswer result;
    switch (contract) {
        case Contract::Verdict: {
            if (match_keyword_ci(raw, pos, "correct")) {
                result = CanonicalAnswer::from_verdict(1);
            } else if (match_keyword_ci(raw, pos, "incorrect")) {
                result = CanonicalAnswer::from_verdict(0);
            } else {
                fail(ParseCategory::Malformed, "expected 'correct' or 'incorrect'");
            }
            break;
        }
        case Contract::Scalar: {
            if (pos < raw.size() && raw[pos] == '(') {
                fail(ParseCategory::WrongType, "tuple payload under scalar contract");
            }
            result = CanonicalAnswer::from_scalar(parse_scalar_full(raw, pos, opts));
            break;
        }
        case Contract::Pair: {
            if (pos >= raw.size() || raw[pos] != '(') {
                fail(ParseCategory::WrongType, "scalar payload under pair contract");
            }
            ++pos;
            Rational x = parse_scalar_full(raw, pos, opts);
            if (pos >= raw.size() || raw[pos] != ',') {
                fail(ParseCategory::Malformed, "expected ',' in pair");
            }
            ++pos;
            Rational y = parse_scalar_full(raw, pos, opts);
            if (pos >= raw.size() || raw[pos] != ')') {
                fail(ParseCategory::Malformed, "expected ')' closing pair");
            }
            ++pos;
            result = CanonicalAnswer::from_pair(x, y);
            break;
        }
    }
    skip_ws(raw, pos);
    if (pos != raw.size()) fail(ParseCategory::Malformed, "trailing text after payload");
    return result;
}

int score_exact_match(const CanonicalAnswer& candidate, const CanonicalAnswer& truth) {
    const bool cand_scalar =
        candidate.kind == AnswerKind::Integer || candidate.kind == AnswerKind::Rational;
    const bool truth_scalar =
        truth.kind == AnswerKind::Integer || truth.kind == AnswerKind::Rational;
    if (cand_scalar != truth_scalar ||
        (!cand_scalar && candidate.kind != truth.kind)) {
        throw AnswerTypeError("cannot compare answers of different contract kinds");
    }
    return candidate == truth ? 1 : 0;
}

}  // namespace chanaudit
