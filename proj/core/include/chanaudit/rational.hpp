#pragma once

#include <cstdint>
#include <numeric>
#include <string>

#include "chanaudit/errors.hpp"

namespace chanaudit {

/// Exact rational with positive denominator in lowest terms. Arithmetic is
/// overflow-checked; synthetic-task evaluation must stay exact or fail loudly.
class Rational {
public:
    Rational() = default;
    Rational(std::int64_t num, std::int64_t den = 1) : num_(num), den_(den) {
        if (den_ == 0) throw DomainError("rational with zero denominator");
        reduce();
    }

    std::int64_t num() const { return num_; }
    std::int64_t den() const { return den_; }
    bool is_integer() const { return den_ == 1; }
    bool is_zero() const { return num_ == 0; }

    Rational operator-() const {
        Rational r;
        r.num_ = checked_neg(num_);
        r.den_ = den_;
        return r;
    }

    friend Rational operator+(const Rational& a, const Rational& b) {
        const std::int64_t g = std::gcd(a.den_, b.den_);
        const std::int64_t lhs = checked_mul(a.num_, b.den_ / g);
        const std::int64_t rhs = checked_mul(b.num_, a.den_ / g);
        return Rational(checked_add(lhs, rhs), checked_mul(a.den_, b.den_ / g));
    }
    friend Rational operator-(const Rational& a, const Rational& b) { return a + (-b); }
    friend Rational operator*(const Rational& a, const Rational& b) {
        const std::int64_t g1 = std::gcd(std::abs(a.num_), b.den_);
        const std::int64_t g2 = std::gcd(std::abs(b.num_), a.den_);
        return Rational(checked_mul(a.num_ / g1, b.num_ / g2),
                        checked_mul(a.den_ / g2, b.den_ / g1));
    }
    friend Rational operator/(const Rational& a, const Rational& b) {
        if (b.num_ == 0) throw DomainError("rational division by zero");
        Rational inv;
        inv.num_ = b.num_ < 0 ? checked_neg(b.den_) : b.den_;
        inv.den_ = b.num_ < 0 ? checked_neg(b.num_) : b.num_;
        return a * inv;
    }

    friend bool operator==(const Rational& a, const Rational& b) {
        return a.num_ == b.num_ && a.den_ == b.den_;
    }
    friend bool operator<(const Rational& a, const Rational& b) {
        // Safe for the bounded magnitudes the generators produce.
        return checked_mul(a.num_, b.den_) < checked_mul(b.num_, a.den_);
    }

    double to_double() const {
        return static_cast<double>(num_) / static_cast<double>(den_);
    }

    /// "3" for integers, "3/4" otherwise; sign on the numerator.
    std::string to_string() const {
        if (den_ == 1) return std::to_string(num_);
        return std::to_string(num_) + "/" + std::to_string(den_);
    }

private:
    void reduce() {
        if (den_ < 0) {
            num_ = checked_neg(num_);
            den_ = checked_neg(den_);
        }
        const std::int64_t g = std::gcd(std::abs(num_), den_);
        if (g > 1) {
            num_ /= g;
            den_ /= g;
        }
        if (num_ == 0) den_ = 1;
    }

    static std::int64_t checked_add(std::int64_t a, std::int64_t b) {
        std::int64_t r;
        if (__builtin_add_overflow(a, b, &r)) throw DomainError("rational overflow");
        return r;
    }
    static std::int64_t checked_mul(std::int64_t a, std::int64_t b) {
        std::int64_t r;
        if (__builtin_mul_overflow(a, b, &r)) throw DomainError("rational overflow");
        return r;
    }
    static std::int64_t checked_neg(std::int64_t a) {
        if (a == INT64_MIN) throw DomainError("rational overflow");
        return -a;
    }

    std::int64_t num_ = 0;
    std::int64_t den_ = 1;
};

}  // namespace chanaudit
