#pragma once

#include <cstdint>
#include <string_view>
#include <vector>

namespace chanaudit {

/// FNV-1a 64-bit hash of a byte string.
inline std::uint64_t fnv1a64(std::string_view bytes) {
    std::uint64_t h = 1469598103934665603ull;
    for (unsigned char ch : bytes) {
        h ^= ch;
        h *= 1099511628211ull;
    }
    return h;
}

/// Incremental FNV-1a over mixed key material. Used to derive per-item
/// random streams from (seed, task id, stream tag) tuples.
class KeyHash {
public:
    KeyHash& add(std::uint64_t v) {
        for (int i = 0; i < 8; ++i) {
            h_ ^= static_cast<unsigned char>(v >> (8 * i));
            h_ *= 1099511628211ull;
        }
        return *this;
    }
    KeyHash& add(std::int64_t v) { return add(static_cast<std::uint64_t>(v)); }
    KeyHash& add(std::string_view s) {
        for (unsigned char ch : s) {
            h_ ^= ch;
            h_ *= 1099511628211ull;
        }
        // Length terminator keeps ("ab","c") distinct from ("a","bc").
        return add(static_cast<std::uint64_t>(s.size()));
    }
    std::uint64_t digest() const {
        std::uint64_t z = h_ + 0x9e3779b97f4a7c15ull;
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
        return z ^ (z >> 31);
    }

private:
    std::uint64_t h_ = 1469598103934665603ull;
};

/// Splittable counter-based generator (splitmix64). A stream is a pure
/// function of its key, so per-item streams are stable under any execution
/// order or worker count.
class SplitRng {
public:
    explicit SplitRng(std::uint64_t seed) : state_(seed) {}

    static SplitRng keyed(const KeyHash& key) { return SplitRng(key.digest()); }

    std::uint64_t next_u64() {
        state_ += 0x9e3779b97f4a7c15ull;
        std::uint64_t z = state_;
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
        return z ^ (z >> 31);
    }

    /// Uniform double in [0, 1).
    double next_unit() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

    bool bernoulli(double p) { return next_unit() < p; }

    /// Uniform integer in [0, n) without modulo bias.
    std::uint64_t next_below(std::uint64_t n) {
        const std::uint64_t reject = (0 - n) % n;  // 2^64 mod n
        std::uint64_t r;
        do {
            r = next_u64();
        } while (r < reject);
        return r % n;
    }

    /// Uniform integer in [lo, hi] inclusive.
    std::int64_t next_int(std::int64_t lo, std::int64_t hi) {
        return lo + static_cast<std::int64_t>(
                        next_below(static_cast<std::uint64_t>(hi - lo + 1)));
    }

    /// Fisher-Yates shuffle.
    template <typename T>
    void shuffle(std::vector<T>& v) {
        for (std::size_t i = v.size(); i > 1; --i) {
            std::size_t j = static_cast<std::size_t>(next_below(i));
            std::swap(v[i - 1], v[j]);
        }
    }

private:
    std::uint64_t state_;
};

}  // namespace chanaudit
