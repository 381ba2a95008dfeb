#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <vector>

namespace zsce {

/// splitmix64 step; used to derive independent stream seeds from a base seed
/// so that, e.g., every column of a generated table has its own stream.
inline uint64_t mix64(uint64_t x) {
    x += 0x9e3779b97f4a7c15ull;
    uint64_t z = x;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
    return z ^ (z >> 31);
}

inline uint64_t derive_seed(uint64_t base, uint64_t a, uint64_t b = 0, uint64_t c = 0) {
    return mix64(mix64(mix64(mix64(base) ^ a) ^ b) ^ c);
}

/// Deterministic RNG: mt19937_64 for the raw stream (bit-exact per the
/// standard) with hand-rolled samplers, since the std distributions are not
/// specified bit-exactly across library implementations.
class Rng {
public:
    explicit Rng(uint64_t seed) : engine_(seed) {}

    uint64_t next_u64() { return engine_(); }

    /// Uniform integer in [0, n). Rejection sampling keeps it unbiased.
    uint64_t below(uint64_t n) {
        if (n <= 1) return 0;
        uint64_t limit = UINT64_MAX - UINT64_MAX % n;
        uint64_t x;
        do {
            x = engine_();
        } while (x >= limit);
        return x % n;
    }

    int64_t uniform_int(int64_t lo, int64_t hi) { // inclusive bounds
        return lo + static_cast<int64_t>(below(static_cast<uint64_t>(hi - lo) + 1));
    }

    /// Uniform real in [0, 1) with 53 random bits.
    double real() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

    double uniform(double lo, double hi) { return lo + (hi - lo) * real(); }

    double log_uniform(double lo, double hi) { return std::exp(uniform(std::log(lo), std::log(hi))); }

    /// Box-Muller; one value per call (the pair's partner is discarded to keep
    /// the stream layout simple).
    double normal(double mean, double stddev) {
        double u1 = real();
        double u2 = real();
        while (u1 <= 0.0) u1 = real();
        double r = std::sqrt(-2.0 * std::log(u1));
        return mean + stddev * r * std::cos(2.0 * 3.14159265358979323846 * u2);
    }

    /// Weighted choice over a small weight vector (weights need not be
    /// normalized).
    size_t choice(const std::vector<double>& weights) {
        double total = 0;
        for (double w : weights) total += w;
        double x = real() * total;
        for (size_t i = 0; i + 1 < weights.size(); ++i) {
            if (x < weights[i]) return i;
            x -= weights[i];
        }
        return weights.size() - 1;
    }

    template <typename T>
    void shuffle(std::vector<T>& v) { // Fisher-Yates
        for (size_t i = v.size(); i > 1; --i) {
            size_t j = static_cast<size_t>(below(i));
            std::swap(v[i - 1], v[j]);
        }
    }

private:
    std::mt19937_64 engine_;
};

/// Zipf sampler over ranks 0..n-1 with exponent s. Precomputes the CDF once;
/// sampling is a binary search, so it stays cheap for large row counts.
class ZipfSampler {
public:
    ZipfSampler(size_t n, double s) : cdf_(n) {
        double acc = 0;
        for (size_t i = 0; i < n; ++i) {
            acc += 1.0 / std::pow(static_cast<double>(i + 1), s);
            cdf_[i] = acc;
        }
        for (size_t i = 0; i < n; ++i) cdf_[i] /= acc;
    }

    size_t sample(Rng& rng) const {
        double x = rng.real();
        size_t lo = 0, hi = cdf_.size() - 1;
        while (lo < hi) {
            size_t mid = (lo + hi) / 2;
            if (cdf_[mid] < x)
                lo = mid + 1;
            else
                hi = mid;
        }
        return lo;
    }

private:
    std::vector<double> cdf_;
};

} // namespace zsce
