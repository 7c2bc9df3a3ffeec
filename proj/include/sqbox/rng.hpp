#pragma once

#include <array>
#include <cmath>
#include <cstdint>

namespace sqbox {

// Philox4x32-10 counter-based generator. Each (seed, stream) pair yields an
// independent stream, so per-trajectory / per-tree / per-replication streams
// are reproducible no matter how work is scheduled across threads.
class Rng {
public:
    Rng() : Rng(0, 0) {}
    Rng(std::uint64_t seed, std::uint64_t stream)
        : key_{static_cast<std::uint32_t>(seed),
               static_cast<std::uint32_t>(seed >> 32)},
          ctr_{0, 0, static_cast<std::uint32_t>(stream),
               static_cast<std::uint32_t>(stream >> 32)} {
        refill();
    }

    using result_type = std::uint32_t;
    static constexpr result_type min() { return 0; }
    static constexpr result_type max() { return 0xffffffffu; }

    result_type operator()() { return next_u32(); }

    std::uint32_t next_u32() {
        if (buf_pos_ == 4) refill();
        return buf_[buf_pos_++];
    }

    std::uint64_t next_u64() {
        std::uint64_t lo = next_u32();
        std::uint64_t hi = next_u32();
        return lo | (hi << 32);
    }

    // Uniform double in [0, 1), 53 random bits.
    double uniform01() {
        return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
    }

    // Uniform integer in [0, n), n >= 1. Unbiased via rejection on the
    // top of the 64-bit range.
    std::uint64_t uniform_below(std::uint64_t n) {
        if (n <= 1) return 0;
        const std::uint64_t limit = UINT64_MAX - UINT64_MAX % n;
        std::uint64_t x;
        do {
            x = next_u64();
        } while (x >= limit);
        return x % n;
    }

    // Inclusive range [lo, hi].
    long uniform_int(long lo, long hi) {
        return lo + static_cast<long>(uniform_below(
                        static_cast<std::uint64_t>(hi - lo) + 1));
    }

    bool bernoulli(double p) { return uniform01() < p; }

    // Box-Muller, two uniforms per variate, no cached state.
    double normal() {
        double u1 = 1.0 - uniform01();  // (0, 1]
        double u2 = uniform01();
        return std::sqrt(-2.0 * std::log(u1)) *
               std::cos(2.0 * 3.14159265358979323846 * u2);
    }

    double normal(double mean, double sd) { return mean + sd * normal(); }

    long binomial(long n, double p) {
        long hits = 0;
        for (long i = 0; i < n; ++i) hits += bernoulli(p) ? 1 : 0;
        return hits;
    }

    // Standard Cauchy, equal in law to t with 1 degree of freedom.
    double cauchy() {
        return std::tan(3.14159265358979323846 * (uniform01() - 0.5));
    }

private:
    static constexpr std::uint32_t kMul0 = 0xD2511F53u;
    static constexpr std::uint32_t kMul1 = 0xCD9E8D57u;
    static constexpr std::uint32_t kKeyBump0 = 0x9E3779B9u;
    static constexpr std::uint32_t kKeyBump1 = 0xBB67AE85u;

    static void mulhilo(std::uint32_t a, std::uint32_t b, std::uint32_t& hi,
                        std::uint32_t& lo) {
        std::uint64_t prod = static_cast<std::uint64_t>(a) * b;
        hi = static_cast<std::uint32_t>(prod >> 32);
        lo = static_cast<std::uint32_t>(prod);
    }

    void fill_block() {
        std::uint32_t c0 = ctr_[0], c1 = ctr_[1], c2 = ctr_[2], c3 = ctr_[3];
        std::uint32_t k0 = key_[0], k1 = key_[1];
        for (int round = 0; round < 10; ++round) {
            std::uint32_t hi0, lo0, hi1, lo1;
            mulhilo(kMul0, c0, hi0, lo0);
            mulhilo(kMul1, c2, hi1, lo1);
            std::uint32_t n0 = hi1 ^ c1 ^ k0;
            std::uint32_t n1 = lo1;
            std::uint32_t n2 = hi0 ^ c3 ^ k1;
            std::uint32_t n3 = lo0;
            c0 = n0;
            c1 = n1;
            c2 = n2;
            c3 = n3;
            k0 += kKeyBump0;
            k1 += kKeyBump1;
        }
        buf_[0] = c0;
        buf_[1] = c1;
        buf_[2] = c2;
        buf_[3] = c3;
    }

    void refill() {
        fill_block();
        if (++ctr_[0] == 0) ++ctr_[1];
        buf_pos_ = 0;
    }

    std::uint32_t key_[2];
    std::uint32_t ctr_[4];
    std::array<std::uint32_t, 4> buf_{};
    int buf_pos_ = 0;
};

// Deterministic 64-bit mix used to derive child seeds from a master seed,
// e.g. per-replication or per-timestep sub-seeds.
inline std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t salt) {
    std::uint64_t z = seed + 0x9E3779B97F4A7C15ull * (salt + 1);
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
    return z ^ (z >> 31);
}

}  // namespace sqbox
