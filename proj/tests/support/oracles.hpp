#pragma once

// Brute-force reference implementations, deliberately written on different
// computational paths than the library (exact rationals, Pascal's triangle,
// powl) so agreement is meaningful.

#include <cmath>
#include <cstdint>
#include <vector>

namespace oracle {

// ceil((1 - num/den)(n + 1)) in exact integer arithmetic.
inline long conformal_index_rational(long n_cal, long num, long den) {
    long p = (den - num) * (n_cal + 1);
    return (p + den - 1) / den;
}

// Exact binomial coefficients C(n, 0..n) (n <= 50 fits long double exactly).
inline std::vector<long double> pascal_row(long n) {
    std::vector<long double> row(static_cast<std::size_t>(n) + 1, 1.0L);
    for (long i = 1; i <= n; ++i)
        for (long j = i - 1; j >= 1; --j) row[j] += row[j - 1];
    return row;
}

// P(Bin(n, p) <= k) by direct term-by-term summation.
inline long double binomial_cdf(long k, long n, long double p) {
    if (k < 0) return 0.0L;
    if (k >= n) return 1.0L;
    std::vector<long double> choose = pascal_row(n);
    long double sum = 0.0L;
    for (long j = 0; j <= k; ++j)
        sum += choose[j] * std::pow(p, static_cast<long double>(j)) *
               std::pow(1.0L - p, static_cast<long double>(n - j));
    return sum;
}

inline long double binomial_sf(long k, long n, long double p) {
    if (k <= 0) return 1.0L;
    return 1.0L - binomial_cdf(k - 1, n, p);
}

// Smallest r in 1..n with P(Bin(n, q) <= r - 1) >= confidence, or -1.
inline long ucb_order_index(long n, long double q, long double confidence) {
    for (long r = 1; r <= n; ++r)
        if (binomial_cdf(r - 1, n, q) >= confidence) return r;
    return -1;
}

// One-sided Clopper-Pearson lower bound by bisection on the exact
// summation above (root of P(Bin(n, p) >= hits) = 1 - confidence).
inline double clopper_pearson_lower(long hits, long n, double confidence) {
    if (hits <= 0) return 0.0;
    long double alpha = 1.0L - static_cast<long double>(confidence);
    long double lo = 0.0L, hi = 1.0L;
    for (int it = 0; it < 120; ++it) {
        long double mid = 0.5L * (lo + hi);
        if (binomial_sf(hits, n, mid) < alpha)
            lo = mid;
        else
            hi = mid;
    }
    return static_cast<double>(0.5L * (lo + hi));
}

}  // namespace oracle
