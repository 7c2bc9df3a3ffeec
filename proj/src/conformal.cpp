#include "sqbox/conformal.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "sqbox/errors.hpp"

namespace sqbox {

namespace {

// log C(n, k) via lgamma; exact enough at long double precision to anchor
// the incremental pmf recurrence below.
long double log_choose(long n, long k) {
    return std::lgamma(static_cast<long double>(n) + 1.0L) -
           std::lgamma(static_cast<long double>(k) + 1.0L) -
           std::lgamma(static_cast<long double>(n - k) + 1.0L);
}

long double log_pmf(long j, long n, long double logp, long double log1mp) {
    return log_choose(n, j) + static_cast<long double>(j) * logp +
           static_cast<long double>(n - j) * log1mp;
}

// Sums binomial pmf terms for j in [j_lo, j_hi]. The running log-term is
// advanced incrementally and re-anchored with lgamma every 256 steps to stop
// rounding drift; terms are accumulated in long double.
long double sum_pmf_range(long j_lo, long j_hi, long n, double p) {
    if (j_hi < j_lo) return 0.0L;
    const long double logp = std::log(static_cast<long double>(p));
    const long double log1mp = std::log1p(-static_cast<long double>(p));
    long double lt = log_pmf(j_lo, n, logp, log1mp);
    long double sum = std::exp(lt);
    for (long j = j_lo + 1; j <= j_hi; ++j) {
        if (((j - j_lo) & 0xff) == 0) {
            lt = log_pmf(j, n, logp, log1mp);
        } else {
            lt += std::log(static_cast<long double>(n - j + 1) / j) + logp -
                  log1mp;
        }
        sum += std::exp(lt);
    }
    return sum;
}

void check_np(long n, double p, const char* who) {
    if (n < 0) throw Error(std::string(who) + ": n must be >= 0");
    if (!(p >= 0.0) || !(p <= 1.0) || std::isnan(p))
        throw Error(std::string(who) + ": p must lie in [0, 1]");
}

double kth_smallest(const std::vector<double>& values, long k) {
    std::vector<double> work(values);
    auto nth = work.begin() + (k - 1);
    std::nth_element(work.begin(), nth, work.end());
    return *nth;
}

}  // namespace

ScoreList::ScoreList(std::vector<double> values) : values_(std::move(values)) {
    for (double v : values_) {
        if (std::isnan(v)) throw Error("ScoreList: NaN score rejected");
    }
}

long conformal_index(long n_cal, double delta) {
    if (n_cal < 1) throw EmptyScores("conformal_index: n_cal must be >= 1");
    if (std::isnan(delta) || delta <= 0.0 || delta >= 1.0)
        throw DeltaInvalid("conformal_index: delta must lie in (0, 1), got " +
                           std::to_string(delta));
    if (delta < 1.0 / static_cast<double>(n_cal + 1))
        throw DeltaTooSmall(
            "conformal_index: delta must be >= 1/(n_cal+1) = 1/" +
            std::to_string(n_cal + 1) + ", got " + std::to_string(delta));
    double raw = (1.0 - delta) * static_cast<double>(n_cal + 1);
    long k = static_cast<long>(std::ceil(raw));
    if (k < 1) k = 1;
    if (k > n_cal) k = n_cal;  // only reachable through float rounding
    return k;
}

double binomial_cdf(long k, long n, double p) {
    check_np(n, p, "binomial_cdf");
    if (k < 0 || k > n) throw Error("binomial_cdf: k out of range");
    if (p <= 0.0) return 1.0;
    if (p >= 1.0) return k >= n ? 1.0 : 0.0;
    if (k >= n) return 1.0;
    // Sum the smaller tail for accuracy.
    long double result;
    if (k + 1 <= n - k) {
        result = sum_pmf_range(0, k, n, p);
    } else {
        result = 1.0L - sum_pmf_range(k + 1, n, n, p);
    }
    if (result < 0.0L) result = 0.0L;
    if (result > 1.0L) result = 1.0L;
    return static_cast<double>(result);
}

double binomial_sf(long k, long n, double p) {
    check_np(n, p, "binomial_sf");
    if (k < 0 || k > n + 1) throw Error("binomial_sf: k out of range");
    if (k <= 0) return 1.0;
    if (k > n) return 0.0;
    if (p <= 0.0) return 0.0;
    if (p >= 1.0) return 1.0;
    long double result;
    if (n - k <= k - 1) {
        result = sum_pmf_range(k, n, n, p);
    } else {
        result = 1.0L - sum_pmf_range(0, k - 1, n, p);
    }
    if (result < 0.0L) result = 0.0L;
    if (result > 1.0L) result = 1.0L;
    return static_cast<double>(result);
}

long ucb_order_index(long n, double q, double confidence) {
    if (n < 1) throw EmptyScores("ucb_order_index: n must be >= 1");
    if (std::isnan(q) || q <= 0.0 || q >= 1.0)
        throw Error("ucb_order_index: q must lie in (0, 1)");
    if (std::isnan(confidence) || confidence <= 0.0 || confidence >= 1.0)
        throw Error("ucb_order_index: confidence must lie in (0, 1)");
    // r = min{k in 1..n : BinomialCdf(k-1; n, q) >= confidence}. The CDF is
    // accumulated once, term by term, with the same arithmetic as
    // binomial_cdf so the two agree bit-for-bit at the decision threshold.
    const long double logp = std::log(static_cast<long double>(q));
    const long double log1mp = std::log1p(-static_cast<long double>(q));
    long double lt = log_pmf(0, n, logp, log1mp);
    long double cum = std::exp(lt);
    for (long k = 1; k <= n; ++k) {
        // cum currently holds BinomialCdf(k-1; n, q).
        if (cum >= static_cast<long double>(confidence)) return k;
        if (k < n) {
            long j = k;  // advance pmf to term j
            if ((j & 0xff) == 0) {
                lt = log_pmf(j, n, logp, log1mp);
            } else {
                lt += std::log(static_cast<long double>(n - j + 1) / j) +
                      logp - log1mp;
            }
            cum += std::exp(lt);
        }
    }
    return -1;
}

ConformalQuantile quantile_ucb(const ScoreList& scores, double q,
                               double confidence) {
    if (scores.empty()) throw EmptyScores("quantile_ucb: empty score list");
    const long n = static_cast<long>(scores.size());
    const long r = ucb_order_index(n, q, confidence);
    if (r < 0) return {kth_smallest(scores.values(), n), false};
    return {kth_smallest(scores.values(), r), true};
}

ConformalQuantile conformal_quantile(const ScoreList& scores, double delta,
                                     const QuantileStrategy& strategy) {
    if (scores.empty())
        throw EmptyScores("conformal_quantile: empty score list");
    const long n = static_cast<long>(scores.size());
    const long k = conformal_index(n, delta);
    if (strategy.kind == Strategy::Strict) {
        return {kth_smallest(scores.values(), k), true};
    }
    double q = (1.0 - delta) * static_cast<double>(n + 1) /
               static_cast<double>(n);
    q = std::min(q, 1.0 - 1e-12);
    return quantile_ucb(scores, q, strategy.confidence);
}

}  // namespace sqbox
