#pragma once

#include <cstddef>
#include <vector>

namespace sqbox {

// Calibration scores. Construction rejects NaN; emptiness is rejected by the
// operations that consume scores.
class ScoreList {
public:
    ScoreList() = default;
    explicit ScoreList(std::vector<double> values);

    const std::vector<double>& values() const { return values_; }
    std::size_t size() const { return values_.size(); }
    bool empty() const { return values_.empty(); }

private:
    std::vector<double> values_;
};

enum class Strategy { Strict, UpperConfidence };

struct QuantileStrategy {
    Strategy kind = Strategy::Strict;
    // Confidence level for the UpperConfidence strategy, in (0, 1).
    double confidence = 0.0;

    static QuantileStrategy strict() { return {Strategy::Strict, 0.0}; }
    static QuantileStrategy ucb(double confidence) {
        return {Strategy::UpperConfidence, confidence};
    }
    // Default CI-variant wiring: confidence 1 - delta/2.
    static QuantileStrategy ucb_for(double delta) {
        return ucb(1.0 - delta / 2.0);
    }
};

struct ConformalQuantile {
    double value = 0.0;
    // False when the requested upper confidence bound is not attainable from
    // the sample and the largest order statistic was returned instead.
    bool guaranteed = true;
};

// 1-based order-statistic index ceil((1-delta)(n_cal+1)).
// Throws DeltaInvalid unless 0 < delta < 1, DeltaTooSmall if delta < 1/(n_cal+1).
long conformal_index(long n_cal, double delta);

// Exact P(Binomial(n, p) <= k), evaluated by stable log-space summation.
// Requires 0 <= k <= n, 0 <= p <= 1.
double binomial_cdf(long k, long n, double p);

// Exact upper tail P(Binomial(n, p) >= k), 0 <= k <= n+1.
double binomial_sf(long k, long n, double p);

// Smallest r in 1..n with BinomialCdf(r-1; n, q) >= confidence, or -1 when
// even r = n fails. Depends only on (n, q, confidence), not on the scores.
long ucb_order_index(long n, double q, double confidence);

// Distribution-free upper confidence bound for the q-quantile: the r-th order
// statistic with r = ucb_order_index(n, q, confidence). When no such r exists
// the largest score is returned with guaranteed = false.
ConformalQuantile quantile_ucb(const ScoreList& scores, double q,
                               double confidence);

// Conformal quantile of the scores at miscoverage delta under the given
// strategy. Strict: the conformal_index-th order statistic. UpperConfidence:
// quantile_ucb at target quantile (1-delta)(n+1)/n, clamped below 1.
ConformalQuantile conformal_quantile(const ScoreList& scores, double delta,
                                     const QuantileStrategy& strategy);

}  // namespace sqbox
