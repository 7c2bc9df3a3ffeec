#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "sqbox/envs/battle.hpp"
#include "sqbox/envs/tamarisk.hpp"
#include "sqbox/envs/trajectory.hpp"
#include "sqbox/qrf.hpp"
#include "sqbox/trajband.hpp"

namespace sqbox {

// Exact one-sided Clopper-Pearson lower confidence bound for a binomial
// proportion: solves P(Bin(n, p) >= hits) = 1 - confidence by bisection;
// 0 when hits = 0, (1-confidence)^(1/n) when hits = n.
double coverage_ci_lower(long hits, long n, double confidence);

struct CoverageSummary {
    long hits = 0;
    long trials = 0;
    double coverage = 0.0;
    double ci_lower = 0.0;
};
CoverageSummary summarize_coverage(long hits, long trials, double confidence);

// Per-start-state violation analysis. Keys are (native count, invaded
// count) for Tamarisk starts and (blue_0, red_0) for battle starts.
struct FailureCell {
    long key1 = 0;
    long key2 = 0;
    long trials = 0;
    long violations = 0;
    double rate = 0.0;
    double p_value = 1.0;  // P(Bin(trials, delta) >= violations)
    bool flagged = false;  // p_value < alpha
};
struct FailureTable {
    double delta = 0.0;
    double alpha = 0.05;
    std::vector<FailureCell> cells;  // sorted by (key1, key2)
};
FailureTable failure_table(const std::vector<std::pair<long, long>>& keys,
                           const std::vector<bool>& violated, double delta,
                           double alpha = 0.05);

// Spearman rank correlation with average ranks for ties.
double spearman_rho(const std::vector<double>& x,
                    const std::vector<double>& y);

// Left-continuous empirical quantile: smallest value whose cumulative
// fraction reaches p.
double empirical_quantile(std::vector<double> values, double p);

// ---------------------------------------------------------------------------
// Box study on the equicorrelated Gaussian.

struct GaussianStudyConfig {
    long n_train = 2000;  // first m rows estimate location and scale
    long m = 50;
    long d = 10;
    long n_test = 5000;
    long replications = 100;
    std::vector<double> rhos = {0.0, 0.9};
    std::vector<double> deltas = {0.2, 0.1, 0.05, 0.01};
    double ci_confidence = 0.99;
    std::uint64_t seed = 1;
};

struct GaussianRecord {
    std::string method;  // "sbox" | "sboxci" | "bonferroni"
    double rho = 0.0;
    double delta = 0.0;
    double mean_coverage = 0.0;
    double coverage_delta_quantile = 0.0;
    double mean_width = 0.0;       // over dimensions and replications
    double pooled_ci_lower = 0.0;  // bound on coverage pooled across reps
};

struct GaussianStudyReport {
    GaussianStudyConfig config;
    std::vector<GaussianRecord> records;
};

GaussianStudyReport run_gaussian_study(const GaussianStudyConfig& config);

// ---------------------------------------------------------------------------
// Trajectory-band studies on the MDP simulators.

struct MdpStudyConfig {
    std::string env = "tamarisk";  // "tamarisk" | "battle"
    TamariskConfig tamarisk;
    BattleConfig battle;
    long pool = 9000;  // layout: train [0,size), calib [max_size,
                       // max_size+size), test tail
    long test = 5000;
    std::vector<long> sizes = {250, 500, 1000, 2000};
    std::vector<double> deltas = {0.2, 0.1, 0.05, 0.01};
    long m = 100;              // scale rows, SQBox family
    double delta_prime = 0.2;  // SQBox family band level
    ForestParams forest;       // 1000 trees, min_leaf 20 by default
    double ci_confidence = 0.99;
    long failure_size = 2000;  // SQBoxCI failure table location
    double failure_delta = 0.1;
    std::uint64_t seed = 1;
};

struct MdpRecord {
    std::string method;  // "qr" | "sqbox" | "sqboxci" | "cte" | "cteci"
    long size = 0;
    double delta = 0.0;
    double coverage = 0.0;
    double ci_lower = 0.0;
    double mean_width = 0.0;  // CTE family reports its (delta-level) QR band
    double c_hat = 0.0;       // CTE family only
    bool guaranteed = true;   // false when a UCB index was unattainable
};

struct WidthProfile {
    std::string method;  // "sqboxci" | "qr" | "qr_inner"
    long size = 0;
    double delta = 0.0;
    std::vector<double> mean_width_by_t;
};

struct MdpStudyReport {
    MdpStudyConfig config;
    std::string env;
    std::string env_config_json;
    std::vector<MdpRecord> records;
    std::vector<WidthProfile> width_profiles;  // at the largest size
    FailureTable failure;  // SQBoxCI at (failure_size, failure_delta)
};

// Samples the pool internally, then delegates to the record-driven runner.
MdpStudyReport run_mdp_study(const MdpStudyConfig& config);
// Runs the full grid from an existing pool (e.g. reloaded from disk); the
// result is identical to the in-memory run on the same records.
MdpStudyReport run_mdp_study(const MdpStudyConfig& config,
                             const std::vector<TrajectoryRecord>& pool);

// ---------------------------------------------------------------------------
// Order-statistic quantile estimators on t(1).

struct QuantileCiStudyConfig {
    std::vector<double> deltas = {0.2, 0.1, 0.05, 0.01};
    std::vector<long> sizes = {200, 400, 800, 1600, 3200, 6400};
    long trials = 1000;
    std::uint64_t seed = 1;
};

struct QuantileCiRecord {
    double delta = 0.0;
    long n = 0;
    double true_quantile = 0.0;  // t(1) quantile at 1 - delta
    double strict_success = 0.0;  // fraction of trials estimate >= true
    double ucb_success = 0.0;
    double strict_median = 0.0;  // median estimate across trials
    double ucb_median = 0.0;
    double ucb_unguaranteed_rate = 0.0;
};

struct QuantileCiStudyReport {
    QuantileCiStudyConfig config;
    std::vector<QuantileCiRecord> records;
};

QuantileCiStudyReport run_quantile_ci_study(
    const QuantileCiStudyConfig& config);

// ---------------------------------------------------------------------------
// Report serialization (single JSON documents; the CLI also renders tables).

std::string to_json_string(const GaussianStudyReport& report);
std::string to_json_string(const MdpStudyReport& report);
std::string to_json_string(const QuantileCiStudyReport& report);

}  // namespace sqbox
