#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <string>
#include <utility>
#include <vector>

#include <doctest.h>
#include <nlohmann/json.hpp>

#include "sqbox/envs/generators.hpp"
#include "sqbox/envs/tamarisk.hpp"
#include "sqbox/errors.hpp"
#include "sqbox/eval.hpp"
#include "support/oracles.hpp"

using namespace sqbox;
using json = nlohmann::json;

TEST_CASE("clopper pearson lower bound matches the oracle") {
    struct Cell {
        long hits, n;
        double confidence;
    };
    const Cell cells[] = {
        {450, 500, 0.99}, {90, 100, 0.95}, {9, 10, 0.99},
        {1, 1000, 0.90},  {37, 40, 0.999},
    };
    for (const Cell& c : cells) {
        double got = coverage_ci_lower(c.hits, c.n, c.confidence);
        double want = oracle::clopper_pearson_lower(c.hits, c.n, c.confidence);
        CHECK(std::abs(got - want) < 1e-9);
        CHECK(got < static_cast<double>(c.hits) / static_cast<double>(c.n));
        CHECK(got > 0.0);
    }

    // Closed forms: no hits pins the bound at zero, all hits solves
    // p^n = 1 - confidence.
    CHECK(coverage_ci_lower(0, 77, 0.9) == 0.0);
    CHECK(std::abs(coverage_ci_lower(50, 50, 0.99) -
                   std::pow(0.01, 1.0 / 50.0)) < 1e-12);
    CHECK(std::abs(coverage_ci_lower(1, 1, 0.95) - 0.05) < 1e-12);

    double prev = -1.0;
    for (long hits = 0; hits <= 25; ++hits) {
        double lo = coverage_ci_lower(hits, 25, 0.9);
        CHECK(lo >= prev);
        prev = lo;
    }

    CHECK_THROWS_AS(coverage_ci_lower(1, 0, 0.9), Error);
    CHECK_THROWS_AS(coverage_ci_lower(-1, 10, 0.9), Error);
    CHECK_THROWS_AS(coverage_ci_lower(11, 10, 0.9), Error);
    CHECK_THROWS_AS(coverage_ci_lower(5, 10, 0.0), Error);
    CHECK_THROWS_AS(coverage_ci_lower(5, 10, 1.0), Error);
}

TEST_CASE("coverage summary carries its own inputs") {
    CoverageSummary s = summarize_coverage(180, 200, 0.95);
    CHECK(s.hits == 180);
    CHECK(s.trials == 200);
    CHECK(s.coverage == 0.9);
    CHECK(s.ci_lower == coverage_ci_lower(180, 200, 0.95));
    CHECK(s.ci_lower < s.coverage);

    CHECK_THROWS_AS(summarize_coverage(1, 0, 0.9), Error);
    CHECK_THROWS_AS(summarize_coverage(7, 5, 0.9), Error);
}

TEST_CASE("failure table pinned binomial tails") {
    // One cell, every trial violated: p = delta^trials exactly.
    {
        std::vector<std::pair<long, long>> keys(3, {2, 1});
        std::vector<bool> violated = {true, true, true};
        FailureTable table = failure_table(keys, violated, 0.1);
        REQUIRE(table.cells.size() == 1);
        const FailureCell& cell = table.cells[0];
        CHECK(cell.key1 == 2);
        CHECK(cell.key2 == 1);
        CHECK(cell.trials == 3);
        CHECK(cell.violations == 3);
        CHECK(cell.rate == 1.0);
        CHECK(cell.p_value == doctest::Approx(0.001).epsilon(1e-12));
        CHECK(cell.flagged);
        CHECK(table.delta == 0.1);
        CHECK(table.alpha == 0.05);
    }

    // No violations: the tail probability is one, never flagged.
    {
        std::vector<std::pair<long, long>> keys(5, {0, 0});
        std::vector<bool> violated(5, false);
        FailureTable table = failure_table(keys, violated, 0.2);
        REQUIRE(table.cells.size() == 1);
        CHECK(table.cells[0].p_value == doctest::Approx(1.0).epsilon(1e-12));
        CHECK_FALSE(table.cells[0].flagged);
        CHECK(table.cells[0].rate == 0.0);
    }

    // Mixed keys: cells come back sorted, counts partition the trials,
    // and the mid-size cell's tail matches the long-double oracle.
    {
        std::vector<std::pair<long, long>> keys;
        std::vector<bool> violated;
        for (int i = 0; i < 10; ++i) {
            keys.push_back({1, 0});
            violated.push_back(i < 2);
        }
        for (int i = 0; i < 40; ++i) {
            keys.push_back({0, 3});
            violated.push_back(i < 8);
        }
        keys.push_back({1, 2});
        violated.push_back(false);

        FailureTable table = failure_table(keys, violated, 0.1);
        REQUIRE(table.cells.size() == 3);
        CHECK(table.cells[0].key1 == 0);
        CHECK(table.cells[0].key2 == 3);
        CHECK(table.cells[1].key1 == 1);
        CHECK(table.cells[1].key2 == 0);
        CHECK(table.cells[2].key1 == 1);
        CHECK(table.cells[2].key2 == 2);

        long total = 0;
        for (const FailureCell& cell : table.cells) {
            total += cell.trials;
            CHECK(cell.violations <= cell.trials);
            CHECK(cell.rate == static_cast<double>(cell.violations) /
                                   static_cast<double>(cell.trials));
            CHECK(cell.p_value >= 0.0);
            CHECK(cell.p_value <= 1.0);
            CHECK(cell.flagged == (cell.p_value < table.alpha));
        }
        CHECK(total == 51);

        double want = static_cast<double>(oracle::binomial_sf(8, 40, 0.1L));
        CHECK(std::abs(table.cells[0].p_value - want) < 1e-10);

        // A stricter alpha re-derives the flags from the same tails.
        FailureTable strict = failure_table(keys, violated, 0.1, 0.01);
        CHECK(strict.alpha == 0.01);
        for (std::size_t i = 0; i < strict.cells.size(); ++i) {
            CHECK(strict.cells[i].p_value == table.cells[i].p_value);
            CHECK(strict.cells[i].flagged ==
                  (strict.cells[i].p_value < 0.01));
        }
    }

    CHECK_THROWS_AS(failure_table({}, {}, 0.1), EmptyScores);
    CHECK_THROWS_AS(failure_table({{0, 0}}, {true, false}, 0.1),
                    LengthMismatch);
    CHECK_THROWS_AS(failure_table({{0, 0}}, {true}, 0.0), DeltaInvalid);
    CHECK_THROWS_AS(failure_table({{0, 0}}, {true}, 1.0), DeltaInvalid);
}

TEST_CASE("spearman rho pinned values and tie handling") {
    CHECK(spearman_rho({1, 2, 3, 4, 5}, {2, 4, 6, 8, 10}) ==
          doctest::Approx(1.0).epsilon(1e-12));
    CHECK(spearman_rho({1, 2, 3, 4, 5}, {10, 8, 6, 4, 2}) ==
          doctest::Approx(-1.0).epsilon(1e-12));

    // One transposition on four points: 1 - 6*2/(4*15) = 0.8.
    CHECK(spearman_rho({1, 2, 3, 4}, {1, 2, 4, 3}) ==
          doctest::Approx(0.8).epsilon(1e-12));

    // Tied pair gets the averaged rank 2.5; the closed form is sqrt(0.9).
    CHECK(spearman_rho({1, 2, 2, 3}, {10, 20, 30, 40}) ==
          doctest::Approx(std::sqrt(0.9)).epsilon(1e-12));

    // A flat input has no ranking to correlate.
    CHECK(spearman_rho({7, 7, 7}, {1, 2, 3}) == 0.0);

    // Only ranks matter: a monotone warp of y changes nothing.
    std::vector<double> x, y, warped;
    for (int i = 0; i < 50; ++i) {
        double v = std::sin(0.7 * i) + 0.01 * i;
        x.push_back(std::cos(1.3 * i));
        y.push_back(v);
        warped.push_back(std::exp(v));
    }
    CHECK(spearman_rho(x, y) == spearman_rho(x, warped));

    CHECK_THROWS_AS(spearman_rho({1, 2}, {1}), LengthMismatch);
    CHECK_THROWS_AS(spearman_rho({1}, {1}), Error);
}

TEST_CASE("empirical quantile takes the left-continuous order statistic") {
    std::vector<double> values = {4, 9, 1, 7, 2, 10, 3, 8, 5, 6};
    CHECK(empirical_quantile(values, 0.05) == 1.0);
    CHECK(empirical_quantile(values, 0.1) == 1.0);
    CHECK(empirical_quantile(values, 0.25) == 3.0);
    CHECK(empirical_quantile(values, 0.65) == 7.0);
    CHECK(empirical_quantile(values, 1.0) == 10.0);
    CHECK(empirical_quantile({42.0}, 0.5) == 42.0);

    CHECK_THROWS_AS(empirical_quantile({}, 0.5), EmptyScores);
    CHECK_THROWS_AS(empirical_quantile(values, 0.0), Error);
    CHECK_THROWS_AS(empirical_quantile(values, 1.5), Error);
}

namespace {

GaussianStudyConfig tiny_gaussian_config() {
    GaussianStudyConfig config;
    config.n_train = 300;
    config.m = 50;
    config.d = 4;
    config.n_test = 200;
    config.replications = 3;
    config.rhos = {0.0, 0.5};
    config.deltas = {0.2, 0.1};
    config.ci_confidence = 0.95;
    config.seed = 11;
    return config;
}

}  // namespace

TEST_CASE("gaussian study grid layout and per-cell invariants") {
    GaussianStudyConfig config = tiny_gaussian_config();
    GaussianStudyReport report = run_gaussian_study(config);

    // rho-major, then delta, then {sbox, sboxci, bonferroni}.
    REQUIRE(report.records.size() == 12);
    const char* methods[3] = {"sbox", "sboxci", "bonferroni"};
    std::size_t idx = 0;
    for (double rho : config.rhos) {
        for (double delta : config.deltas) {
            for (int b = 0; b < 3; ++b, ++idx) {
                const GaussianRecord& r = report.records[idx];
                CHECK(r.method == methods[b]);
                CHECK(r.rho == rho);
                CHECK(r.delta == delta);
                CHECK(r.mean_coverage >= 0.55);
                CHECK(r.mean_coverage <= 1.0);
                CHECK(r.coverage_delta_quantile <=
                      r.mean_coverage + 1e-12);
                CHECK(r.pooled_ci_lower <= r.mean_coverage + 1e-12);
                CHECK(r.pooled_ci_lower > 0.3);
                CHECK(r.mean_width > 0.0);
            }
        }
    }

    // The UCB box is the strict box inflated, so it dominates pointwise.
    for (std::size_t i = 0; i < report.records.size(); i += 3) {
        const GaussianRecord& strict = report.records[i];
        const GaussianRecord& ucb = report.records[i + 1];
        CHECK(ucb.mean_coverage >= strict.mean_coverage);
        CHECK(ucb.mean_width >= strict.mean_width);
        CHECK(ucb.pooled_ci_lower >= strict.pooled_ci_lower);
    }

    // Nominal coverage at delta = 0.2 for the strict box, both rhos.
    CHECK(report.records[0].mean_coverage == doctest::Approx(0.8).epsilon(0.15));
    CHECK(report.records[6].mean_coverage == doctest::Approx(0.8).epsilon(0.15));

    std::string dump = to_json_string(report);
    CHECK(dump.find("\"kind\":\"gaussian-study\"") != std::string::npos);
    json doc = json::parse(dump);
    CHECK(doc["records"].size() == 12);
    CHECK(doc["config"]["seed"] == 11);
    CHECK(doc["config"]["replications"] == 3);

    // Bit-for-bit reproducible, including across worker counts.
    CHECK(to_json_string(run_gaussian_study(config)) == dump);
    setenv("SQBOX_WORKERS", "2", 1);
    std::string threaded = to_json_string(run_gaussian_study(config));
    unsetenv("SQBOX_WORKERS");
    CHECK(threaded == dump);

    GaussianStudyConfig bad = config;
    bad.replications = 0;
    CHECK_THROWS_AS(run_gaussian_study(bad), InvalidConfig);
    bad = config;
    bad.n_test = 0;
    CHECK_THROWS_AS(run_gaussian_study(bad), InvalidConfig);
}

namespace {

MdpStudyConfig tiny_mdp_config() {
    MdpStudyConfig config;
    config.env = "tamarisk";
    config.tamarisk.horizon = 8;
    config.pool = 500;
    config.test = 200;
    config.sizes = {60, 120};
    config.deltas = {0.2, 0.1};
    config.m = 30;
    config.delta_prime = 0.2;
    config.forest.tree_count = 10;
    config.forest.min_leaf = 10;
    config.forest.seed = 5;
    config.forest.workers = 1;
    config.ci_confidence = 0.95;
    config.failure_size = 120;
    config.failure_delta = 0.1;
    config.seed = 21;
    return config;
}

}  // namespace

TEST_CASE("mdp study on a tiny tamarisk grid") {
    MdpStudyConfig config = tiny_mdp_config();
    MdpStudyReport report = run_mdp_study(config);

    CHECK(report.env == "tamarisk");
    json env_doc = json::parse(report.env_config_json);
    CHECK(env_doc["horizon"] == 8);

    // Per (size, delta): sqbox, sqboxci, qr, cte, cteci.
    REQUIRE(report.records.size() == 20);
    const char* methods[5] = {"sqbox", "sqboxci", "qr", "cte", "cteci"};
    std::size_t idx = 0;
    for (long size : config.sizes) {
        for (double delta : config.deltas) {
            for (int b = 0; b < 5; ++b, ++idx) {
                const MdpRecord& r = report.records[idx];
                CHECK(r.method == methods[b]);
                CHECK(r.size == size);
                CHECK(r.delta == delta);
                CHECK(r.coverage >= 0.0);
                CHECK(r.coverage <= 1.0);
                CHECK(r.ci_lower <= r.coverage + 1e-12);
                CHECK(r.mean_width > 0.0);
            }
            const MdpRecord& sq = report.records[idx - 5];
            const MdpRecord& sqci = report.records[idx - 4];
            const MdpRecord& cte = report.records[idx - 2];
            const MdpRecord& cteci = report.records[idx - 1];
            CHECK(sq.guaranteed);
            CHECK(cte.guaranteed);
            CHECK(sqci.coverage >= sq.coverage);
            CHECK(sqci.mean_width >= sq.mean_width);
            CHECK(cteci.coverage >= cte.coverage);
            CHECK(cte.c_hat >= 0.0);
            CHECK(cteci.c_hat >= cte.c_hat);
        }
    }

    // Profiles only at the largest size: the shared inner band, then an
    // sqboxci and a qr profile per delta.
    REQUIRE(report.width_profiles.size() == 5);
    CHECK(report.width_profiles[0].method == "qr_inner");
    CHECK(report.width_profiles[1].method == "sqboxci");
    CHECK(report.width_profiles[2].method == "qr");
    CHECK(report.width_profiles[3].method == "sqboxci");
    CHECK(report.width_profiles[4].method == "qr");
    for (const WidthProfile& profile : report.width_profiles) {
        CHECK(profile.size == 120);
        REQUIRE(profile.mean_width_by_t.size() == 8);
        for (double w : profile.mean_width_by_t) CHECK(w >= 0.0);
    }
    for (std::size_t p : {1u, 3u}) {
        const WidthProfile& inflated = report.width_profiles[p];
        const WidthProfile& inner = report.width_profiles[0];
        for (std::size_t t = 0; t < 8; ++t)
            CHECK(inflated.mean_width_by_t[t] >= inner.mean_width_by_t[t]);
    }

    // The failure table was taken at (failure_size, failure_delta) on the
    // sqboxci band and partitions the test set.
    CHECK(report.failure.delta == 0.1);
    REQUIRE(!report.failure.cells.empty());
    long total = 0;
    for (const FailureCell& cell : report.failure.cells) {
        total += cell.trials;
        CHECK(cell.key1 >= 0);
        CHECK(cell.key2 >= 0);
        CHECK(cell.key1 + cell.key2 <= 7);
        CHECK(cell.violations <= cell.trials);
        CHECK(cell.flagged == (cell.p_value < report.failure.alpha));
    }
    CHECK(total == 200);

    std::string dump = to_json_string(report);
    CHECK(dump.find("\"kind\":\"mdp-study\"") != std::string::npos);
    json doc = json::parse(dump);
    CHECK(doc["records"].size() == 20);
    CHECK(doc["env"] == "tamarisk");

    // Feeding the same pool back in reproduces the report exactly, as does
    // a threaded rerun.
    std::vector<TrajectoryRecord> pool =
        sample_trajectories(config.tamarisk, config.pool, config.seed);
    CHECK(to_json_string(run_mdp_study(config, pool)) == dump);
    setenv("SQBOX_WORKERS", "3", 1);
    std::string threaded = to_json_string(run_mdp_study(config));
    unsetenv("SQBOX_WORKERS");
    CHECK(threaded == dump);

    MdpStudyConfig bad = config;
    bad.env = "swamp";
    CHECK_THROWS_AS(run_mdp_study(bad), InvalidConfig);
    bad = config;
    bad.pool = 300;  // 2 * 120 + 200 > 300
    CHECK_THROWS_AS(run_mdp_study(bad), InsufficientData);
    bad = config;
    bad.sizes = {};
    CHECK_THROWS_AS(run_mdp_study(bad), InvalidConfig);
}

TEST_CASE("quantile ci study matches its construction") {
    QuantileCiStudyConfig config;
    config.deltas = {0.2, 0.1};
    config.sizes = {200, 400};
    config.trials = 200;
    config.seed = 3;
    QuantileCiStudyReport report = run_quantile_ci_study(config);

    REQUIRE(report.records.size() == 4);
    std::size_t idx = 0;
    for (double delta : config.deltas) {
        for (long n : config.sizes) {
            const QuantileCiRecord& r = report.records[idx++];
            CHECK(r.delta == delta);
            CHECK(r.n == n);
            CHECK(r.true_quantile == true_t1_quantile(1.0 - delta));

            // The plain conformal order statistic lands above the truth
            // about half the time; the inflated one nearly always.
            CHECK(r.strict_success >= 0.30);
            CHECK(r.strict_success <= 0.75);
            CHECK(r.ucb_success >= r.strict_success);
            CHECK(r.ucb_success >= 1.0 - delta - 0.04);
            CHECK(r.ucb_median >= r.strict_median);
            CHECK(r.ucb_median >= r.true_quantile);
            CHECK(r.ucb_unguaranteed_rate == 0.0);
        }
    }

    std::string dump = to_json_string(report);
    CHECK(dump.find("\"kind\":\"quantile-ci-study\"") != std::string::npos);
    CHECK(to_json_string(run_quantile_ci_study(config)) == dump);

    QuantileCiStudyConfig bad = config;
    bad.trials = 0;
    CHECK_THROWS_AS(run_quantile_ci_study(bad), InvalidConfig);
    bad = config;
    bad.deltas = {0.01};
    bad.sizes = {50};
    CHECK_THROWS_AS(run_quantile_ci_study(bad), DeltaTooSmall);
}
