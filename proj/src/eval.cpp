#include "sqbox/eval.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>

#include <nlohmann/json.hpp>

#include "sqbox/errors.hpp"
#include "sqbox/multibox.hpp"
#include "sqbox/envs/generators.hpp"
#include "sqbox/parallel.hpp"
#include "sqbox/rng.hpp"

namespace sqbox {

namespace {

using json = nlohmann::json;

constexpr std::uint64_t kGaussStudySalt = 0x626f7873ull;
constexpr std::uint64_t kQuantileStudySalt = 0x71636931ull;

void check_confidence(double confidence, const char* who) {
    if (std::isnan(confidence) || confidence <= 0.0 || confidence >= 1.0)
        throw Error(std::string(who) + ": confidence must lie in (0, 1)");
}

double mean_of(const std::vector<double>& values) {
    if (values.empty()) return 0.0;
    return std::accumulate(values.begin(), values.end(), 0.0) /
           static_cast<double>(values.size());
}

double median_of(std::vector<double> values) {
    std::sort(values.begin(), values.end());
    std::size_t n = values.size();
    if (n == 0) return 0.0;
    if (n % 2 == 1) return values[n / 2];
    return 0.5 * (values[n / 2 - 1] + values[n / 2]);
}

std::vector<double> average_ranks(const std::vector<double>& values) {
    const std::size_t n = values.size();
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        return values[a] < values[b];
    });
    std::vector<double> ranks(n);
    std::size_t i = 0;
    while (i < n) {
        std::size_t j = i;
        while (j + 1 < n && values[order[j + 1]] == values[order[i]]) ++j;
        double shared = 0.5 * static_cast<double>(i + j) + 1.0;
        for (std::size_t k = i; k <= j; ++k) ranks[order[k]] = shared;
        i = j + 1;
    }
    return ranks;
}

}  // namespace

double coverage_ci_lower(long hits, long n, double confidence) {
    if (n < 1) throw Error("coverage_ci_lower: n must be >= 1");
    if (hits < 0 || hits > n)
        throw Error("coverage_ci_lower: hits out of range");
    check_confidence(confidence, "coverage_ci_lower");
    if (hits == 0) return 0.0;
    const double alpha = 1.0 - confidence;
    // binomial_sf(hits, n, p) is strictly increasing in p on (0, 1); the
    // Clopper-Pearson lower bound is the root of sf = alpha.
    double lo = 0.0, hi = 1.0;
    for (int it = 0; it < 200; ++it) {
        double mid = 0.5 * (lo + hi);
        if (binomial_sf(hits, n, mid) < alpha)
            lo = mid;
        else
            hi = mid;
    }
    return 0.5 * (lo + hi);
}

CoverageSummary summarize_coverage(long hits, long trials,
                                   double confidence) {
    if (trials < 1) throw Error("summarize_coverage: trials must be >= 1");
    if (hits < 0 || hits > trials)
        throw Error("summarize_coverage: hits out of range");
    CoverageSummary s;
    s.hits = hits;
    s.trials = trials;
    s.coverage = static_cast<double>(hits) / static_cast<double>(trials);
    s.ci_lower = coverage_ci_lower(hits, trials, confidence);
    return s;
}

FailureTable failure_table(const std::vector<std::pair<long, long>>& keys,
                           const std::vector<bool>& violated, double delta,
                           double alpha) {
    if (keys.empty()) throw EmptyScores("failure_table: no trials");
    if (keys.size() != violated.size())
        throw LengthMismatch("failure_table: keys and outcomes disagree");
    if (std::isnan(delta) || delta <= 0.0 || delta >= 1.0)
        throw DeltaInvalid("failure_table: delta must lie in (0, 1)");
    std::map<std::pair<long, long>, std::pair<long, long>> cells;
    for (std::size_t i = 0; i < keys.size(); ++i) {
        auto& cell = cells[keys[i]];
        cell.first += 1;
        cell.second += violated[i] ? 1 : 0;
    }
    FailureTable table;
    table.delta = delta;
    table.alpha = alpha;
    for (const auto& [key, counts] : cells) {
        FailureCell cell;
        cell.key1 = key.first;
        cell.key2 = key.second;
        cell.trials = counts.first;
        cell.violations = counts.second;
        cell.rate = static_cast<double>(cell.violations) /
                    static_cast<double>(cell.trials);
        cell.p_value = binomial_sf(cell.violations, cell.trials, delta);
        cell.flagged = cell.p_value < alpha;
        table.cells.push_back(cell);
    }
    return table;
}

double spearman_rho(const std::vector<double>& x,
                    const std::vector<double>& y) {
    if (x.size() != y.size())
        throw LengthMismatch("spearman_rho: lengths disagree");
    if (x.size() < 2) throw Error("spearman_rho: need at least two points");
    std::vector<double> rx = average_ranks(x);
    std::vector<double> ry = average_ranks(y);
    double mx = mean_of(rx), my = mean_of(ry);
    double sxy = 0.0, sxx = 0.0, syy = 0.0;
    for (std::size_t i = 0; i < rx.size(); ++i) {
        double dx = rx[i] - mx, dy = ry[i] - my;
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    if (sxx == 0.0 || syy == 0.0) return 0.0;
    return sxy / std::sqrt(sxx * syy);
}

double empirical_quantile(std::vector<double> values, double p) {
    if (values.empty()) throw EmptyScores("empirical_quantile: no values");
    if (std::isnan(p) || p <= 0.0 || p > 1.0)
        throw Error("empirical_quantile: p must lie in (0, 1]");
    std::sort(values.begin(), values.end());
    long n = static_cast<long>(values.size());
    long k = static_cast<long>(std::ceil(p * static_cast<double>(n)));
    if (k < 1) k = 1;
    if (k > n) k = n;
    return values[k - 1];
}

// ---------------------------------------------------------------------------

namespace {

struct GaussianRepOutcome {
    // Indexed [delta][method]: 0 sbox, 1 sboxci, 2 bonferroni.
    std::vector<std::array<double, 3>> coverage;
    std::vector<std::array<double, 3>> width;
    std::vector<std::array<long, 3>> hits;
};

long count_hits(const BoxInterval& box, const PointSet& test) {
    const std::vector<double> lo = box.lower();
    const std::vector<double> hi = box.upper();
    long hits = 0;
    for (std::size_t i = 0; i < test.rows(); ++i) {
        bool inside = true;
        for (std::size_t j = 0; j < test.cols(); ++j) {
            double v = test.at(i, j);
            if (v < lo[j] || v > hi[j]) {
                inside = false;
                break;
            }
        }
        hits += inside ? 1 : 0;
    }
    return hits;
}

double box_mean_width(const BoxInterval& box) {
    double sum = 0.0;
    for (double s : box.scale) sum += 2.0 * box.beta * s;
    return sum / static_cast<double>(box.scale.size());
}

}  // namespace

GaussianStudyReport run_gaussian_study(const GaussianStudyConfig& config) {
    if (config.replications < 1)
        throw InvalidConfig("gaussian study: replications must be >= 1");
    if (config.n_test < 1)
        throw InvalidConfig("gaussian study: n_test must be >= 1");
    GaussianStudyReport report;
    report.config = config;
    const long reps = config.replications;
    static const char* kMethods[3] = {"sbox", "sboxci", "bonferroni"};

    for (std::size_t ri = 0; ri < config.rhos.size(); ++ri) {
        const double rho = config.rhos[ri];
        std::vector<GaussianRepOutcome> outcomes(reps);
        parallel_for(reps, default_workers(), [&](long rep) {
            std::uint64_t rep_seed = mix_seed(
                mix_seed(mix_seed(config.seed, kGaussStudySalt), ri),
                static_cast<std::uint64_t>(rep));
            PointSet train = gen_gaussian(config.n_train, config.d, rho,
                                          mix_seed(rep_seed, 1));
            PointSet test = gen_gaussian(config.n_test, config.d, rho,
                                         mix_seed(rep_seed, 2));
            GaussianRepOutcome& out = outcomes[rep];
            out.coverage.resize(config.deltas.size());
            out.width.resize(config.deltas.size());
            out.hits.resize(config.deltas.size());
            for (std::size_t di = 0; di < config.deltas.size(); ++di) {
                const double delta = config.deltas[di];
                BoxInterval boxes[3] = {
                    fit_sbox(train, config.m, delta,
                             QuantileStrategy::strict()),
                    fit_sbox(train, config.m, delta,
                             QuantileStrategy::ucb_for(delta)),
                    fit_bonferroni(train, config.m, delta),
                };
                for (int b = 0; b < 3; ++b) {
                    long hits = count_hits(boxes[b], test);
                    out.hits[di][b] = hits;
                    out.coverage[di][b] =
                        static_cast<double>(hits) /
                        static_cast<double>(config.n_test);
                    out.width[di][b] = box_mean_width(boxes[b]);
                }
            }
        });
        for (std::size_t di = 0; di < config.deltas.size(); ++di) {
            for (int b = 0; b < 3; ++b) {
                std::vector<double> coverages(reps), widths(reps);
                long pooled_hits = 0;
                for (long rep = 0; rep < reps; ++rep) {
                    coverages[rep] = outcomes[rep].coverage[di][b];
                    widths[rep] = outcomes[rep].width[di][b];
                    pooled_hits += outcomes[rep].hits[di][b];
                }
                GaussianRecord record;
                record.method = kMethods[b];
                record.rho = rho;
                record.delta = config.deltas[di];
                record.mean_coverage = mean_of(coverages);
                record.coverage_delta_quantile =
                    empirical_quantile(coverages, config.deltas[di]);
                record.mean_width = mean_of(widths);
                record.pooled_ci_lower = coverage_ci_lower(
                    pooled_hits, reps * config.n_test, config.ci_confidence);
                report.records.push_back(std::move(record));
            }
        }
    }
    return report;
}

// ---------------------------------------------------------------------------

namespace {

TrajectoryDataset concat_slices(const std::vector<TrajectoryRecord>& pool,
                                std::size_t a0, std::size_t a1,
                                std::size_t b0, std::size_t b1) {
    const std::size_t d = pool[a0].start_features.size();
    const std::size_t h = pool[a0].behavior.size();
    std::vector<double> features, behavior;
    features.reserve(((a1 - a0) + (b1 - b0)) * d);
    behavior.reserve(((a1 - a0) + (b1 - b0)) * h);
    auto append = [&](std::size_t lo, std::size_t hi) {
        for (std::size_t i = lo; i < hi; ++i) {
            const TrajectoryRecord& r = pool[i];
            if (r.start_features.size() != d || r.behavior.size() != h)
                throw LengthMismatch("mdp study: ragged pool records");
            features.insert(features.end(), r.start_features.begin(),
                            r.start_features.end());
            behavior.insert(behavior.end(), r.behavior.begin(),
                            r.behavior.end());
        }
    };
    append(a0, a1);
    append(b0, b1);
    return {Matrix(std::move(features), (a1 - a0) + (b1 - b0), d),
            Matrix(std::move(behavior), (a1 - a0) + (b1 - b0), h)};
}

std::pair<long, long> tamarisk_failure_key(const std::vector<double>& f) {
    long natives = 0, invaded = 0;
    for (double v : f) {
        if (v == 2.0) ++natives;
        if (v == 1.0) ++invaded;
    }
    return {natives, invaded};
}

std::pair<long, long> battle_failure_key(const std::vector<double>& f) {
    return {static_cast<long>(f[0]), static_cast<long>(f[1])};
}

}  // namespace

MdpStudyReport run_mdp_study(const MdpStudyConfig& config) {
    std::vector<TrajectoryRecord> pool;
    if (config.env == "tamarisk") {
        pool = sample_trajectories(config.tamarisk, config.pool, config.seed);
    } else if (config.env == "battle") {
        pool = sample_trajectories(config.battle, config.pool, config.seed);
    } else {
        throw InvalidConfig("mdp study: unknown env " + config.env);
    }
    return run_mdp_study(config, pool);
}

MdpStudyReport run_mdp_study(const MdpStudyConfig& config,
                             const std::vector<TrajectoryRecord>& pool) {
    if (config.sizes.empty() || config.deltas.empty())
        throw InvalidConfig("mdp study: empty size or delta grid");
    const long max_size = *std::max_element(config.sizes.begin(),
                                            config.sizes.end());
    const long n_pool = static_cast<long>(pool.size());
    if (2 * max_size + config.test > n_pool)
        throw InsufficientData(
            "mdp study: pool too small for 2*max_size + test");

    MdpStudyReport report;
    report.config = config;
    report.env = config.env;
    if (config.env == "tamarisk") {
        report.env_config_json = tamarisk_config_json(config.tamarisk);
    } else if (config.env == "battle") {
        report.env_config_json = battle_config_json(config.battle);
    } else {
        throw InvalidConfig("mdp study: unknown env " + config.env);
    }

    const TrajectoryDataset test = to_dataset(pool, n_pool - config.test,
                                              n_pool);
    const long n_test = static_cast<long>(test.size());
    const long h = static_cast<long>(test.horizon());

    std::vector<std::pair<long, long>> failure_keys(n_test);
    for (long i = 0; i < n_test; ++i) {
        std::vector<double> f(test.features.row(i),
                              test.features.row(i) + test.features.cols());
        failure_keys[i] = config.env == "tamarisk" ? tamarisk_failure_key(f)
                                                   : battle_failure_key(f);
    }

    for (long size : config.sizes) {
        TrajectoryDataset data = concat_slices(
            pool, 0, size, max_size, max_size + size);
        std::vector<ForestPtr> forests =
            fit_timestep_forests(data, size, config.forest);

        SplitConfig sq_base;
        sq_base.l = size;
        sq_base.m = config.m;
        sq_base.delta = config.delta_prime;  // unused by the calibration
        sq_base.delta_prime = config.delta_prime;
        SqboxCalibration sqcal = sqbox_calibration(forests, data, sq_base);
        const ScoreList sq_scores(sqcal.scores);
        const double mean_sigma = mean_of(sqcal.sigma);

        // Inner band of the SQBox family on the test set.
        std::vector<Band> inner = predict_qr_bands(
            forests, test.features, config.delta_prime / 2.0,
            1.0 - config.delta_prime / 2.0);
        std::vector<double> inner_width_by_t(h, 0.0);
        std::vector<double> sq_score(n_test, 0.0);
        for (long i = 0; i < n_test; ++i) {
            for (long t = 0; t < h; ++t) {
                double b = test.behavior.at(i, t);
                double ex = std::max({0.0, inner[i].lo[t] - b,
                                      b - inner[i].hi[t]});
                sq_score[i] = std::max(sq_score[i], ex / sqcal.sigma[t]);
                inner_width_by_t[t] += inner[i].hi[t] - inner[i].lo[t];
            }
        }
        for (long t = 0; t < h; ++t)
            inner_width_by_t[t] /= static_cast<double>(n_test);
        const double inner_mean_width = mean_of(inner_width_by_t);
        inner.clear();
        inner.shrink_to_fit();

        if (size == max_size) {
            WidthProfile profile;
            profile.method = "qr_inner";
            profile.size = size;
            profile.delta = config.delta_prime;
            profile.mean_width_by_t = inner_width_by_t;
            report.width_profiles.push_back(std::move(profile));
        }

        for (double delta : config.deltas) {
            // SQBox and SQBoxCI share the calibration scores.
            for (int variant = 0; variant < 2; ++variant) {
                QuantileStrategy strategy =
                    variant == 0 ? QuantileStrategy::strict()
                                 : QuantileStrategy::ucb_for(delta);
                ConformalQuantile beta =
                    conformal_quantile(sq_scores, delta, strategy);
                long hits = 0;
                for (long i = 0; i < n_test; ++i)
                    hits += sq_score[i] <= beta.value ? 1 : 0;
                CoverageSummary cov = summarize_coverage(
                    hits, n_test, config.ci_confidence);
                MdpRecord record;
                record.method = variant == 0 ? "sqbox" : "sqboxci";
                record.size = size;
                record.delta = delta;
                record.coverage = cov.coverage;
                record.ci_lower = cov.ci_lower;
                record.mean_width =
                    inner_mean_width + 2.0 * beta.value * mean_sigma;
                record.guaranteed = beta.guaranteed;
                report.records.push_back(record);

                if (variant == 1 && size == config.failure_size &&
                    delta == config.failure_delta) {
                    std::vector<bool> violated(n_test);
                    for (long i = 0; i < n_test; ++i)
                        violated[i] = sq_score[i] > beta.value;
                    report.failure =
                        failure_table(failure_keys, violated, delta);
                }
                if (variant == 1 && size == max_size) {
                    WidthProfile profile;
                    profile.method = "sqboxci";
                    profile.size = size;
                    profile.delta = delta;
                    profile.mean_width_by_t = inner_width_by_t;
                    for (long t = 0; t < h; ++t)
                        profile.mean_width_by_t[t] +=
                            2.0 * beta.value * sqcal.sigma[t];
                    report.width_profiles.push_back(std::move(profile));
                }
            }

            // Bands at the delta level: QR baseline and the CTE family.
            std::vector<Band> bands = predict_qr_bands(
                forests, test.features, delta / 2.0, 1.0 - delta / 2.0);
            std::vector<double> width_by_t(h, 0.0);
            long qr_hits = 0;
            std::vector<double> total_ex(n_test, 0.0);
            for (long i = 0; i < n_test; ++i) {
                bool inside = true;
                for (long t = 0; t < h; ++t) {
                    double b = test.behavior.at(i, t);
                    double ex = std::max({0.0, bands[i].lo[t] - b,
                                          b - bands[i].hi[t]});
                    if (ex > 0.0) inside = false;
                    total_ex[i] += ex;
                    width_by_t[t] += bands[i].hi[t] - bands[i].lo[t];
                }
                qr_hits += inside ? 1 : 0;
            }
            for (long t = 0; t < h; ++t)
                width_by_t[t] /= static_cast<double>(n_test);
            bands.clear();
            bands.shrink_to_fit();

            CoverageSummary qr_cov = summarize_coverage(
                qr_hits, n_test, config.ci_confidence);
            MdpRecord qr_record;
            qr_record.method = "qr";
            qr_record.size = size;
            qr_record.delta = delta;
            qr_record.coverage = qr_cov.coverage;
            qr_record.ci_lower = qr_cov.ci_lower;
            qr_record.mean_width = mean_of(width_by_t);
            report.records.push_back(qr_record);
            if (size == max_size) {
                WidthProfile profile;
                profile.method = "qr";
                profile.size = size;
                profile.delta = delta;
                profile.mean_width_by_t = width_by_t;
                report.width_profiles.push_back(std::move(profile));
            }

            SplitConfig cte_config;
            cte_config.l = size;
            cte_config.m = config.m;
            cte_config.delta = delta;
            cte_config.delta_prime = delta;
            std::vector<double> totals =
                cte_calibration(forests, data, cte_config);
            const ScoreList total_scores(std::move(totals));
            for (int variant = 0; variant < 2; ++variant) {
                QuantileStrategy strategy =
                    variant == 0 ? QuantileStrategy::strict()
                                 : QuantileStrategy::ucb_for(delta);
                ConformalQuantile c_hat =
                    conformal_quantile(total_scores, delta, strategy);
                long hits = 0;
                for (long i = 0; i < n_test; ++i)
                    hits += total_ex[i] <= c_hat.value ? 1 : 0;
                CoverageSummary cov = summarize_coverage(
                    hits, n_test, config.ci_confidence);
                MdpRecord record;
                record.method = variant == 0 ? "cte" : "cteci";
                record.size = size;
                record.delta = delta;
                record.coverage = cov.coverage;
                record.ci_lower = cov.ci_lower;
                record.mean_width = mean_of(width_by_t);
                record.c_hat = c_hat.value;
                record.guaranteed = c_hat.guaranteed;
                report.records.push_back(record);
            }
        }
    }
    return report;
}

// ---------------------------------------------------------------------------

QuantileCiStudyReport run_quantile_ci_study(
    const QuantileCiStudyConfig& config) {
    if (config.trials < 1)
        throw InvalidConfig("quantile ci study: trials must be >= 1");
    QuantileCiStudyReport report;
    report.config = config;
    std::size_t grid_index = 0;
    for (double delta : config.deltas) {
        for (long n : config.sizes) {
            const long k = conformal_index(n, delta);
            double q = (1.0 - delta) * static_cast<double>(n + 1) /
                       static_cast<double>(n);
            q = std::min(q, 1.0 - 1e-12);
            const long r = ucb_order_index(n, q, 1.0 - delta / 2.0);
            const double truth = true_t1_quantile(1.0 - delta);

            std::vector<double> strict_vals(config.trials);
            std::vector<double> ucb_vals(config.trials);
            parallel_for(config.trials, default_workers(), [&](long trial) {
                std::uint64_t trial_seed = mix_seed(
                    mix_seed(mix_seed(config.seed, kQuantileStudySalt),
                             grid_index),
                    static_cast<std::uint64_t>(trial));
                std::vector<double> values =
                    gen_t1(n, trial_seed).values();
                std::sort(values.begin(), values.end());
                strict_vals[trial] = values[k - 1];
                ucb_vals[trial] = r > 0 ? values[r - 1] : values[n - 1];
            });

            QuantileCiRecord record;
            record.delta = delta;
            record.n = n;
            record.true_quantile = truth;
            long strict_ok = 0, ucb_ok = 0;
            for (long t = 0; t < config.trials; ++t) {
                strict_ok += strict_vals[t] >= truth ? 1 : 0;
                ucb_ok += ucb_vals[t] >= truth ? 1 : 0;
            }
            record.strict_success = static_cast<double>(strict_ok) /
                                    static_cast<double>(config.trials);
            record.ucb_success = static_cast<double>(ucb_ok) /
                                 static_cast<double>(config.trials);
            record.strict_median = median_of(strict_vals);
            record.ucb_median = median_of(ucb_vals);
            record.ucb_unguaranteed_rate = r > 0 ? 0.0 : 1.0;
            report.records.push_back(record);
            ++grid_index;
        }
    }
    return report;
}

// ---------------------------------------------------------------------------

namespace {

json forest_params_to_json(const ForestParams& p) {
    json doc;
    doc["tree_count"] = p.tree_count;
    doc["min_leaf"] = p.min_leaf;
    doc["features_per_split"] = p.features_per_split;
    doc["seed"] = p.seed;
    return doc;
}

json failure_to_json(const FailureTable& table) {
    json cells = json::array();
    for (const FailureCell& cell : table.cells) {
        json c;
        c["key1"] = cell.key1;
        c["key2"] = cell.key2;
        c["trials"] = cell.trials;
        c["violations"] = cell.violations;
        c["rate"] = cell.rate;
        c["p_value"] = cell.p_value;
        c["flagged"] = cell.flagged;
        cells.push_back(std::move(c));
    }
    json doc;
    doc["delta"] = table.delta;
    doc["alpha"] = table.alpha;
    doc["cells"] = std::move(cells);
    return doc;
}

}  // namespace

std::string to_json_string(const GaussianStudyReport& report) {
    json config;
    config["n_train"] = report.config.n_train;
    config["m"] = report.config.m;
    config["d"] = report.config.d;
    config["n_test"] = report.config.n_test;
    config["replications"] = report.config.replications;
    config["rhos"] = report.config.rhos;
    config["deltas"] = report.config.deltas;
    config["ci_confidence"] = report.config.ci_confidence;
    config["seed"] = report.config.seed;
    json records = json::array();
    for (const GaussianRecord& r : report.records) {
        json doc;
        doc["method"] = r.method;
        doc["rho"] = r.rho;
        doc["delta"] = r.delta;
        doc["mean_coverage"] = r.mean_coverage;
        doc["coverage_delta_quantile"] = r.coverage_delta_quantile;
        doc["mean_width"] = r.mean_width;
        doc["pooled_ci_lower"] = r.pooled_ci_lower;
        records.push_back(std::move(doc));
    }
    json doc;
    doc["kind"] = "gaussian-study";
    doc["config"] = std::move(config);
    doc["records"] = std::move(records);
    return doc.dump();
}

std::string to_json_string(const MdpStudyReport& report) {
    json config;
    config["env"] = report.config.env;
    config["pool"] = report.config.pool;
    config["test"] = report.config.test;
    config["sizes"] = report.config.sizes;
    config["deltas"] = report.config.deltas;
    config["m"] = report.config.m;
    config["delta_prime"] = report.config.delta_prime;
    config["forest"] = forest_params_to_json(report.config.forest);
    config["ci_confidence"] = report.config.ci_confidence;
    config["failure_size"] = report.config.failure_size;
    config["failure_delta"] = report.config.failure_delta;
    config["seed"] = report.config.seed;
    json records = json::array();
    for (const MdpRecord& r : report.records) {
        json doc;
        doc["method"] = r.method;
        doc["size"] = r.size;
        doc["delta"] = r.delta;
        doc["coverage"] = r.coverage;
        doc["ci_lower"] = r.ci_lower;
        doc["mean_width"] = r.mean_width;
        doc["c_hat"] = r.c_hat;
        doc["guaranteed"] = r.guaranteed;
        records.push_back(std::move(doc));
    }
    json profiles = json::array();
    for (const WidthProfile& p : report.width_profiles) {
        json doc;
        doc["method"] = p.method;
        doc["size"] = p.size;
        doc["delta"] = p.delta;
        doc["mean_width_by_t"] = p.mean_width_by_t;
        profiles.push_back(std::move(doc));
    }
    json doc;
    doc["kind"] = "mdp-study";
    doc["config"] = std::move(config);
    doc["env"] = report.env;
    doc["env_config"] = json::parse(report.env_config_json);
    doc["records"] = std::move(records);
    doc["width_profiles"] = std::move(profiles);
    doc["failure_table"] = failure_to_json(report.failure);
    return doc.dump();
}

std::string to_json_string(const QuantileCiStudyReport& report) {
    json config;
    config["deltas"] = report.config.deltas;
    config["sizes"] = report.config.sizes;
    config["trials"] = report.config.trials;
    config["seed"] = report.config.seed;
    json records = json::array();
    for (const QuantileCiRecord& r : report.records) {
        json doc;
        doc["delta"] = r.delta;
        doc["n"] = r.n;
        doc["true_quantile"] = r.true_quantile;
        doc["strict_success"] = r.strict_success;
        doc["ucb_success"] = r.ucb_success;
        doc["strict_median"] = r.strict_median;
        doc["ucb_median"] = r.ucb_median;
        doc["ucb_unguaranteed_rate"] = r.ucb_unguaranteed_rate;
        records.push_back(std::move(doc));
    }
    json doc;
    doc["kind"] = "quantile-ci-study";
    doc["config"] = std::move(config);
    doc["records"] = std::move(records);
    return doc.dump();
}

}  // namespace sqbox
