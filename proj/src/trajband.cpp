#include "sqbox/trajband.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <string>
#include <unordered_map>

#include <nlohmann/json.hpp>

#include "sqbox/errors.hpp"
#include "sqbox/parallel.hpp"
#include "sqbox/rng.hpp"

namespace sqbox {

namespace {

using json = nlohmann::json;

constexpr std::uint64_t kTimestepForestSalt = 0x74726a62ull;

void check_delta(double delta, const char* who) {
    if (std::isnan(delta) || delta <= 0.0 || delta >= 1.0)
        throw DeltaInvalid(std::string(who) + ": delta must lie in (0, 1)");
}

void check_dataset(const TrajectoryDataset& data) {
    if (data.features.rows() != data.behavior.rows())
        throw LengthMismatch(
            "TrajectoryDataset: features and behavior row counts disagree");
    if (data.behavior.cols() < 1)
        throw DimensionMismatch("TrajectoryDataset: horizon must be >= 1");
    if (data.features.rows() < 1)
        throw InsufficientData("TrajectoryDataset: no rows");
}

// Quantile band values for rows [row_begin, row_end), row-major rows x H,
// computed once per distinct feature vector.
struct QuantileTable {
    std::vector<double> lo;
    std::vector<double> hi;
};

QuantileTable predict_rows(const std::vector<ForestPtr>& forests,
                           const Matrix& features, long row_begin,
                           long row_end, double alpha_lo, double alpha_hi) {
    const long h = static_cast<long>(forests.size());
    const long n = row_end - row_begin;
    QuantileTable table;
    table.lo.assign(n * h, 0.0);
    table.hi.assign(n * h, 0.0);

    std::unordered_map<std::string, long> first_with_key;
    std::vector<long> representative(n);
    for (long i = 0; i < n; ++i) {
        const double* row = features.row(row_begin + i);
        std::string key(reinterpret_cast<const char*>(row),
                        features.cols() * sizeof(double));
        auto [it, inserted] = first_with_key.try_emplace(key, i);
        representative[i] = it->second;
    }

    const std::vector<double> alphas = {alpha_lo, alpha_hi};
    parallel_for(n, default_workers(), [&](long i) {
        if (representative[i] != i) return;
        std::vector<double> x(features.row(row_begin + i),
                              features.row(row_begin + i) + features.cols());
        for (long t = 0; t < h; ++t) {
            std::vector<double> q = forests[t]->predict_quantiles(x, alphas);
            double lo = q[0], hi = q[1];
            if (lo > hi) std::swap(lo, hi);
            table.lo[i * h + t] = lo;
            table.hi[i * h + t] = hi;
        }
    });
    for (long i = 0; i < n; ++i) {
        long rep = representative[i];
        if (rep == i) continue;
        std::copy_n(table.lo.begin() + rep * h, h, table.lo.begin() + i * h);
        std::copy_n(table.hi.begin() + rep * h, h, table.hi.begin() + i * h);
    }
    return table;
}

// Exceedance matrix for rows [row_begin, row_end), row-major rows x H.
std::vector<double> exceedance_rows(const std::vector<ForestPtr>& forests,
                                    const TrajectoryDataset& data,
                                    long row_begin, long row_end,
                                    double alpha_lo, double alpha_hi) {
    const long h = static_cast<long>(forests.size());
    QuantileTable table = predict_rows(forests, data.features, row_begin,
                                       row_end, alpha_lo, alpha_hi);
    std::vector<double> ex((row_end - row_begin) * h, 0.0);
    for (long i = 0; i < row_end - row_begin; ++i) {
        for (long t = 0; t < h; ++t) {
            double b = data.behavior.at(row_begin + i, t);
            double below = table.lo[i * h + t] - b;
            double above = b - table.hi[i * h + t];
            ex[i * h + t] = std::max({0.0, below, above});
        }
    }
    return ex;
}

// Root mean square about zero with denominator m over the first m exceedance
// rows; zero scales take the smallest nonzero one.
std::vector<double> sigma_from_exceedances(const std::vector<double>& ex,
                                           long m, long h) {
    std::vector<double> sigma(h, 0.0);
    for (long i = 0; i < m; ++i)
        for (long t = 0; t < h; ++t) {
            double x = ex[i * h + t];
            sigma[t] += x * x;
        }
    double smallest_nonzero = std::numeric_limits<double>::infinity();
    for (long t = 0; t < h; ++t) {
        sigma[t] = std::sqrt(sigma[t] / static_cast<double>(m));
        if (sigma[t] > 0.0)
            smallest_nonzero = std::min(smallest_nonzero, sigma[t]);
    }
    if (!std::isfinite(smallest_nonzero))
        throw AllScalesZero(
            "sqbox_calibration: all per-timestep scales are zero over the "
            "scale rows");
    for (long t = 0; t < h; ++t)
        if (sigma[t] == 0.0) sigma[t] = smallest_nonzero;
    return sigma;
}

void check_sqbox_config(const SplitConfig& config, const char* who) {
    check_delta(config.delta, who);
    check_delta(config.delta_prime, who);
    if (config.delta_prime < config.delta)
        throw InvalidConfig(std::string(who) +
                            ": delta_prime must be >= delta (the inner "
                            "quantile band is the looser one)");
}

json strategy_to_json(const QuantileStrategy& s) {
    json out;
    out["kind"] = s.kind == Strategy::Strict ? "strict" : "ucb";
    out["confidence"] = s.confidence;
    return out;
}

QuantileStrategy strategy_from_json(const json& doc) {
    QuantileStrategy s;
    std::string kind = doc.at("kind").get<std::string>();
    if (kind == "strict") {
        s.kind = Strategy::Strict;
    } else if (kind == "ucb") {
        s.kind = Strategy::UpperConfidence;
    } else {
        throw IoError("model file: unknown strategy kind " + kind);
    }
    s.confidence = doc.at("confidence").get<double>();
    return s;
}

json config_to_json(const SplitConfig& c) {
    json out;
    out["l"] = c.l;
    out["m"] = c.m;
    out["delta"] = c.delta;
    out["delta_prime"] = c.delta_prime;
    out["strategy"] = strategy_to_json(c.strategy);
    return out;
}

SplitConfig config_from_json(const json& doc) {
    SplitConfig c;
    c.l = doc.at("l").get<long>();
    c.m = doc.at("m").get<long>();
    c.delta = doc.at("delta").get<double>();
    c.delta_prime = doc.at("delta_prime").get<double>();
    c.strategy = strategy_from_json(doc.at("strategy"));
    return c;
}

json forests_to_json(const std::vector<ForestPtr>& forests) {
    json arr = json::array();
    for (const auto& f : forests)
        arr.push_back(json::parse(f->to_json_string()));
    return arr;
}

std::vector<ForestPtr> forests_from_json(const json& arr) {
    std::vector<ForestPtr> forests;
    for (const json& f : arr)
        forests.push_back(
            std::make_shared<Forest>(Forest::from_json_string(f.dump())));
    return forests;
}

json load_model_file(const std::string& path, const char* expected_format) {
    std::ifstream in(path);
    if (!in) throw IoError("load model: cannot open " + path);
    json doc;
    try {
        in >> doc;
    } catch (const json::exception& e) {
        throw IoError("load model: " + path + ": " + e.what());
    }
    if (doc.value("format", "") != expected_format)
        throw IoError("load model: " + path + " is not a " +
                      std::string(expected_format) + " file");
    if (doc.value("version", 0) != 1)
        throw IoError("load model: unsupported version in " + path);
    return doc;
}

void write_json_file(const json& doc, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw IoError("save model: cannot open " + path);
    out << doc.dump() << "\n";
    if (!out) throw IoError("save model: write failed for " + path);
}

}  // namespace

std::vector<double> exceedance(const std::vector<double>& behavior,
                               const std::vector<double>& q_lo,
                               const std::vector<double>& q_hi) {
    if (behavior.size() != q_lo.size() || behavior.size() != q_hi.size())
        throw LengthMismatch("exceedance: vector lengths disagree");
    std::vector<double> out(behavior.size());
    for (std::size_t t = 0; t < behavior.size(); ++t)
        out[t] = std::max({0.0, q_lo[t] - behavior[t], behavior[t] - q_hi[t]});
    return out;
}

std::vector<ForestPtr> fit_timestep_forests(const TrajectoryDataset& data,
                                            long l,
                                            const ForestParams& params) {
    check_dataset(data);
    if (l < 1 || l > static_cast<long>(data.size()))
        throw BadSplit("fit_timestep_forests: l out of range");
    const long h = static_cast<long>(data.horizon());
    Matrix train_features(
        std::vector<double>(data.features.data().begin(),
                            data.features.data().begin() +
                                l * data.features.cols()),
        l, data.features.cols());
    std::vector<ForestPtr> forests(h);
    // Fitted serially; each forest parallelizes over its trees and carries a
    // per-timestep derived seed, so the result is schedule independent.
    for (long t = 0; t < h; ++t) {
        std::vector<double> responses(l);
        for (long i = 0; i < l; ++i) responses[i] = data.behavior.at(i, t);
        ForestParams p = params;
        p.seed = mix_seed(mix_seed(params.seed, kTimestepForestSalt),
                          static_cast<std::uint64_t>(t));
        forests[t] = std::make_shared<Forest>(
            fit_forest(train_features, responses, p));
    }
    return forests;
}

Band predict_qr_band(const std::vector<ForestPtr>& forests,
                     const std::vector<double>& x, double alpha_lo,
                     double alpha_hi) {
    Band band;
    band.lo.resize(forests.size());
    band.hi.resize(forests.size());
    const std::vector<double> alphas = {alpha_lo, alpha_hi};
    for (std::size_t t = 0; t < forests.size(); ++t) {
        std::vector<double> q = forests[t]->predict_quantiles(x, alphas);
        band.lo[t] = std::min(q[0], q[1]);
        band.hi[t] = std::max(q[0], q[1]);
    }
    return band;
}

std::vector<Band> predict_qr_bands(const std::vector<ForestPtr>& forests,
                                   const Matrix& features, double alpha_lo,
                                   double alpha_hi) {
    const long h = static_cast<long>(forests.size());
    const long n = static_cast<long>(features.rows());
    QuantileTable table =
        predict_rows(forests, features, 0, n, alpha_lo, alpha_hi);
    std::vector<Band> bands(n);
    for (long i = 0; i < n; ++i) {
        bands[i].lo.assign(table.lo.begin() + i * h,
                           table.lo.begin() + (i + 1) * h);
        bands[i].hi.assign(table.hi.begin() + i * h,
                           table.hi.begin() + (i + 1) * h);
    }
    return bands;
}

SqboxCalibration sqbox_calibration(const std::vector<ForestPtr>& forests,
                                   const TrajectoryDataset& data,
                                   const SplitConfig& config) {
    check_dataset(data);
    check_delta(config.delta_prime, "sqbox_calibration");
    const long n = static_cast<long>(data.size());
    if (config.l < 1 || config.m < 1)
        throw BadSplit("sqbox_calibration: l and m must be >= 1");
    if (config.l + config.m + 1 > n)
        throw InsufficientData(
            "sqbox_calibration: need at least one conformal row beyond "
            "l + m");
    if (forests.size() != data.horizon())
        throw LengthMismatch(
            "sqbox_calibration: one forest per timestep required");

    const double alpha_lo = config.delta_prime / 2.0;
    const double alpha_hi = 1.0 - config.delta_prime / 2.0;
    const long h = static_cast<long>(data.horizon());
    std::vector<double> ex =
        exceedance_rows(forests, data, config.l, n, alpha_lo, alpha_hi);

    SqboxCalibration calibration;
    calibration.sigma = sigma_from_exceedances(ex, config.m, h);
    const long n_scores = n - config.l - config.m;
    calibration.scores.resize(n_scores);
    for (long i = 0; i < n_scores; ++i) {
        double c = 0.0;
        for (long t = 0; t < h; ++t)
            c = std::max(c,
                         ex[(config.m + i) * h + t] / calibration.sigma[t]);
        calibration.scores[i] = c;
    }
    return calibration;
}

SqboxModel assemble_sqbox(std::vector<ForestPtr> forests,
                          const SqboxCalibration& calibration,
                          const SplitConfig& config) {
    check_sqbox_config(config, "assemble_sqbox");
    SqboxModel model;
    model.alpha_lo = config.delta_prime / 2.0;
    model.alpha_hi = 1.0 - config.delta_prime / 2.0;
    model.sigma = calibration.sigma;
    model.config = config;
    ConformalQuantile q = conformal_quantile(ScoreList(calibration.scores),
                                             config.delta, config.strategy);
    model.beta = q.value;
    model.guaranteed = q.guaranteed;
    model.forests = std::move(forests);
    return model;
}

SqboxModel fit_sqbox(const TrajectoryDataset& data, const SplitConfig& config,
                     const ForestParams& forest_params) {
    check_dataset(data);
    return fit_sqbox_prefit(
        fit_timestep_forests(data, config.l, forest_params), data, config);
}

SqboxModel fit_sqbox_prefit(std::vector<ForestPtr> forests,
                            const TrajectoryDataset& data,
                            const SplitConfig& config) {
    check_sqbox_config(config, "fit_sqbox");
    SqboxCalibration calibration = sqbox_calibration(forests, data, config);
    return assemble_sqbox(std::move(forests), calibration, config);
}

Band predict_band(const SqboxModel& model, const std::vector<double>& x) {
    Band band = predict_qr_band(model.forests, x, model.alpha_lo,
                                model.alpha_hi);
    for (std::size_t t = 0; t < band.lo.size(); ++t) {
        band.lo[t] -= model.beta * model.sigma[t];
        band.hi[t] += model.beta * model.sigma[t];
    }
    return band;
}

std::vector<double> cte_calibration(const std::vector<ForestPtr>& forests,
                                    const TrajectoryDataset& data,
                                    const SplitConfig& config) {
    check_dataset(data);
    check_delta(config.delta, "cte_calibration");
    const long n = static_cast<long>(data.size());
    if (config.l < 1) throw BadSplit("cte_calibration: l must be >= 1");
    if (config.l + 1 > n)
        throw InsufficientData(
            "cte_calibration: need at least one calibration row");
    if (forests.size() != data.horizon())
        throw LengthMismatch(
            "cte_calibration: one forest per timestep required");

    const double alpha_lo = config.delta / 2.0;
    const double alpha_hi = 1.0 - config.delta / 2.0;
    const long h = static_cast<long>(data.horizon());
    std::vector<double> ex =
        exceedance_rows(forests, data, config.l, n, alpha_lo, alpha_hi);
    const long n_scores = n - config.l;
    std::vector<double> totals(n_scores);
    for (long i = 0; i < n_scores; ++i) {
        double sum = 0.0;
        for (long t = 0; t < h; ++t) sum += ex[i * h + t];
        totals[i] = sum;
    }
    return totals;
}

CteModel assemble_cte(std::vector<ForestPtr> forests,
                      const std::vector<double>& totals,
                      const SplitConfig& config) {
    check_delta(config.delta, "assemble_cte");
    CteModel model;
    model.alpha_lo = config.delta / 2.0;
    model.alpha_hi = 1.0 - config.delta / 2.0;
    model.config = config;
    ConformalQuantile q = conformal_quantile(ScoreList(totals), config.delta,
                                             config.strategy);
    model.c_hat = q.value;
    model.guaranteed = q.guaranteed;
    model.forests = std::move(forests);
    return model;
}

CteModel fit_cte(const TrajectoryDataset& data, const SplitConfig& config,
                 const ForestParams& forest_params) {
    check_dataset(data);
    return fit_cte_prefit(fit_timestep_forests(data, config.l, forest_params),
                          data, config);
}

CteModel fit_cte_prefit(std::vector<ForestPtr> forests,
                        const TrajectoryDataset& data,
                        const SplitConfig& config) {
    if (config.delta_prime != config.delta)
        throw InvalidConfig(
            "fit_cte: delta_prime must equal delta (the band and the total "
            "exceedance share one level)");
    std::vector<double> totals = cte_calibration(forests, data, config);
    return assemble_cte(std::move(forests), totals, config);
}

Band predict_band(const CteModel& model, const std::vector<double>& x) {
    return predict_qr_band(model.forests, x, model.alpha_lo, model.alpha_hi);
}

bool band_covers(const Band& band, const std::vector<double>& behavior) {
    if (band.lo.size() != behavior.size())
        throw LengthMismatch("band_covers: horizon mismatch");
    for (std::size_t t = 0; t < behavior.size(); ++t)
        if (behavior[t] < band.lo[t] || behavior[t] > band.hi[t]) return false;
    return true;
}

std::vector<SqboxModel> fit_sqbox_multi(
    const Matrix& features, const std::vector<Matrix>& behaviors,
    const SplitConfig& config, const ForestParams& forest_params) {
    if (behaviors.empty())
        throw InsufficientData("fit_sqbox_multi: no behavior variables");
    check_sqbox_config(config, "fit_sqbox_multi");
    std::vector<SqboxModel> models;
    std::vector<double> joint;
    for (const Matrix& behavior : behaviors) {
        TrajectoryDataset data{features, behavior};
        std::vector<ForestPtr> forests =
            fit_timestep_forests(data, config.l, forest_params);
        SqboxCalibration calibration = sqbox_calibration(forests, data,
                                                         config);
        if (joint.empty()) {
            joint = calibration.scores;
        } else {
            if (calibration.scores.size() != joint.size())
                throw LengthMismatch("fit_sqbox_multi: score count mismatch");
            for (std::size_t i = 0; i < joint.size(); ++i)
                joint[i] = std::max(joint[i], calibration.scores[i]);
        }
        SqboxModel model;
        model.alpha_lo = config.delta_prime / 2.0;
        model.alpha_hi = 1.0 - config.delta_prime / 2.0;
        model.sigma = std::move(calibration.sigma);
        model.config = config;
        model.forests = std::move(forests);
        models.push_back(std::move(model));
    }
    ConformalQuantile q = conformal_quantile(ScoreList(std::move(joint)),
                                             config.delta, config.strategy);
    for (SqboxModel& model : models) {
        model.beta = q.value;
        model.guaranteed = q.guaranteed;
    }
    return models;
}

std::pair<double, double> ScalarCqr::predict(
    const std::vector<double>& x) const {
    std::vector<double> q = forest->predict_quantiles(x, {alpha_lo, alpha_hi});
    double lo = std::min(q[0], q[1]);
    double hi = std::max(q[0], q[1]);
    return {lo - c_hat, hi + c_hat};
}

ConformalQuantile cqr_correction(
    const std::function<double(const std::vector<double>&)>& q_lo,
    const std::function<double(const std::vector<double>&)>& q_hi,
    const Matrix& calib_features, const std::vector<double>& calib_responses,
    double delta, bool clamp_at_zero, const QuantileStrategy& strategy) {
    if (calib_features.rows() != calib_responses.size())
        throw LengthMismatch("cqr_correction: calibration sizes disagree");
    std::vector<double> scores(calib_responses.size());
    for (std::size_t i = 0; i < calib_responses.size(); ++i) {
        std::vector<double> x(calib_features.row(i),
                              calib_features.row(i) + calib_features.cols());
        double lo = q_lo(x), hi = q_hi(x);
        double s = std::max(lo - calib_responses[i], calib_responses[i] - hi);
        if (clamp_at_zero) s = std::max(0.0, s);
        scores[i] = s;
    }
    return conformal_quantile(ScoreList(std::move(scores)), delta, strategy);
}

ScalarCqr cqr_scalar(const Matrix& features,
                     const std::vector<double>& responses, long l,
                     double delta, const ForestParams& forest_params,
                     bool clamp_at_zero, const QuantileStrategy& strategy) {
    if (features.rows() != responses.size())
        throw LengthMismatch("cqr_scalar: features and responses disagree");
    const long n = static_cast<long>(features.rows());
    if (l < 1 || l + 1 > n) throw BadSplit("cqr_scalar: need 1 <= l < n");
    check_delta(delta, "cqr_scalar");

    ScalarCqr model;
    model.alpha_lo = delta / 2.0;
    model.alpha_hi = 1.0 - delta / 2.0;

    Matrix train_features(
        std::vector<double>(features.data().begin(),
                            features.data().begin() + l * features.cols()),
        l, features.cols());
    std::vector<double> train_responses(responses.begin(),
                                        responses.begin() + l);
    model.forest = std::make_shared<Forest>(
        fit_forest(train_features, train_responses, forest_params));

    Matrix calib_features(
        std::vector<double>(features.data().begin() + l * features.cols(),
                            features.data().end()),
        n - l, features.cols());
    std::vector<double> calib_responses(responses.begin() + l,
                                        responses.end());
    const Forest& forest = *model.forest;
    auto q_lo = [&](const std::vector<double>& x) {
        auto q = forest.predict_quantiles(x, {model.alpha_lo, model.alpha_hi});
        return std::min(q[0], q[1]);
    };
    auto q_hi = [&](const std::vector<double>& x) {
        auto q = forest.predict_quantiles(x, {model.alpha_lo, model.alpha_hi});
        return std::max(q[0], q[1]);
    };
    ConformalQuantile q = cqr_correction(q_lo, q_hi, calib_features,
                                         calib_responses, delta,
                                         clamp_at_zero, strategy);
    model.c_hat = q.value;
    model.guaranteed = q.guaranteed;
    return model;
}

void save_model(const SqboxModel& model, const std::string& path) {
    json doc;
    doc["format"] = "sqbox-model";
    doc["version"] = 1;
    doc["config"] = config_to_json(model.config);
    doc["alpha_lo"] = model.alpha_lo;
    doc["alpha_hi"] = model.alpha_hi;
    doc["sigma"] = model.sigma;
    doc["beta"] = model.beta;
    doc["guaranteed"] = model.guaranteed;
    doc["forests"] = forests_to_json(model.forests);
    write_json_file(doc, path);
}

void save_model(const CteModel& model, const std::string& path) {
    json doc;
    doc["format"] = "cte-model";
    doc["version"] = 1;
    doc["config"] = config_to_json(model.config);
    doc["alpha_lo"] = model.alpha_lo;
    doc["alpha_hi"] = model.alpha_hi;
    doc["c_hat"] = model.c_hat;
    doc["guaranteed"] = model.guaranteed;
    doc["forests"] = forests_to_json(model.forests);
    write_json_file(doc, path);
}

std::string model_kind_in_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("model file: cannot open " + path);
    json doc;
    try {
        in >> doc;
    } catch (const json::exception& e) {
        throw IoError("model file: " + path + ": " + e.what());
    }
    return doc.value("format", "");
}

SqboxModel load_sqbox_model(const std::string& path) {
    json doc = load_model_file(path, "sqbox-model");
    SqboxModel model;
    model.config = config_from_json(doc.at("config"));
    model.alpha_lo = doc.at("alpha_lo").get<double>();
    model.alpha_hi = doc.at("alpha_hi").get<double>();
    model.sigma = doc.at("sigma").get<std::vector<double>>();
    model.beta = doc.at("beta").get<double>();
    model.guaranteed = doc.at("guaranteed").get<bool>();
    model.forests = forests_from_json(doc.at("forests"));
    return model;
}

CteModel load_cte_model(const std::string& path) {
    json doc = load_model_file(path, "cte-model");
    CteModel model;
    model.config = config_from_json(doc.at("config"));
    model.alpha_lo = doc.at("alpha_lo").get<double>();
    model.alpha_hi = doc.at("alpha_hi").get<double>();
    model.c_hat = doc.at("c_hat").get<double>();
    model.guaranteed = doc.at("guaranteed").get<bool>();
    model.forests = forests_from_json(doc.at("forests"));
    return model;
}

}  // namespace sqbox
