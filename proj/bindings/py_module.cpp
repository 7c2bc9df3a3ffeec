// Python bindings for the core operations: conformal quantiles, prediction
// boxes, trajectory-band models, and the built-in simulators.

#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "sqbox/conformal.hpp"
#include "sqbox/envs/battle.hpp"
#include "sqbox/envs/tamarisk.hpp"
#include "sqbox/envs/trajectory.hpp"
#include "sqbox/errors.hpp"
#include "sqbox/eval.hpp"
#include "sqbox/multibox.hpp"
#include "sqbox/trajband.hpp"

namespace py = pybind11;

namespace {

std::vector<double> flatten(const std::vector<std::vector<double>>& rows,
                            std::size_t& n, std::size_t& d) {
    n = rows.size();
    d = n == 0 ? 0 : rows[0].size();
    std::vector<double> flat;
    flat.reserve(n * d);
    for (const auto& row : rows) {
        if (row.size() != d)
            throw sqbox::LengthMismatch("ragged row in input matrix");
        flat.insert(flat.end(), row.begin(), row.end());
    }
    return flat;
}

sqbox::PointSet to_points(const std::vector<std::vector<double>>& rows) {
    std::size_t n = 0, d = 0;
    std::vector<double> flat = flatten(rows, n, d);
    return sqbox::PointSet(std::move(flat), n, d);
}

sqbox::TrajectoryDataset to_dataset(
    const std::vector<std::vector<double>>& features,
    const std::vector<std::vector<double>>& behavior) {
    std::size_t n = 0, d = 0, n2 = 0, h = 0;
    std::vector<double> f = flatten(features, n, d);
    std::vector<double> b = flatten(behavior, n2, h);
    if (n != n2)
        throw sqbox::LengthMismatch("features and behavior row counts differ");
    return {sqbox::Matrix(std::move(f), n, d),
            sqbox::Matrix(std::move(b), n2, h)};
}

sqbox::QuantileStrategy make_strategy(const std::string& name, double delta,
                                      double confidence) {
    if (name == "strict") return sqbox::QuantileStrategy::strict();
    if (name == "ucb") {
        if (confidence > 0.0) return sqbox::QuantileStrategy::ucb(confidence);
        return sqbox::QuantileStrategy::ucb_for(delta);
    }
    throw sqbox::InvalidConfig("strategy must be 'strict' or 'ucb'");
}

sqbox::SplitConfig make_split(long l, long m, double delta,
                              double delta_prime, const std::string& strategy,
                              double ucb_confidence) {
    sqbox::SplitConfig config;
    config.l = l;
    config.m = m;
    config.delta = delta;
    config.delta_prime = delta_prime;
    config.strategy = make_strategy(strategy, delta, ucb_confidence);
    return config;
}

sqbox::ForestParams make_forest(long trees, long min_leaf,
                                std::uint64_t seed) {
    sqbox::ForestParams params;
    params.tree_count = trees;
    params.min_leaf = min_leaf;
    params.seed = seed;
    return params;
}

py::tuple records_to_tuple(const std::vector<sqbox::TrajectoryRecord>& recs) {
    std::vector<std::vector<double>> features, behavior;
    features.reserve(recs.size());
    behavior.reserve(recs.size());
    for (const auto& r : recs) {
        features.push_back(r.start_features);
        behavior.push_back(r.behavior);
    }
    return py::make_tuple(features, behavior);
}

}  // namespace

PYBIND11_MODULE(_core, m) {
    m.doc() = "distribution-free prediction boxes and trajectory bands";

    py::register_exception<sqbox::Error>(m, "SqboxError");

    // Conformal core.
    m.def("conformal_index", &sqbox::conformal_index, py::arg("n_cal"),
          py::arg("delta"),
          "1-based order-statistic index ceil((1-delta)(n_cal+1))");
    m.def("binomial_cdf", &sqbox::binomial_cdf, py::arg("k"), py::arg("n"),
          py::arg("p"));
    m.def("binomial_sf", &sqbox::binomial_sf, py::arg("k"), py::arg("n"),
          py::arg("p"));
    m.def(
        "conformal_quantile",
        [](std::vector<double> scores, double delta,
           const std::string& strategy, double ucb_confidence) {
            sqbox::ConformalQuantile q = sqbox::conformal_quantile(
                sqbox::ScoreList(std::move(scores)), delta,
                make_strategy(strategy, delta, ucb_confidence));
            return py::make_tuple(q.value, q.guaranteed);
        },
        py::arg("scores"), py::arg("delta"), py::arg("strategy") = "strict",
        py::arg("ucb_confidence") = 0.0,
        "returns (value, guaranteed); ucb_confidence 0 means 1 - delta/2");
    m.def("coverage_ci_lower", &sqbox::coverage_ci_lower, py::arg("hits"),
          py::arg("n"), py::arg("confidence") = 0.99,
          "one-sided Clopper-Pearson lower bound on a coverage proportion");

    // Prediction boxes.
    py::class_<sqbox::BoxInterval>(m, "BoxInterval")
        .def_readonly("center", &sqbox::BoxInterval::center)
        .def_readonly("scale", &sqbox::BoxInterval::scale)
        .def_readonly("beta", &sqbox::BoxInterval::beta)
        .def_readonly("guaranteed", &sqbox::BoxInterval::guaranteed)
        .def("lower", &sqbox::BoxInterval::lower)
        .def("upper", &sqbox::BoxInterval::upper)
        .def("contains", [](const sqbox::BoxInterval& box,
                            const std::vector<double>& x) {
            return sqbox::box_contains(box, x);
        });
    m.def(
        "fit_sbox",
        [](const std::vector<std::vector<double>>& points, long m_, double delta,
           const std::string& strategy, double ucb_confidence) {
            return sqbox::fit_sbox(
                to_points(points), m_, delta,
                make_strategy(strategy, delta, ucb_confidence));
        },
        py::arg("points"), py::arg("m"), py::arg("delta"),
        py::arg("strategy") = "strict", py::arg("ucb_confidence") = 0.0);
    m.def(
        "fit_bonferroni",
        [](const std::vector<std::vector<double>>& points, long m_,
           double delta) {
            return sqbox::fit_bonferroni(to_points(points), m_, delta);
        },
        py::arg("points"), py::arg("m"), py::arg("delta"));

    // Trajectory bands.
    py::class_<sqbox::Band>(m, "Band")
        .def_readonly("lo", &sqbox::Band::lo)
        .def_readonly("hi", &sqbox::Band::hi);
    py::class_<sqbox::SqboxModel>(m, "SqboxModel")
        .def_property_readonly("beta",
                               [](const sqbox::SqboxModel& m_) { return m_.beta; })
        .def_property_readonly(
            "sigma", [](const sqbox::SqboxModel& m_) { return m_.sigma; })
        .def_property_readonly(
            "guaranteed",
            [](const sqbox::SqboxModel& m_) { return m_.guaranteed; })
        .def("predict",
             [](const sqbox::SqboxModel& m_, const std::vector<double>& x) {
                 return sqbox::predict_band(m_, x);
             })
        .def("save", [](const sqbox::SqboxModel& m_, const std::string& path) {
            sqbox::save_model(m_, path);
        });
    py::class_<sqbox::CteModel>(m, "CteModel")
        .def_property_readonly(
            "c_hat", [](const sqbox::CteModel& m_) { return m_.c_hat; })
        .def_property_readonly(
            "guaranteed",
            [](const sqbox::CteModel& m_) { return m_.guaranteed; })
        .def("predict",
             [](const sqbox::CteModel& m_, const std::vector<double>& x) {
                 return sqbox::predict_band(m_, x);
             })
        .def("save", [](const sqbox::CteModel& m_, const std::string& path) {
            sqbox::save_model(m_, path);
        });
    m.def(
        "fit_sqbox",
        [](const std::vector<std::vector<double>>& features,
           const std::vector<std::vector<double>>& behavior, long l, long m_,
           double delta, double delta_prime, const std::string& strategy,
           double ucb_confidence, long trees, long min_leaf,
           std::uint64_t seed) {
            return sqbox::fit_sqbox(
                to_dataset(features, behavior),
                make_split(l, m_, delta, delta_prime, strategy,
                           ucb_confidence),
                make_forest(trees, min_leaf, seed));
        },
        py::arg("features"), py::arg("behavior"), py::arg("l"), py::arg("m"),
        py::arg("delta") = 0.1, py::arg("delta_prime") = 0.2,
        py::arg("strategy") = "strict", py::arg("ucb_confidence") = 0.0,
        py::arg("trees") = 1000, py::arg("min_leaf") = 20,
        py::arg("seed") = 1);
    m.def(
        "fit_cte",
        [](const std::vector<std::vector<double>>& features,
           const std::vector<std::vector<double>>& behavior, long l,
           double delta, const std::string& strategy, double ucb_confidence,
           long trees, long min_leaf, std::uint64_t seed) {
            return sqbox::fit_cte(
                to_dataset(features, behavior),
                make_split(l, 1, delta, delta, strategy, ucb_confidence),
                make_forest(trees, min_leaf, seed));
        },
        py::arg("features"), py::arg("behavior"), py::arg("l"),
        py::arg("delta") = 0.1, py::arg("strategy") = "strict",
        py::arg("ucb_confidence") = 0.0, py::arg("trees") = 1000,
        py::arg("min_leaf") = 20, py::arg("seed") = 1);
    m.def("load_sqbox_model", &sqbox::load_sqbox_model, py::arg("path"));
    m.def("load_cte_model", &sqbox::load_cte_model, py::arg("path"));
    m.def("model_kind_in_file", &sqbox::model_kind_in_file, py::arg("path"));

    // Simulators.
    m.def(
        "simulate",
        [](const std::string& env, long n, std::uint64_t seed, long horizon,
           bool reward_noise) {
            if (env == "tamarisk") {
                sqbox::TamariskConfig config;
                if (horizon > 0) config.horizon = horizon;
                return records_to_tuple(
                    sqbox::sample_trajectories(config, n, seed));
            }
            if (env == "battle") {
                sqbox::BattleConfig config;
                if (horizon > 0) config.horizon = horizon;
                config.reward_noise = reward_noise;
                return records_to_tuple(
                    sqbox::sample_trajectories(config, n, seed));
            }
            throw sqbox::InvalidConfig("env must be 'tamarisk' or 'battle'");
        },
        py::arg("env"), py::arg("n"), py::arg("seed") = 1,
        py::arg("horizon") = 0, py::arg("reward_noise") = true,
        "returns (start_features, cumulative_behavior) as nested lists");
}
