#include "sqbox/qrf.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>

#include <nlohmann/json.hpp>

#include "sqbox/errors.hpp"
#include "sqbox/parallel.hpp"
#include "sqbox/rng.hpp"

namespace sqbox {

namespace {

using json = nlohmann::json;

constexpr std::uint64_t kTreeSeedSalt = 0x71726674ull;  // per-tree streams

struct TreeBuilder {
    const Matrix& features;
    const std::vector<double>& responses;
    long min_leaf;
    long fps;
    Rng rng;
    Forest::Tree tree;
    std::vector<std::int32_t> feature_pool;
    std::vector<std::pair<double, std::int32_t>> sort_buf;

    TreeBuilder(const Matrix& f, const std::vector<double>& r, long ml,
                long fps_in, Rng rng_in)
        : features(f), responses(r), min_leaf(ml), fps(fps_in), rng(rng_in) {
        feature_pool.resize(f.cols());
        std::iota(feature_pool.begin(), feature_pool.end(), 0);
        tree.items.resize(f.rows());
        std::iota(tree.items.begin(), tree.items.end(), 0);
        tree.nodes.reserve(2 * (f.rows() / std::max<long>(ml, 1) + 2));
        build(0, static_cast<std::int32_t>(f.rows()));
    }

    struct Split {
        bool found = false;
        std::int32_t feature = 0;
        double threshold = 0.0;
        double gain = 0.0;
    };

    std::int32_t build(std::int32_t start, std::int32_t count) {
        std::int32_t self = static_cast<std::int32_t>(tree.nodes.size());
        tree.nodes.emplace_back();
        Split split = find_split(start, count);
        if (!split.found) {
            tree.nodes[self].feature = -1;
            tree.nodes[self].start = start;
            tree.nodes[self].count = count;
            return self;
        }
        auto begin = tree.items.begin() + start;
        auto end = begin + count;
        auto mid = std::partition(begin, end, [&](std::int32_t idx) {
            return features.at(idx, split.feature) < split.threshold;
        });
        std::int32_t left_count = static_cast<std::int32_t>(mid - begin);
        tree.nodes[self].feature = split.feature;
        tree.nodes[self].threshold = split.threshold;
        std::int32_t left = build(start, left_count);
        std::int32_t right = build(start + left_count, count - left_count);
        tree.nodes[self].left = left;
        tree.nodes[self].right = right;
        return self;
    }

    Split find_split(std::int32_t start, std::int32_t count) {
        Split best;
        if (count < 2 * min_leaf) return best;
        double y_min = responses[tree.items[start]];
        double y_max = y_min;
        for (std::int32_t i = start + 1; i < start + count; ++i) {
            double y = responses[tree.items[i]];
            y_min = std::min(y_min, y);
            y_max = std::max(y_max, y);
        }
        if (y_min == y_max) return best;  // pure node

        const long d = static_cast<long>(features.cols());
        // Partial Fisher-Yates over the shared pool, then ascending order so
        // gain ties break toward the lowest feature index.
        for (long i = 0; i < fps; ++i) {
            long j = i + static_cast<long>(rng.uniform_below(
                             static_cast<std::uint64_t>(d - i)));
            std::swap(feature_pool[i], feature_pool[j]);
        }
        std::sort(feature_pool.begin(), feature_pool.begin() + fps);

        for (long fi = 0; fi < fps; ++fi) {
            std::int32_t f = feature_pool[fi];
            sort_buf.clear();
            for (std::int32_t i = start; i < start + count; ++i) {
                std::int32_t idx = tree.items[i];
                sort_buf.emplace_back(features.at(idx, f), idx);
            }
            std::sort(sort_buf.begin(), sort_buf.end(),
                      [](const auto& a, const auto& b) {
                          return a.first < b.first;
                      });
            double total_sum = 0.0;
            for (const auto& [v, idx] : sort_buf) total_sum += responses[idx];
            double left_sum = 0.0;
            const double n_total = static_cast<double>(count);
            for (std::int32_t i = 0; i + 1 < count; ++i) {
                left_sum += responses[sort_buf[i].second];
                if (sort_buf[i].first == sort_buf[i + 1].first) continue;
                std::int32_t n_left = i + 1;
                std::int32_t n_right = count - n_left;
                if (n_left < min_leaf || n_right < min_leaf) continue;
                double right_sum = total_sum - left_sum;
                // Maximizing sum-of-squares reduction is equivalent to
                // maximizing this score for a fixed parent.
                double score =
                    left_sum * left_sum / static_cast<double>(n_left) +
                    right_sum * right_sum / static_cast<double>(n_right) -
                    total_sum * total_sum / n_total;
                // Strict improvement required; ties keep the earlier
                // candidate, i.e. the lowest feature index and threshold.
                if (score > best.gain) {
                    best.found = true;
                    best.gain = score;
                    best.feature = f;
                    best.threshold =
                        0.5 * (sort_buf[i].first + sort_buf[i + 1].first);
                }
            }
        }
        return best;
    }
};

}  // namespace

Forest fit_forest(const Matrix& features, const std::vector<double>& responses,
                  const ForestParams& params) {
    if (features.rows() != responses.size())
        throw LengthMismatch("fit_forest: features and responses disagree");
    if (features.rows() == 0) throw InsufficientData("fit_forest: no rows");
    if (params.min_leaf < 1)
        throw InvalidConfig("fit_forest: min_leaf must be >= 1");
    if (params.tree_count < 1)
        throw InvalidConfig("fit_forest: tree_count must be >= 1");
    if (static_cast<long>(features.rows()) < params.min_leaf)
        throw InsufficientData("fit_forest: need at least min_leaf rows");
    for (double y : responses)
        if (std::isnan(y)) throw Error("fit_forest: NaN response rejected");

    const long d = static_cast<long>(features.cols());
    long fps = params.features_per_split;
    if (fps == 0) fps = std::max<long>(1, (d + 2) / 3);
    if (fps < 0 || fps > d) fps = d;

    Forest forest;
    forest.params_ = params;
    forest.resolved_fps_ = fps;
    forest.cols_ = features.cols();
    forest.responses_ = responses;
    forest.trees_.resize(params.tree_count);

    int workers = params.workers > 0 ? params.workers : default_workers();
    parallel_for(params.tree_count, workers, [&](long t) {
        Rng rng(mix_seed(params.seed, kTreeSeedSalt),
                static_cast<std::uint64_t>(t));
        TreeBuilder builder(features, responses, params.min_leaf, fps, rng);
        forest.trees_[t] = std::move(builder.tree);
    });
    forest.finish_init();
    return forest;
}

void Forest::finish_init() {
    response_order_.resize(responses_.size());
    std::iota(response_order_.begin(), response_order_.end(), 0);
    std::sort(response_order_.begin(), response_order_.end(),
              [&](std::int32_t a, std::int32_t b) {
                  if (responses_[a] != responses_[b])
                      return responses_[a] < responses_[b];
                  return a < b;
              });
}

std::int32_t Forest::find_leaf(const Tree& tree, const double* x) const {
    std::int32_t idx = 0;
    while (tree.nodes[idx].feature >= 0) {
        const Node& node = tree.nodes[idx];
        idx = x[node.feature] < node.threshold ? node.left : node.right;
    }
    return idx;
}

void Forest::accumulate_weights(const double* x, std::vector<double>& w)
    const {
    const double per_tree = 1.0 / static_cast<double>(trees_.size());
    for (const Tree& tree : trees_) {
        const Node& leaf = tree.nodes[find_leaf(tree, x)];
        const double share = per_tree / static_cast<double>(leaf.count);
        for (std::int32_t i = leaf.start; i < leaf.start + leaf.count; ++i)
            w[tree.items[i]] += share;
    }
}

std::vector<double> Forest::predict_quantiles(
    const std::vector<double>& x, const std::vector<double>& alphas) const {
    if (x.size() != cols_)
        throw DimensionMismatch("predict_quantiles: wrong feature count");
    for (double a : alphas)
        if (std::isnan(a) || a <= 0.0 || a >= 1.0)
            throw Error("predict_quantiles: alpha must lie in (0, 1)");
    std::vector<double> w(responses_.size(), 0.0);
    accumulate_weights(x.data(), w);

    std::vector<std::size_t> order(alphas.size());
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        return alphas[a] < alphas[b];
    });
    // Slack absorbs the rounding error of summing the weight shares (at
    // most ~1e-13 over the largest training sets) without ever bridging a
    // genuine weight atom, which is at least 1/(tree_count * rows).
    constexpr double kAlphaSlack = 1e-9;
    std::vector<double> out(alphas.size());
    double cum = 0.0;
    std::size_t next = 0;
    for (std::int32_t idx : response_order_) {
        cum += w[idx];
        while (next < order.size() &&
               cum >= alphas[order[next]] - kAlphaSlack) {
            out[order[next]] = responses_[idx];
            ++next;
        }
        if (next == order.size()) break;
    }
    // Guard against cumulative weight landing a hair under 1: any alpha not
    // reached takes the largest response.
    for (; next < order.size(); ++next)
        out[order[next]] = responses_[response_order_.back()];
    return out;
}

double Forest::predict_quantile(const std::vector<double>& x,
                                double alpha) const {
    return predict_quantiles(x, {alpha})[0];
}

std::vector<std::pair<double, double>> Forest::weighted_cdf(
    const std::vector<double>& x) const {
    if (x.size() != cols_)
        throw DimensionMismatch("weighted_cdf: wrong feature count");
    std::vector<double> w(responses_.size(), 0.0);
    accumulate_weights(x.data(), w);
    std::vector<std::pair<double, double>> out;
    for (std::int32_t idx : response_order_) {
        if (w[idx] == 0.0) continue;
        if (!out.empty() && out.back().first == responses_[idx]) {
            out.back().second += w[idx];
        } else {
            out.emplace_back(responses_[idx], w[idx]);
        }
    }
    return out;
}

std::string Forest::to_json_string() const {
    json doc;
    doc["format"] = "qrf-forest";
    doc["version"] = 1;
    doc["params"] = {{"tree_count", params_.tree_count},
                     {"min_leaf", params_.min_leaf},
                     {"features_per_split", params_.features_per_split},
                     {"seed", params_.seed}};
    doc["resolved_features_per_split"] = resolved_fps_;
    doc["feature_count"] = cols_;
    doc["responses"] = responses_;
    json trees = json::array();
    for (const Tree& tree : trees_) {
        json t;
        json feature = json::array(), threshold = json::array(),
             left = json::array(), right = json::array(),
             start = json::array(), count = json::array();
        for (const Node& node : tree.nodes) {
            feature.push_back(node.feature);
            threshold.push_back(node.threshold);
            left.push_back(node.left);
            right.push_back(node.right);
            start.push_back(node.start);
            count.push_back(node.count);
        }
        t["feature"] = std::move(feature);
        t["threshold"] = std::move(threshold);
        t["left"] = std::move(left);
        t["right"] = std::move(right);
        t["start"] = std::move(start);
        t["count"] = std::move(count);
        t["items"] = tree.items;
        trees.push_back(std::move(t));
    }
    doc["trees"] = std::move(trees);
    return doc.dump();
}

Forest Forest::from_json_string(const std::string& text) {
    json doc = json::parse(text);
    if (doc.value("format", "") != "qrf-forest")
        throw IoError("forest file: unrecognized format tag");
    if (doc.value("version", 0) != 1)
        throw IoError("forest file: unsupported version");
    Forest forest;
    const json& p = doc.at("params");
    forest.params_.tree_count = p.at("tree_count").get<long>();
    forest.params_.min_leaf = p.at("min_leaf").get<long>();
    forest.params_.features_per_split = p.at("features_per_split").get<long>();
    forest.params_.seed = p.at("seed").get<std::uint64_t>();
    forest.resolved_fps_ = doc.at("resolved_features_per_split").get<long>();
    forest.cols_ = doc.at("feature_count").get<std::size_t>();
    forest.responses_ = doc.at("responses").get<std::vector<double>>();
    for (const json& t : doc.at("trees")) {
        Tree tree;
        const auto& feature = t.at("feature");
        const auto& threshold = t.at("threshold");
        const auto& left = t.at("left");
        const auto& right = t.at("right");
        const auto& start = t.at("start");
        const auto& count = t.at("count");
        std::size_t n_nodes = feature.size();
        tree.nodes.resize(n_nodes);
        for (std::size_t i = 0; i < n_nodes; ++i) {
            tree.nodes[i].feature = feature[i].get<std::int32_t>();
            tree.nodes[i].threshold = threshold[i].get<double>();
            tree.nodes[i].left = left[i].get<std::int32_t>();
            tree.nodes[i].right = right[i].get<std::int32_t>();
            tree.nodes[i].start = start[i].get<std::int32_t>();
            tree.nodes[i].count = count[i].get<std::int32_t>();
        }
        tree.items = t.at("items").get<std::vector<std::int32_t>>();
        forest.trees_.push_back(std::move(tree));
    }
    forest.finish_init();
    return forest;
}

void save_forest(const Forest& forest, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw IoError("save_forest: cannot open " + path);
    out << forest.to_json_string() << "\n";
    if (!out) throw IoError("save_forest: write failed for " + path);
}

Forest load_forest(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("load_forest: cannot open " + path);
    std::string text((std::istreambuf_iterator<char>(in)),
                     std::istreambuf_iterator<char>());
    return Forest::from_json_string(text);
}

}  // namespace sqbox
