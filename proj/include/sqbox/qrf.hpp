#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "sqbox/matrix.hpp"

namespace sqbox {

struct ForestParams {
    long tree_count = 1000;
    long min_leaf = 20;
    // 0 = auto (max(1, ceil(d/3))), -1 = all features, otherwise explicit.
    long features_per_split = 0;
    std::uint64_t seed = 0;
    // 0 = use default_workers() when fitting.
    int workers = 0;
};

// Quantile regression forest. Trees are grown on all rows (no bootstrap);
// the only randomness is the per-split feature subset, drawn from a stream
// derived from (params.seed, tree_index), so fits are bit-identical for any
// worker count. Leaves keep the training indices they contain and prediction
// weights each index by 1/(tree_count * leaf_size).
class Forest {
public:
    struct Node {
        std::int32_t feature = -1;  // -1 marks a leaf
        double threshold = 0.0;
        std::int32_t left = -1;
        std::int32_t right = -1;
        std::int32_t start = 0;  // leaf: range into Tree::items
        std::int32_t count = 0;
    };
    struct Tree {
        std::vector<Node> nodes;
        std::vector<std::int32_t> items;
    };

    // Smallest response value whose cumulative weight reaches alpha.
    double predict_quantile(const std::vector<double>& x, double alpha) const;
    // Batch version: one weight pass, many alphas (returned in input order).
    std::vector<double> predict_quantiles(const std::vector<double>& x,
                                          const std::vector<double>& alphas)
        const;
    // Aggregated (response, weight) pairs in ascending response order.
    std::vector<std::pair<double, double>> weighted_cdf(
        const std::vector<double>& x) const;

    const ForestParams& params() const { return params_; }
    long resolved_features_per_split() const { return resolved_fps_; }
    std::size_t train_rows() const { return responses_.size(); }
    std::size_t feature_count() const { return cols_; }
    const std::vector<Tree>& trees() const { return trees_; }
    const std::vector<double>& responses() const { return responses_; }

    std::string to_json_string() const;
    static Forest from_json_string(const std::string& text);

private:
    friend Forest fit_forest(const Matrix&, const std::vector<double>&,
                             const ForestParams&);

    std::int32_t find_leaf(const Tree& tree, const double* x) const;
    void accumulate_weights(const double* x, std::vector<double>& w) const;
    void finish_init();

    ForestParams params_;
    long resolved_fps_ = 0;
    std::size_t cols_ = 0;
    std::vector<double> responses_;
    std::vector<Tree> trees_;
    // Training indices sorted by (response, index); prediction scans this.
    std::vector<std::int32_t> response_order_;
};

Forest fit_forest(const Matrix& features, const std::vector<double>& responses,
                  const ForestParams& params);

void save_forest(const Forest& forest, const std::string& path);
Forest load_forest(const std::string& path);

}  // namespace sqbox
