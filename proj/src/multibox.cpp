#include "sqbox/multibox.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "sqbox/errors.hpp"

namespace sqbox {

PointSet::PointSet(std::vector<double> data, std::size_t rows,
                   std::size_t cols)
    : data_(std::move(data)), rows_(rows), cols_(cols) {
    if (cols_ < 1) throw DimensionMismatch("PointSet: need at least 1 column");
    if (rows_ < 2) throw InsufficientData("PointSet: need at least 2 rows");
    if (data_.size() != rows_ * cols_)
        throw DimensionMismatch("PointSet: data size does not match shape");
    for (double v : data_) {
        if (std::isnan(v)) throw Error("PointSet: NaN rejected");
    }
}

std::vector<double> BoxInterval::lower() const {
    std::vector<double> lo(center.size());
    for (std::size_t j = 0; j < center.size(); ++j)
        lo[j] = center[j] - beta * scale[j];
    return lo;
}

std::vector<double> BoxInterval::upper() const {
    std::vector<double> hi(center.size());
    for (std::size_t j = 0; j < center.size(); ++j)
        hi[j] = center[j] + beta * scale[j];
    return hi;
}

namespace {

void check_split(long m, long n) {
    if (m < 2) throw BadSplit("fit_sbox: m must be >= 2");
    if (m >= n - 1)
        throw BadSplit("fit_sbox: m must be <= n-2 so at least two rows "
                       "remain for calibration (m=" +
                       std::to_string(m) + ", n=" + std::to_string(n) + ")");
}

// Location and scale from the first m rows; zero scales are replaced by the
// smallest nonzero scale, and an all-zero scale vector is an error.
void location_scale(const PointSet& points, long m,
                    std::vector<double>& center, std::vector<double>& scale) {
    const std::size_t d = points.cols();
    center.assign(d, 0.0);
    scale.assign(d, 0.0);
    for (long i = 0; i < m; ++i)
        for (std::size_t j = 0; j < d; ++j) center[j] += points.at(i, j);
    for (std::size_t j = 0; j < d; ++j) center[j] /= static_cast<double>(m);
    for (long i = 0; i < m; ++i)
        for (std::size_t j = 0; j < d; ++j) {
            double dlt = points.at(i, j) - center[j];
            scale[j] += dlt * dlt;
        }
    double smallest_nonzero = std::numeric_limits<double>::infinity();
    for (std::size_t j = 0; j < d; ++j) {
        scale[j] = std::sqrt(scale[j] / static_cast<double>(m - 1));
        if (scale[j] > 0.0) smallest_nonzero = std::min(smallest_nonzero, scale[j]);
    }
    if (!std::isfinite(smallest_nonzero))
        throw AllScalesZero("fit_sbox: every coordinate has zero scale in the "
                            "first m rows");
    for (std::size_t j = 0; j < d; ++j)
        if (scale[j] == 0.0) scale[j] = smallest_nonzero;
}

}  // namespace

BoxInterval fit_sbox(const PointSet& points, long m, double delta,
                     const QuantileStrategy& strategy) {
    const long n = static_cast<long>(points.rows());
    const std::size_t d = points.cols();
    check_split(m, n);

    BoxInterval box;
    location_scale(points, m, box.center, box.scale);

    std::vector<double> scores;
    scores.reserve(n - m);
    for (long i = m; i < n; ++i) {
        double c = 0.0;
        for (std::size_t j = 0; j < d; ++j) {
            double s = std::fabs(points.at(i, j) - box.center[j]) /
                       box.scale[j];
            c = std::max(c, s);
        }
        scores.push_back(c);
    }
    ConformalQuantile q =
        conformal_quantile(ScoreList(std::move(scores)), delta, strategy);
    box.beta = q.value;
    box.guaranteed = q.guaranteed;
    return box;
}

BoxInterval fit_bonferroni(const PointSet& points, long m, double delta) {
    const long n = static_cast<long>(points.rows());
    const std::size_t d = points.cols();
    check_split(m, n);
    if (std::isnan(delta) || delta <= 0.0 || delta >= 1.0)
        throw DeltaInvalid("fit_bonferroni: delta must lie in (0, 1)");

    BoxInterval box;
    box.center.resize(d);
    box.scale.resize(d);
    box.beta = 1.0;
    box.guaranteed = true;
    const double per_dim_delta = delta / static_cast<double>(d);
    for (std::size_t j = 0; j < d; ++j) {
        std::vector<double> column(points.rows());
        for (std::size_t i = 0; i < points.rows(); ++i)
            column[i] = points.at(i, j);
        PointSet one_dim(std::move(column), points.rows(), 1);
        BoxInterval bj =
            fit_sbox(one_dim, m, per_dim_delta, QuantileStrategy::strict());
        box.center[j] = bj.center[0];
        box.scale[j] = bj.beta * bj.scale[0];
    }
    return box;
}

bool box_contains(const BoxInterval& box, const std::vector<double>& x) {
    if (x.size() != box.center.size())
        throw DimensionMismatch("box_contains: dimension mismatch");
    // Membership repeats the calibration-score arithmetic (divide, then
    // compare) so the point whose score defines beta lies inside its own
    // box even when beta * scale rounds below |x - center|.
    for (std::size_t j = 0; j < x.size(); ++j) {
        double s = std::fabs(x[j] - box.center[j]) / box.scale[j];
        if (s > box.beta) return false;
    }
    return true;
}

}  // namespace sqbox
