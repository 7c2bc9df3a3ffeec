#pragma once

#include <cstddef>
#include <vector>

#include "sqbox/conformal.hpp"

namespace sqbox {

// Rectangular point set, row major. Rejects NaN at construction and requires
// n >= 2 rows, d >= 1 columns.
class PointSet {
public:
    PointSet(std::vector<double> data, std::size_t rows, std::size_t cols);

    std::size_t rows() const { return rows_; }
    std::size_t cols() const { return cols_; }
    double at(std::size_t i, std::size_t j) const {
        return data_[i * cols_ + j];
    }
    const std::vector<double>& data() const { return data_; }

private:
    std::vector<double> data_;
    std::size_t rows_ = 0;
    std::size_t cols_ = 0;
};

// Axis-aligned box centered at `center` with half-widths beta * scale.
struct BoxInterval {
    std::vector<double> center;
    std::vector<double> scale;
    double beta = 0.0;
    bool guaranteed = true;

    std::vector<double> lower() const;
    std::vector<double> upper() const;
};

// Split-conformal box: location/scale from the first m rows, standardized
// max-coordinate scores from the remaining rows, box = center +- beta*scale.
BoxInterval fit_sbox(const PointSet& points, long m, double delta,
                     const QuantileStrategy& strategy);

// Per-dimension split-conformal intervals at level delta/d (Strict), stored
// with the per-dimension half-width absorbed into `scale` and beta = 1.
BoxInterval fit_bonferroni(const PointSet& points, long m, double delta);

// Closed-interval membership test.
bool box_contains(const BoxInterval& box, const std::vector<double>& x);

}  // namespace sqbox
