#pragma once

#include <cmath>
#include <cstddef>
#include <vector>

#include "sqbox/errors.hpp"

namespace sqbox {

// Dense row-major matrix used for feature tables. NaN rejected.
class Matrix {
public:
    Matrix() = default;
    Matrix(std::vector<double> data, std::size_t rows, std::size_t cols)
        : data_(std::move(data)), rows_(rows), cols_(cols) {
        if (data_.size() != rows_ * cols_)
            throw DimensionMismatch("Matrix: data size does not match shape");
        for (double v : data_)
            if (std::isnan(v)) throw Error("Matrix: NaN rejected");
    }

    std::size_t rows() const { return rows_; }
    std::size_t cols() const { return cols_; }
    double at(std::size_t i, std::size_t j) const {
        return data_[i * cols_ + j];
    }
    const double* row(std::size_t i) const { return data_.data() + i * cols_; }
    const std::vector<double>& data() const { return data_; }

private:
    std::vector<double> data_;
    std::size_t rows_ = 0;
    std::size_t cols_ = 0;
};

}  // namespace sqbox
