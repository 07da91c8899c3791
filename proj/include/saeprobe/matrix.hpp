#ifndef SAEPROBE_MATRIX_HPP
#define SAEPROBE_MATRIX_HPP

#include <cstddef>
#include <span>
#include <vector>

#include "saeprobe/error.hpp"

namespace saeprobe {

/// Dense row-major matrix of 32-bit floats.
class Matrix {
public:
    Matrix() = default;
    Matrix(std::size_t rows, std::size_t cols) : rows_(rows), cols_(cols), values_(rows * cols, 0.0f) {}
    Matrix(std::size_t rows, std::size_t cols, std::vector<float> values)
        : rows_(rows), cols_(cols), values_(std::move(values)) {
        if (values_.size() != rows_ * cols_) {
            throw Error(ErrorKind::Shape, "matrix buffer size does not match rows*cols");
        }
    }

    std::size_t rows() const noexcept { return rows_; }
    std::size_t cols() const noexcept { return cols_; }

    float& operator()(std::size_t r, std::size_t c) { return values_[r * cols_ + c]; }
    float operator()(std::size_t r, std::size_t c) const { return values_[r * cols_ + c]; }

    std::span<float> row(std::size_t r) { return {values_.data() + r * cols_, cols_}; }
    std::span<const float> row(std::size_t r) const { return {values_.data() + r * cols_, cols_}; }

    std::span<const float> values() const noexcept { return values_; }
    std::span<float> values() noexcept { return values_; }

    bool operator==(const Matrix&) const = default;

    /// Rows in the given order.
    Matrix select_rows(std::span<const std::size_t> indices) const;
    /// Column `c` widened to double.
    std::vector<double> column(std::size_t c) const;

private:
    std::size_t rows_ = 0;
    std::size_t cols_ = 0;
    std::vector<float> values_;
};

inline Matrix Matrix::select_rows(std::span<const std::size_t> indices) const {
    Matrix out(indices.size(), cols_);
    for (std::size_t i = 0; i < indices.size(); ++i) {
        if (indices[i] >= rows_) throw Error(ErrorKind::Shape, "row index out of range");
        auto src = row(indices[i]);
        std::copy(src.begin(), src.end(), out.row(i).begin());
    }
    return out;
}

inline std::vector<double> Matrix::column(std::size_t c) const {
    if (c >= cols_) throw Error(ErrorKind::Shape, "column index out of range");
    std::vector<double> out(rows_);
    for (std::size_t r = 0; r < rows_; ++r) out[r] = values_[r * cols_ + c];
    return out;
}

}  // namespace saeprobe

#endif  // SAEPROBE_MATRIX_HPP
