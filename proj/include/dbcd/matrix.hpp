#pragma once

#include <cstddef>
#include <initializer_list>
#include <vector>

#include "dbcd/errors.hpp"
#include "dbcd/real.hpp"

namespace dbcd {

// Dense row-major matrix. The only storage type in the project; columns are
// samples wherever a matrix holds per-sample state.
class Matrix {
public:
    Matrix() = default;

    Matrix(std::size_t rows, std::size_t cols)
        : rows_(rows), cols_(cols), data_(rows * cols, real(0)) {}

    static Matrix identity(std::size_t n) {
        Matrix m(n, n);
        for (std::size_t i = 0; i < n; ++i) m(i, i) = real(1);
        return m;
    }

    static Matrix from_rows(std::initializer_list<std::initializer_list<real>> rows) {
        Matrix m(rows.size(), rows.size() ? rows.begin()->size() : 0);
        std::size_t i = 0;
        for (const auto& row : rows) {
            if (row.size() != m.cols_) throw ShapeMismatch("from_rows: ragged rows");
            std::size_t j = 0;
            for (real v : row) m(i, j++) = v;
            ++i;
        }
        return m;
    }

    std::size_t rows() const { return rows_; }
    std::size_t cols() const { return cols_; }
    std::size_t size() const { return data_.size(); }
    bool empty() const { return data_.empty(); }

    real* data() { return data_.data(); }
    const real* data() const { return data_.data(); }

    real& operator()(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }
    real operator()(std::size_t r, std::size_t c) const { return data_[r * cols_ + c]; }

    bool same_shape(const Matrix& other) const {
        return rows_ == other.rows_ && cols_ == other.cols_;
    }

    void fill(real v) { data_.assign(data_.size(), v); }

    bool all_finite() const;

private:
    std::size_t rows_ = 0;
    std::size_t cols_ = 0;
    std::vector<real> data_;
};

// c = a * b
Matrix matmul(const Matrix& a, const Matrix& b);
Matrix transpose(const Matrix& a);

// y += s * x
void add_scaled(Matrix& y, real s, const Matrix& x);
// y = a * x + b * y
void blend(real a, const Matrix& x, real b, Matrix& y);
void scale(Matrix& x, real s);

Matrix relu(const Matrix& x);

real frob_sq(const Matrix& x);
real frob_sq_diff(const Matrix& x, const Matrix& y);
real max_abs_diff(const Matrix& x, const Matrix& y);
real frob_norm(const Matrix& x);

} // namespace dbcd
