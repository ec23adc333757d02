#pragma once

#include <cmath>
#include <cstddef>
#include <string>
#include <vector>

#include "latentshift/errors.hpp"

namespace latentshift {

/// Dense row-major matrix of 64-bit floats. The only numeric container in the
/// library; vectors are 1xN or Nx1 matrices.
class Matrix {
public:
    Matrix() = default;

    Matrix(std::size_t rows, std::size_t cols, double fill = 0.0)
        : rows_(rows), cols_(cols), data_(rows * cols, fill) {}

    static Matrix from_rows(std::size_t rows, std::size_t cols, std::vector<double> values) {
        if (values.size() != rows * cols) {
            throw ShapeError("Matrix::from_rows: " + std::to_string(values.size()) +
                             " values for " + std::to_string(rows) + "x" + std::to_string(cols));
        }
        Matrix m;
        m.rows_ = rows;
        m.cols_ = cols;
        m.data_ = std::move(values);
        return m;
    }

    static Matrix identity(std::size_t n) {
        Matrix m(n, n);
        for (std::size_t i = 0; i < n; ++i) m(i, i) = 1.0;
        return m;
    }

    std::size_t rows() const { return rows_; }
    std::size_t cols() const { return cols_; }
    std::size_t size() const { return data_.size(); }
    bool empty() const { return data_.empty(); }

    double& operator()(std::size_t i, std::size_t j) { return data_[i * cols_ + j]; }
    double operator()(std::size_t i, std::size_t j) const { return data_[i * cols_ + j]; }

    double* data() { return data_.data(); }
    const double* data() const { return data_.data(); }
    std::vector<double>& values() { return data_; }
    const std::vector<double>& values() const { return data_; }

    double* row_ptr(std::size_t i) { return data_.data() + i * cols_; }
    const double* row_ptr(std::size_t i) const { return data_.data() + i * cols_; }

    bool same_shape(const Matrix& other) const {
        return rows_ == other.rows_ && cols_ == other.cols_;
    }

    std::string shape_str() const {
        return std::to_string(rows_) + "x" + std::to_string(cols_);
    }

    bool all_finite() const {
        for (double v : data_) {
            if (!std::isfinite(v)) return false;
        }
        return true;
    }

    bool operator==(const Matrix& other) const {
        return rows_ == other.rows_ && cols_ == other.cols_ && data_ == other.data_;
    }

private:
    std::size_t rows_ = 0;
    std::size_t cols_ = 0;
    std::vector<double> data_;
};

inline void require_same_shape(const Matrix& a, const Matrix& b, const char* op) {
    if (!a.same_shape(b)) {
        throw ShapeError(std::string(op) + ": shape mismatch " + a.shape_str() + " vs " + b.shape_str());
    }
}

/// Standard product. Inner loop runs over contiguous rows of both operands so
/// the compiler can vectorize it.
inline Matrix matmul(const Matrix& a, const Matrix& b) {
    if (a.cols() != b.rows()) {
        throw ShapeError("matmul: shape mismatch " + a.shape_str() + " * " + b.shape_str());
    }
    Matrix c(a.rows(), b.cols());
    const std::size_t n = a.rows(), k = a.cols(), m = b.cols();
    for (std::size_t i = 0; i < n; ++i) {
        double* ci = c.row_ptr(i);
        const double* ai = a.row_ptr(i);
        for (std::size_t p = 0; p < k; ++p) {
            const double aip = ai[p];
            const double* bp = b.row_ptr(p);
            for (std::size_t j = 0; j < m; ++j) {
                ci[j] += aip * bp[j];
            }
        }
    }
    return c;
}

inline Matrix transpose(const Matrix& a) {
    Matrix t(a.cols(), a.rows());
    for (std::size_t i = 0; i < a.rows(); ++i) {
        for (std::size_t j = 0; j < a.cols(); ++j) {
            t(j, i) = a(i, j);
        }
    }
    return t;
}

inline Matrix add(const Matrix& a, const Matrix& b) {
    require_same_shape(a, b, "add");
    Matrix c = a;
    for (std::size_t i = 0; i < c.size(); ++i) c.values()[i] += b.values()[i];
    return c;
}

inline Matrix sub(const Matrix& a, const Matrix& b) {
    require_same_shape(a, b, "sub");
    Matrix c = a;
    for (std::size_t i = 0; i < c.size(); ++i) c.values()[i] -= b.values()[i];
    return c;
}

inline Matrix hadamard(const Matrix& a, const Matrix& b) {
    require_same_shape(a, b, "hadamard");
    Matrix c = a;
    for (std::size_t i = 0; i < c.size(); ++i) c.values()[i] *= b.values()[i];
    return c;
}

inline Matrix scale(const Matrix& a, double c) {
    Matrix r = a;
    for (double& v : r.values()) v *= c;
    return r;
}

inline double frobenius_norm(const Matrix& a) {
    double s = 0.0;
    for (double v : a.values()) s += v * v;
    return std::sqrt(s);
}

inline double max_abs(const Matrix& a) {
    double m = 0.0;
    for (double v : a.values()) m = std::max(m, std::abs(v));
    return m;
}

inline double max_abs_diff(const Matrix& a, const Matrix& b) {
    require_same_shape(a, b, "max_abs_diff");
    double m = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        m = std::max(m, std::abs(a.values()[i] - b.values()[i]));
    }
    return m;
}

/// Column means as a 1xC matrix.
inline Matrix column_means(const Matrix& a) {
    Matrix m(1, a.cols());
    if (a.rows() == 0) return m;
    for (std::size_t i = 0; i < a.rows(); ++i) {
        const double* r = a.row_ptr(i);
        for (std::size_t j = 0; j < a.cols(); ++j) m(0, j) += r[j];
    }
    for (std::size_t j = 0; j < a.cols(); ++j) m(0, j) /= static_cast<double>(a.rows());
    return m;
}

inline Matrix extract_row(const Matrix& a, std::size_t i) {
    Matrix r(1, a.cols());
    for (std::size_t j = 0; j < a.cols(); ++j) r(0, j) = a(i, j);
    return r;
}

inline Matrix extract_column(const Matrix& a, std::size_t j) {
    Matrix c(a.rows(), 1);
    for (std::size_t i = 0; i < a.rows(); ++i) c(i, 0) = a(i, j);
    return c;
}

} // namespace latentshift
