#pragma once

// Test-only oracles. Everything here is deliberately independent of the
// library's implementation paths: naive loops, characteristic polynomials,
// power iteration, pairwise statistics.

#include <algorithm>
#include <cmath>
#include <functional>
#include <vector>

#include "latentshift/matrix.hpp"

namespace oracle {

using latentshift::Matrix;

// Naive i-j-k triple loop product.
inline Matrix naive_matmul(const Matrix& a, const Matrix& b) {
    Matrix c(a.rows(), b.cols());
    for (std::size_t i = 0; i < a.rows(); ++i) {
        for (std::size_t j = 0; j < b.cols(); ++j) {
            double s = 0.0;
            for (std::size_t k = 0; k < a.cols(); ++k) s += a(i, k) * b(k, j);
            c(i, j) = s;
        }
    }
    return c;
}

// det(A - lambda I) by Gaussian elimination with partial pivoting.
inline double shifted_determinant(const Matrix& a, double lambda) {
    const std::size_t n = a.rows();
    Matrix m = a;
    for (std::size_t i = 0; i < n; ++i) m(i, i) -= lambda;
    double det = 1.0;
    for (std::size_t col = 0; col < n; ++col) {
        std::size_t pivot = col;
        for (std::size_t r = col + 1; r < n; ++r) {
            if (std::abs(m(r, col)) > std::abs(m(pivot, col))) pivot = r;
        }
        if (std::abs(m(pivot, col)) == 0.0) return 0.0;
        if (pivot != col) {
            for (std::size_t j = 0; j < n; ++j) std::swap(m(pivot, j), m(col, j));
            det = -det;
        }
        det *= m(col, col);
        for (std::size_t r = col + 1; r < n; ++r) {
            const double f = m(r, col) / m(col, col);
            for (std::size_t j = col; j < n; ++j) m(r, j) -= f * m(col, j);
        }
    }
    return det;
}

// Eigenvalues of a small symmetric matrix with distinct spectrum: scan the
// characteristic polynomial over the Gershgorin interval for sign changes,
// then bisect each bracket. Returns descending values.
inline std::vector<double> charpoly_eigenvalues(const Matrix& a, std::size_t grid = 20000) {
    const std::size_t n = a.rows();
    double lo = a(0, 0), hi = a(0, 0);
    for (std::size_t i = 0; i < n; ++i) {
        double radius = 0.0;
        for (std::size_t j = 0; j < n; ++j) {
            if (j != i) radius += std::abs(a(i, j));
        }
        lo = std::min(lo, a(i, i) - radius);
        hi = std::max(hi, a(i, i) + radius);
    }
    lo -= 1e-6;
    hi += 1e-6;

    std::vector<double> roots;
    double prev_x = lo;
    double prev_f = shifted_determinant(a, lo);
    for (std::size_t g = 1; g <= grid && roots.size() < n; ++g) {
        const double x = lo + (hi - lo) * static_cast<double>(g) / static_cast<double>(grid);
        const double f = shifted_determinant(a, x);
        if (prev_f == 0.0) {
            roots.push_back(prev_x);
        } else if ((prev_f < 0.0) != (f < 0.0)) {
            double bl = prev_x, bh = x, fl = prev_f;
            for (int it = 0; it < 200; ++it) {
                const double mid = 0.5 * (bl + bh);
                const double fm = shifted_determinant(a, mid);
                if (fm == 0.0) {
                    bl = bh = mid;
                    break;
                }
                if ((fl < 0.0) != (fm < 0.0)) {
                    bh = mid;
                } else {
                    bl = mid;
                    fl = fm;
                }
            }
            roots.push_back(0.5 * (bl + bh));
        }
        prev_x = x;
        prev_f = f;
    }
    std::sort(roots.rbegin(), roots.rend());
    return roots;
}

// Leading eigenpairs of a symmetric positive-semidefinite matrix by power
// iteration with deflation. Needs a reasonably separated spectrum.
inline std::pair<std::vector<double>, Matrix> power_iteration_eig(const Matrix& s, std::size_t k,
                                                                  std::size_t iters = 20000) {
    const std::size_t n = s.rows();
    Matrix a = s;
    Matrix vecs(n, k);
    std::vector<double> vals(k, 0.0);
    for (std::size_t comp = 0; comp < k; ++comp) {
        std::vector<double> v(n);
        for (std::size_t i = 0; i < n; ++i) v[i] = 1.0 / std::sqrt(static_cast<double>(n) + i);
        for (std::size_t it = 0; it < iters; ++it) {
            std::vector<double> w(n, 0.0);
            for (std::size_t i = 0; i < n; ++i) {
                for (std::size_t j = 0; j < n; ++j) w[i] += a(i, j) * v[j];
            }
            double norm = 0.0;
            for (double x : w) norm += x * x;
            norm = std::sqrt(norm);
            if (norm == 0.0) break;
            for (std::size_t i = 0; i < n; ++i) v[i] = w[i] / norm;
        }
        double lambda = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            double si = 0.0;
            for (std::size_t j = 0; j < n; ++j) si += a(i, j) * v[j];
            lambda += v[i] * si;
        }
        vals[comp] = lambda;
        for (std::size_t i = 0; i < n; ++i) vecs(i, comp) = v[i];
        for (std::size_t i = 0; i < n; ++i) {
            for (std::size_t j = 0; j < n; ++j) a(i, j) -= lambda * v[i] * v[j];
        }
    }
    return {vals, vecs};
}

// Sample covariance of the rows of x (divides by n-1).
inline Matrix sample_covariance(const Matrix& x) {
    const std::size_t n = x.rows(), d = x.cols();
    std::vector<double> mean(d, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < d; ++j) mean[j] += x(i, j);
    }
    for (double& m : mean) m /= static_cast<double>(n);
    Matrix cov(d, d);
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t p = 0; p < d; ++p) {
            const double dp = x(i, p) - mean[p];
            for (std::size_t q = 0; q < d; ++q) {
                cov(p, q) += dp * (x(i, q) - mean[q]);
            }
        }
    }
    for (double& v : cov.values()) v /= static_cast<double>(n - 1);
    return cov;
}

// O(n^2) pairwise AUC: P(score_pos > score_neg) + 0.5 P(tie).
inline double pairwise_auc(const std::vector<double>& scores, const std::vector<int>& labels) {
    double wins = 0.0;
    std::size_t pairs = 0;
    for (std::size_t i = 0; i < scores.size(); ++i) {
        if (labels[i] != 1) continue;
        for (std::size_t j = 0; j < scores.size(); ++j) {
            if (labels[j] != 0) continue;
            ++pairs;
            if (scores[i] > scores[j]) {
                wins += 1.0;
            } else if (scores[i] == scores[j]) {
                wins += 0.5;
            }
        }
    }
    return wins / static_cast<double>(pairs);
}

// Packs a list of matrices into a single 1xP vector and back; used to run
// grad_check over a whole parameter set at once.
inline Matrix pack(const std::vector<Matrix>& mats) {
    std::size_t total = 0;
    for (const auto& m : mats) total += m.size();
    Matrix flat(1, total);
    std::size_t at = 0;
    for (const auto& m : mats) {
        for (double v : m.values()) flat.values()[at++] = v;
    }
    return flat;
}

inline std::vector<Matrix> unpack(const Matrix& flat, const std::vector<Matrix>& shapes) {
    std::vector<Matrix> out;
    out.reserve(shapes.size());
    std::size_t at = 0;
    for (const auto& shape : shapes) {
        Matrix m(shape.rows(), shape.cols());
        for (double& v : m.values()) v = flat.values()[at++];
        out.push_back(std::move(m));
    }
    return out;
}

} // namespace oracle
