#pragma once

#include <algorithm>
#include <cmath>
#include <numeric>
#include <vector>

#include "latentshift/matrix.hpp"

namespace latentshift {

struct EigResult {
    std::vector<double> eigenvalues; // descending
    Matrix eigenvectors;             // orthonormal columns, aligned with eigenvalues
};

/// Symmetric eigendecomposition by cyclic Jacobi rotations.
///
/// Convergence: sweeps stop when the off-diagonal Frobenius norm drops below
/// 1e-14 times the Frobenius norm of the input (or below 1e-300 absolute for
/// an all-zero input). A sweep rotates every (p, q) pair once; the matrices
/// here are at most 64x64, where Jacobi converges in a handful of sweeps.
inline EigResult sym_eig(const Matrix& s) {
    const std::size_t n = s.rows();
    if (n == 0 || s.cols() != n) {
        throw ValidationError("sym_eig: matrix must be square and nonempty, got " + s.shape_str());
    }
    const double sym_tol = 1e-10 * std::max(1.0, max_abs(s));
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = i + 1; j < n; ++j) {
            if (std::abs(s(i, j) - s(j, i)) > sym_tol) {
                throw ValidationError("sym_eig: matrix not symmetric at (" + std::to_string(i) +
                                      "," + std::to_string(j) + "): " + std::to_string(s(i, j)) +
                                      " vs " + std::to_string(s(j, i)));
            }
        }
    }

    Matrix a = s;
    // Work on the exactly-symmetrized copy so rotations stay consistent.
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = i + 1; j < n; ++j) {
            const double avg = 0.5 * (a(i, j) + a(j, i));
            a(i, j) = avg;
            a(j, i) = avg;
        }
    }
    Matrix v = Matrix::identity(n);

    const double frob = frobenius_norm(a);
    const double threshold = std::max(1e-14 * frob, 1e-300);
    constexpr int max_sweeps = 100;

    auto off_diagonal_norm = [&]() {
        double sum = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            for (std::size_t j = i + 1; j < n; ++j) sum += 2.0 * a(i, j) * a(i, j);
        }
        return std::sqrt(sum);
    };

    int sweep = 0;
    double off = off_diagonal_norm();
    while (off > threshold) {
        if (sweep++ >= max_sweeps) {
            throw NumericError("sym_eig: no convergence after " + std::to_string(max_sweeps) +
                               " sweeps, off-diagonal residual " + std::to_string(off));
        }
        for (std::size_t p = 0; p < n - 1; ++p) {
            for (std::size_t q = p + 1; q < n; ++q) {
                const double apq = a(p, q);
                if (std::abs(apq) <= threshold / static_cast<double>(n * n)) continue;
                const double app = a(p, p);
                const double aqq = a(q, q);
                const double theta = (aqq - app) / (2.0 * apq);
                // Smaller-angle root of t^2 + 2 theta t - 1 = 0.
                const double t = (theta >= 0.0 ? 1.0 : -1.0) /
                                 (std::abs(theta) + std::sqrt(theta * theta + 1.0));
                const double c = 1.0 / std::sqrt(t * t + 1.0);
                const double sn = t * c;

                for (std::size_t k = 0; k < n; ++k) {
                    const double akp = a(k, p);
                    const double akq = a(k, q);
                    a(k, p) = c * akp - sn * akq;
                    a(k, q) = sn * akp + c * akq;
                }
                for (std::size_t k = 0; k < n; ++k) {
                    const double apk = a(p, k);
                    const double aqk = a(q, k);
                    a(p, k) = c * apk - sn * aqk;
                    a(q, k) = sn * apk + c * aqk;
                }
                for (std::size_t k = 0; k < n; ++k) {
                    const double vkp = v(k, p);
                    const double vkq = v(k, q);
                    v(k, p) = c * vkp - sn * vkq;
                    v(k, q) = sn * vkp + c * vkq;
                }
            }
        }
        off = off_diagonal_norm();
    }

    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(),
              [&](std::size_t x, std::size_t y) { return a(x, x) > a(y, y); });

    EigResult result;
    result.eigenvalues.resize(n);
    result.eigenvectors = Matrix(n, n);
    for (std::size_t j = 0; j < n; ++j) {
        result.eigenvalues[j] = a(order[j], order[j]);
        for (std::size_t i = 0; i < n; ++i) {
            result.eigenvectors(i, j) = v(i, order[j]);
        }
    }
    return result;
}

} // namespace latentshift
