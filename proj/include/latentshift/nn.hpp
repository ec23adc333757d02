#pragma once

#include <cmath>

#include "latentshift/matrix.hpp"
#include "latentshift/rng.hpp"
#include "latentshift/tape.hpp"

namespace latentshift::nn {

/// x * W + b with b broadcast over rows.
inline Matrix affine(const Matrix& x, const Matrix& w, const Matrix& b) {
    Matrix out = matmul(x, w);
    if (b.rows() != 1 || b.cols() != out.cols()) {
        throw ShapeError("affine: bias " + b.shape_str() + " for output " + out.shape_str());
    }
    for (std::size_t i = 0; i < out.rows(); ++i) {
        double* oi = out.row_ptr(i);
        for (std::size_t j = 0; j < out.cols(); ++j) oi[j] += b(0, j);
    }
    return out;
}

inline Matrix relu(Matrix x) {
    for (double& v : x.values()) v = v > 0.0 ? v : 0.0;
    return x;
}

inline Matrix sigmoid(Matrix x) {
    for (double& v : x.values()) v = stable_sigmoid(v);
    return x;
}

inline Matrix clamp(Matrix x, double lo, double hi) {
    for (double& v : x.values()) v = v < lo ? lo : (v > hi ? hi : v);
    return x;
}

/// Glorot-style scaled uniform fan-in/fan-out init, U(-L, L) with
/// L = sqrt(6 / (fan_in + fan_out)).
inline Matrix glorot_uniform(std::size_t fan_in, std::size_t fan_out, Rng& rng) {
    const double limit = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
    return rng.uniform_matrix(fan_in, fan_out, -limit, limit);
}

} // namespace latentshift::nn
