#pragma once

#include <cmath>
#include <cstdint>
#include <vector>

#include "latentshift/matrix.hpp"

namespace latentshift {

/// Adam accumulators for an ordered parameter set.
struct AdamState {
    std::vector<Matrix> first_moment;
    std::vector<Matrix> second_moment;
    std::int64_t step_count = 0;
    double learning_rate = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;

    static AdamState init(const std::vector<Matrix>& params, double learning_rate) {
        if (!(learning_rate > 0.0)) {
            throw ValidationError("AdamState: learning rate must be positive");
        }
        AdamState s;
        s.learning_rate = learning_rate;
        s.first_moment.reserve(params.size());
        s.second_moment.reserve(params.size());
        for (const auto& p : params) {
            s.first_moment.emplace_back(p.rows(), p.cols());
            s.second_moment.emplace_back(p.rows(), p.cols());
        }
        return s;
    }
};

/// One bias-corrected Adam update, in place.
inline void adam_step(std::vector<Matrix>& params, const std::vector<Matrix>& grads, AdamState& state) {
    if (params.size() != grads.size() || params.size() != state.first_moment.size()) {
        throw ShapeError("adam_step: " + std::to_string(params.size()) + " params, " +
                         std::to_string(grads.size()) + " grads, state for " +
                         std::to_string(state.first_moment.size()));
    }
    state.step_count += 1;
    const double t = static_cast<double>(state.step_count);
    const double bc1 = 1.0 - std::pow(state.beta1, t);
    const double bc2 = 1.0 - std::pow(state.beta2, t);
    for (std::size_t k = 0; k < params.size(); ++k) {
        Matrix& p = params[k];
        const Matrix& g = grads[k];
        require_same_shape(p, g, "adam_step");
        require_same_shape(p, state.first_moment[k], "adam_step state");
        Matrix& m = state.first_moment[k];
        Matrix& v = state.second_moment[k];
        for (std::size_t i = 0; i < p.size(); ++i) {
            const double gi = g.values()[i];
            double& mi = m.values()[i];
            double& vi = v.values()[i];
            mi = state.beta1 * mi + (1.0 - state.beta1) * gi;
            vi = state.beta2 * vi + (1.0 - state.beta2) * gi * gi;
            const double mhat = mi / bc1;
            const double vhat = vi / bc2;
            p.values()[i] -= state.learning_rate * mhat / (std::sqrt(vhat) + state.epsilon);
        }
    }
}

} // namespace latentshift
