#pragma once

#include <string>
#include <vector>

#include "latentshift/nn.hpp"
#include "latentshift/rng.hpp"
#include "latentshift/tape.hpp"

namespace latentshift {

inline constexpr double kProbClamp = 1e-7;

struct ClassifierConfig {
    std::size_t input_dim = 16;
    std::vector<std::size_t> hidden = {128, 64};
    double dropout_p = 0.2;
    double bn_eps = 1e-5;
    double bn_momentum = 0.1;

    void validate() const {
        if (input_dim == 0 || hidden.empty()) {
            throw ValidationError("classifier config: dimensions must be positive");
        }
        for (std::size_t w : hidden) {
            if (w == 0) throw ValidationError("classifier config: zero-width layer");
        }
        if (dropout_p < 0.0 || dropout_p >= 1.0) {
            throw ValidationError("classifier config: dropout probability outside [0,1)");
        }
    }
};

/// Binary MLP: per hidden block affine -> batch norm -> ReLU -> dropout, then
/// a sigmoid scalar head. Training mode uses batch statistics and inverted
/// dropout; evaluation mode uses running statistics and no dropout, so a
/// record's score does not depend on what else is in the batch.
///
/// Parameter layout per hidden block: W, b, bn_gamma, bn_beta; then head W, b.
class ClassifierModel {
public:
    ClassifierConfig config;
    std::vector<Matrix> params;
    std::vector<Matrix> running_mean; // 1xC per hidden block
    std::vector<Matrix> running_var;

    static ClassifierModel init(const ClassifierConfig& config, Rng& rng) {
        config.validate();
        ClassifierModel m;
        m.config = config;
        std::size_t in = config.input_dim;
        for (std::size_t width : config.hidden) {
            m.params.push_back(nn::glorot_uniform(in, width, rng));
            m.params.emplace_back(1, width);
            m.params.emplace_back(1, width, 1.0); // bn gamma
            m.params.emplace_back(1, width);      // bn beta
            m.running_mean.emplace_back(1, width);
            m.running_var.emplace_back(1, width, 1.0);
            in = width;
        }
        m.params.push_back(nn::glorot_uniform(in, 1, rng));
        m.params.emplace_back(1, 1);
        return m;
    }

    std::size_t n_blocks() const { return config.hidden.size(); }
    std::size_t head_w() const { return 4 * n_blocks(); }
    std::size_t head_b() const { return head_w() + 1; }

    /// Dementia probabilities, one per row, evaluation mode.
    Matrix predict(const Matrix& x) const {
        return forward_eval(x).probabilities;
    }

    double predict_one(const Matrix& row) const {
        return predict(row)(0, 0);
    }

    struct EvalResult {
        Matrix probabilities; // Nx1, strictly inside (0,1)
        Matrix penultimate;   // NxC activations after the last hidden block's ReLU
    };

    EvalResult forward_eval(const Matrix& x) const {
        if (x.cols() != config.input_dim) {
            throw ShapeError("classifier: input " + x.shape_str() + ", expected " +
                             std::to_string(config.input_dim) + " columns");
        }
        Matrix h = x;
        for (std::size_t blk = 0; blk < n_blocks(); ++blk) {
            h = nn::affine(h, params[4 * blk], params[4 * blk + 1]);
            const Matrix& gamma = params[4 * blk + 2];
            const Matrix& beta = params[4 * blk + 3];
            for (std::size_t i = 0; i < h.rows(); ++i) {
                double* hi = h.row_ptr(i);
                for (std::size_t j = 0; j < h.cols(); ++j) {
                    const double norm = (hi[j] - running_mean[blk](0, j)) /
                                        std::sqrt(running_var[blk](0, j) + config.bn_eps);
                    hi[j] = gamma(0, j) * norm + beta(0, j);
                }
            }
            h = nn::relu(std::move(h));
        }
        EvalResult r;
        r.penultimate = h;
        // Clamp away from {0,1}: the sigmoid saturates to exactly 1.0 in
        // double precision for logits beyond ~37.
        r.probabilities = nn::clamp(nn::sigmoid(nn::affine(h, params[head_w()], params[head_b()])),
                                    kProbClamp, 1.0 - kProbClamp);
        return r;
    }

    void update_running_stats(std::size_t blk, const Matrix& batch_mean, const Matrix& batch_var,
                              std::size_t batch_rows) {
        const double m = config.bn_momentum;
        const double unbias = static_cast<double>(batch_rows) / static_cast<double>(batch_rows - 1);
        for (std::size_t j = 0; j < batch_mean.cols(); ++j) {
            running_mean[blk](0, j) = (1.0 - m) * running_mean[blk](0, j) + m * batch_mean(0, j);
            running_var[blk](0, j) = (1.0 - m) * running_var[blk](0, j) + m * batch_var(0, j) * unbias;
        }
    }
};

/// Mean binary cross-entropy with probabilities clamped to
/// [1e-7, 1 - 1e-7] before the logs.
inline double bce(const Matrix& probabilities, const Matrix& labels01) {
    require_same_shape(probabilities, labels01, "bce");
    double sum = 0.0;
    for (std::size_t i = 0; i < probabilities.size(); ++i) {
        const double p = std::min(1.0 - kProbClamp, std::max(kProbClamp, probabilities.values()[i]));
        const double y = labels01.values()[i];
        sum -= y * std::log(p) + (1.0 - y) * std::log(1.0 - p);
    }
    const double loss = sum / static_cast<double>(probabilities.size());
    if (!std::isfinite(loss)) {
        throw NumericError("bce: loss is not finite");
    }
    return loss;
}

/// Evaluation-mode loss of the model on a labeled batch.
inline double classifier_loss(const ClassifierModel& model, const Matrix& x, const Matrix& labels01) {
    return bce(model.predict(x), labels01);
}

struct ClassifierLossTape {
    Tape tape;
    Tape::NodeId loss_node = 0;
    std::vector<Tape::NodeId> param_nodes;
    double value = 0.0;
};

/// Training-mode loss on a tape: batch-norm over the batch, fresh dropout
/// masks from the generator, BCE with clamped probabilities. Updates the
/// model's running batch-norm statistics as a side effect when requested.
inline ClassifierLossTape classifier_loss_tape(ClassifierModel& model, const Matrix& x,
                                               const Matrix& labels01, Rng& rng,
                                               bool update_running = true) {
    if (x.cols() != model.config.input_dim) {
        throw ShapeError("classifier_loss: batch " + x.shape_str() + ", expected " +
                         std::to_string(model.config.input_dim) + " columns");
    }
    if (labels01.rows() != x.rows() || labels01.cols() != 1) {
        throw ShapeError("classifier_loss: labels " + labels01.shape_str() + " for batch " +
                         x.shape_str());
    }
    ClassifierLossTape r;
    Tape& t = r.tape;
    for (const auto& p : model.params) r.param_nodes.push_back(t.leaf(p));

    auto h = t.leaf(x);
    for (std::size_t blk = 0; blk < model.n_blocks(); ++blk) {
        h = t.add_row(t.matmul(h, r.param_nodes[4 * blk]), r.param_nodes[4 * blk + 1]);
        h = t.batchnorm(h, r.param_nodes[4 * blk + 2], r.param_nodes[4 * blk + 3],
                        model.config.bn_eps);
        if (update_running) {
            model.update_running_stats(blk, t.bn_batch_mean(h), t.bn_batch_var(h), x.rows());
        }
        h = t.relu(h);
        if (model.config.dropout_p > 0.0) {
            Matrix mask(x.rows(), model.config.hidden[blk]);
            for (double& v : mask.values()) {
                v = rng.next_uniform() < model.config.dropout_p ? 0.0 : 1.0;
            }
            h = t.dropout(h, std::move(mask), model.config.dropout_p);
        }
    }
    const auto yhat = t.clamp(
        t.sigmoid(t.add_row(t.matmul(h, r.param_nodes[model.head_w()]),
                            r.param_nodes[model.head_b()])),
        kProbClamp, 1.0 - kProbClamp);

    const auto y = t.leaf(labels01);
    const auto pos = t.mul(y, t.log(yhat));
    const auto neg = t.mul(t.add_const(t.scale(y, -1.0), 1.0),
                           t.log(t.add_const(t.scale(yhat, -1.0), 1.0)));
    r.loss_node = t.scale(t.sum(t.add(pos, neg)), -1.0 / static_cast<double>(x.rows()));
    r.value = t.scalar(r.loss_node);
    if (!std::isfinite(r.value)) {
        throw NumericError("classifier_loss: loss is not finite");
    }
    return r;
}

} // namespace latentshift
