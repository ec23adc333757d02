#pragma once

#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <vector>

#include "latentshift/adam.hpp"
#include "latentshift/classifier.hpp"
#include "latentshift/cohort.hpp"
#include "latentshift/vae.hpp"

namespace latentshift {

struct TrainConfig {
    std::size_t batch_size = 128;
    double val_split = 0.1;
    std::size_t max_epochs = 100;
    std::size_t patience = 10;          // early stopping, epochs without val improvement
    std::size_t scheduler_patience = 5; // LR decay trigger, half the stopping patience
    double initial_lr = 1e-3;
    double lr_decay = 0.1;
    std::uint64_t seed = 42;

    void validate() const {
        if (batch_size == 0) throw ValidationError("train config: batch_size must be positive");
        if (val_split <= 0.0 || val_split >= 1.0) {
            throw ValidationError("train config: val_split must be in (0,1)");
        }
        if (!(initial_lr > 0.0)) throw ValidationError("train config: initial_lr must be positive");
        if (!(lr_decay > 0.0) || lr_decay >= 1.0) {
            throw ValidationError("train config: lr_decay must be in (0,1)");
        }
        if (patience == 0 || scheduler_patience == 0) {
            throw ValidationError("train config: patience values must be positive");
        }
    }
};

struct EpochStats {
    double train_loss = 0.0;
    double val_loss = 0.0;
    double learning_rate = 0.0;
};

struct TrainingTrace {
    std::vector<EpochStats> epochs;
    std::size_t best_epoch = static_cast<std::size_t>(-1);
    double best_val_loss = std::numeric_limits<double>::infinity();
};

class TrainingError : public Error {
public:
    TrainingError(const std::string& message, TrainingTrace trace)
        : Error(message), trace(std::move(trace)) {}
    TrainingTrace trace;
};

inline Matrix gather_rows(const Matrix& x, const std::vector<std::size_t>& idx) {
    Matrix out(idx.size(), x.cols());
    for (std::size_t i = 0; i < idx.size(); ++i) {
        for (std::size_t j = 0; j < x.cols(); ++j) out(i, j) = x(idx[i], j);
    }
    return out;
}

namespace detail {

/// Shared epoch loop: stratified validation split, seeded shuffling, Adam with
/// reduce-on-plateau, early stopping with best-epoch restore. The model
/// specifics come in through the callbacks.
inline TrainingTrace training_loop(
    const TrainConfig& config, const std::vector<int>& labels, AdamState& adam,
    std::size_t min_batch_rows,
    const std::function<double(const std::vector<std::size_t>&, Rng&)>& train_batch,
    const std::function<double(const std::vector<std::size_t>&, Rng&)>& val_loss,
    const std::function<void()>& snapshot_best, const std::function<void()>& restore_best) {
    config.validate();
    TrainingTrace trace;
    if (config.max_epochs == 0) {
        return trace;
    }

    Rng rng(config.seed);
    auto [train_idx, val_idx] = stratified_split(labels, config.val_split, rng);

    std::size_t epochs_since_best = 0;
    std::size_t epochs_since_sched = 0;

    for (std::size_t epoch = 0; epoch < config.max_epochs; ++epoch) {
        const double lr_used = adam.learning_rate;
        std::vector<std::size_t> order = train_idx;
        rng.shuffle(order);

        double train_loss;
        double vloss;
        try {
            double loss_sum = 0.0;
            std::size_t rows_done = 0;
            for (std::size_t at = 0; at < order.size(); at += config.batch_size) {
                const std::size_t end = std::min(order.size(), at + config.batch_size);
                if (end - at < min_batch_rows) continue; // a trailing sliver cannot feed batch norm
                std::vector<std::size_t> batch(order.begin() + at, order.begin() + end);
                const double loss = train_batch(batch, rng);
                loss_sum += loss * static_cast<double>(batch.size());
                rows_done += batch.size();
            }
            train_loss = rows_done > 0 ? loss_sum / static_cast<double>(rows_done)
                                       : std::numeric_limits<double>::quiet_NaN();
            vloss = val_loss(val_idx, rng);
        } catch (const NumericError& e) {
            throw TrainingError("training diverged at epoch " + std::to_string(epoch) + ": " +
                                e.what(), trace);
        }
        trace.epochs.push_back({train_loss, vloss, lr_used});

        if (!std::isfinite(vloss) || !std::isfinite(train_loss)) {
            throw TrainingError("training diverged at epoch " + std::to_string(epoch), trace);
        }

        if (vloss < trace.best_val_loss) {
            trace.best_val_loss = vloss;
            trace.best_epoch = epoch;
            snapshot_best();
            epochs_since_best = 0;
            epochs_since_sched = 0;
        } else {
            ++epochs_since_best;
            ++epochs_since_sched;
        }
        if (epochs_since_best >= config.patience) {
            break;
        }
        if (epochs_since_sched >= config.scheduler_patience) {
            adam.learning_rate *= config.lr_decay;
            epochs_since_sched = 0;
        }
    }
    restore_best();
    return trace;
}

} // namespace detail

/// Trains the VAE on scaled records. Labels are only used to stratify the
/// validation split. Reparameterization noise comes from the loop's seeded
/// generator, so one seed fixes the whole trajectory.
inline TrainingTrace train_vae(VaeModel& model, const Matrix& x, const std::vector<int>& labels,
                               const TrainConfig& config) {
    if (x.rows() != labels.size()) {
        throw ShapeError("train_vae: " + std::to_string(x.rows()) + " records vs " +
                         std::to_string(labels.size()) + " labels");
    }
    auto adam = AdamState::init(model.params, config.initial_lr);
    std::vector<Matrix> best_params = model.params;

    auto train_batch = [&](const std::vector<std::size_t>& idx, Rng& rng) {
        const Matrix batch = gather_rows(x, idx);
        const Matrix eps = rng.gaussian_matrix(batch.rows(), model.config.latent_dim);
        auto lt = vae_loss_tape(model, batch, eps);
        lt.tape.backward(lt.loss_node);
        std::vector<Matrix> grads;
        grads.reserve(lt.param_nodes.size());
        for (auto id : lt.param_nodes) grads.push_back(lt.tape.adjoint(id));
        adam_step(model.params, grads, adam);
        return lt.value.loss;
    };
    auto val_loss = [&](const std::vector<std::size_t>& idx, Rng& rng) {
        const Matrix batch = gather_rows(x, idx);
        return vae_loss(model, batch, rng).loss;
    };

    return detail::training_loop(
        config, labels, adam, 1, train_batch, val_loss,
        [&]() { best_params = model.params; }, [&]() { model.params = best_params; });
}

/// Trains the binary classifier on scaled records with 0/1 labels
/// (1 = dementia). The best-epoch snapshot covers the running batch-norm
/// statistics as well as the weights.
inline TrainingTrace train_classifier(ClassifierModel& model, const Matrix& x,
                                      const std::vector<int>& labels, const TrainConfig& config) {
    if (x.rows() != labels.size()) {
        throw ShapeError("train_classifier: " + std::to_string(x.rows()) + " records vs " +
                         std::to_string(labels.size()) + " labels");
    }
    Matrix y(labels.size(), 1);
    for (std::size_t i = 0; i < labels.size(); ++i) y(i, 0) = labels[i] == 1 ? 1.0 : 0.0;

    auto adam = AdamState::init(model.params, config.initial_lr);
    std::vector<Matrix> best_params = model.params;
    std::vector<Matrix> best_rm = model.running_mean;
    std::vector<Matrix> best_rv = model.running_var;

    auto train_batch = [&](const std::vector<std::size_t>& idx, Rng& rng) {
        const Matrix batch = gather_rows(x, idx);
        Matrix yb(idx.size(), 1);
        for (std::size_t i = 0; i < idx.size(); ++i) yb(i, 0) = y(idx[i], 0);
        auto lt = classifier_loss_tape(model, batch, yb, rng, true);
        lt.tape.backward(lt.loss_node);
        std::vector<Matrix> grads;
        grads.reserve(lt.param_nodes.size());
        for (auto id : lt.param_nodes) grads.push_back(lt.tape.adjoint(id));
        adam_step(model.params, grads, adam);
        return lt.value;
    };
    auto val_loss = [&](const std::vector<std::size_t>& idx, Rng&) {
        const Matrix batch = gather_rows(x, idx);
        Matrix yb(idx.size(), 1);
        for (std::size_t i = 0; i < idx.size(); ++i) yb(i, 0) = y(idx[i], 0);
        return classifier_loss(model, batch, yb);
    };

    return detail::training_loop(
        config, labels, adam, 2, train_batch, val_loss,
        [&]() {
            best_params = model.params;
            best_rm = model.running_mean;
            best_rv = model.running_var;
        },
        [&]() {
            model.params = best_params;
            model.running_mean = best_rm;
            model.running_var = best_rv;
        });
}

} // namespace latentshift
