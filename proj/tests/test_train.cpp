#include <catch2/catch_amalgamated.hpp>

#include <cmath>

#include "latentshift/metrics.hpp"
#include "latentshift/train.hpp"

using namespace latentshift;

namespace {

// Two well-separated Gaussian clusters in 4 dimensions; label 1 sits at +mu.
struct TwoClusterData {
    Matrix x;
    std::vector<int> labels;
};

TwoClusterData two_clusters(std::size_t n_per_class, double separation, std::uint64_t seed) {
    Rng rng(seed);
    TwoClusterData d;
    d.x = Matrix(2 * n_per_class, 4);
    for (std::size_t i = 0; i < 2 * n_per_class; ++i) {
        const int label = i < n_per_class ? 0 : 1;
        d.labels.push_back(label);
        for (std::size_t j = 0; j < 4; ++j) {
            const double center = (label == 1 ? separation : -separation) / 2.0;
            d.x(i, j) = center + 0.5 * rng.next_gaussian();
        }
    }
    return d;
}

double nearest_centroid_accuracy(const TwoClusterData& d, const std::vector<std::size_t>& fit_idx,
                                 const std::vector<std::size_t>& eval_idx) {
    Matrix centroid0(1, 4), centroid1(1, 4);
    std::size_t n0 = 0, n1 = 0;
    for (std::size_t i : fit_idx) {
        for (std::size_t j = 0; j < 4; ++j) {
            (d.labels[i] == 0 ? centroid0 : centroid1)(0, j) += d.x(i, j);
        }
        (d.labels[i] == 0 ? n0 : n1) += 1;
    }
    for (std::size_t j = 0; j < 4; ++j) {
        centroid0(0, j) /= static_cast<double>(n0);
        centroid1(0, j) /= static_cast<double>(n1);
    }
    std::size_t correct = 0;
    for (std::size_t i : eval_idx) {
        double d0 = 0.0, d1 = 0.0;
        for (std::size_t j = 0; j < 4; ++j) {
            d0 += (d.x(i, j) - centroid0(0, j)) * (d.x(i, j) - centroid0(0, j));
            d1 += (d.x(i, j) - centroid1(0, j)) * (d.x(i, j) - centroid1(0, j));
        }
        const int predicted = d1 < d0 ? 1 : 0;
        if (predicted == d.labels[i]) ++correct;
    }
    return static_cast<double>(correct) / static_cast<double>(eval_idx.size());
}

TrainConfig fast_config(std::uint64_t seed, std::size_t epochs = 40) {
    TrainConfig c;
    c.batch_size = 32;
    c.max_epochs = epochs;
    c.seed = seed;
    return c;
}

} // namespace

TEST_CASE("classifier separates two Gaussian clusters", "[train]") {
    TwoClusterData d = two_clusters(300, 4.0, 51);

    // Establish separability with the independent nearest-centroid oracle first.
    Rng split_rng(7);
    auto [fit_idx, eval_idx] = stratified_split(d.labels, 0.2, split_rng);
    REQUIRE(nearest_centroid_accuracy(d, fit_idx, eval_idx) >= 0.99);

    ClassifierConfig cfg;
    cfg.input_dim = 4;
    cfg.hidden = {16, 8};
    Rng init_rng(52);
    ClassifierModel model = ClassifierModel::init(cfg, init_rng);
    TrainingTrace trace = train_classifier(model, gather_rows(d.x, fit_idx),
                                           [&] {
                                               std::vector<int> l;
                                               for (auto i : fit_idx) l.push_back(d.labels[i]);
                                               return l;
                                           }(),
                                           fast_config(53));
    REQUIRE_FALSE(trace.epochs.empty());

    std::size_t correct = 0;
    for (std::size_t i : eval_idx) {
        const double p = model.predict_one(extract_row(d.x, i));
        if ((p >= 0.5 ? 1 : 0) == d.labels[i]) ++correct;
    }
    const double acc = static_cast<double>(correct) / static_cast<double>(eval_idx.size());
    CHECK(acc >= 0.99);
}

TEST_CASE("zero epochs returns the initialized model and an empty trace", "[train]") {
    TwoClusterData d = two_clusters(40, 3.0, 61);
    Rng rng(62);
    ClassifierConfig cfg;
    cfg.input_dim = 4;
    ClassifierModel model = ClassifierModel::init(cfg, rng);
    const auto params_before = model.params;
    TrainConfig c = fast_config(63, 0);
    TrainingTrace trace = train_classifier(model, d.x, d.labels, c);
    CHECK(trace.epochs.empty());
    CHECK(model.params == params_before);
}

TEST_CASE("fixed seed trains to bit-identical parameters", "[train]") {
    TwoClusterData d = two_clusters(60, 3.0, 71);
    ClassifierConfig cfg;
    cfg.input_dim = 4;
    cfg.hidden = {8, 6};

    auto run = [&]() {
        Rng rng(72);
        ClassifierModel model = ClassifierModel::init(cfg, rng);
        train_classifier(model, d.x, d.labels, fast_config(73, 10));
        return model;
    };
    ClassifierModel a = run();
    ClassifierModel b = run();
    REQUIRE(a.params.size() == b.params.size());
    for (std::size_t i = 0; i < a.params.size(); ++i) {
        CHECK(a.params[i] == b.params[i]);
    }
    for (std::size_t i = 0; i < a.running_mean.size(); ++i) {
        CHECK(a.running_mean[i] == b.running_mean[i]);
        CHECK(a.running_var[i] == b.running_var[i]);
    }
}

TEST_CASE("early stopping restores the epoch with minimal validation loss", "[train]") {
    TwoClusterData d = two_clusters(80, 2.0, 81);
    ClassifierConfig cfg;
    cfg.input_dim = 4;
    cfg.hidden = {8, 6};
    Rng rng(82);
    ClassifierModel model = ClassifierModel::init(cfg, rng);
    TrainingTrace trace = train_classifier(model, d.x, d.labels, fast_config(83, 25));
    REQUIRE_FALSE(trace.epochs.empty());
    double min_val = trace.epochs[0].val_loss;
    std::size_t argmin = 0;
    for (std::size_t e = 1; e < trace.epochs.size(); ++e) {
        if (trace.epochs[e].val_loss < min_val) {
            min_val = trace.epochs[e].val_loss;
            argmin = e;
        }
    }
    CHECK(trace.best_epoch == argmin);
    CHECK(trace.best_val_loss == min_val);
}

TEST_CASE("vae trains to reconstruct a two-cluster cohort", "[train]") {
    // Unsupervised data with structure: two clusters in 6 dims.
    Rng rng(91);
    const std::size_t n = 400;
    Matrix x(n, 6);
    std::vector<int> labels;
    for (std::size_t i = 0; i < n; ++i) {
        const int label = i % 2;
        labels.push_back(label);
        for (std::size_t j = 0; j < 6; ++j) {
            x(i, j) = (label == 1 ? 1.5 : -1.5) + 0.6 * rng.next_gaussian();
        }
    }

    VaeConfig cfg;
    cfg.input_dim = 6;
    cfg.encoder_widths = {24, 12};
    cfg.latent_dim = 3;
    cfg.gamma = 0.1;
    Rng init_rng(92);
    VaeModel model = VaeModel::init(cfg, init_rng);

    TrainConfig tc = fast_config(93, 60);
    TrainingTrace trace = train_vae(model, x, labels, tc);
    REQUIRE_FALSE(trace.epochs.empty());
    CHECK(trace.epochs.back().train_loss < trace.epochs.front().train_loss);

    // Reconstruction error under half the per-variable variance.
    Matrix recon = model.reconstruct(x);
    Matrix mean = column_means(x);
    double ratio_sum = 0.0;
    for (std::size_t j = 0; j < 6; ++j) {
        double var = 0.0, mse = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            var += (x(i, j) - mean(0, j)) * (x(i, j) - mean(0, j));
            mse += (x(i, j) - recon(i, j)) * (x(i, j) - recon(i, j));
        }
        ratio_sum += mse / var;
    }
    CHECK(ratio_sum / 6.0 < 0.5);
}

TEST_CASE("vae training is deterministic per seed", "[train]") {
    Rng rng(94);
    Matrix x = rng.gaussian_matrix(60, 4);
    std::vector<int> labels;
    for (std::size_t i = 0; i < 60; ++i) labels.push_back(i % 2);
    VaeConfig cfg;
    cfg.input_dim = 4;
    cfg.encoder_widths = {8, 6};
    cfg.latent_dim = 2;

    auto run = [&]() {
        Rng init(95);
        VaeModel m = VaeModel::init(cfg, init);
        train_vae(m, x, labels, fast_config(96, 8));
        return m;
    };
    VaeModel a = run();
    VaeModel b = run();
    for (std::size_t i = 0; i < a.params.size(); ++i) {
        CHECK(a.params[i] == b.params[i]);
    }
}

TEST_CASE("divergence raises a training error carrying the trace", "[train]") {
    TwoClusterData d = two_clusters(50, 3.0, 97);
    VaeConfig cfg;
    cfg.input_dim = 4;
    cfg.encoder_widths = {8, 6};
    cfg.latent_dim = 2;
    Rng init(98);
    VaeModel model = VaeModel::init(cfg, init);
    TrainConfig tc = fast_config(99, 30);
    tc.initial_lr = 1e6; // blows up the logvar head almost immediately
    try {
        train_vae(model, d.x, d.labels, tc);
        FAIL("expected TrainingError");
    } catch (const TrainingError& e) {
        SUCCEED();
    }
}

TEST_CASE("config validation", "[train]") {
    TrainConfig c;
    c.val_split = 1.5;
    CHECK_THROWS_AS(c.validate(), ValidationError);
    TrainConfig c2;
    c2.batch_size = 0;
    CHECK_THROWS_AS(c2.validate(), ValidationError);
}
