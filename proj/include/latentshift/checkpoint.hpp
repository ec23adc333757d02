#pragma once

#include <filesystem>
#include <limits>
#include <optional>
#include <string>

#include "latentshift/classifier.hpp"
#include "latentshift/cohort.hpp"
#include "latentshift/io.hpp"
#include "latentshift/train.hpp"
#include "latentshift/vae.hpp"

// Binary checkpoint container for both model kinds. Byte-exact layout is
// documented in docs/checkpoint_format.md; every multi-byte field is
// little-endian and every parameter blob is a row-major 64-bit matrix with a
// dims header.

namespace latentshift {

inline constexpr char kCheckpointMagic[9] = "LSCKPT01";
inline constexpr std::uint32_t kCheckpointVersion = 1;
inline constexpr std::uint8_t kKindVae = 0;
inline constexpr std::uint8_t kKindClassifier = 1;

struct TraceSummary {
    std::uint32_t n_epochs = 0;
    std::uint32_t best_epoch = std::numeric_limits<std::uint32_t>::max();
    double best_val_loss = std::numeric_limits<double>::infinity();
    double final_lr = 0.0;
};

inline TraceSummary summarize(const TrainingTrace& trace) {
    TraceSummary s;
    s.n_epochs = static_cast<std::uint32_t>(trace.epochs.size());
    if (trace.best_epoch != static_cast<std::size_t>(-1)) {
        s.best_epoch = static_cast<std::uint32_t>(trace.best_epoch);
        s.best_val_loss = trace.best_val_loss;
    }
    if (!trace.epochs.empty()) {
        s.final_lr = trace.epochs.back().learning_rate;
    }
    return s;
}

namespace detail {

inline void put_header(std::string& out, std::uint8_t kind, std::uint64_t train_seed) {
    out.append(kCheckpointMagic, 8);
    io::put_u32(out, kCheckpointVersion);
    io::put_u8(out, kind);
    io::put_u64(out, train_seed);
}

inline void put_params(std::string& out, const std::vector<Matrix>& params) {
    io::put_u32(out, static_cast<std::uint32_t>(params.size()));
    for (const auto& p : params) io::put_matrix(out, p);
}

inline std::vector<Matrix> read_params(io::ByteReader& r) {
    const std::uint32_t n = r.u32();
    std::vector<Matrix> params;
    params.reserve(n);
    for (std::uint32_t i = 0; i < n; ++i) params.push_back(io::read_matrix(r));
    return params;
}

inline void put_scaling(std::string& out, const std::optional<ScalingState>& scaling) {
    io::put_u8(out, scaling.has_value() ? 1 : 0);
    if (scaling.has_value()) {
        io::put_u32(out, static_cast<std::uint32_t>(scaling->means.size()));
        for (std::size_t i = 0; i < scaling->means.size(); ++i) {
            io::put_f64(out, scaling->means[i]);
            io::put_f64(out, scaling->stds[i]);
        }
    }
}

inline std::optional<ScalingState> read_scaling(io::ByteReader& r) {
    if (r.u8() == 0) return std::nullopt;
    const std::uint32_t n = r.u32();
    ScalingState s;
    for (std::uint32_t i = 0; i < n; ++i) {
        s.means.push_back(r.f64());
        s.stds.push_back(r.f64());
    }
    s.validate();
    return s;
}

inline void put_summary(std::string& out, const TraceSummary& s) {
    io::put_u32(out, s.n_epochs);
    io::put_u32(out, s.best_epoch);
    io::put_f64(out, s.best_val_loss);
    io::put_f64(out, s.final_lr);
}

inline TraceSummary read_summary(io::ByteReader& r) {
    TraceSummary s;
    s.n_epochs = r.u32();
    s.best_epoch = r.u32();
    s.best_val_loss = r.f64();
    s.final_lr = r.f64();
    return s;
}

inline void check_param_shape(const Matrix& got, std::size_t rows, std::size_t cols,
                              const std::string& what) {
    if (got.rows() != rows || got.cols() != cols) {
        throw CheckpointError("checkpoint: " + what + " has dims " + got.shape_str() +
                              ", architecture declares " + std::to_string(rows) + "x" +
                              std::to_string(cols));
    }
}

} // namespace detail

struct VaeCheckpoint {
    VaeModel model;
    std::optional<ScalingState> scaling;
    std::uint64_t train_seed = 0;
    TraceSummary summary;
};

struct ClassifierCheckpoint {
    ClassifierModel model;
    std::optional<ScalingState> scaling;
    std::uint64_t train_seed = 0;
    TraceSummary summary;
};

inline void save_vae_checkpoint(const std::filesystem::path& path, const VaeModel& model,
                                const std::optional<ScalingState>& scaling,
                                std::uint64_t train_seed, const TraceSummary& summary) {
    std::string out;
    detail::put_header(out, kKindVae, train_seed);
    io::put_u32(out, static_cast<std::uint32_t>(model.config.input_dim));
    io::put_u32(out, static_cast<std::uint32_t>(model.config.encoder_widths.size()));
    for (std::size_t w : model.config.encoder_widths) {
        io::put_u32(out, static_cast<std::uint32_t>(w));
    }
    io::put_u32(out, static_cast<std::uint32_t>(model.config.latent_dim));
    io::put_f64(out, model.config.gamma);
    detail::put_params(out, model.params);
    detail::put_scaling(out, scaling);
    detail::put_summary(out, summary);
    io::atomic_write(path, out);
}

inline void save_classifier_checkpoint(const std::filesystem::path& path,
                                       const ClassifierModel& model,
                                       const std::optional<ScalingState>& scaling,
                                       std::uint64_t train_seed, const TraceSummary& summary) {
    std::string out;
    detail::put_header(out, kKindClassifier, train_seed);
    io::put_u32(out, static_cast<std::uint32_t>(model.config.input_dim));
    io::put_u32(out, static_cast<std::uint32_t>(model.config.hidden.size()));
    for (std::size_t w : model.config.hidden) {
        io::put_u32(out, static_cast<std::uint32_t>(w));
    }
    io::put_f64(out, model.config.dropout_p);
    io::put_f64(out, model.config.bn_eps);
    io::put_f64(out, model.config.bn_momentum);
    detail::put_params(out, model.params);
    io::put_u32(out, static_cast<std::uint32_t>(model.running_mean.size()));
    for (std::size_t i = 0; i < model.running_mean.size(); ++i) {
        io::put_matrix(out, model.running_mean[i]);
        io::put_matrix(out, model.running_var[i]);
    }
    detail::put_scaling(out, scaling);
    detail::put_summary(out, summary);
    io::atomic_write(path, out);
}

namespace detail {

// The returned reader views `content`; the caller keeps it alive for the parse.
inline io::ByteReader read_and_check_header(const std::string& content, std::uint8_t expected_kind,
                                            const std::string& path, std::uint64_t& train_seed) {
    if (content.size() < 8 || content.compare(0, 8, kCheckpointMagic) != 0) {
        throw CheckpointError("not a checkpoint file (bad magic): " + path);
    }
    io::ByteReader r(std::string_view(content).substr(8));
    const std::uint32_t version = r.u32();
    if (version != kCheckpointVersion) {
        throw CheckpointError("unsupported checkpoint version " + std::to_string(version) +
                              " in " + path);
    }
    const std::uint8_t kind = r.u8();
    if (kind != expected_kind) {
        throw CheckpointError("checkpoint kind mismatch in " + path + ": found " +
                              (kind == kKindVae ? std::string("vae") : std::string("classifier")));
    }
    train_seed = r.u64();
    return r;
}

} // namespace detail

inline VaeCheckpoint load_vae_checkpoint(const std::filesystem::path& path) {
    const std::string payload = io::read_file(path);
    VaeCheckpoint ck;
    auto r = detail::read_and_check_header(payload, kKindVae, path.string(), ck.train_seed);

    VaeConfig config;
    config.input_dim = r.u32();
    const std::uint32_t n_layers = r.u32();
    if (n_layers == 0 || n_layers > 64) {
        throw CheckpointError("checkpoint: implausible encoder depth " + std::to_string(n_layers));
    }
    config.encoder_widths.clear();
    for (std::uint32_t i = 0; i < n_layers; ++i) config.encoder_widths.push_back(r.u32());
    config.latent_dim = r.u32();
    config.gamma = r.f64();
    config.validate();

    ck.model.config = config;
    ck.model.params = detail::read_params(r);

    // Shape check against the declared architecture.
    VaeModel expected;
    {
        Rng throwaway(0);
        expected = VaeModel::init(config, throwaway);
    }
    if (ck.model.params.size() != expected.params.size()) {
        throw CheckpointError("checkpoint: " + std::to_string(ck.model.params.size()) +
                              " parameter blobs, architecture needs " +
                              std::to_string(expected.params.size()));
    }
    for (std::size_t i = 0; i < expected.params.size(); ++i) {
        detail::check_param_shape(ck.model.params[i], expected.params[i].rows(),
                                  expected.params[i].cols(),
                                  "vae parameter " + std::to_string(i));
    }

    ck.scaling = detail::read_scaling(r);
    ck.summary = detail::read_summary(r);
    if (!r.exhausted()) {
        throw CheckpointError("checkpoint: " + std::to_string(r.remaining()) +
                              " trailing bytes in " + path.string());
    }
    return ck;
}

inline ClassifierCheckpoint load_classifier_checkpoint(const std::filesystem::path& path) {
    const std::string payload = io::read_file(path);
    ClassifierCheckpoint ck;
    auto r = detail::read_and_check_header(payload, kKindClassifier, path.string(), ck.train_seed);

    ClassifierConfig config;
    config.input_dim = r.u32();
    const std::uint32_t n_hidden = r.u32();
    if (n_hidden == 0 || n_hidden > 64) {
        throw CheckpointError("checkpoint: implausible hidden depth " + std::to_string(n_hidden));
    }
    config.hidden.clear();
    for (std::uint32_t i = 0; i < n_hidden; ++i) config.hidden.push_back(r.u32());
    config.dropout_p = r.f64();
    config.bn_eps = r.f64();
    config.bn_momentum = r.f64();
    config.validate();

    ck.model.config = config;
    ck.model.params = detail::read_params(r);

    ClassifierModel expected;
    {
        Rng throwaway(0);
        expected = ClassifierModel::init(config, throwaway);
    }
    if (ck.model.params.size() != expected.params.size()) {
        throw CheckpointError("checkpoint: " + std::to_string(ck.model.params.size()) +
                              " parameter blobs, architecture needs " +
                              std::to_string(expected.params.size()));
    }
    for (std::size_t i = 0; i < expected.params.size(); ++i) {
        detail::check_param_shape(ck.model.params[i], expected.params[i].rows(),
                                  expected.params[i].cols(),
                                  "classifier parameter " + std::to_string(i));
    }

    const std::uint32_t n_bn = r.u32();
    if (n_bn != config.hidden.size()) {
        throw CheckpointError("checkpoint: " + std::to_string(n_bn) +
                              " batch-norm blocks, architecture needs " +
                              std::to_string(config.hidden.size()));
    }
    ck.model.running_mean.clear();
    ck.model.running_var.clear();
    for (std::uint32_t i = 0; i < n_bn; ++i) {
        ck.model.running_mean.push_back(io::read_matrix(r));
        ck.model.running_var.push_back(io::read_matrix(r));
        detail::check_param_shape(ck.model.running_mean[i], 1, config.hidden[i],
                                  "running mean " + std::to_string(i));
        detail::check_param_shape(ck.model.running_var[i], 1, config.hidden[i],
                                  "running var " + std::to_string(i));
    }

    ck.scaling = detail::read_scaling(r);
    ck.summary = detail::read_summary(r);
    if (!r.exhausted()) {
        throw CheckpointError("checkpoint: " + std::to_string(r.remaining()) +
                              " trailing bytes in " + path.string());
    }
    return ck;
}

} // namespace latentshift
