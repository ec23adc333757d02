#pragma once

#include <string>
#include <vector>

#include "latentshift/nn.hpp"
#include "latentshift/rng.hpp"
#include "latentshift/tape.hpp"

namespace latentshift {

inline constexpr double kLogVarClamp = 10.0;

struct VaeConfig {
    std::size_t input_dim = 16;
    std::vector<std::size_t> encoder_widths = {256, 128, 64};
    std::size_t latent_dim = 32;
    double gamma = 0.1;

    void validate() const {
        if (input_dim == 0 || latent_dim == 0 || encoder_widths.empty()) {
            throw ValidationError("vae config: dimensions must be positive");
        }
        for (std::size_t w : encoder_widths) {
            if (w == 0) throw ValidationError("vae config: zero-width layer");
        }
        if (gamma < 0.0) {
            throw ValidationError("vae config: gamma must be nonnegative");
        }
    }

    /// Decoder hidden widths mirror the encoder.
    std::vector<std::size_t> decoder_widths() const {
        return {encoder_widths.rbegin(), encoder_widths.rend()};
    }
};

/// Encoder output for one record: posterior mean and log-variance, each a
/// 1 x latent_dim row. Manipulation uses mu as the latent code.
struct LatentCode {
    Matrix mu;
    Matrix logvar;
};

/// Fully connected VAE: ReLU hidden layers, separate mu/logvar heads, linear
/// decoder output (inputs are standard-scaled, hence unbounded).
///
/// Parameter layout (row-major weight matrices, 1xN biases):
///   encoder W/b per layer, mu head W/b, logvar head W/b,
///   decoder hidden W/b per layer, decoder output W/b.
class VaeModel {
public:
    VaeConfig config;
    std::vector<Matrix> params;

    static VaeModel init(const VaeConfig& config, Rng& rng) {
        config.validate();
        VaeModel m;
        m.config = config;
        std::size_t in = config.input_dim;
        for (std::size_t width : config.encoder_widths) {
            m.params.push_back(nn::glorot_uniform(in, width, rng));
            m.params.emplace_back(1, width);
            in = width;
        }
        for (int head = 0; head < 2; ++head) {
            m.params.push_back(nn::glorot_uniform(in, config.latent_dim, rng));
            m.params.emplace_back(1, config.latent_dim);
        }
        in = config.latent_dim;
        for (std::size_t width : config.decoder_widths()) {
            m.params.push_back(nn::glorot_uniform(in, width, rng));
            m.params.emplace_back(1, width);
            in = width;
        }
        m.params.push_back(nn::glorot_uniform(in, config.input_dim, rng));
        m.params.emplace_back(1, config.input_dim);
        return m;
    }

    std::size_t n_encoder_layers() const { return config.encoder_widths.size(); }
    std::size_t mu_w() const { return 2 * n_encoder_layers(); }
    std::size_t mu_b() const { return mu_w() + 1; }
    std::size_t logvar_w() const { return mu_w() + 2; }
    std::size_t logvar_b() const { return mu_w() + 3; }
    std::size_t decoder_start() const { return mu_w() + 4; }

    /// Posterior parameters for a batch (rows = records). Deterministic: no
    /// sampling happens here.
    LatentCode encode(const Matrix& x) const {
        check_input(x);
        Matrix h = x;
        for (std::size_t l = 0; l < n_encoder_layers(); ++l) {
            h = nn::relu(nn::affine(h, params[2 * l], params[2 * l + 1]));
        }
        LatentCode code;
        code.mu = nn::affine(h, params[mu_w()], params[mu_b()]);
        code.logvar = nn::clamp(nn::affine(h, params[logvar_w()], params[logvar_b()]),
                                -kLogVarClamp, kLogVarClamp);
        return code;
    }

    /// Pure decoder forward pass from latent rows to scaled-space records.
    Matrix decode(const Matrix& z) const {
        if (z.cols() != config.latent_dim) {
            throw ShapeError("decode: input " + z.shape_str() + ", latent_dim " +
                             std::to_string(config.latent_dim));
        }
        Matrix h = z;
        std::size_t p = decoder_start();
        const auto widths = config.decoder_widths();
        for (std::size_t l = 0; l < widths.size(); ++l, p += 2) {
            h = nn::relu(nn::affine(h, params[p], params[p + 1]));
        }
        return nn::affine(h, params[p], params[p + 1]);
    }

    Matrix reconstruct(const Matrix& x) const {
        return decode(encode(x).mu);
    }

private:
    void check_input(const Matrix& x) const {
        if (x.cols() != config.input_dim) {
            throw ShapeError("vae: input " + x.shape_str() + ", expected " +
                             std::to_string(config.input_dim) + " columns");
        }
    }
};

struct VaeLossValue {
    double loss = 0.0;
    double reconstruction = 0.0;
    double kl = 0.0;
};

struct VaeLossTape {
    Tape tape;
    Tape::NodeId loss_node = 0;
    std::vector<Tape::NodeId> param_nodes;
    VaeLossValue value;
};

/// Builds the full training loss on a tape:
///   mean_i ||x_i - xhat_i||^2 + gamma * mean_i 0.5 sum_d (mu^2 + sigma^2 - 1 - logvar)
/// with the reparameterized z = mu + sigma .* epsilon. epsilon is supplied by
/// the caller (frozen), so the whole graph is deterministic given inputs.
inline VaeLossTape vae_loss_tape(const VaeModel& model, const Matrix& batch, const Matrix& epsilon) {
    if (batch.cols() != model.config.input_dim) {
        throw ShapeError("vae_loss: batch " + batch.shape_str() + ", expected " +
                         std::to_string(model.config.input_dim) + " columns");
    }
    if (epsilon.rows() != batch.rows() || epsilon.cols() != model.config.latent_dim) {
        throw ShapeError("vae_loss: epsilon " + epsilon.shape_str() + " for batch " +
                         batch.shape_str() + " and latent_dim " +
                         std::to_string(model.config.latent_dim));
    }
    VaeLossTape r;
    Tape& t = r.tape;
    for (const auto& p : model.params) r.param_nodes.push_back(t.leaf(p));

    const auto x = t.leaf(batch);
    auto h = x;
    for (std::size_t l = 0; l < model.n_encoder_layers(); ++l) {
        h = t.relu(t.add_row(t.matmul(h, r.param_nodes[2 * l]), r.param_nodes[2 * l + 1]));
    }
    const auto mu = t.add_row(t.matmul(h, r.param_nodes[model.mu_w()]), r.param_nodes[model.mu_b()]);
    const auto logvar = t.clamp(
        t.add_row(t.matmul(h, r.param_nodes[model.logvar_w()]), r.param_nodes[model.logvar_b()]),
        -kLogVarClamp, kLogVarClamp);
    const auto sigma = t.exp(t.scale(logvar, 0.5));
    const auto z = t.add(mu, t.mul(sigma, t.leaf(epsilon)));

    auto d = z;
    std::size_t p = model.decoder_start();
    const auto widths = model.config.decoder_widths();
    for (std::size_t l = 0; l < widths.size(); ++l, p += 2) {
        d = t.relu(t.add_row(t.matmul(d, r.param_nodes[p]), r.param_nodes[p + 1]));
    }
    const auto xhat = t.add_row(t.matmul(d, r.param_nodes[p]), r.param_nodes[p + 1]);

    const double inv_n = 1.0 / static_cast<double>(batch.rows());
    const auto recon = t.scale(t.sum(t.square(t.sub(x, xhat))), inv_n);
    // 0.5 * (mu^2 + exp(logvar) - logvar - 1), summed over dims, mean over batch
    const auto kl_cells = t.sub(t.add(t.square(mu), t.exp(logvar)), t.add_const(logvar, 1.0));
    const auto kl = t.scale(t.sum(kl_cells), 0.5 * inv_n);
    r.loss_node = t.add(recon, t.scale(kl, model.config.gamma));

    r.value.reconstruction = t.scalar(recon);
    r.value.kl = t.scalar(kl);
    r.value.loss = t.scalar(r.loss_node);
    if (!std::isfinite(r.value.reconstruction)) {
        throw NumericError("vae_loss: reconstruction term is not finite");
    }
    if (!std::isfinite(r.value.kl)) {
        throw NumericError("vae_loss: KL term is not finite");
    }
    return r;
}

/// Loss with epsilon drawn from the given generator.
inline VaeLossValue vae_loss(const VaeModel& model, const Matrix& batch, Rng& rng) {
    const Matrix epsilon = rng.gaussian_matrix(batch.rows(), model.config.latent_dim);
    return vae_loss_tape(model, batch, epsilon).value;
}

} // namespace latentshift
