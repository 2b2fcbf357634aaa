#pragma once

#include <cstdint>
#include <vector>

#include "laclip/common.hpp"
#include "laclip/loss.hpp"
#include "laclip/tokenizer.hpp"

namespace laclip {

struct EncoderConfig {
    TokenizerConfig tokenizer;
    int embed_dim = 64;    // token embedding width d_e
    int feature_dim = 64;  // raw image feature width D_in
    int out_dim = 32;      // shared embedding width d
    double tau_init = 0.07;

    void validate() const {
        tokenizer.validate();
        if (embed_dim < 1 || feature_dim < 1 || out_dim < 1) {
            throw ConfigError("encoder dimensions must be positive");
        }
        if (tau_init <= 0) throw ConfigError("tau_init must be positive");
    }
};

// Text side: mean of non-pad token embeddings through a linear projection.
// Image side: linear projection of precomputed features. Both l2-normalized.
struct EncoderParams {
    Matrix token_embedding;  // vocab x d_e
    Matrix text_proj;        // d_e x d
    Matrix image_proj;       // D_in x d
    TemperatureParam temp;
};

EncoderParams init_params(const EncoderConfig& config, std::uint64_t seed);

struct ParamGrads {
    Matrix token_embedding;
    Matrix text_proj;
    Matrix image_proj;
    double s = 0.0;

    static ParamGrads zeros_like(const EncoderParams& params);
    void add(const ParamGrads& other);
};

// Forward pass packaged with its backward map. backward() chains the
// normalization Jacobian, so incoming gradients are taken w.r.t. the
// unit-norm embedding rows.
struct TextForward {
    EmbeddingBatch embeddings;  // N x d

    Matrix pooled;              // N x d_e mean-pooled token embeddings
    Matrix pre_norm;            // N x d projection outputs
    Vector norms;               // N row norms of pre_norm
    std::vector<std::vector<std::int32_t>> token_ids;  // non-pad ids per row

    void backward(const Matrix& grad_embeddings, const EncoderParams& params,
                  ParamGrads& grads) const;
};

struct ImageForward {
    EmbeddingBatch embeddings;

    Matrix inputs;    // N x D_in
    Matrix pre_norm;  // N x d
    Vector norms;

    void backward(const Matrix& grad_embeddings, const EncoderParams& params,
                  ParamGrads& grads) const;
};

// Throws ZeroNorm if a projection output vanishes.
TextForward encode_text(const EncoderParams& params, const std::vector<TokenSeq>& batch);
ImageForward encode_image(const EncoderParams& params, const Matrix& features);

// Gaussian jitter then coordinate dropout, the desk-scale stand-in for
// pixel-space augmentation of precomputed features.
Matrix aug_image(const Matrix& features, Rng& rng, double sigma, double dropout_p);

struct AdamHyper {
    double lr = 1e-3;
    double weight_decay = 0.5;
    double beta1 = 0.9;
    double beta2 = 0.98;
    double eps = 1e-8;
    std::int64_t warmup_steps = 0;
    std::int64_t total_steps = 0;
};

// Linear warmup to lr, then cosine decay to zero at total_steps.
double schedule_lr(const AdamHyper& hyper, std::int64_t t);

struct OptState {
    std::int64_t t = 0;
    ParamGrads m;  // first moments, shaped like the parameters
    ParamGrads v;  // second moments
    AdamHyper hyper;

    static OptState init(const EncoderParams& params, AdamHyper hyper);
};

// Decoupled weight decay with bias correction; the temperature scalar is
// updated without weight decay and clamped afterwards. Throws NonFiniteGrad.
void adamw_step(EncoderParams& params, const ParamGrads& grads, OptState& state);

}  // namespace laclip
