#include "laclip/encoder.hpp"

#include <cmath>

namespace laclip {

EncoderParams init_params(const EncoderConfig& config, std::uint64_t seed) {
    config.validate();
    EncoderParams params;
    Rng rng(derive_seed(seed, "init"));
    auto fill_gaussian = [&rng](Matrix& m, double std_dev) {
        for (Eigen::Index i = 0; i < m.rows(); ++i) {
            for (Eigen::Index j = 0; j < m.cols(); ++j) m(i, j) = std_dev * normal01(rng);
        }
    };
    params.token_embedding.resize(config.tokenizer.vocab_size, config.embed_dim);
    fill_gaussian(params.token_embedding, 0.02);
    params.text_proj.resize(config.embed_dim, config.out_dim);
    fill_gaussian(params.text_proj, 1.0 / std::sqrt(static_cast<double>(config.embed_dim)));
    params.image_proj.resize(config.feature_dim, config.out_dim);
    fill_gaussian(params.image_proj, 1.0 / std::sqrt(static_cast<double>(config.feature_dim)));
    params.temp = TemperatureParam::from_tau(config.tau_init);
    return params;
}

ParamGrads ParamGrads::zeros_like(const EncoderParams& params) {
    ParamGrads g;
    g.token_embedding = Matrix::Zero(params.token_embedding.rows(), params.token_embedding.cols());
    g.text_proj = Matrix::Zero(params.text_proj.rows(), params.text_proj.cols());
    g.image_proj = Matrix::Zero(params.image_proj.rows(), params.image_proj.cols());
    return g;
}

void ParamGrads::add(const ParamGrads& other) {
    token_embedding += other.token_embedding;
    text_proj += other.text_proj;
    image_proj += other.image_proj;
    s += other.s;
}

namespace {

// grad through y = z/||z||: dL/dz = (g - (g.y) y)/||z||.
Matrix normalization_backward(const Matrix& grad_normalized, const Matrix& normalized,
                              const Vector& norms) {
    Matrix out(grad_normalized.rows(), grad_normalized.cols());
    for (Eigen::Index i = 0; i < out.rows(); ++i) {
        double dot = grad_normalized.row(i).dot(normalized.row(i));
        out.row(i) = (grad_normalized.row(i) - dot * normalized.row(i)) / norms(i);
    }
    return out;
}

}  // namespace

TextForward encode_text(const EncoderParams& params, const std::vector<TokenSeq>& batch) {
    if (batch.empty()) throw EmptyInput("text batch is empty");
    const auto n = static_cast<Eigen::Index>(batch.size());
    const Eigen::Index d_e = params.token_embedding.cols();

    TextForward fwd;
    fwd.pooled = Matrix::Zero(n, d_e);
    fwd.token_ids.resize(batch.size());
    for (Eigen::Index i = 0; i < n; ++i) {
        auto& ids = fwd.token_ids[static_cast<std::size_t>(i)];
        for (auto id : batch[static_cast<std::size_t>(i)].ids) {
            if (id == kPadToken) continue;
            if (id < 0 || id >= params.token_embedding.rows()) {
                throw ShapeMismatch("token id " + std::to_string(id) + " out of vocab");
            }
            ids.push_back(id);
            fwd.pooled.row(i) += params.token_embedding.row(id);
        }
        fwd.pooled.row(i) /= static_cast<double>(ids.size());
    }

    fwd.pre_norm = fwd.pooled * params.text_proj;
    fwd.norms.resize(n);
    Matrix normalized(n, fwd.pre_norm.cols());
    for (Eigen::Index i = 0; i < n; ++i) {
        fwd.norms(i) = fwd.pre_norm.row(i).norm();
        if (fwd.norms(i) == 0.0) throw ZeroNorm(i);
        normalized.row(i) = fwd.pre_norm.row(i) / fwd.norms(i);
    }
    fwd.embeddings = EmbeddingBatch{std::move(normalized)};
    return fwd;
}

void TextForward::backward(const Matrix& grad_embeddings, const EncoderParams& params,
                           ParamGrads& grads) const {
    if (grad_embeddings.rows() != embeddings.n() || grad_embeddings.cols() != embeddings.dim()) {
        throw ShapeMismatch("text gradient shape");
    }
    Matrix grad_pre = normalization_backward(grad_embeddings, embeddings.rows, norms);
    grads.text_proj += pooled.transpose() * grad_pre;
    Matrix grad_pooled = grad_pre * params.text_proj.transpose();
    for (Eigen::Index i = 0; i < grad_pooled.rows(); ++i) {
        const auto& ids = token_ids[static_cast<std::size_t>(i)];
        const double inv = 1.0 / static_cast<double>(ids.size());
        for (auto id : ids) grads.token_embedding.row(id) += inv * grad_pooled.row(i);
    }
}

ImageForward encode_image(const EncoderParams& params, const Matrix& features) {
    if (features.rows() < 1) throw EmptyInput("image batch is empty");
    if (features.cols() != params.image_proj.rows()) {
        throw ShapeMismatch("feature width " + std::to_string(features.cols()) +
                            " vs projection rows " + std::to_string(params.image_proj.rows()));
    }
    ImageForward fwd;
    fwd.inputs = features;
    fwd.pre_norm = features * params.image_proj;
    fwd.norms.resize(features.rows());
    Matrix normalized(features.rows(), fwd.pre_norm.cols());
    for (Eigen::Index i = 0; i < features.rows(); ++i) {
        fwd.norms(i) = fwd.pre_norm.row(i).norm();
        if (fwd.norms(i) == 0.0) throw ZeroNorm(i);
        normalized.row(i) = fwd.pre_norm.row(i) / fwd.norms(i);
    }
    fwd.embeddings = EmbeddingBatch{std::move(normalized)};
    return fwd;
}

void ImageForward::backward(const Matrix& grad_embeddings, const EncoderParams& /*params*/,
                            ParamGrads& grads) const {
    if (grad_embeddings.rows() != embeddings.n() || grad_embeddings.cols() != embeddings.dim()) {
        throw ShapeMismatch("image gradient shape");
    }
    Matrix grad_pre = normalization_backward(grad_embeddings, embeddings.rows, norms);
    grads.image_proj += inputs.transpose() * grad_pre;
}

Matrix aug_image(const Matrix& features, Rng& rng, double sigma, double dropout_p) {
    if (sigma < 0) throw ConfigError("sigma must be >= 0");
    if (dropout_p < 0 || dropout_p >= 1) throw ConfigError("dropout_p must lie in [0,1)");
    Matrix out = features;
    if (sigma > 0) {
        for (Eigen::Index i = 0; i < out.rows(); ++i) {
            for (Eigen::Index j = 0; j < out.cols(); ++j) out(i, j) += sigma * normal01(rng);
        }
    }
    if (dropout_p > 0) {
        for (Eigen::Index i = 0; i < out.rows(); ++i) {
            for (Eigen::Index j = 0; j < out.cols(); ++j) {
                if (uniform_real01(rng) < dropout_p) out(i, j) = 0.0;
            }
        }
    }
    return out;
}

double schedule_lr(const AdamHyper& hyper, std::int64_t t) {
    if (hyper.total_steps <= 0) return hyper.lr;
    if (hyper.warmup_steps > 0 && t <= hyper.warmup_steps) {
        return hyper.lr * static_cast<double>(t) / static_cast<double>(hyper.warmup_steps);
    }
    double progress = static_cast<double>(t - hyper.warmup_steps) /
                      static_cast<double>(hyper.total_steps - hyper.warmup_steps);
    return hyper.lr * 0.5 * (1.0 + std::cos(3.14159265358979323846 * progress));
}

OptState OptState::init(const EncoderParams& params, AdamHyper hyper) {
    OptState state;
    state.m = ParamGrads::zeros_like(params);
    state.v = ParamGrads::zeros_like(params);
    state.hyper = hyper;
    return state;
}

namespace {

void adamw_tensor(Matrix& param, const Matrix& grad, Matrix& m, Matrix& v,
                  const AdamHyper& hyper, double lr, double bias1, double bias2,
                  double weight_decay, const char* name) {
    if (!grad.allFinite()) throw NonFiniteGrad(name);
    m = hyper.beta1 * m + (1.0 - hyper.beta1) * grad;
    v = hyper.beta2 * v.array().matrix() + (1.0 - hyper.beta2) * grad.cwiseProduct(grad);
    Matrix m_hat = m / bias1;
    Matrix v_hat = v / bias2;
    param -= lr * (m_hat.array() / (v_hat.array().sqrt() + hyper.eps)).matrix();
    if (weight_decay > 0) param -= lr * weight_decay * param;
}

}  // namespace

void adamw_step(EncoderParams& params, const ParamGrads& grads, OptState& state) {
    state.t += 1;
    const double lr = schedule_lr(state.hyper, state.t);
    const double bias1 = 1.0 - std::pow(state.hyper.beta1, static_cast<double>(state.t));
    const double bias2 = 1.0 - std::pow(state.hyper.beta2, static_cast<double>(state.t));

    adamw_tensor(params.token_embedding, grads.token_embedding, state.m.token_embedding,
                 state.v.token_embedding, state.hyper, lr, bias1, bias2,
                 state.hyper.weight_decay, "token_embedding");
    adamw_tensor(params.text_proj, grads.text_proj, state.m.text_proj, state.v.text_proj,
                 state.hyper, lr, bias1, bias2, state.hyper.weight_decay, "text_proj");
    adamw_tensor(params.image_proj, grads.image_proj, state.m.image_proj, state.v.image_proj,
                 state.hyper, lr, bias1, bias2, state.hyper.weight_decay, "image_proj");

    // Temperature: no weight decay, clamped after the update.
    if (!std::isfinite(grads.s)) throw NonFiniteGrad("temperature");
    state.m.s = state.hyper.beta1 * state.m.s + (1.0 - state.hyper.beta1) * grads.s;
    state.v.s = state.hyper.beta2 * state.v.s + (1.0 - state.hyper.beta2) * grads.s * grads.s;
    params.temp.s -= lr * (state.m.s / bias1) / (std::sqrt(state.v.s / bias2) + state.hyper.eps);
    params.temp.clamp();
}

}  // namespace laclip
