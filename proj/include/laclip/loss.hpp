#pragma once

#include <cmath>
#include <vector>

#include "laclip/common.hpp"

namespace laclip {

// N x d matrix whose rows are unit-norm embeddings.
struct EmbeddingBatch {
    Matrix rows;

    Eigen::Index n() const { return rows.rows(); }
    Eigen::Index dim() const { return rows.cols(); }

    // Wraps a matrix that is already normalized; throws if any row norm
    // strays outside [1 - 1e-6, 1 + 1e-6].
    static EmbeddingBatch from_normalized(Matrix m);
};

// Divides each row by its l2 norm. Throws ZeroNorm(row) on a zero row.
EmbeddingBatch normalize_rows(const Matrix& m);

// Learnable log-inverse-temperature s = log(1/tau).
struct TemperatureParam {
    double s = std::log(1.0 / 0.07);
    double clamp_max = std::log(100.0);

    double tau() const { return std::exp(-s); }
    double logit_scale() const { return std::exp(s); }
    void clamp() {
        if (s > clamp_max) s = clamp_max;
    }
    static TemperatureParam from_tau(double tau) { return {std::log(1.0 / tau)}; }
};

// Losses plus exact gradients of `total` w.r.t. the normalized embedding
// rows and s. In multi-text mode grad_text stacks the per-slot gradients:
// row j*N + i belongs to slot j, record i.
struct LossOutput {
    double l_image = 0.0;
    double l_text = 0.0;
    double total = 0.0;
    Matrix grad_image;
    Matrix grad_text;
    double grad_s = 0.0;
};

// Row-wise softmax with max-subtraction; rows sum to 1.
Matrix softmax_rows(const Matrix& logits);

// Symmetric InfoNCE over an N x N similarity matrix of paired embeddings.
LossOutput clip_loss_and_grads(const EmbeddingBatch& img, const EmbeddingBatch& txt,
                               const TemperatureParam& temp);

// Multi-positive variant: each image is paired with all M+1 text versions;
// slot-j positives compete only against slot-j texts of other records, and
// every text is an anchor against all N images. Losses are per-sample means
// (1/(N*(M+1))), which makes M=0 coincide with clip_loss_and_grads. With
// paper_image_scaling the image side is rescaled by (M+1)/M instead; this
// requires M >= 1.
LossOutput multitext_loss_and_grads(const EmbeddingBatch& img,
                                    const std::vector<EmbeddingBatch>& txts,
                                    const TemperatureParam& temp,
                                    bool paper_image_scaling = false);

}  // namespace laclip
