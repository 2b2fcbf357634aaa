#include "laclip/loss.hpp"

namespace laclip {

EmbeddingBatch EmbeddingBatch::from_normalized(Matrix m) {
    if (m.rows() < 1 || m.cols() < 1) throw ShapeMismatch("embedding batch must be non-empty");
    for (Eigen::Index i = 0; i < m.rows(); ++i) {
        double norm = m.row(i).norm();
        if (std::abs(norm - 1.0) > 1e-6) {
            throw Error("row " + std::to_string(i) + " norm " + std::to_string(norm) +
                        " is not unit");
        }
    }
    return EmbeddingBatch{std::move(m)};
}

EmbeddingBatch normalize_rows(const Matrix& m) {
    if (m.rows() < 1 || m.cols() < 1) throw ShapeMismatch("matrix must be non-empty");
    Matrix out = m;
    for (Eigen::Index i = 0; i < out.rows(); ++i) {
        double norm = out.row(i).norm();
        if (norm == 0.0) throw ZeroNorm(i);
        out.row(i) /= norm;
    }
    return EmbeddingBatch{std::move(out)};
}

Matrix softmax_rows(const Matrix& logits) {
    Matrix out(logits.rows(), logits.cols());
    for (Eigen::Index i = 0; i < logits.rows(); ++i) {
        double m = logits.row(i).maxCoeff();
        Eigen::RowVectorXd e = (logits.row(i).array() - m).exp();
        out.row(i) = e / e.sum();
    }
    return out;
}

namespace {

// Mean over i of -log softmax(logits)_ii along rows, via log-sum-exp.
double diagonal_cross_entropy(const Matrix& logits) {
    double loss = 0.0;
    for (Eigen::Index i = 0; i < logits.rows(); ++i) {
        double m = logits.row(i).maxCoeff();
        double lse = m + std::log((logits.row(i).array() - m).exp().sum());
        loss += lse - logits(i, i);
    }
    return loss / static_cast<double>(logits.rows());
}

}  // namespace

LossOutput clip_loss_and_grads(const EmbeddingBatch& img, const EmbeddingBatch& txt,
                               const TemperatureParam& temp) {
    if (img.n() != txt.n() || img.dim() != txt.dim()) {
        throw ShapeMismatch("image batch " + std::to_string(img.n()) + "x" +
                            std::to_string(img.dim()) + " vs text batch " +
                            std::to_string(txt.n()) + "x" + std::to_string(txt.dim()));
    }
    const Eigen::Index n = img.n();
    const double scale = temp.logit_scale();

    Matrix sims = img.rows * txt.rows.transpose();  // S_ik = img_i . txt_k
    Matrix logits = sims * scale;

    LossOutput out;
    out.l_image = diagonal_cross_entropy(logits);
    out.l_text = diagonal_cross_entropy(logits.transpose());
    out.total = 0.5 * (out.l_image + out.l_text);

    // d total / d logits = (P - I)/(2N) + (Q - I)^T/(2N), with P the row
    // softmax and Q the row softmax of the transpose.
    Matrix p = softmax_rows(logits);
    Matrix q = softmax_rows(logits.transpose());
    Matrix dlogits = (p - Matrix::Identity(n, n) + (q - Matrix::Identity(n, n)).transpose()) /
                     (2.0 * static_cast<double>(n));

    out.grad_image = scale * dlogits * txt.rows;
    out.grad_text = scale * dlogits.transpose() * img.rows;
    // d logits / d s = logits, so grad_s contracts dlogits against sims*scale.
    out.grad_s = scale * dlogits.cwiseProduct(sims).sum();
    return out;
}

LossOutput multitext_loss_and_grads(const EmbeddingBatch& img,
                                    const std::vector<EmbeddingBatch>& txts,
                                    const TemperatureParam& temp, bool paper_image_scaling) {
    if (txts.empty()) throw EmptyInput("multitext loss needs at least one text batch");
    const Eigen::Index n = img.n();
    const Eigen::Index d = img.dim();
    for (const auto& t : txts) {
        if (t.n() != n || t.dim() != d) {
            throw ShapeMismatch("all text slots must be " + std::to_string(n) + "x" +
                                std::to_string(d));
        }
    }
    const auto slots = static_cast<Eigen::Index>(txts.size());
    const int m = static_cast<int>(slots) - 1;
    if (paper_image_scaling && m == 0) {
        throw ConfigError("paper image scaling divides by M and is undefined at M=0");
    }
    const double scale = temp.logit_scale();
    const double w_image = paper_image_scaling ? 1.0 / static_cast<double>(m)
                                               : 1.0 / static_cast<double>(slots);
    const double w_text = 1.0 / static_cast<double>(slots);

    LossOutput out;
    out.grad_image = Matrix::Zero(n, d);
    out.grad_text = Matrix(slots * n, d);

    for (Eigen::Index j = 0; j < slots; ++j) {
        Matrix sims = img.rows * txts[j].rows.transpose();
        Matrix logits = sims * scale;

        double li = diagonal_cross_entropy(logits);
        double lt = diagonal_cross_entropy(logits.transpose());
        out.l_image += w_image * li;
        out.l_text += w_text * lt;

        Matrix p = softmax_rows(logits);
        Matrix q = softmax_rows(logits.transpose());
        Matrix dlogits =
            (w_image * (p - Matrix::Identity(n, n)) +
             w_text * (q - Matrix::Identity(n, n)).transpose()) /
            (2.0 * static_cast<double>(n));

        out.grad_image += scale * dlogits * txts[j].rows;
        out.grad_text.middleRows(j * n, n) = scale * dlogits.transpose() * img.rows;
        out.grad_s += scale * dlogits.cwiseProduct(sims).sum();
    }
    out.total = 0.5 * (out.l_image + out.l_text);
    return out;
}

}  // namespace laclip
