#pragma once

#include <array>
#include <functional>
#include <map>
#include <string>
#include <vector>

#include "laclip/common.hpp"

namespace laclip {

// --- zero-shot transfer ---

// The 7-template prompt subset used when no template file is supplied.
extern const std::array<std::string_view, 7> kDefaultZeroshotTemplates;

// Maps a piece of text to a unit-norm d-dimensional embedding.
using TextEncoderFn = std::function<Vector(const std::string&)>;

struct ZeroShotClassifier {
    Matrix class_matrix;  // C x d, unit-norm rows
    std::vector<std::string> class_names;
    std::vector<std::string> templates;
};

// Per class: encode every instantiated template, average, re-normalize.
// Throws ZeroNorm when the template embeddings cancel out.
ZeroShotClassifier build_zeroshot_classifier(const std::vector<std::string>& class_names,
                                             const std::vector<std::string>& templates,
                                             const TextEncoderFn& text_encoder);

// argmax of class_matrix . embedding, ties to the lowest class index.
double zeroshot_accuracy(const ZeroShotClassifier& classifier, const Matrix& embeddings,
                         const std::vector<int>& labels);

// --- few-shot episodes ---

struct Episode {
    Matrix support;  // (way*shot) x d
    std::vector<int> support_labels;  // relabeled 0..way-1
    Matrix query;  // (way*n_query) x d
    std::vector<int> query_labels;
    int way = 5;
    int shot = 5;
    int n_query = 15;
};

// way classes without replacement, then shot+n_query disjoint samples per
// class. Throws InsufficientSamples(class).
Episode sample_episode(const Matrix& features, const std::vector<int>& labels, int way, int shot,
                       int n_query, Rng& rng);

// Nearest class mean of l2-normalized support features, squared Euclidean
// distance, ties to the lowest class index.
double prototypical_accuracy(const Episode& episode);

// Comparison mode: every support point votes with weight 1/(eps + dist^2).
double weighted_knn_accuracy(const Episode& episode);

enum class FewshotClassifier { prototypical, weighted_knn };

struct FewshotResult {
    double mean = 0.0;
    double ci = 0.0;  // 1.96 * sample std / sqrt(episodes)
    std::vector<double> episode_accuracies;
};

FewshotResult fewshot_eval(const Matrix& features, const std::vector<int>& labels,
                           std::uint64_t seed, int episodes = 600, int way = 5, int shot = 5,
                           int n_query = 15,
                           FewshotClassifier classifier = FewshotClassifier::prototypical);

// --- linear probe ---

struct LogRegModel {
    Matrix weights;  // d x C
    Vector bias;     // C
    bool line_search_warning = false;
    int iterations = 0;
    std::vector<double> objective_trace;  // objective after each accepted step
};

// Mean multinomial cross-entropy plus lambda/2 * ||W||^2 (bias free), with
// gradients; exposed so the probe objective is directly checkable.
double logreg_value_and_grad(const Matrix& x, const std::vector<int>& y, int n_classes,
                             double lambda, const Matrix& weights, const Vector& bias,
                             Matrix* grad_weights = nullptr, Vector* grad_bias = nullptr);

// L-BFGS with history 10 and a strong-Wolfe line search; stops when the
// gradient infinity norm drops below 1e-7 or after max_iter iterations. A
// failed line search sets line_search_warning and returns the best iterate.
LogRegModel lbfgs_logreg(const Matrix& x, const std::vector<int>& y, int n_classes, double lambda,
                         int max_iter = 500);

std::vector<int> logreg_predict(const LogRegModel& model, const Matrix& x);
double classification_accuracy(const std::vector<int>& predictions, const std::vector<int>& labels);

// The 45-step grid 10^(-6 + 11k/44), k = 0..44.
std::vector<double> probe_lambda_grid();

struct ProbeResult {
    double best_lambda = 0.0;
    double val_acc = 0.0;
    double test_acc = 0.0;
    std::vector<std::pair<double, double>> sweep_table;  // (lambda, val accuracy)
};

struct LabeledFeatures {
    Matrix x;
    std::vector<int> y;
};

// Sweep on val, ties to the smaller lambda, refit on train+val, report test.
ProbeResult linear_probe_sweep(const LabeledFeatures& train, const LabeledFeatures& val,
                               const LabeledFeatures& test, int n_classes,
                               const std::vector<double>& grid = probe_lambda_grid());

// --- report files ---

struct EvalReport {
    std::string protocol;  // zeroshot | fewshot | linear_probe
    std::string dataset;
    std::string config_hash;
    std::map<std::string, double> metrics;
    double ci = 0.0;
};

void write_eval_report(const std::string& path, const EvalReport& report);
EvalReport read_eval_report(const std::string& path);

}  // namespace laclip
