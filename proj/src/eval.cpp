#include "laclip/eval.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <fstream>

#include <nlohmann/json.hpp>

namespace laclip {

using nlohmann::json;

const std::array<std::string_view, 7> kDefaultZeroshotTemplates = {
    "itap of a {class}.",
    "a bad photo of the {class}.",
    "a origami {class}.",
    "a photo of the large {class}.",
    "a {class} in a video game.",
    "art of the {class}.",
    "a photo of the small {class}.",
};

ZeroShotClassifier build_zeroshot_classifier(const std::vector<std::string>& class_names,
                                             const std::vector<std::string>& templates,
                                             const TextEncoderFn& text_encoder) {
    if (class_names.size() < 2) throw ConfigError("zero-shot needs at least 2 classes");
    if (templates.empty()) throw ConfigError("zero-shot needs at least one template");
    for (const auto& t : templates) {
        if (t.find("{class}") == std::string::npos) {
            throw ConfigError("template '" + t + "' lacks a {class} slot");
        }
    }
    ZeroShotClassifier classifier;
    classifier.class_names = class_names;
    classifier.templates = templates;
    for (std::size_t c = 0; c < class_names.size(); ++c) {
        Vector sum;
        for (const auto& t : templates) {
            Vector e = text_encoder(instantiate_template(t, class_names[c]));
            if (sum.size() == 0) sum = Vector::Zero(e.size());
            sum += e;
        }
        sum /= static_cast<double>(templates.size());
        double norm = sum.norm();
        if (norm < 1e-12) throw ZeroNorm(static_cast<Eigen::Index>(c));
        sum /= norm;
        if (classifier.class_matrix.size() == 0) {
            classifier.class_matrix.resize(static_cast<Eigen::Index>(class_names.size()),
                                           sum.size());
        }
        classifier.class_matrix.row(static_cast<Eigen::Index>(c)) = sum.transpose();
    }
    return classifier;
}

namespace {

// argmax with ties broken toward the lowest index.
Eigen::Index argmax_lowest(const Eigen::Ref<const Vector>& v) {
    Eigen::Index best = 0;
    for (Eigen::Index i = 1; i < v.size(); ++i) {
        if (v(i) > v(best)) best = i;
    }
    return best;
}

Eigen::Index argmin_lowest(const Eigen::Ref<const Vector>& v) {
    Eigen::Index best = 0;
    for (Eigen::Index i = 1; i < v.size(); ++i) {
        if (v(i) < v(best)) best = i;
    }
    return best;
}

}  // namespace

double zeroshot_accuracy(const ZeroShotClassifier& classifier, const Matrix& embeddings,
                         const std::vector<int>& labels) {
    if (embeddings.rows() != static_cast<Eigen::Index>(labels.size())) {
        throw ShapeMismatch("embeddings vs labels length");
    }
    if (embeddings.cols() != classifier.class_matrix.cols()) {
        throw ShapeMismatch("embedding width vs class matrix width");
    }
    const auto n_classes = classifier.class_matrix.rows();
    for (int label : labels) {
        if (label < 0 || label >= n_classes) throw ShapeMismatch("label out of range");
    }
    Matrix scores = embeddings * classifier.class_matrix.transpose();  // N x C
    std::size_t correct = 0;
    for (Eigen::Index i = 0; i < scores.rows(); ++i) {
        if (argmax_lowest(scores.row(i).transpose()) == labels[static_cast<std::size_t>(i)]) {
            ++correct;
        }
    }
    return static_cast<double>(correct) / static_cast<double>(labels.size());
}

Episode sample_episode(const Matrix& features, const std::vector<int>& labels, int way, int shot,
                       int n_query, Rng& rng) {
    if (features.rows() != static_cast<Eigen::Index>(labels.size())) {
        throw ShapeMismatch("features vs labels length");
    }
    if (way < 2 || shot < 1 || n_query < 1) throw ConfigError("bad episode shape");

    std::map<int, std::vector<Eigen::Index>> by_class;
    for (std::size_t i = 0; i < labels.size(); ++i) {
        by_class[labels[i]].push_back(static_cast<Eigen::Index>(i));
    }
    if (static_cast<int>(by_class.size()) < way) {
        throw ConfigError("dataset has fewer than 'way' classes");
    }
    std::vector<int> class_ids;
    class_ids.reserve(by_class.size());
    for (const auto& [cls, _] : by_class) class_ids.push_back(cls);

    // way classes without replacement.
    for (int k = 0; k < way; ++k) {
        std::size_t j = static_cast<std::size_t>(k) + uniform_index(rng, class_ids.size() - k);
        std::swap(class_ids[static_cast<std::size_t>(k)], class_ids[j]);
    }

    const int per_class = shot + n_query;
    Episode ep;
    ep.way = way;
    ep.shot = shot;
    ep.n_query = n_query;
    ep.support.resize(static_cast<Eigen::Index>(way) * shot, features.cols());
    ep.query.resize(static_cast<Eigen::Index>(way) * n_query, features.cols());
    for (int k = 0; k < way; ++k) {
        int cls = class_ids[static_cast<std::size_t>(k)];
        auto& pool = by_class[cls];
        if (static_cast<int>(pool.size()) < per_class) throw InsufficientSamples(cls);
        for (int j = 0; j < per_class; ++j) {
            std::size_t pick = static_cast<std::size_t>(j) + uniform_index(rng, pool.size() - j);
            std::swap(pool[static_cast<std::size_t>(j)], pool[pick]);
        }
        for (int j = 0; j < shot; ++j) {
            ep.support.row(k * shot + j) = features.row(pool[static_cast<std::size_t>(j)]);
            ep.support_labels.push_back(k);
        }
        for (int j = 0; j < n_query; ++j) {
            ep.query.row(k * n_query + j) =
                features.row(pool[static_cast<std::size_t>(shot + j)]);
            ep.query_labels.push_back(k);
        }
    }
    return ep;
}

namespace {

Matrix l2_normalized_or_zero(const Matrix& m) {
    Matrix out = m;
    for (Eigen::Index i = 0; i < out.rows(); ++i) {
        double norm = out.row(i).norm();
        if (norm > 0) out.row(i) /= norm;
    }
    return out;
}

}  // namespace

double prototypical_accuracy(const Episode& episode) {
    Matrix support = l2_normalized_or_zero(episode.support);
    Matrix query = l2_normalized_or_zero(episode.query);

    Matrix prototypes = Matrix::Zero(episode.way, support.cols());
    std::vector<int> counts(static_cast<std::size_t>(episode.way), 0);
    for (Eigen::Index i = 0; i < support.rows(); ++i) {
        int cls = episode.support_labels[static_cast<std::size_t>(i)];
        prototypes.row(cls) += support.row(i);
        ++counts[static_cast<std::size_t>(cls)];
    }
    for (int c = 0; c < episode.way; ++c) {
        prototypes.row(c) /= static_cast<double>(counts[static_cast<std::size_t>(c)]);
    }

    std::size_t correct = 0;
    Vector dists(episode.way);
    for (Eigen::Index i = 0; i < query.rows(); ++i) {
        for (int c = 0; c < episode.way; ++c) {
            dists(c) = (query.row(i) - prototypes.row(c)).squaredNorm();
        }
        if (argmin_lowest(dists) == episode.query_labels[static_cast<std::size_t>(i)]) ++correct;
    }
    return static_cast<double>(correct) / static_cast<double>(query.rows());
}

double weighted_knn_accuracy(const Episode& episode) {
    Matrix support = l2_normalized_or_zero(episode.support);
    Matrix query = l2_normalized_or_zero(episode.query);
    std::size_t correct = 0;
    Vector votes(episode.way);
    for (Eigen::Index i = 0; i < query.rows(); ++i) {
        votes.setZero();
        for (Eigen::Index j = 0; j < support.rows(); ++j) {
            double d2 = (query.row(i) - support.row(j)).squaredNorm();
            votes(episode.support_labels[static_cast<std::size_t>(j)]) += 1.0 / (1e-8 + d2);
        }
        if (argmax_lowest(votes) == episode.query_labels[static_cast<std::size_t>(i)]) ++correct;
    }
    return static_cast<double>(correct) / static_cast<double>(query.rows());
}

FewshotResult fewshot_eval(const Matrix& features, const std::vector<int>& labels,
                           std::uint64_t seed, int episodes, int way, int shot, int n_query,
                           FewshotClassifier classifier) {
    if (episodes < 1) throw ConfigError("episodes must be >= 1");
    FewshotResult result;
    result.episode_accuracies.reserve(static_cast<std::size_t>(episodes));
    for (int e = 0; e < episodes; ++e) {
        Rng rng(derive_seed(seed, "episode" + std::to_string(e)));
        Episode ep = sample_episode(features, labels, way, shot, n_query, rng);
        double acc = classifier == FewshotClassifier::prototypical ? prototypical_accuracy(ep)
                                                                   : weighted_knn_accuracy(ep);
        result.episode_accuracies.push_back(acc);
    }
    double sum = 0.0;
    for (double a : result.episode_accuracies) sum += a;
    result.mean = sum / static_cast<double>(episodes);
    if (episodes > 1) {
        double ss = 0.0;
        for (double a : result.episode_accuracies) ss += (a - result.mean) * (a - result.mean);
        double sample_std = std::sqrt(ss / static_cast<double>(episodes - 1));
        result.ci = 1.96 * sample_std / std::sqrt(static_cast<double>(episodes));
    }
    return result;
}

double logreg_value_and_grad(const Matrix& x, const std::vector<int>& y, int n_classes,
                             double lambda, const Matrix& weights, const Vector& bias,
                             Matrix* grad_weights, Vector* grad_bias) {
    const Eigen::Index n = x.rows();
    if (n != static_cast<Eigen::Index>(y.size())) throw ShapeMismatch("x vs y length");
    if (weights.rows() != x.cols() || weights.cols() != n_classes ||
        bias.size() != n_classes) {
        throw ShapeMismatch("logreg parameter shape");
    }

    Matrix logits = x * weights;
    logits.rowwise() += bias.transpose();

    double loss = 0.0;
    Matrix probs(n, n_classes);
    for (Eigen::Index i = 0; i < n; ++i) {
        double m = logits.row(i).maxCoeff();
        Eigen::RowVectorXd e = (logits.row(i).array() - m).exp();
        double z = e.sum();
        probs.row(i) = e / z;
        loss += (m + std::log(z)) - logits(i, y[static_cast<std::size_t>(i)]);
    }
    loss /= static_cast<double>(n);
    loss += 0.5 * lambda * weights.squaredNorm();

    if (grad_weights || grad_bias) {
        for (Eigen::Index i = 0; i < n; ++i) probs(i, y[static_cast<std::size_t>(i)]) -= 1.0;
        probs /= static_cast<double>(n);
        if (grad_weights) *grad_weights = x.transpose() * probs + lambda * weights;
        if (grad_bias) *grad_bias = probs.colwise().sum().transpose();
    }
    return loss;
}

namespace {

struct Objective {
    const Matrix& x;
    const std::vector<int>& y;
    int n_classes;
    double lambda;
    Eigen::Index d;

    double eval(const Vector& theta, Vector* grad) const {
        Matrix w = Eigen::Map<const Matrix>(theta.data(), d, n_classes);
        Vector b = theta.tail(n_classes);
        Matrix gw;
        Vector gb;
        double f = logreg_value_and_grad(x, y, n_classes, lambda, w, b,
                                         grad ? &gw : nullptr, grad ? &gb : nullptr);
        if (grad) {
            grad->resize(theta.size());
            Eigen::Map<Matrix>(grad->data(), d, n_classes) = gw;
            grad->tail(n_classes) = gb;
        }
        return f;
    }
};

// Strong-Wolfe line search (bracket + zoom), c1 = 1e-4, c2 = 0.9.
bool wolfe_line_search(const Objective& obj, const Vector& theta, const Vector& direction,
                       double f0, const Vector& g0, double& step, Vector& theta_new,
                       double& f_new, Vector& g_new) {
    constexpr double c1 = 1e-4;
    constexpr double c2 = 0.9;
    const double d0 = g0.dot(direction);
    if (d0 >= 0) return false;  // not a descent direction

    auto phi = [&](double a, Vector* grad) {
        theta_new = theta + a * direction;
        return obj.eval(theta_new, grad);
    };

    double a_prev = 0.0;
    double f_prev = f0;
    double a = step;
    double a_max = 1e4;

    auto zoom = [&](double lo, double f_lo, double hi) -> bool {
        for (int it = 0; it < 40; ++it) {
            double mid = 0.5 * (lo + hi);
            double fm = phi(mid, &g_new);
            double dm = g_new.dot(direction);
            if (fm > f0 + c1 * mid * d0 || fm >= f_lo) {
                hi = mid;
            } else {
                if (std::abs(dm) <= -c2 * d0) {
                    step = mid;
                    f_new = fm;
                    return true;
                }
                if (dm * (hi - lo) >= 0) hi = lo;
                lo = mid;
                f_lo = fm;
            }
            if (std::abs(hi - lo) < 1e-16 * std::max(1.0, std::abs(lo))) break;
        }
        // Accept the last sufficient-decrease point if we have one.
        double fl = phi(lo, &g_new);
        if (fl <= f0 + c1 * lo * d0 && lo > 0) {
            step = lo;
            f_new = fl;
            return true;
        }
        return false;
    };

    for (int it = 0; it < 40; ++it) {
        double fa = phi(a, &g_new);
        double da = g_new.dot(direction);
        if (fa > f0 + c1 * a * d0 || (it > 0 && fa >= f_prev)) {
            return zoom(a_prev, f_prev, a);
        }
        if (std::abs(da) <= -c2 * d0) {
            step = a;
            f_new = fa;
            return true;
        }
        if (da >= 0) return zoom(a, fa, a_prev);
        a_prev = a;
        f_prev = fa;
        a = std::min(2.0 * a, a_max);
        if (a >= a_max) return false;
    }
    return false;
}

}  // namespace

LogRegModel lbfgs_logreg(const Matrix& x, const std::vector<int>& y, int n_classes, double lambda,
                         int max_iter) {
    if (n_classes < 2) throw ConfigError("logreg needs at least 2 classes");
    if (lambda < 0) throw ConfigError("lambda must be >= 0");
    if (x.rows() < n_classes) throw ConfigError("need at least as many samples as classes");
    if (!x.allFinite()) throw ConfigError("features must be finite");
    for (int label : y) {
        if (label < 0 || label >= n_classes) throw ConfigError("label out of range");
    }

    const Eigen::Index d = x.cols();
    Objective obj{x, y, n_classes, lambda, d};

    Vector theta = Vector::Zero(d * n_classes + n_classes);
    Vector grad;
    double f = obj.eval(theta, &grad);

    constexpr double kGradTol = 1e-7;
    constexpr std::size_t kHistory = 10;
    std::deque<Vector> s_hist;
    std::deque<Vector> y_hist;
    std::deque<double> rho_hist;

    LogRegModel model;
    model.objective_trace.push_back(f);

    int iter = 0;
    for (; iter < max_iter; ++iter) {
        if (grad.lpNorm<Eigen::Infinity>() < kGradTol) break;

        // Two-loop recursion.
        Vector q = grad;
        std::vector<double> alpha(s_hist.size());
        for (std::size_t i = s_hist.size(); i-- > 0;) {
            alpha[i] = rho_hist[i] * s_hist[i].dot(q);
            q -= alpha[i] * y_hist[i];
        }
        if (!s_hist.empty()) {
            const Vector& s_last = s_hist.back();
            const Vector& y_last = y_hist.back();
            q *= s_last.dot(y_last) / y_last.dot(y_last);
        }
        for (std::size_t i = 0; i < s_hist.size(); ++i) {
            double beta = rho_hist[i] * y_hist[i].dot(q);
            q += (alpha[i] - beta) * s_hist[i];
        }
        Vector direction = -q;

        double step = iter == 0 ? std::min(1.0, 1.0 / grad.lpNorm<1>()) : 1.0;
        Vector theta_new;
        Vector grad_new;
        double f_new = f;
        if (!wolfe_line_search(obj, theta, direction, f, grad, step, theta_new, f_new,
                               grad_new)) {
            model.line_search_warning = true;
            break;
        }

        Vector s = theta_new - theta;
        Vector y_vec = grad_new - grad;
        double sy = s.dot(y_vec);
        if (sy > 1e-12) {
            s_hist.push_back(std::move(s));
            y_hist.push_back(std::move(y_vec));
            rho_hist.push_back(1.0 / sy);
            if (s_hist.size() > kHistory) {
                s_hist.pop_front();
                y_hist.pop_front();
                rho_hist.pop_front();
            }
        }
        theta = std::move(theta_new);
        grad = std::move(grad_new);
        f = f_new;
        model.objective_trace.push_back(f);
    }

    model.iterations = iter;
    model.weights = Eigen::Map<const Matrix>(theta.data(), d, n_classes);
    model.bias = theta.tail(n_classes);
    return model;
}

std::vector<int> logreg_predict(const LogRegModel& model, const Matrix& x) {
    Matrix logits = x * model.weights;
    logits.rowwise() += model.bias.transpose();
    std::vector<int> out;
    out.reserve(static_cast<std::size_t>(x.rows()));
    for (Eigen::Index i = 0; i < logits.rows(); ++i) {
        out.push_back(static_cast<int>(argmax_lowest(logits.row(i).transpose())));
    }
    return out;
}

double classification_accuracy(const std::vector<int>& predictions,
                               const std::vector<int>& labels) {
    if (predictions.size() != labels.size()) throw ShapeMismatch("predictions vs labels");
    if (predictions.empty()) throw EmptyInput("no predictions");
    std::size_t correct = 0;
    for (std::size_t i = 0; i < labels.size(); ++i) {
        if (predictions[i] == labels[i]) ++correct;
    }
    return static_cast<double>(correct) / static_cast<double>(labels.size());
}

std::vector<double> probe_lambda_grid() {
    std::vector<double> grid(45);
    for (int k = 0; k < 45; ++k) {
        grid[static_cast<std::size_t>(k)] = std::pow(10.0, -6.0 + 11.0 * k / 44.0);
    }
    grid.front() = 1e-6;
    grid.back() = 1e5;
    return grid;
}

ProbeResult linear_probe_sweep(const LabeledFeatures& train, const LabeledFeatures& val,
                               const LabeledFeatures& test, int n_classes,
                               const std::vector<double>& grid) {
    if (grid.empty()) throw ConfigError("empty lambda grid");
    ProbeResult result;
    result.best_lambda = grid.front();
    result.val_acc = -1.0;
    for (double lambda : grid) {
        LogRegModel model = lbfgs_logreg(train.x, train.y, n_classes, lambda);
        double acc = classification_accuracy(logreg_predict(model, val.x), val.y);
        result.sweep_table.emplace_back(lambda, acc);
        // Strictly-greater keeps the earlier (smaller) lambda on ties.
        if (acc > result.val_acc) {
            result.val_acc = acc;
            result.best_lambda = lambda;
        }
    }

    Matrix combined_x(train.x.rows() + val.x.rows(), train.x.cols());
    combined_x << train.x, val.x;
    std::vector<int> combined_y = train.y;
    combined_y.insert(combined_y.end(), val.y.begin(), val.y.end());
    LogRegModel final_model = lbfgs_logreg(combined_x, combined_y, n_classes, result.best_lambda);
    result.test_acc = classification_accuracy(logreg_predict(final_model, test.x), test.y);
    return result;
}

void write_eval_report(const std::string& path, const EvalReport& report) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot create " + path);
    json j;
    j["ci"] = report.ci;
    j["config_hash"] = report.config_hash;
    j["dataset"] = report.dataset;
    json metrics;
    for (const auto& [k, v] : report.metrics) metrics[k] = v;
    j["metrics"] = metrics;
    j["protocol"] = report.protocol;
    out << j.dump(2) << "\n";
    if (!out) throw IoError("failed writing " + path);
}

EvalReport read_eval_report(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open " + path);
    json j = json::parse(in, nullptr, false);
    if (j.is_discarded() || !j.is_object()) throw ParseError("bad report json", 1);
    EvalReport report;
    report.protocol = j.value("protocol", "");
    report.dataset = j.value("dataset", "");
    report.config_hash = j.value("config_hash", "");
    report.ci = j.value("ci", 0.0);
    if (j.contains("metrics")) {
        for (auto it = j["metrics"].begin(); it != j["metrics"].end(); ++it) {
            report.metrics[it.key()] = it.value().get<double>();
        }
    }
    return report;
}

}  // namespace laclip
