// laclip: caption rewriting, baseline text augmentation, contrastive
// training and the three transfer evaluations, over the formats defined by
// the laclip library.

#include "laclip/dataset.hpp"
#include "laclip/eval.hpp"
#include "laclip/rewrite.hpp"
#include "laclip/train.hpp"

#include <CLI11.hpp>

#include <nlohmann/json.hpp>

#include <cinttypes>
#include <filesystem>
#include <fstream>
#include <iostream>

namespace fs = std::filesystem;
using nlohmann::json;
using namespace laclip;

namespace {

constexpr const char* kVersion = "laclip-kit 1.0.0";

// ---- config file + manifest plumbing ----

// Flat JSON config: {"flag-name": value, ...}. Values act as defaults; flags
// given on the command line win.
json g_config;

std::string pre_scan_config(int argc, char** argv) {
    for (int i = 1; i + 1 < argc; ++i) {
        if (std::string(argv[i]) == "--config") return argv[i + 1];
    }
    return {};
}

void load_config_file(const std::string& path) {
    if (path.empty()) return;
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config file " + path);
    g_config = json::parse(in, nullptr, false);
    if (g_config.is_discarded() || !g_config.is_object()) {
        throw ConfigError("config file must hold a JSON object");
    }
}

template <typename T>
T cfg(const std::string& key, T built_in) {
    if (!g_config.contains(key)) return built_in;
    try {
        return g_config[key].get<T>();
    } catch (const json::exception&) {
        throw ConfigError("config key '" + key + "' has the wrong type");
    }
}

// Tracked options so every run manifest records the merged configuration.
json g_manifest_config;

template <typename T>
CLI::Option* add_opt(CLI::App* app, const std::string& flag, T& var, const std::string& help) {
    std::string key = flag.substr(2);  // strip leading --
    var = cfg<T>(key, var);
    g_manifest_config[key] = var;
    CLI::Option* opt = app->add_option(flag, var, help);
    // capture the final value after parsing
    opt->each([key, &var](const std::string&) { g_manifest_config[key] = var; });
    return opt;
}

CLI::Option* add_flag(CLI::App* app, const std::string& flag, bool& var,
                      const std::string& help) {
    std::string key = flag.substr(2);
    var = cfg<bool>(key, var);
    g_manifest_config[key] = var;
    CLI::Option* opt = app->add_flag(flag, var, help);
    opt->each([key, &var](const std::string&) { g_manifest_config[key] = var; });
    return opt;
}

void write_manifest(const std::string& command, const std::string& primary_output,
                    std::uint64_t seed) {
    json manifest;
    json config = g_manifest_config;
    config.erase("seed");
    manifest["command"] = command;
    manifest["config"] = config;
    manifest["config_hash"] = [] {
        char buf[17];
        std::snprintf(buf, sizeof(buf), "%016" PRIx64, stable_hash64(g_manifest_config.dump()));
        return std::string(buf);
    }();
    manifest["seed"] = seed;
    manifest["version"] = kVersion;
    std::ofstream out(primary_output + ".manifest.json", std::ios::binary);
    if (!out) throw IoError("cannot write manifest for " + primary_output);
    out << manifest.dump(2) << "\n";
}

void require_input(const std::string& path, const std::string& what) {
    if (!fs::exists(path)) throw ConfigError(what + " not found: " + path);
}

std::vector<std::string> split_csv(const std::string& s) {
    std::vector<std::string> out;
    std::size_t start = 0;
    while (start <= s.size()) {
        auto comma = s.find(',', start);
        std::string part =
            trim(s.substr(start, comma == std::string::npos ? std::string::npos : comma - start));
        if (!part.empty()) out.push_back(part);
        if (comma == std::string::npos) break;
        start = comma + 1;
    }
    return out;
}

std::vector<std::string> image_refs_of(const std::vector<AugmentedRecord>& records) {
    std::vector<std::string> ids;
    ids.reserve(records.size());
    for (const auto& r : records) ids.push_back(r.image_ref);
    return ids;
}

std::vector<std::string> load_template_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open template file " + path);
    std::vector<std::string> templates;
    std::string line;
    while (std::getline(in, line)) {
        std::string t = trim(line);
        if (!t.empty() && t[0] != '#') templates.push_back(t);
    }
    if (templates.empty()) throw ConfigError("template file " + path + " is empty");
    return templates;
}

// ---- embedding extraction shared by the eval subcommands ----

struct LoadedModel {
    EncoderParams params;
    std::string config_hash;
    TokenizerConfig tokenizer;
};

LoadedModel load_model(const std::string& checkpoint) {
    require_input(checkpoint, "checkpoint");
    LoadedModel model;
    int context_len = 77;
    model.params = load_checkpoint(checkpoint, &model.config_hash, &context_len);
    model.tokenizer.vocab_size = static_cast<int>(model.params.token_embedding.rows());
    model.tokenizer.context_len = context_len;
    return model;
}

Matrix image_embeddings(const LoadedModel& model, const FeatureStore& store) {
    return encode_image(model.params, store.rows).embeddings.rows;
}

TextEncoderFn text_encoder_of(const LoadedModel& model) {
    return [&model](const std::string& text) -> Vector {
        TextForward fwd =
            encode_text(model.params, {tokenize(text, model.tokenizer)});
        return fwd.embeddings.rows.row(0).transpose();
    };
}

struct EvalInputs {
    LoadedModel model;
    FeatureStore features;
    std::vector<int> labels;
};

EvalInputs load_eval_inputs(const std::string& checkpoint, const std::string& features_path,
                            const std::string& labels_path) {
    require_input(features_path, "feature file");
    require_input(labels_path, "labels file");
    EvalInputs inputs;
    inputs.model = load_model(checkpoint);
    auto [ids, labels] = read_labels_file(labels_path);
    inputs.features = read_feature_store(features_path, ids);
    inputs.labels = std::move(labels);
    return inputs;
}

// ---- subcommands ----

int cmd_rewrite(const std::string& in, const std::string& out, const std::string& strategies,
                double temperature, const std::string& cache_path, const std::string& backend_sel,
                int concurrency, int retries, int max_tokens, std::uint64_t seed) {
    require_input(in, "input caption file");
    RewriteOptions options;
    for (const auto& name : split_csv(strategies)) {
        options.strategies.push_back(parse_strategy(name));
    }
    options.temperature = temperature;
    options.concurrency = concurrency;
    options.max_retries = retries;
    options.max_tokens = max_tokens;
    options.seed = seed;

    std::unique_ptr<CompletionBackend> backend;
    if (backend_sel == "http" ||
        (backend_sel == "auto" && std::getenv("COMPLETION_ENDPOINT"))) {
        backend = std::make_unique<HttpCompletionBackend>();
    } else {
        backend = FixtureCompletionBackend::echo();
    }

    auto records = read_caption_file(in);
    std::unique_ptr<RewriteCache> cache;
    if (!cache_path.empty()) cache = std::make_unique<RewriteCache>(cache_path);
    auto [augmented, report] = rewrite_dataset(records, options, *backend, cache.get());
    write_augmented_file(out, augmented);
    write_manifest("rewrite", out, seed);
    std::cout << "rewrote " << augmented.size() << " records with backend " << backend->id()
              << ": cached=" << report.cached << " fetched=" << report.fetched
              << " fallback=" << report.fallback << "\n";
    for (const auto& id : report.fallback_ids) {
        std::cerr << "fallback to original caption for record " << id << "\n";
    }
    return 0;
}

int cmd_augment_eda(const std::string& in, const std::string& out, const std::string& op_name,
                    int num, double alpha_sr, double alpha_ri, double alpha_rs, double p_rd,
                    const std::string& synonyms, std::uint64_t seed) {
    require_input(in, "input caption file");
    require_input(synonyms, "synonym table");
    EdaOp op = parse_eda_op(op_name);
    EdaParams params;
    params.alpha_sr = alpha_sr;
    params.alpha_ri = alpha_ri;
    params.alpha_rs = alpha_rs;
    params.p_rd = p_rd;
    params.synonym_table = load_synonym_table(synonyms);
    params.validate();
    if (num < 1) throw ConfigError("--num must be >= 1");

    auto records = read_caption_file(in);
    for (auto& rec : records) {
        for (int k = 0; k < num; ++k) {
            Rng rng(derive_seed(seed, rec.id + "|eda" + std::to_string(k)));
            rec.captions.push_back(eda_augment(rec.captions[0], op, params, rng));
            rec.rewrite_meta.push_back({"eda:" + std::string(eda_op_name(op)), "eda"});
        }
    }
    write_augmented_file(out, records);
    write_manifest("augment-eda", out, seed);
    std::cout << "eda-augmented " << records.size() << " records with " << num
              << " rewrites each\n";
    return 0;
}

int cmd_backtranslate(const std::string& in, const std::string& out,
                      const std::string& languages, const std::string& backend_sel,
                      std::uint64_t seed) {
    require_input(in, "input caption file");
    std::unique_ptr<TranslationBackend> backend;
    if (backend_sel == "http" || (backend_sel == "auto" && std::getenv("TRANSLATE_ENDPOINT"))) {
        backend = std::make_unique<HttpTranslationBackend>();
    } else {
        backend = std::make_unique<FixtureTranslationBackend>(
            [](const TranslationRequest& r) { return r.text; }, "fixture-identity");
    }

    auto langs = split_csv(languages);
    if (langs.empty()) throw ConfigError("--languages must name at least one pivot");
    auto records = read_caption_file(in);
    for (auto& rec : records) {
        for (const auto& lang : langs) {
            rec.captions.push_back(back_translate(rec.captions[0], lang, *backend));
            rec.rewrite_meta.push_back({"backtranslate:" + lang, backend->id()});
        }
    }
    write_augmented_file(out, records);
    write_manifest("backtranslate", out, seed);
    std::cout << "back-translated " << records.size() << " records through " << langs.size()
              << " pivot languages\n";
    return 0;
}

int cmd_synth(const std::string& out_dir, int classes, int per_class, int dim,
              int test_per_class, int rewrites, double noise_sigma, std::uint64_t seed,
              const std::string& caption_templates_path,
              const std::string& paraphrase_templates_path) {
    SyntheticSpec spec = default_synthetic_spec();
    spec.n_classes = classes;
    spec.samples_per_class = per_class;
    spec.feature_dim = dim;
    spec.test_samples_per_class = test_per_class;
    spec.rewrites_per_caption = rewrites;
    spec.noise_sigma = noise_sigma;
    if (!caption_templates_path.empty()) {
        spec.caption_templates = load_template_file(caption_templates_path);
    }
    if (!paraphrase_templates_path.empty()) {
        spec.paraphrase_templates = load_template_file(paraphrase_templates_path);
    }
    spec.validate();

    SyntheticData data = gen_synthetic(spec, seed);
    fs::create_directories(out_dir);
    write_augmented_file(out_dir + "/train.jsonl", data.train);
    write_caption_file(out_dir + "/test.jsonl", data.test);
    write_caption_file(out_dir + "/test_shifted.jsonl", data.test_shifted);
    write_feature_store(out_dir + "/train_features.fbin", data.train_features);
    write_feature_store(out_dir + "/test_features.fbin", data.test_features);
    write_labels_file(out_dir + "/labels_train.jsonl", image_refs_of(data.train),
                      data.train_labels);
    write_labels_file(out_dir + "/labels_test.jsonl", image_refs_of(data.test),
                      data.test_labels);
    write_class_names(out_dir + "/classes.json", data.class_names);
    write_manifest("synth", out_dir + "/train.jsonl", seed);
    std::cout << "synthesized " << data.train.size() << " train and " << data.test.size()
              << " test records over " << classes << " classes\n";
    return 0;
}

int cmd_train(const std::string& in, const std::string& features_path,
              const std::string& out_dir, const std::string& mode_name, int epochs,
              int warmup_epochs, int batch_size, double lr, double weight_decay, double beta1,
              double beta2, double eps, int vocab_size, int context_len, int embed_dim,
              int out_dim, double tau_init, double aug_sigma, double aug_dropout,
              bool mt_paper_scaling, std::uint64_t seed) {
    require_input(in, "training dataset");
    require_input(features_path, "feature file");

    auto records = read_augmented_file(in);
    if (records.empty()) throw ConfigError("training dataset is empty");
    FeatureStore features = read_feature_store(features_path, image_refs_of(records));

    TrainConfig config;
    config.mode = parse_train_mode(mode_name);
    config.encoder.tokenizer.vocab_size = vocab_size;
    config.encoder.tokenizer.context_len = context_len;
    config.encoder.embed_dim = embed_dim;
    config.encoder.feature_dim = features.dim;
    config.encoder.out_dim = out_dim;
    config.encoder.tau_init = tau_init;
    config.hyper.lr = lr;
    config.hyper.weight_decay = weight_decay;
    config.hyper.beta1 = beta1;
    config.hyper.beta2 = beta2;
    config.hyper.eps = eps;
    config.epochs = epochs;
    config.warmup_epochs = warmup_epochs;
    config.batch_size = batch_size;
    config.aug_sigma = aug_sigma;
    config.aug_dropout = aug_dropout;
    config.mt_paper_scaling = mt_paper_scaling;
    config.seed = seed;
    config.validate();

    TrainResult result = train(config, records, features);
    fs::create_directories(out_dir);
    save_checkpoint(out_dir + "/checkpoint.bin", result.params, result.config_hash,
                    config.encoder.tokenizer.context_len);
    write_metrics_csv(out_dir + "/metrics.csv", result.metrics);
    write_manifest("train", out_dir + "/checkpoint.bin", seed);
    std::cout << "trained mode=" << mode_name << " for " << epochs << " epochs, "
              << result.metrics.size() << " steps; final loss "
              << result.metrics.back().loss << ", tau " << result.params.temp.tau() << "\n";
    return 0;
}

int cmd_eval_zeroshot(const std::string& checkpoint, const std::string& features_path,
                      const std::string& labels_path, const std::string& classes_path,
                      const std::string& templates_path, const std::string& report_path,
                      const std::string& dataset_name) {
    require_input(classes_path, "class name file");
    EvalInputs inputs = load_eval_inputs(checkpoint, features_path, labels_path);
    std::vector<std::string> class_names = read_class_names(classes_path);
    std::vector<std::string> templates;
    if (templates_path.empty()) {
        templates.assign(kDefaultZeroshotTemplates.begin(), kDefaultZeroshotTemplates.end());
    } else {
        templates = load_template_file(templates_path);
    }

    ZeroShotClassifier classifier =
        build_zeroshot_classifier(class_names, templates, text_encoder_of(inputs.model));
    double accuracy =
        zeroshot_accuracy(classifier, image_embeddings(inputs.model, inputs.features),
                          inputs.labels);

    EvalReport report;
    report.protocol = "zeroshot";
    report.dataset = dataset_name;
    report.config_hash = inputs.model.config_hash;
    report.metrics["accuracy"] = accuracy;
    report.metrics["classes"] = static_cast<double>(class_names.size());
    report.metrics["templates"] = static_cast<double>(templates.size());
    write_eval_report(report_path, report);
    write_manifest("eval-zeroshot", report_path, 0);
    std::cout << "zeroshot accuracy " << accuracy << " over " << class_names.size()
              << " classes\n";
    return 0;
}

int cmd_eval_fewshot(const std::string& checkpoint, const std::string& features_path,
                     const std::string& labels_path, int episodes, int way, int shot,
                     int n_query, const std::string& classifier_name, std::uint64_t seed,
                     const std::string& report_path, const std::string& dataset_name) {
    EvalInputs inputs = load_eval_inputs(checkpoint, features_path, labels_path);
    FewshotClassifier classifier;
    if (classifier_name == "proto") classifier = FewshotClassifier::prototypical;
    else if (classifier_name == "knn") classifier = FewshotClassifier::weighted_knn;
    else throw ConfigError("--classifier must be proto or knn");

    FewshotResult result =
        fewshot_eval(image_embeddings(inputs.model, inputs.features), inputs.labels, seed,
                     episodes, way, shot, n_query, classifier);

    EvalReport report;
    report.protocol = "fewshot";
    report.dataset = dataset_name;
    report.config_hash = inputs.model.config_hash;
    report.metrics["accuracy"] = result.mean;
    report.metrics["episodes"] = episodes;
    report.metrics["way"] = way;
    report.metrics["shot"] = shot;
    report.ci = result.ci;
    write_eval_report(report_path, report);
    write_manifest("eval-fewshot", report_path, seed);
    std::cout << "fewshot accuracy " << result.mean << " +/- " << result.ci << " over "
              << episodes << " episodes\n";
    return 0;
}

int cmd_eval_linear(const std::string& checkpoint, const std::string& features_path,
                    const std::string& labels_path, double train_frac, double val_frac,
                    std::uint64_t seed, const std::string& report_path,
                    const std::string& dataset_name) {
    if (train_frac <= 0 || val_frac <= 0 || train_frac + val_frac >= 1.0) {
        throw ConfigError("fractions must be positive with train+val < 1");
    }
    EvalInputs inputs = load_eval_inputs(checkpoint, features_path, labels_path);
    Matrix embeddings = image_embeddings(inputs.model, inputs.features);

    // Deterministic shuffled split into train/val/test.
    std::vector<std::size_t> order(inputs.labels.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    Rng rng(derive_seed(seed, "probe-split"));
    for (std::size_t i = 0; i + 1 < order.size(); ++i) {
        std::size_t j = i + uniform_index(rng, order.size() - i);
        std::swap(order[i], order[j]);
    }
    auto slice = [&](std::size_t begin, std::size_t end) {
        LabeledFeatures out;
        out.x.resize(static_cast<Eigen::Index>(end - begin), embeddings.cols());
        for (std::size_t i = begin; i < end; ++i) {
            out.x.row(static_cast<Eigen::Index>(i - begin)) =
                embeddings.row(static_cast<Eigen::Index>(order[i]));
            out.y.push_back(inputs.labels[order[i]]);
        }
        return out;
    };
    const auto n = order.size();
    const auto n_train = static_cast<std::size_t>(train_frac * static_cast<double>(n));
    const auto n_val = static_cast<std::size_t>(val_frac * static_cast<double>(n));
    if (n_train == 0 || n_val == 0 || n_train + n_val >= n) {
        throw ConfigError("dataset too small for the requested split");
    }
    int n_classes = 1 + *std::max_element(inputs.labels.begin(), inputs.labels.end());
    ProbeResult result = linear_probe_sweep(slice(0, n_train), slice(n_train, n_train + n_val),
                                            slice(n_train + n_val, n), n_classes);

    EvalReport report;
    report.protocol = "linear_probe";
    report.dataset = dataset_name;
    report.config_hash = inputs.model.config_hash;
    report.metrics["accuracy"] = result.test_acc;
    report.metrics["val_accuracy"] = result.val_acc;
    report.metrics["best_lambda"] = result.best_lambda;
    write_eval_report(report_path, report);
    write_manifest("eval-linear", report_path, seed);
    std::cout << "linear probe test accuracy " << result.test_acc << " at lambda "
              << result.best_lambda << "\n";
    return 0;
}

int cmd_report(const std::vector<std::string>& inputs, const std::string& out_path) {
    if (inputs.empty()) throw ConfigError("report needs at least one eval report file");
    struct RowKey {
        std::string dataset;
        std::string config_hash;
        bool operator<(const RowKey& other) const {
            return std::tie(dataset, config_hash) < std::tie(other.dataset, other.config_hash);
        }
    };
    std::map<RowKey, std::map<std::string, std::pair<double, double>>> rows;
    for (const auto& path : inputs) {
        require_input(path, "report file");
        EvalReport r = read_eval_report(path);
        rows[{r.dataset, r.config_hash}][r.protocol] = {r.metrics.count("accuracy")
                                                            ? r.metrics.at("accuracy")
                                                            : 0.0,
                                                        r.ci};
    }

    std::ostringstream table;
    char line[256];
    std::snprintf(line, sizeof(line), "%-20s %-18s %10s %16s %10s\n", "Dataset", "Model", "ZS",
                  "FS", "LP");
    table << line;
    table << std::string(78, '-') << "\n";
    auto cell = [](const std::map<std::string, std::pair<double, double>>& protos,
                   const std::string& key, bool with_ci) {
        auto it = protos.find(key);
        if (it == protos.end()) return std::string("-");
        char buf[64];
        if (with_ci && it->second.second > 0) {
            std::snprintf(buf, sizeof(buf), "%.2f+/-%.2f", 100.0 * it->second.first,
                          100.0 * it->second.second);
        } else {
            std::snprintf(buf, sizeof(buf), "%.2f", 100.0 * it->second.first);
        }
        return std::string(buf);
    };
    for (const auto& [key, protos] : rows) {
        std::string model = key.config_hash.empty() ? "-" : key.config_hash.substr(0, 12);
        std::snprintf(line, sizeof(line), "%-20s %-18s %10s %16s %10s\n",
                      key.dataset.empty() ? "-" : key.dataset.c_str(), model.c_str(),
                      cell(protos, "zeroshot", false).c_str(),
                      cell(protos, "fewshot", true).c_str(),
                      cell(protos, "linear_probe", false).c_str());
        table << line;
    }
    std::cout << table.str();
    if (!out_path.empty()) {
        std::ofstream out(out_path, std::ios::binary);
        if (!out) throw IoError("cannot write " + out_path);
        out << table.str();
        write_manifest("report", out_path, 0);
    }
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"language-augmented contrastive pretraining toolkit"};
    app.set_version_flag("--version", kVersion);
    std::string config_path;
    app.add_option("--config", config_path,
                   "JSON file of defaults for any flag (flags given on the "
                   "command line take precedence)");

    try {
        load_config_file(pre_scan_config(argc, argv));
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }

    app.require_subcommand(0, 1);

    // rewrite
    auto* rewrite = app.add_subcommand("rewrite", "generate LLM-style caption rewrites");
    struct {
        std::string in, out, strategies = "chatgpt,bard,mscoco,human", cache;
        std::string backend = "auto";
        double temp = 0.9;
        int concurrency = 4, retries = 3, max_tokens = 64;
        std::uint64_t seed = 0;
    } rw;
    add_opt(rewrite, "--in", rw.in, "input caption file (jsonl)")->required();
    add_opt(rewrite, "--out", rw.out, "output augmented file (jsonl)")->required();
    add_opt(rewrite, "--strategies", rw.strategies, "comma list of chatgpt,bard,mscoco,human");
    add_opt(rewrite, "--temp", rw.temp, "completion sampling temperature");
    add_opt(rewrite, "--cache", rw.cache, "append-only completion cache file");
    add_opt(rewrite, "--backend", rw.backend,
            "auto|fixture|http (auto uses http when COMPLETION_ENDPOINT is set)");
    add_opt(rewrite, "--concurrency", rw.concurrency, "max in-flight backend requests");
    add_opt(rewrite, "--retries", rw.retries, "backend retries before aborting");
    add_opt(rewrite, "--max-tokens", rw.max_tokens, "completion length cap");
    add_opt(rewrite, "--seed", rw.seed, "prompt sampling seed");

    // augment-eda
    auto* eda = app.add_subcommand("augment-eda", "word-level EDA caption augmentation");
    struct {
        std::string in, out, op = "composite";
        std::string synonyms = std::string(LACLIP_DATA_DIR) + "/synonyms.tsv";
        int num = 4;
        double alpha_sr = 0.1, alpha_ri = 0.1, alpha_rs = 0.1, p_rd = 0.1;
        std::uint64_t seed = 0;
    } ed;
    add_opt(eda, "--in", ed.in, "input caption file (jsonl)")->required();
    add_opt(eda, "--out", ed.out, "output augmented file (jsonl)")->required();
    add_opt(eda, "--op", ed.op,
            "synonym_replacement|random_insertion|random_swap|random_deletion|composite");
    add_opt(eda, "--num", ed.num, "rewrites per caption");
    add_opt(eda, "--alpha-sr", ed.alpha_sr, "synonym replacement rate");
    add_opt(eda, "--alpha-ri", ed.alpha_ri, "random insertion rate");
    add_opt(eda, "--alpha-rs", ed.alpha_rs, "random swap rate");
    add_opt(eda, "--p-rd", ed.p_rd, "per-word deletion probability");
    add_opt(eda, "--synonyms", ed.synonyms, "synonym table (word TAB syn1,syn2,...)");
    add_opt(eda, "--seed", ed.seed, "augmentation seed");

    // backtranslate
    auto* bt = app.add_subcommand("backtranslate", "round-trip translation augmentation");
    struct {
        std::string in, out, languages = "es,fr,de,it", backend = "auto";
        std::uint64_t seed = 0;
    } bts;
    add_opt(bt, "--in", bts.in, "input caption file (jsonl)")->required();
    add_opt(bt, "--out", bts.out, "output augmented file (jsonl)")->required();
    add_opt(bt, "--languages", bts.languages, "comma list of pivot languages (es,fr,de,it)");
    add_opt(bt, "--backend", bts.backend,
            "auto|fixture|http (auto uses http when TRANSLATE_ENDPOINT is set)");
    add_opt(bt, "--seed", bts.seed, "recorded in the manifest");

    // synth
    auto* synth = app.add_subcommand("synth", "generate a synthetic paired dataset");
    struct {
        std::string out_dir = "synth_out", caption_templates, paraphrase_templates;
        int classes = 32, per_class = 64, dim = 64, test_per_class = 16, rewrites = 4;
        double noise_sigma = 0.1;
        std::uint64_t seed = 7;
    } sy;
    add_opt(synth, "--out-dir", sy.out_dir, "output directory");
    add_opt(synth, "--classes", sy.classes, "number of classes");
    add_opt(synth, "--per-class", sy.per_class, "training samples per class");
    add_opt(synth, "--dim", sy.dim, "image feature dimension");
    add_opt(synth, "--test-per-class", sy.test_per_class, "held-out samples per class");
    add_opt(synth, "--rewrites", sy.rewrites, "paraphrase rewrites per training caption");
    add_opt(synth, "--noise-sigma", sy.noise_sigma, "feature noise level");
    add_opt(synth, "--caption-templates", sy.caption_templates,
            "file of training caption templates (one per line, {class} slot)");
    add_opt(synth, "--paraphrase-templates", sy.paraphrase_templates,
            "file of paraphrase templates, disjoint from the caption templates");
    add_opt(synth, "--seed", sy.seed, "generation seed");

    // train
    auto* tr = app.add_subcommand("train", "contrastive training over precomputed features");
    struct {
        std::string in, features, out_dir = "train_out", mode = "clip";
        int epochs = 20, warmup_epochs = 1, batch_size = 256;
        double lr = 1e-3, weight_decay = 0.5, beta1 = 0.9, beta2 = 0.98, eps = 1e-8;
        int vocab_size = 49408, context_len = 77, embed_dim = 64, out_dim = 32;
        double tau_init = 0.07, aug_sigma = 0.05, aug_dropout = 0.1;
        bool mt_paper_scaling = false;
        std::uint64_t seed = 0;
    } t;
    add_opt(tr, "--in", t.in, "augmented training file (jsonl)")->required();
    add_opt(tr, "--features", t.features, "feature sidecar for the training file")->required();
    add_opt(tr, "--out-dir", t.out_dir, "output directory (checkpoint.bin, metrics.csv)");
    add_opt(tr, "--mode", t.mode, "clip|laclip|laclip_mt");
    add_opt(tr, "--epochs", t.epochs, "training epochs");
    add_opt(tr, "--warmup-epochs", t.warmup_epochs, "linear warmup epochs");
    add_opt(tr, "--batch-size", t.batch_size, "batch size (final short batch kept)");
    add_opt(tr, "--lr", t.lr, "peak learning rate");
    add_opt(tr, "--weight-decay", t.weight_decay, "decoupled weight decay");
    add_opt(tr, "--beta1", t.beta1, "Adam beta1");
    add_opt(tr, "--beta2", t.beta2, "Adam beta2");
    add_opt(tr, "--eps", t.eps, "Adam epsilon");
    add_opt(tr, "--vocab-size", t.vocab_size, "hash tokenizer vocabulary size");
    add_opt(tr, "--context-len", t.context_len, "token context length");
    add_opt(tr, "--embed-dim", t.embed_dim, "token embedding width");
    add_opt(tr, "--out-dim", t.out_dim, "shared embedding width");
    add_opt(tr, "--tau-init", t.tau_init, "initial temperature");
    add_opt(tr, "--aug-sigma", t.aug_sigma, "feature jitter sigma");
    add_opt(tr, "--aug-dropout", t.aug_dropout, "feature dropout probability");
    add_flag(tr, "--mt-paper-scaling", t.mt_paper_scaling,
             "scale the multi-text image loss by 1/M instead of 1/(M+1)");
    add_opt(tr, "--seed", t.seed, "training seed");

    // eval-zeroshot
    auto* ez = app.add_subcommand("eval-zeroshot", "prompt-ensembled zero-shot classification");
    struct {
        std::string checkpoint, features, labels, classes, templates;
        std::string report = "zeroshot_report.json", dataset = "synthetic";
    } z;
    add_opt(ez, "--checkpoint", z.checkpoint, "trained checkpoint")->required();
    add_opt(ez, "--features", z.features, "feature sidecar of the eval split")->required();
    add_opt(ez, "--labels", z.labels, "labels jsonl of the eval split")->required();
    add_opt(ez, "--classes", z.classes, "class name json array")->required();
    add_opt(ez, "--templates", z.templates,
            "prompt template file (default: bundled 7-template set)");
    add_opt(ez, "--report", z.report, "output report json");
    add_opt(ez, "--dataset", z.dataset, "dataset name recorded in the report");

    // eval-fewshot
    auto* ef = app.add_subcommand("eval-fewshot", "episodic few-shot evaluation");
    struct {
        std::string checkpoint, features, labels, classifier = "proto";
        std::string report = "fewshot_report.json", dataset = "synthetic";
        int episodes = 600, way = 5, shot = 5, query = 15;
        std::uint64_t seed = 0;
    } f;
    add_opt(ef, "--checkpoint", f.checkpoint, "trained checkpoint")->required();
    add_opt(ef, "--features", f.features, "feature sidecar of the eval split")->required();
    add_opt(ef, "--labels", f.labels, "labels jsonl of the eval split")->required();
    add_opt(ef, "--episodes", f.episodes, "episode count");
    add_opt(ef, "--way", f.way, "classes per episode");
    add_opt(ef, "--shot", f.shot, "support samples per class");
    add_opt(ef, "--query", f.query, "query samples per class");
    add_opt(ef, "--classifier", f.classifier, "proto|knn");
    add_opt(ef, "--seed", f.seed, "episode sampling seed");
    add_opt(ef, "--report", f.report, "output report json");
    add_opt(ef, "--dataset", f.dataset, "dataset name recorded in the report");

    // eval-linear
    auto* el = app.add_subcommand("eval-linear", "L-BFGS linear probe with the lambda sweep");
    struct {
        std::string checkpoint, features, labels;
        std::string report = "linear_report.json", dataset = "synthetic";
        double train_frac = 0.6, val_frac = 0.2;
        std::uint64_t seed = 0;
    } l;
    add_opt(el, "--checkpoint", l.checkpoint, "trained checkpoint")->required();
    add_opt(el, "--features", l.features, "feature sidecar of the probe split")->required();
    add_opt(el, "--labels", l.labels, "labels jsonl of the probe split")->required();
    add_opt(el, "--train-frac", l.train_frac, "training fraction of the split");
    add_opt(el, "--val-frac", l.val_frac, "validation fraction of the split");
    add_opt(el, "--seed", l.seed, "split shuffling seed");
    add_opt(el, "--report", l.report, "output report json");
    add_opt(el, "--dataset", l.dataset, "dataset name recorded in the report");

    // report
    auto* rp = app.add_subcommand("report", "tabulate eval reports (ZS / FS / LP columns)");
    struct {
        std::vector<std::string> inputs;
        std::string out;
    } r;
    rp->add_option("reports", r.inputs, "eval report json files")->required();
    add_opt(rp, "--out", r.out, "also write the table to a file");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForVersion& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 2;
    }

    try {
        if (rewrite->parsed()) {
            return cmd_rewrite(rw.in, rw.out, rw.strategies, rw.temp, rw.cache, rw.backend,
                               rw.concurrency, rw.retries, rw.max_tokens, rw.seed);
        }
        if (eda->parsed()) {
            return cmd_augment_eda(ed.in, ed.out, ed.op, ed.num, ed.alpha_sr, ed.alpha_ri,
                                   ed.alpha_rs, ed.p_rd, ed.synonyms, ed.seed);
        }
        if (bt->parsed()) {
            return cmd_backtranslate(bts.in, bts.out, bts.languages, bts.backend, bts.seed);
        }
        if (synth->parsed()) {
            return cmd_synth(sy.out_dir, sy.classes, sy.per_class, sy.dim, sy.test_per_class,
                             sy.rewrites, sy.noise_sigma, sy.seed, sy.caption_templates,
                             sy.paraphrase_templates);
        }
        if (tr->parsed()) {
            return cmd_train(t.in, t.features, t.out_dir, t.mode, t.epochs, t.warmup_epochs,
                             t.batch_size, t.lr, t.weight_decay, t.beta1, t.beta2, t.eps,
                             t.vocab_size, t.context_len, t.embed_dim, t.out_dim, t.tau_init,
                             t.aug_sigma, t.aug_dropout, t.mt_paper_scaling, t.seed);
        }
        if (ez->parsed()) {
            return cmd_eval_zeroshot(z.checkpoint, z.features, z.labels, z.classes, z.templates,
                                     z.report, z.dataset);
        }
        if (ef->parsed()) {
            return cmd_eval_fewshot(f.checkpoint, f.features, f.labels, f.episodes, f.way,
                                    f.shot, f.query, f.classifier, f.seed, f.report, f.dataset);
        }
        if (el->parsed()) {
            return cmd_eval_linear(l.checkpoint, l.features, l.labels, l.train_frac, l.val_frac,
                                   l.seed, l.report, l.dataset);
        }
        if (rp->parsed()) {
            return cmd_report(r.inputs, r.out);
        }
        std::cout << app.help();
        return 2;
    } catch (const ConfigError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const ParseError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const DuplicateId& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
}
