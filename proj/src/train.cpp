#include "laclip/train.hpp"

#include <cinttypes>
#include <cstdio>
#include <fstream>

#include <nlohmann/json.hpp>

namespace laclip {

using nlohmann::json;

TrainMode parse_train_mode(std::string_view name) {
    if (name == "clip") return TrainMode::clip;
    if (name == "laclip") return TrainMode::laclip;
    if (name == "laclip_mt") return TrainMode::laclip_mt;
    throw ConfigError("unknown train mode: " + std::string(name));
}

std::string_view train_mode_name(TrainMode mode) {
    switch (mode) {
        case TrainMode::clip: return "clip";
        case TrainMode::laclip: return "laclip";
        case TrainMode::laclip_mt: return "laclip_mt";
    }
    throw ConfigError("invalid train mode enum value");
}

void TrainConfig::validate() const {
    encoder.validate();
    if (epochs < 1) throw ConfigError("epochs must be >= 1");
    if (warmup_epochs < 0 || warmup_epochs > epochs) {
        throw ConfigError("warmup_epochs must lie in [0, epochs]");
    }
    if (batch_size < 1) throw ConfigError("batch_size must be >= 1");
    if (aug_sigma < 0) throw ConfigError("aug_sigma must be >= 0");
    if (aug_dropout < 0 || aug_dropout >= 1) throw ConfigError("aug_dropout must lie in [0,1)");
    if (hyper.lr <= 0 || hyper.beta1 < 0 || hyper.beta1 >= 1 || hyper.beta2 < 0 ||
        hyper.beta2 >= 1 || hyper.eps <= 0 || hyper.weight_decay < 0) {
        throw ConfigError("bad optimizer hyperparameters");
    }
    if (mt_paper_scaling && mode != TrainMode::laclip_mt) {
        throw ConfigError("mt_paper_scaling requires mode laclip_mt");
    }
}

namespace {

json config_json(const TrainConfig& c) {
    json j;
    j["aug_dropout"] = c.aug_dropout;
    j["aug_sigma"] = c.aug_sigma;
    j["batch_size"] = c.batch_size;
    j["beta1"] = c.hyper.beta1;
    j["beta2"] = c.hyper.beta2;
    j["embed_dim"] = c.encoder.embed_dim;
    j["epochs"] = c.epochs;
    j["eps"] = c.hyper.eps;
    j["feature_dim"] = c.encoder.feature_dim;
    j["lr"] = c.hyper.lr;
    j["mode"] = std::string(train_mode_name(c.mode));
    j["mt_paper_scaling"] = c.mt_paper_scaling;
    j["out_dim"] = c.encoder.out_dim;
    j["seed"] = c.seed;
    j["tau_init"] = c.encoder.tau_init;
    j["context_len"] = c.encoder.tokenizer.context_len;
    j["vocab_size"] = c.encoder.tokenizer.vocab_size;
    j["warmup_epochs"] = c.warmup_epochs;
    j["weight_decay"] = c.hyper.weight_decay;
    return j;
}

std::string hex64(std::uint64_t v) {
    char buf[17];
    std::snprintf(buf, sizeof(buf), "%016" PRIx64, v);
    return buf;
}

}  // namespace

std::string config_hash_of(const TrainConfig& config) {
    return hex64(stable_hash64(config_json(config).dump()));
}

TrainResult train(const TrainConfig& config, const std::vector<AugmentedRecord>& records,
                  const FeatureStore& features) {
    config.validate();
    if (records.empty()) throw EmptyInput("training dataset is empty");
    int uniform_m = records.front().rewrite_count();
    for (const auto& rec : records) {
        rec.validate();
        if (config.mode != TrainMode::clip && rec.rewrite_count() < 1) {
            throw ConfigError("mode " + std::string(train_mode_name(config.mode)) +
                              " needs rewrites, record " + rec.id + " has none");
        }
        if (config.mode == TrainMode::laclip_mt && rec.rewrite_count() != uniform_m) {
            throw ConfigError("laclip_mt needs a uniform rewrite count; record " + rec.id +
                              " differs");
        }
    }
    if (features.dim != config.encoder.feature_dim) {
        throw ConfigError("feature store dim " + std::to_string(features.dim) +
                          " != configured feature_dim " +
                          std::to_string(config.encoder.feature_dim));
    }

    const auto steps_per_epoch = static_cast<std::int64_t>(
        (records.size() + static_cast<std::size_t>(config.batch_size) - 1) /
        static_cast<std::size_t>(config.batch_size));
    AdamHyper hyper = config.hyper;
    hyper.warmup_steps = steps_per_epoch * config.warmup_epochs;
    hyper.total_steps = steps_per_epoch * config.epochs;

    TrainResult result;
    result.config_hash = config_hash_of(config);
    result.params = init_params(config.encoder, config.seed);
    OptState state = OptState::init(result.params, hyper);

    CaptionChoice choice = CaptionChoice::original;
    if (config.mode == TrainMode::laclip) choice = CaptionChoice::sampled;
    if (config.mode == TrainMode::laclip_mt) choice = CaptionChoice::all;

    for (int epoch = 1; epoch <= config.epochs; ++epoch) {
        std::uint64_t epoch_seed = derive_seed(config.seed, "epoch" + std::to_string(epoch));
        BatchIterator it(records, features, config.encoder.tokenizer, config.batch_size,
                         epoch_seed, choice);
        std::int64_t batch_index = 0;
        while (auto batch = it.next()) {
            Rng aug_rng(derive_seed(epoch_seed, "aug" + std::to_string(batch_index)));
            Matrix feats =
                aug_image(batch->image_features, aug_rng, config.aug_sigma, config.aug_dropout);

            ImageForward img = encode_image(result.params, feats);
            ParamGrads grads = ParamGrads::zeros_like(result.params);
            LossOutput loss;
            if (config.mode == TrainMode::laclip_mt) {
                std::vector<TextForward> slots;
                std::vector<EmbeddingBatch> slot_embeddings;
                slots.reserve(batch->text_slots.size());
                for (const auto& slot_tokens : batch->text_slots) {
                    slots.push_back(encode_text(result.params, slot_tokens));
                    slot_embeddings.push_back(slots.back().embeddings);
                }
                loss = multitext_loss_and_grads(img.embeddings, slot_embeddings,
                                                result.params.temp, config.mt_paper_scaling);
                const Eigen::Index n = img.embeddings.n();
                for (std::size_t j = 0; j < slots.size(); ++j) {
                    slots[j].backward(
                        loss.grad_text.middleRows(static_cast<Eigen::Index>(j) * n, n),
                        result.params, grads);
                }
            } else {
                TextForward txt = encode_text(result.params, batch->tokens);
                loss = clip_loss_and_grads(img.embeddings, txt.embeddings, result.params.temp);
                txt.backward(loss.grad_text, result.params, grads);
            }
            img.backward(loss.grad_image, result.params, grads);
            grads.s = loss.grad_s;

            double tau_at_loss = result.params.temp.tau();
            adamw_step(result.params, grads, state);

            MetricsRow row;
            row.step = state.t;
            row.epoch = epoch;
            row.loss = loss.total;
            row.l_image = loss.l_image;
            row.l_text = loss.l_text;
            row.tau = tau_at_loss;
            row.lr = schedule_lr(hyper, state.t);
            result.metrics.push_back(row);
            ++batch_index;
        }
    }
    return result;
}

void write_metrics_csv(const std::string& path, const std::vector<MetricsRow>& metrics) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot create " + path);
    out << "step,epoch,loss,l_image,l_text,tau,lr\n";
    char buf[256];
    for (const auto& r : metrics) {
        std::snprintf(buf, sizeof(buf), "%lld,%d,%.17g,%.17g,%.17g,%.17g,%.17g\n",
                      static_cast<long long>(r.step), r.epoch, r.loss, r.l_image, r.l_text, r.tau,
                      r.lr);
        out << buf;
    }
    if (!out) throw IoError("failed writing " + path);
}

namespace {

void write_tensor(std::ofstream& out, const Matrix& m) {
    std::vector<double> buf(static_cast<std::size_t>(m.size()));
    std::size_t k = 0;
    for (Eigen::Index i = 0; i < m.rows(); ++i) {
        for (Eigen::Index j = 0; j < m.cols(); ++j) buf[k++] = m(i, j);
    }
    out.write(reinterpret_cast<const char*>(buf.data()),
              static_cast<std::streamsize>(buf.size() * sizeof(double)));
}

Matrix read_tensor(std::ifstream& in, Eigen::Index rows, Eigen::Index cols,
                   const std::string& path) {
    std::vector<double> buf(static_cast<std::size_t>(rows * cols));
    in.read(reinterpret_cast<char*>(buf.data()),
            static_cast<std::streamsize>(buf.size() * sizeof(double)));
    if (in.gcount() != static_cast<std::streamsize>(buf.size() * sizeof(double))) {
        throw IoError(path + " is truncated");
    }
    Matrix m(rows, cols);
    std::size_t k = 0;
    for (Eigen::Index i = 0; i < rows; ++i) {
        for (Eigen::Index j = 0; j < cols; ++j) m(i, j) = buf[k++];
    }
    return m;
}

}  // namespace

void save_checkpoint(const std::string& path, const EncoderParams& params,
                     const std::string& config_hash, int context_len) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot create " + path);
    out << kFormatVersionLine << "\n";
    json header;
    header["clamp_max"] = params.temp.clamp_max;
    header["config_hash"] = config_hash;
    header["context_len"] = context_len;
    header["s"] = params.temp.s;
    header["tensors"] = json::array({
        {{"cols", params.token_embedding.cols()},
         {"name", "token_embedding"},
         {"rows", params.token_embedding.rows()}},
        {{"cols", params.text_proj.cols()}, {"name", "text_proj"}, {"rows", params.text_proj.rows()}},
        {{"cols", params.image_proj.cols()},
         {"name", "image_proj"},
         {"rows", params.image_proj.rows()}},
    });
    out << header.dump() << "\n";
    write_tensor(out, params.token_embedding);
    write_tensor(out, params.text_proj);
    write_tensor(out, params.image_proj);
    if (!out) throw IoError("failed writing " + path);
}

EncoderParams load_checkpoint(const std::string& path, std::string* config_hash,
                              int* context_len) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open " + path);
    std::string line;
    if (!std::getline(in, line) || trim(line) != kFormatVersionLine) {
        throw ParseError("bad checkpoint version line", 1);
    }
    if (!std::getline(in, line)) throw ParseError("missing checkpoint header", 2);
    json header = json::parse(line, nullptr, false);
    if (header.is_discarded() || !header.contains("tensors") || !header.contains("s")) {
        throw ParseError("bad checkpoint header", 2);
    }
    if (config_hash) *config_hash = header.value("config_hash", "");
    if (context_len) *context_len = header.value("context_len", 77);

    EncoderParams params;
    params.temp.s = header["s"].get<double>();
    params.temp.clamp_max = header.value("clamp_max", std::log(100.0));
    for (const auto& t : header["tensors"]) {
        std::string name = t["name"].get<std::string>();
        Matrix m = read_tensor(in, t["rows"].get<Eigen::Index>(), t["cols"].get<Eigen::Index>(),
                               path);
        if (name == "token_embedding") params.token_embedding = std::move(m);
        else if (name == "text_proj") params.text_proj = std::move(m);
        else if (name == "image_proj") params.image_proj = std::move(m);
        else throw ParseError("unknown tensor '" + name + "' in checkpoint", 2);
    }
    if (params.token_embedding.size() == 0 || params.text_proj.size() == 0 ||
        params.image_proj.size() == 0) {
        throw ParseError("checkpoint is missing tensors", 2);
    }
    return params;
}

}  // namespace laclip
