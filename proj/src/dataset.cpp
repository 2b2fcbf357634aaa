#include "laclip/dataset.hpp"

#include <algorithm>
#include <fstream>
#include <set>
#include <sstream>

#include <nlohmann/json.hpp>
#include <openssl/sha.h>

namespace laclip {

using nlohmann::json;

namespace {

std::ifstream open_versioned(const std::string& path, std::size_t& lineno) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open " + path);
    std::string header;
    if (!std::getline(in, header)) throw IoError(path + " is empty");
    lineno = 1;
    if (trim(header) != kFormatVersionLine) {
        throw ParseError("expected version line '" + std::string(kFormatVersionLine) + "'", 1);
    }
    return in;
}

std::ofstream create_versioned(const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot create " + path);
    out << kFormatVersionLine << "\n";
    return out;
}

json parse_line(const std::string& line, std::size_t lineno) {
    json j = json::parse(line, nullptr, false);
    if (j.is_discarded() || !j.is_object()) throw ParseError("not a JSON object", lineno);
    return j;
}

std::string require_string(const json& j, const char* key, std::size_t lineno) {
    if (!j.contains(key) || !j[key].is_string()) {
        throw ParseError(std::string("missing string field '") + key + "'", lineno);
    }
    return j[key].get<std::string>();
}

}  // namespace

std::vector<AugmentedRecord> read_caption_file(const std::string& path) {
    std::size_t lineno = 0;
    std::ifstream in = open_versioned(path, lineno);
    std::vector<AugmentedRecord> records;
    std::set<std::string> seen;
    std::string line;
    while (std::getline(in, line)) {
        ++lineno;
        if (trim(line).empty()) continue;
        json j = parse_line(line, lineno);
        AugmentedRecord rec;
        rec.id = require_string(j, "id", lineno);
        rec.image_ref = require_string(j, "image_ref", lineno);
        rec.captions.push_back(require_string(j, "caption", lineno));
        rec.validate();
        if (!seen.insert(rec.id).second) throw DuplicateId(rec.id);
        records.push_back(std::move(rec));
    }
    return records;
}

void write_caption_file(const std::string& path, const std::vector<AugmentedRecord>& records) {
    std::ofstream out = create_versioned(path);
    for (const auto& rec : records) {
        json j;
        j["caption"] = rec.captions.at(0);
        j["id"] = rec.id;
        j["image_ref"] = rec.image_ref;
        out << j.dump() << "\n";
    }
    if (!out) throw IoError("failed writing " + path);
}

std::string augmented_record_line(const AugmentedRecord& record) {
    json j;
    j["captions"] = record.captions;
    j["id"] = record.id;
    j["image_ref"] = record.image_ref;
    json meta = json::array();
    for (const auto& m : record.rewrite_meta) {
        meta.push_back({{"backend_id", m.backend_id}, {"strategy", m.strategy}});
    }
    j["rewrite_meta"] = meta;
    return j.dump();
}

std::vector<AugmentedRecord> read_augmented_file(const std::string& path) {
    std::size_t lineno = 0;
    std::ifstream in = open_versioned(path, lineno);
    std::vector<AugmentedRecord> records;
    std::set<std::string> seen;
    std::string line;
    while (std::getline(in, line)) {
        ++lineno;
        if (trim(line).empty()) continue;
        json j = parse_line(line, lineno);
        AugmentedRecord rec;
        rec.id = require_string(j, "id", lineno);
        rec.image_ref = require_string(j, "image_ref", lineno);
        if (!j.contains("captions") || !j["captions"].is_array() || j["captions"].empty()) {
            throw ParseError("missing non-empty 'captions' array", lineno);
        }
        for (const auto& c : j["captions"]) {
            if (!c.is_string()) throw ParseError("caption entries must be strings", lineno);
            rec.captions.push_back(c.get<std::string>());
        }
        if (!j.contains("rewrite_meta") || !j["rewrite_meta"].is_array()) {
            throw ParseError("missing 'rewrite_meta' array", lineno);
        }
        for (const auto& m : j["rewrite_meta"]) {
            rec.rewrite_meta.push_back(
                {require_string(m, "strategy", lineno), require_string(m, "backend_id", lineno)});
        }
        try {
            rec.validate();
        } catch (const Error& e) {
            throw ParseError(e.what(), lineno);
        }
        if (!seen.insert(rec.id).second) throw DuplicateId(rec.id);
        records.push_back(std::move(rec));
    }
    return records;
}

void write_augmented_file(const std::string& path, const std::vector<AugmentedRecord>& records) {
    std::ofstream out = create_versioned(path);
    for (const auto& rec : records) out << augmented_record_line(rec) << "\n";
    if (!out) throw IoError("failed writing " + path);
}

std::size_t shard_index(const std::string& id, std::size_t n_shards) {
    return static_cast<std::size_t>(stable_hash64(id) % n_shards);
}

std::vector<std::vector<AugmentedRecord>> shard_records(
    const std::vector<AugmentedRecord>& records, std::size_t n_shards) {
    if (n_shards < 1) throw ConfigError("n_shards must be >= 1");
    std::vector<std::vector<AugmentedRecord>> shards(n_shards);
    for (const auto& rec : records) shards[shard_index(rec.id, n_shards)].push_back(rec);
    return shards;
}

Eigen::Index FeatureStore::row_for(const std::string& id) const {
    if (index_.empty()) {
        for (std::size_t i = 0; i < ids.size(); ++i) index_[ids[i]] = static_cast<Eigen::Index>(i);
    }
    auto it = index_.find(id);
    if (it == index_.end()) throw Error("feature store has no row for id '" + id + "'");
    return it->second;
}

Matrix FeatureStore::gather(const std::vector<std::string>& keys) const {
    Matrix out(static_cast<Eigen::Index>(keys.size()), dim);
    for (std::size_t i = 0; i < keys.size(); ++i) {
        out.row(static_cast<Eigen::Index>(i)) = rows.row(row_for(keys[i]));
    }
    return out;
}

std::string ids_sha256(const std::vector<std::string>& ids) {
    std::string joined;
    for (const auto& id : ids) {
        joined += id;
        joined += '\n';
    }
    unsigned char digest[SHA256_DIGEST_LENGTH];
    SHA256(reinterpret_cast<const unsigned char*>(joined.data()), joined.size(), digest);
    static const char* hex = "0123456789abcdef";
    std::string out;
    out.reserve(2 * SHA256_DIGEST_LENGTH);
    for (unsigned char b : digest) {
        out.push_back(hex[b >> 4]);
        out.push_back(hex[b & 0xf]);
    }
    return out;
}

void write_feature_store(const std::string& path, const FeatureStore& store) {
    if (store.rows.rows() != static_cast<Eigen::Index>(store.ids.size()) ||
        store.rows.cols() != store.dim) {
        throw ShapeMismatch("feature store rows/ids/dim disagree");
    }
    std::ofstream out = create_versioned(path);
    json header;
    header["count"] = store.ids.size();
    header["dim"] = store.dim;
    header["ids_sha"] = ids_sha256(store.ids);
    out << header.dump() << "\n";
    std::vector<float> buf(static_cast<std::size_t>(store.rows.size()));
    std::size_t k = 0;
    for (Eigen::Index i = 0; i < store.rows.rows(); ++i) {
        for (Eigen::Index j = 0; j < store.rows.cols(); ++j) {
            buf[k++] = static_cast<float>(store.rows(i, j));
        }
    }
    out.write(reinterpret_cast<const char*>(buf.data()),
              static_cast<std::streamsize>(buf.size() * sizeof(float)));
    if (!out) throw IoError("failed writing " + path);
}

FeatureStore read_feature_store(const std::string& path, std::vector<std::string> expected_ids) {
    std::size_t lineno = 0;
    std::ifstream in = open_versioned(path, lineno);
    std::string header_line;
    if (!std::getline(in, header_line)) throw ParseError("missing feature header", 2);
    json header = parse_line(header_line, 2);
    if (!header.contains("count") || !header.contains("dim") || !header.contains("ids_sha")) {
        throw ParseError("feature header needs count, dim, ids_sha", 2);
    }
    FeatureStore store;
    store.dim = header["dim"].get<int>();
    auto count = header["count"].get<std::size_t>();
    if (count != expected_ids.size()) {
        throw Error("feature store holds " + std::to_string(count) + " rows but " +
                    std::to_string(expected_ids.size()) + " ids were supplied");
    }
    if (header["ids_sha"].get<std::string>() != ids_sha256(expected_ids)) {
        throw Error("feature store ids_sha does not match the supplied id order");
    }
    store.ids = std::move(expected_ids);
    std::vector<float> buf(count * static_cast<std::size_t>(store.dim));
    in.read(reinterpret_cast<char*>(buf.data()),
            static_cast<std::streamsize>(buf.size() * sizeof(float)));
    if (in.gcount() != static_cast<std::streamsize>(buf.size() * sizeof(float))) {
        throw IoError(path + " is truncated");
    }
    store.rows.resize(static_cast<Eigen::Index>(count), store.dim);
    std::size_t k = 0;
    for (Eigen::Index i = 0; i < store.rows.rows(); ++i) {
        for (Eigen::Index j = 0; j < store.rows.cols(); ++j) {
            store.rows(i, j) = static_cast<double>(buf[k++]);
        }
    }
    return store;
}

void write_labels_file(const std::string& path, const std::vector<std::string>& ids,
                       const std::vector<int>& labels) {
    if (ids.size() != labels.size()) throw ShapeMismatch("ids/labels length mismatch");
    std::ofstream out = create_versioned(path);
    for (std::size_t i = 0; i < ids.size(); ++i) {
        json j;
        j["id"] = ids[i];
        j["label"] = labels[i];
        out << j.dump() << "\n";
    }
    if (!out) throw IoError("failed writing " + path);
}

std::pair<std::vector<std::string>, std::vector<int>> read_labels_file(const std::string& path) {
    std::size_t lineno = 0;
    std::ifstream in = open_versioned(path, lineno);
    std::vector<std::string> ids;
    std::vector<int> labels;
    std::string line;
    while (std::getline(in, line)) {
        ++lineno;
        if (trim(line).empty()) continue;
        json j = parse_line(line, lineno);
        ids.push_back(require_string(j, "id", lineno));
        if (!j.contains("label") || !j["label"].is_number_integer()) {
            throw ParseError("missing integer field 'label'", lineno);
        }
        labels.push_back(j["label"].get<int>());
    }
    return {std::move(ids), std::move(labels)};
}

void write_class_names(const std::string& path, const std::vector<std::string>& names) {
    std::ofstream out = create_versioned(path);
    out << json(names).dump() << "\n";
    if (!out) throw IoError("failed writing " + path);
}

std::vector<std::string> read_class_names(const std::string& path) {
    std::size_t lineno = 0;
    std::ifstream in = open_versioned(path, lineno);
    std::string line;
    if (!std::getline(in, line)) throw ParseError("missing class name array", 2);
    json j = json::parse(line, nullptr, false);
    if (j.is_discarded() || !j.is_array()) throw ParseError("expected a JSON array", 2);
    return j.get<std::vector<std::string>>();
}

BatchIterator::BatchIterator(const std::vector<AugmentedRecord>& records,
                             const FeatureStore& features, TokenizerConfig tokenizer,
                             int batch_size, std::uint64_t epoch_seed, CaptionChoice choice)
    : records_(records),
      features_(features),
      tokenizer_(tokenizer),
      batch_size_(batch_size),
      epoch_seed_(epoch_seed),
      choice_(choice) {
    if (batch_size_ < 1) throw ConfigError("batch_size must be >= 1");
    order_.resize(records_.size());
    for (std::size_t i = 0; i < order_.size(); ++i) order_[i] = i;
    Rng perm_rng(derive_seed(epoch_seed_, "perm"));
    for (std::size_t i = 0; i + 1 < order_.size(); ++i) {
        std::size_t j = i + uniform_index(perm_rng, order_.size() - i);
        std::swap(order_[i], order_[j]);
    }
}

std::optional<BatchPairs> BatchIterator::next() {
    if (cursor_ >= order_.size()) return std::nullopt;
    const std::size_t n =
        std::min<std::size_t>(static_cast<std::size_t>(batch_size_), order_.size() - cursor_);

    BatchPairs batch;
    batch.image_features.resize(static_cast<Eigen::Index>(n), features_.dim);
    batch.tokens.reserve(n);
    batch.record_ids.reserve(n);
    int slots = -1;
    if (choice_ == CaptionChoice::all) {
        slots = records_[order_[cursor_]].rewrite_count() + 1;
        batch.text_slots.assign(static_cast<std::size_t>(slots), {});
    }
    for (std::size_t b = 0; b < n; ++b) {
        const AugmentedRecord& rec = records_[order_[cursor_ + b]];
        batch.image_features.row(static_cast<Eigen::Index>(b)) =
            features_.rows.row(features_.row_for(rec.image_ref));
        batch.record_ids.push_back(rec.id);
        switch (choice_) {
            case CaptionChoice::original:
                batch.tokens.push_back(tokenize(rec.captions[0], tokenizer_));
                break;
            case CaptionChoice::sampled: {
                Rng rec_rng(derive_seed(epoch_seed_, rec.id));
                batch.tokens.push_back(tokenize(sample_caption(rec, rec_rng), tokenizer_));
                break;
            }
            case CaptionChoice::all: {
                if (rec.rewrite_count() + 1 != slots) {
                    throw ShapeMismatch("record " + rec.id +
                                        " has a different rewrite count than the batch");
                }
                for (int j = 0; j < slots; ++j) {
                    batch.text_slots[static_cast<std::size_t>(j)].push_back(
                        tokenize(rec.captions[static_cast<std::size_t>(j)], tokenizer_));
                }
                batch.tokens.push_back(batch.text_slots[0].back());
                break;
            }
        }
    }
    cursor_ += n;
    return batch;
}

void SyntheticSpec::validate() const {
    if (n_classes < 2) throw ConfigError("n_classes must be >= 2");
    if (samples_per_class < 1 || test_samples_per_class < 1) {
        throw ConfigError("samples per class must be >= 1");
    }
    if (feature_dim < 1) throw ConfigError("feature_dim must be >= 1");
    if (noise_sigma < 0) throw ConfigError("noise_sigma must be >= 0");
    if (rewrites_per_caption < 0) throw ConfigError("rewrites_per_caption must be >= 0");
    if (caption_templates.empty() || paraphrase_templates.empty()) {
        throw ConfigError("template lists must be non-empty");
    }
    for (const auto& t : caption_templates) {
        if (std::find(paraphrase_templates.begin(), paraphrase_templates.end(), t) !=
            paraphrase_templates.end()) {
            throw ConfigError("caption and paraphrase template lists must be disjoint");
        }
    }
    for (const auto& list : {caption_templates, paraphrase_templates}) {
        for (const auto& t : list) {
            if (t.find("{class}") == std::string::npos) {
                throw ConfigError("template '" + t + "' lacks a {class} slot");
            }
        }
    }
}

SyntheticSpec default_synthetic_spec() {
    SyntheticSpec spec;
    spec.caption_templates = {
        "a photo of a {class}",
        "a close-up photo of a {class}",
        "a bright photo of a {class}",
        "a cropped photo of a {class}",
    };
    spec.paraphrase_templates = {
        "this picture shows one {class} in the wild",
        "here is an image depicting some kind of {class}",
        "you can see a single {class} captured by the camera",
        "the scene contains nothing but a {class} today",
    };
    return spec;
}

SyntheticData gen_synthetic(const SyntheticSpec& spec, std::uint64_t seed) {
    spec.validate();
    SyntheticData data;

    for (int c = 0; c < spec.n_classes; ++c) {
        char buf[32];
        std::snprintf(buf, sizeof(buf), "object%02d", c);
        data.class_names.emplace_back(buf);
    }

    // Class means: Gaussian draws, Gram-Schmidt while the dimension lasts.
    Rng mean_rng(derive_seed(seed, "means"));
    Matrix means(spec.n_classes, spec.feature_dim);
    for (Eigen::Index c = 0; c < means.rows(); ++c) {
        for (Eigen::Index k = 0; k < means.cols(); ++k) means(c, k) = normal01(mean_rng);
        for (Eigen::Index p = 0; p < c && p < means.cols(); ++p) {
            means.row(c) -= means.row(c).dot(means.row(p)) * means.row(p);
        }
        double norm = means.row(c).norm();
        if (norm < 1e-9) {  // dimension exhausted; fall back to a raw direction
            for (Eigen::Index k = 0; k < means.cols(); ++k) means(c, k) = normal01(mean_rng);
            norm = means.row(c).norm();
        }
        means.row(c) /= norm;
    }

    auto make_split = [&](const std::string& split, int per_class,
                          std::vector<AugmentedRecord>& records, std::vector<int>& labels,
                          FeatureStore& store, const std::vector<std::string>& templates,
                          bool with_rewrites) {
        store.dim = spec.feature_dim;
        store.rows.resize(spec.n_classes * per_class, spec.feature_dim);
        Eigen::Index row = 0;
        for (int c = 0; c < spec.n_classes; ++c) {
            for (int s = 0; s < per_class; ++s) {
                std::string id = split + "_c" + std::to_string(c) + "_s" + std::to_string(s);
                Rng rng(derive_seed(seed, split + "/" + id));
                Vector feat = means.row(c).transpose();
                for (Eigen::Index k = 0; k < feat.size(); ++k) {
                    feat(k) += spec.noise_sigma * normal01(rng);
                }
                double norm = feat.norm();
                if (norm == 0.0) feat = means.row(c).transpose();
                else feat /= norm;
                store.rows.row(row++) = feat.transpose();
                store.ids.push_back(id);

                AugmentedRecord rec;
                rec.id = id;
                rec.image_ref = id;
                rec.captions.push_back(instantiate_template(
                    templates[uniform_index(rng, templates.size())], data.class_names[c]));
                if (with_rewrites) {
                    for (int r = 0; r < spec.rewrites_per_caption; ++r) {
                        rec.captions.push_back(instantiate_template(
                            spec.paraphrase_templates[uniform_index(
                                rng, spec.paraphrase_templates.size())],
                            data.class_names[c]));
                        rec.rewrite_meta.push_back({"synthetic-paraphrase", "synth"});
                    }
                }
                records.push_back(std::move(rec));
                labels.push_back(c);
            }
        }
    };

    make_split("train", spec.samples_per_class, data.train, data.train_labels,
               data.train_features, spec.caption_templates, true);
    make_split("test", spec.test_samples_per_class, data.test, data.test_labels,
               data.test_features, spec.caption_templates, false);

    // Shifted test set: identical samples and features, paraphrase captions.
    data.test_shifted = data.test;
    Rng shift_rng(derive_seed(seed, "shifted"));
    for (std::size_t i = 0; i < data.test_shifted.size(); ++i) {
        const std::string& cls = data.class_names[static_cast<std::size_t>(data.test_labels[i])];
        data.test_shifted[i].captions[0] = instantiate_template(
            spec.paraphrase_templates[uniform_index(shift_rng, spec.paraphrase_templates.size())],
            cls);
    }
    return data;
}

}  // namespace laclip
