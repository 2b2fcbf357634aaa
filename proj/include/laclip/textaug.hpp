#pragma once

#include <functional>
#include <map>
#include <string>
#include <vector>

#include "laclip/common.hpp"

namespace laclip {

struct RewriteMeta {
    std::string strategy;    // name of the augmentation strategy that produced the rewrite
    std::string backend_id;  // which backend instance served it
};

// One image reference plus its original caption (index 0) and M rewrites.
struct AugmentedRecord {
    std::string id;
    std::string image_ref;
    std::vector<std::string> captions;      // captions[0] is the original
    std::vector<RewriteMeta> rewrite_meta;  // parallel to captions[1..]

    int rewrite_count() const { return static_cast<int>(captions.size()) - 1; }

    // Throws Error if the invariants do not hold.
    void validate() const;
};

// Uniform draw over {original, rewrites}; consumes exactly one rng call.
const std::string& sample_caption(const AugmentedRecord& record, Rng& rng);

using SynonymTable = std::map<std::string, std::vector<std::string>>;

// Flat file, one entry per line: word TAB comma-separated synonyms.
SynonymTable load_synonym_table(const std::string& path);

struct EdaParams {
    double alpha_sr = 0.1;  // fraction of words replaced by a synonym
    double alpha_ri = 0.1;  // fraction of words inserted
    double alpha_rs = 0.1;  // fraction of words swapped
    double p_rd = 0.1;      // per-word deletion probability
    SynonymTable synonym_table;

    void validate() const;
};

enum class EdaOp {
    synonym_replacement,
    random_insertion,
    random_swap,
    random_deletion,
    composite,  // one of the four above, chosen uniformly
};

EdaOp parse_eda_op(std::string_view name);
std::string_view eda_op_name(EdaOp op);

// Word-level augmentation. Tokenization is lowercase + whitespace split;
// punctuation stays attached to words. Throws EmptyInput on all-whitespace
// sentences.
std::string eda_augment(const std::string& sentence, EdaOp op, const EdaParams& params, Rng& rng);

// Wire contract for a translation service: {text, source, target} -> {text}.
struct TranslationRequest {
    std::string text;
    std::string source;
    std::string target;
};

class TranslationBackend {
public:
    virtual ~TranslationBackend() = default;
    virtual std::string translate(const TranslationRequest& request) = 0;
    virtual std::string id() const = 0;
};

// In-process backend for tests; wraps any callable.
class FixtureTranslationBackend : public TranslationBackend {
public:
    using Fn = std::function<std::string(const TranslationRequest&)>;
    explicit FixtureTranslationBackend(Fn fn, std::string id = "fixture")
        : fn_(std::move(fn)), id_(std::move(id)) {}
    std::string translate(const TranslationRequest& request) override { return fn_(request); }
    std::string id() const override { return id_; }

private:
    Fn fn_;
    std::string id_;
};

// POSTs {text, source, target} as JSON, expects {text}. Endpoint comes from
// the constructor or the TRANSLATE_ENDPOINT env var.
class HttpTranslationBackend : public TranslationBackend {
public:
    explicit HttpTranslationBackend(std::string endpoint = {});
    std::string translate(const TranslationRequest& request) override;
    std::string id() const override { return "http:" + endpoint_; }

private:
    std::string endpoint_;
};

constexpr std::array<std::string_view, 4> kPivotLanguages = {"es", "fr", "de", "it"};

// source -> pivot -> source round trip. Throws BackendError / EmptyTranslation.
std::string back_translate(const std::string& sentence, const std::string& language,
                           TranslationBackend& backend, const std::string& source_language = "en");

}  // namespace laclip
