#include "laclip/textaug.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

#include <nlohmann/json.hpp>

#include "laclip/http_util.hpp"

namespace laclip {

void AugmentedRecord::validate() const {
    if (id.empty()) throw Error("record id is empty");
    if (captions.empty()) throw Error("record " + id + " has no captions");
    for (const auto& c : captions) {
        if (trim(c).empty()) throw Error("record " + id + " has a blank caption");
    }
    if (rewrite_meta.size() != captions.size() - 1) {
        throw Error("record " + id + " rewrite_meta length " +
                    std::to_string(rewrite_meta.size()) + " != " +
                    std::to_string(captions.size() - 1));
    }
}

const std::string& sample_caption(const AugmentedRecord& record, Rng& rng) {
    return record.captions[uniform_index(rng, record.captions.size())];
}

SynonymTable load_synonym_table(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open synonym table " + path);
    SynonymTable table;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty() || line[0] == '#') continue;
        auto tab = line.find('\t');
        if (tab == std::string::npos) throw ParseError("missing TAB in synonym table", lineno);
        std::string word = trim(line.substr(0, tab));
        std::vector<std::string> syns;
        std::string rest = line.substr(tab + 1);
        std::size_t start = 0;
        while (start <= rest.size()) {
            auto comma = rest.find(',', start);
            std::string syn = trim(rest.substr(start, comma == std::string::npos
                                                          ? std::string::npos
                                                          : comma - start));
            if (syn.empty()) throw ParseError("empty synonym for word '" + word + "'", lineno);
            syns.push_back(std::move(syn));
            if (comma == std::string::npos) break;
            start = comma + 1;
        }
        table[word] = std::move(syns);
    }
    return table;
}

void EdaParams::validate() const {
    auto in_unit = [](double v) { return v >= 0.0 && v <= 1.0; };
    if (!in_unit(alpha_sr) || !in_unit(alpha_ri) || !in_unit(alpha_rs) || !in_unit(p_rd)) {
        throw ConfigError("eda rates must lie in [0,1]");
    }
    for (const auto& [word, syns] : synonym_table) {
        if (word.empty()) throw ConfigError("synonym table has an empty key");
        for (const auto& s : syns) {
            if (s.empty()) throw ConfigError("synonym list for '" + word + "' has empty entries");
        }
    }
}

EdaOp parse_eda_op(std::string_view name) {
    if (name == "synonym_replacement") return EdaOp::synonym_replacement;
    if (name == "random_insertion") return EdaOp::random_insertion;
    if (name == "random_swap") return EdaOp::random_swap;
    if (name == "random_deletion") return EdaOp::random_deletion;
    if (name == "composite") return EdaOp::composite;
    throw ConfigError("unknown eda op: " + std::string(name));
}

std::string_view eda_op_name(EdaOp op) {
    switch (op) {
        case EdaOp::synonym_replacement: return "synonym_replacement";
        case EdaOp::random_insertion: return "random_insertion";
        case EdaOp::random_swap: return "random_swap";
        case EdaOp::random_deletion: return "random_deletion";
        case EdaOp::composite: return "composite";
    }
    throw ConfigError("invalid eda op enum value");
}

namespace {

int ops_per_sentence(double alpha, std::size_t n_words) {
    return std::max(1, static_cast<int>(std::lround(alpha * static_cast<double>(n_words))));
}

void synonym_replacement(std::vector<std::string>& words, const EdaParams& p, Rng& rng) {
    std::vector<std::size_t> candidates;
    for (std::size_t i = 0; i < words.size(); ++i) {
        auto it = p.synonym_table.find(words[i]);
        if (it != p.synonym_table.end() && !it->second.empty()) candidates.push_back(i);
    }
    if (candidates.empty()) return;
    int n = std::min<int>(ops_per_sentence(p.alpha_sr, words.size()),
                          static_cast<int>(candidates.size()));
    // Partial Fisher-Yates over candidate positions: n distinct picks.
    for (int k = 0; k < n; ++k) {
        std::size_t j = k + uniform_index(rng, candidates.size() - k);
        std::swap(candidates[k], candidates[j]);
        const auto& syns = p.synonym_table.at(words[candidates[k]]);
        words[candidates[k]] = syns[uniform_index(rng, syns.size())];
    }
}

void random_insertion(std::vector<std::string>& words, const EdaParams& p, Rng& rng) {
    int n = ops_per_sentence(p.alpha_ri, words.size());
    for (int k = 0; k < n; ++k) {
        // Resample a synonym-bearing word up to 10 times, else skip.
        for (int attempt = 0; attempt < 10; ++attempt) {
            const std::string& word = words[uniform_index(rng, words.size())];
            auto it = p.synonym_table.find(word);
            if (it == p.synonym_table.end() || it->second.empty()) continue;
            const std::string& syn = it->second[uniform_index(rng, it->second.size())];
            std::size_t pos = uniform_index(rng, words.size() + 1);
            words.insert(words.begin() + static_cast<std::ptrdiff_t>(pos), syn);
            break;
        }
    }
}

void random_swap(std::vector<std::string>& words, const EdaParams& p, Rng& rng) {
    if (words.size() < 2) return;
    int n = ops_per_sentence(p.alpha_rs, words.size());
    for (int k = 0; k < n; ++k) {
        std::size_t i = uniform_index(rng, words.size());
        std::size_t j = uniform_index(rng, words.size() - 1);
        if (j >= i) ++j;  // distinct second position
        std::swap(words[i], words[j]);
    }
}

void random_deletion(std::vector<std::string>& words, const EdaParams& p, Rng& rng) {
    std::vector<std::string> kept;
    for (const auto& w : words) {
        if (uniform_real01(rng) >= p.p_rd) kept.push_back(w);
    }
    if (kept.empty()) kept.push_back(words[uniform_index(rng, words.size())]);
    words = std::move(kept);
}

}  // namespace

std::string eda_augment(const std::string& sentence, EdaOp op, const EdaParams& params,
                        Rng& rng) {
    params.validate();
    std::vector<std::string> words = split_whitespace(to_lower(sentence));
    if (words.empty()) throw EmptyInput("sentence tokenizes to zero words");

    if (op == EdaOp::composite) {
        constexpr std::array<EdaOp, 4> kOps = {EdaOp::synonym_replacement, EdaOp::random_insertion,
                                               EdaOp::random_swap, EdaOp::random_deletion};
        op = kOps[uniform_index(rng, kOps.size())];
    }
    switch (op) {
        case EdaOp::synonym_replacement: synonym_replacement(words, params, rng); break;
        case EdaOp::random_insertion: random_insertion(words, params, rng); break;
        case EdaOp::random_swap: random_swap(words, params, rng); break;
        case EdaOp::random_deletion: random_deletion(words, params, rng); break;
        case EdaOp::composite: break;  // unreachable
    }
    return join(words);
}

HttpTranslationBackend::HttpTranslationBackend(std::string endpoint)
    : endpoint_(std::move(endpoint)) {
    if (endpoint_.empty()) {
        const char* env = std::getenv("TRANSLATE_ENDPOINT");
        if (env) endpoint_ = env;
    }
    if (endpoint_.empty()) {
        throw ConfigError("no translation endpoint given and TRANSLATE_ENDPOINT is unset");
    }
}

std::string HttpTranslationBackend::translate(const TranslationRequest& request) {
    nlohmann::json body = {
        {"text", request.text}, {"source", request.source}, {"target", request.target}};
    std::string request_id = request.source + "->" + request.target + ":" +
                             std::to_string(stable_hash64(request.text));
    nlohmann::json reply = http_post_json(endpoint_, "/translate", body, {}, request_id);
    if (!reply.contains("text") || !reply["text"].is_string()) {
        throw BackendError("response missing 'text'", request_id);
    }
    return reply["text"].get<std::string>();
}

std::string back_translate(const std::string& sentence, const std::string& language,
                           TranslationBackend& backend, const std::string& source_language) {
    if (std::find(kPivotLanguages.begin(), kPivotLanguages.end(), language) ==
        kPivotLanguages.end()) {
        throw ConfigError("unsupported pivot language: " + language);
    }
    if (trim(sentence).empty()) throw EmptyInput("back_translate needs a non-empty sentence");

    std::string pivot = backend.translate({sentence, source_language, language});
    std::string round_trip = trim(backend.translate({pivot, language, source_language}));
    if (round_trip.empty()) {
        throw EmptyTranslation("round trip through " + language + " yielded an empty string");
    }
    return round_trip;
}

}  // namespace laclip
