#include "laclip/tokenizer.hpp"

#include <cctype>

namespace laclip {

namespace {

bool is_word_char(char c) {
    unsigned char u = static_cast<unsigned char>(c);
    if (u >= 0x80) return true;  // keep non-ascii bytes inside words
    return std::isalnum(u) != 0 || c == '\'';
}

}  // namespace

TokenSeq tokenize(const std::string& text, const TokenizerConfig& config) {
    config.validate();
    const std::string lowered = to_lower(text);

    std::vector<std::string> words;
    std::size_t i = 0;
    while (i < lowered.size()) {
        while (i < lowered.size() && !is_word_char(lowered[i])) ++i;
        std::size_t j = i;
        while (j < lowered.size() && is_word_char(lowered[j])) ++j;
        if (j > i) words.emplace_back(lowered.substr(i, j - i));
        i = j;
    }

    const std::size_t max_words = static_cast<std::size_t>(config.context_len) - 2;
    if (words.size() > max_words) words.resize(max_words);

    TokenSeq seq;
    seq.ids.assign(static_cast<std::size_t>(config.context_len), kPadToken);
    seq.ids[0] = kBosToken;
    const auto word_range = static_cast<std::uint64_t>(config.vocab_size - kFirstWordToken);
    for (std::size_t w = 0; w < words.size(); ++w) {
        seq.ids[w + 1] = kFirstWordToken +
                         static_cast<std::int32_t>(stable_hash64(words[w]) % word_range);
    }
    seq.ids[words.size() + 1] = kEosToken;
    return seq;
}

}  // namespace laclip
