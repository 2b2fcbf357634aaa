#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "laclip/common.hpp"

namespace laclip {

constexpr std::int32_t kPadToken = 0;
constexpr std::int32_t kBosToken = 1;
constexpr std::int32_t kEosToken = 2;
constexpr std::int32_t kFirstWordToken = 3;

struct TokenizerConfig {
    int vocab_size = 49408;
    int context_len = 77;

    void validate() const {
        if (vocab_size <= kFirstWordToken) throw ConfigError("vocab_size must exceed 3");
        if (context_len < 2) throw ConfigError("context_len must fit bos and eos");
    }
};

// Fixed-length id sequence: bos, word ids, eos, then pads.
struct TokenSeq {
    std::vector<std::int32_t> ids;

    // Count of non-pad ids (bos + words + eos).
    int length() const {
        int n = 0;
        for (auto id : ids) {
            if (id != kPadToken) ++n;
        }
        return n;
    }
};

// Lowercase, split on whitespace and punctuation, hash each word into
// [3, vocab_size). Words are truncated so bos + words + eos fits
// context_len; eos is always present.
TokenSeq tokenize(const std::string& text, const TokenizerConfig& config);

}  // namespace laclip
