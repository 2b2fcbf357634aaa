#pragma once

#include <cstdint>
#include <random>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Core>

namespace laclip {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

// Base class for all library errors.
class Error : public std::runtime_error {
public:
    explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

class ShapeMismatch : public Error {
public:
    explicit ShapeMismatch(const std::string& msg) : Error("shape mismatch: " + msg) {}
};

class ZeroNorm : public Error {
public:
    explicit ZeroNorm(Eigen::Index row)
        : Error("row " + std::to_string(row) + " has zero norm"), row_(row) {}
    Eigen::Index row() const { return row_; }

private:
    Eigen::Index row_;
};

class EmptyInput : public Error {
public:
    explicit EmptyInput(const std::string& msg) : Error("empty input: " + msg) {}
};

class ParseError : public Error {
public:
    ParseError(const std::string& msg, std::size_t line)
        : Error("parse error at line " + std::to_string(line) + ": " + msg), line_(line) {}
    std::size_t line() const { return line_; }

private:
    std::size_t line_;
};

class DuplicateId : public Error {
public:
    explicit DuplicateId(const std::string& id) : Error("duplicate record id: " + id), id_(id) {}
    const std::string& id() const { return id_; }

private:
    std::string id_;
};

class UnknownStrategy : public Error {
public:
    explicit UnknownStrategy(const std::string& name) : Error("unknown strategy: " + name) {}
};

class BackendError : public Error {
public:
    BackendError(const std::string& msg, const std::string& request_id)
        : Error("backend error [" + request_id + "]: " + msg), request_id_(request_id) {}
    const std::string& request_id() const { return request_id_; }

private:
    std::string request_id_;
};

class EmptyTranslation : public Error {
public:
    explicit EmptyTranslation(const std::string& msg) : Error("empty translation: " + msg) {}
};

class EmptyRewrite : public Error {
public:
    EmptyRewrite() : Error("completion post-processing produced an empty rewrite") {}
};

class InsufficientSamples : public Error {
public:
    explicit InsufficientSamples(int class_id)
        : Error("class " + std::to_string(class_id) + " has too few samples for the episode"),
          class_id_(class_id) {}
    int class_id() const { return class_id_; }

private:
    int class_id_;
};

class NonFiniteGrad : public Error {
public:
    explicit NonFiniteGrad(const std::string& tensor) : Error("non-finite gradient in " + tensor) {}
};

class ConfigError : public Error {
public:
    explicit ConfigError(const std::string& msg) : Error("config error: " + msg) {}
};

class IoError : public Error {
public:
    explicit IoError(const std::string& msg) : Error("io error: " + msg) {}
};

// FNV-1a, the one stable 64-bit hash used everywhere a persistent or
// cross-run-stable key is needed (tokenizer ids, shard assignment,
// rewrite-cache keys, derived rng seeds).
constexpr std::uint64_t kFnvOffset = 1469598103934665603ull;
constexpr std::uint64_t kFnvPrime = 1099511628211ull;

constexpr std::uint64_t fnv1a64(std::string_view bytes, std::uint64_t h = kFnvOffset) {
    for (unsigned char c : bytes) {
        h ^= static_cast<std::uint64_t>(c);
        h *= kFnvPrime;
    }
    return h;
}

inline std::uint64_t fnv1a64_u64(std::uint64_t v, std::uint64_t h = kFnvOffset) {
    for (int i = 0; i < 8; ++i) {
        h ^= (v >> (8 * i)) & 0xffu;
        h *= kFnvPrime;
    }
    return h;
}

inline std::uint64_t stable_hash64(std::string_view s) { return fnv1a64(s); }

// All randomness flows through mt19937_64 plus the explicit helpers below.
// std::*_distribution is avoided on purpose: its draw sequences are
// implementation-defined and would break byte-identical artifacts.
using Rng = std::mt19937_64;

// One generator call, index in [0, n). The modulo bias is < n / 2^64.
inline std::size_t uniform_index(Rng& rng, std::size_t n) {
    return static_cast<std::size_t>(rng() % n);
}

// Uniform double in [0, 1) with 53 random bits.
inline double uniform_real01(Rng& rng) {
    return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

// Standard normal via Box-Muller; consumes exactly two generator calls.
inline double normal01(Rng& rng) {
    double u1 = uniform_real01(rng);
    double u2 = uniform_real01(rng);
    if (u1 <= 0.0) u1 = 0x1.0p-53;
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586476925286766559 * u2);
}

// Seed for a derived stream, stable across runs and shard layouts.
inline std::uint64_t derive_seed(std::uint64_t base, std::string_view tag) {
    return fnv1a64(tag, fnv1a64_u64(base));
}

// --- small string helpers shared by tokenizer / augmenters / parsers ---

inline std::string trim(std::string_view s) {
    std::size_t b = s.find_first_not_of(" \t\r\n");
    if (b == std::string_view::npos) return {};
    std::size_t e = s.find_last_not_of(" \t\r\n");
    return std::string(s.substr(b, e - b + 1));
}

inline std::string to_lower(std::string_view s) {
    std::string out(s);
    for (char& c : out) {
        if (c >= 'A' && c <= 'Z') c = static_cast<char>(c - 'A' + 'a');
    }
    return out;
}

inline std::vector<std::string> split_whitespace(std::string_view s) {
    std::vector<std::string> words;
    std::size_t i = 0;
    while (i < s.size()) {
        while (i < s.size() && (s[i] == ' ' || s[i] == '\t' || s[i] == '\r' || s[i] == '\n')) ++i;
        std::size_t j = i;
        while (j < s.size() && s[j] != ' ' && s[j] != '\t' && s[j] != '\r' && s[j] != '\n') ++j;
        if (j > i) words.emplace_back(s.substr(i, j - i));
        i = j;
    }
    return words;
}

inline std::string join(const std::vector<std::string>& words, std::string_view sep = " ") {
    std::string out;
    for (std::size_t i = 0; i < words.size(); ++i) {
        if (i) out += sep;
        out += words[i];
    }
    return out;
}

// Fill every {class} slot of a caption or prompt template.
inline std::string instantiate_template(const std::string& tmpl, const std::string& class_name) {
    std::string out = tmpl;
    std::size_t pos;
    while ((pos = out.find("{class}")) != std::string::npos) {
        out.replace(pos, 7, class_name);
    }
    return out;
}

}  // namespace laclip
