#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include "laclip/common.hpp"
#include "laclip/meta_pairs.hpp"
#include "laclip/textaug.hpp"

namespace laclip {

// The instruction line of every rewriting prompt. The wording is a fixed
// project constant so prompt fixtures stay byte-exact.
constexpr std::string_view kRewriteTaskSentence =
    "Rewrite the following image descriptions, keeping the key objects and meaning.";

struct PromptContext {
    Strategy strategy;
    std::array<MetaPair, 3> examples;  // distinct pairs of one strategy
    std::string query;
    std::string rendered;  // task line, three "src => tgt" lines, "query =>"
};

// Samples 3 of the strategy's 16 pairs without replacement and renders the
// five-line prompt. Throws UnknownStrategy / EmptyInput.
PromptContext build_prompt(Strategy strategy, const std::string& query, Rng& rng);
PromptContext build_prompt(std::string_view strategy, const std::string& query, Rng& rng);

// Cut the completion at the first newline, strip stray "=>" markers, trim.
// Throws EmptyRewrite when nothing is left.
std::string postprocess_completion(const std::string& raw);

// Wire contract for the completion service:
// {prompt, temperature, max_tokens, stop} -> {text}.
struct CompletionRequest {
    std::string prompt;
    double temperature = 0.9;
    int max_tokens = 64;
    std::string stop = "\n";
};

class CompletionBackend {
public:
    virtual ~CompletionBackend() = default;
    virtual std::string complete(const CompletionRequest& request) = 0;
    virtual std::string id() const = 0;
};

// Deterministic in-process backend for tests; wraps any callable.
class FixtureCompletionBackend : public CompletionBackend {
public:
    using Fn = std::function<std::string(const CompletionRequest&)>;
    explicit FixtureCompletionBackend(Fn fn, std::string id = "fixture")
        : fn_(std::move(fn)), id_(std::move(id)) {}
    std::string complete(const CompletionRequest& request) override { return fn_(request); }
    std::string id() const override { return id_; }

    // Echoes the query line back, title-cased, which makes cache hits and
    // fallbacks easy to stage in tests.
    static std::unique_ptr<FixtureCompletionBackend> echo();

private:
    Fn fn_;
    std::string id_;
};

// POSTs the request to COMPLETION_ENDPOINT (+ optional bearer token from
// COMPLETION_API_KEY), expects {text}.
class HttpCompletionBackend : public CompletionBackend {
public:
    explicit HttpCompletionBackend(std::string endpoint = {}, std::string api_key = {});
    std::string complete(const CompletionRequest& request) override;
    std::string id() const override { return "http:" + endpoint_; }

private:
    std::string endpoint_;
    std::string api_key_;
};

// 64-bit content key over (strategy, prompt bytes, temperature, seed).
std::uint64_t rewrite_cache_key(Strategy strategy, const std::string& prompt, double temperature,
                                std::uint64_t seed);

struct RewriteCacheEntry {
    std::uint64_t key = 0;
    std::string completion;
    std::string backend_id;
    std::int64_t created_at = 0;  // unix seconds
};

// Append-only completion cache: JSONL log on disk, hash map in memory.
// Reads are lock-free after load; appends are serialized.
class RewriteCache {
public:
    // In-memory only.
    RewriteCache() = default;
    // Backed by a log file; replays any existing entries.
    explicit RewriteCache(std::string path);

    std::optional<RewriteCacheEntry> lookup(std::uint64_t key) const;
    void append(const RewriteCacheEntry& entry);
    std::size_t size() const { return entries_.size(); }

private:
    std::string path_;
    std::map<std::uint64_t, RewriteCacheEntry> entries_;
    mutable std::mutex mutex_;
};

struct RewriteOptions {
    std::vector<Strategy> strategies;
    double temperature = 0.9;
    int max_tokens = 64;
    int concurrency = 1;
    int max_retries = 3;
    std::uint64_t seed = 0;
    // Exponential backoff base between retries; tests set it to zero.
    int backoff_initial_ms = 250;
};

struct RewriteReport {
    std::size_t cached = 0;
    std::size_t fetched = 0;
    std::size_t fallback = 0;  // empty completions replaced by captions[0]
    std::vector<std::string> fallback_ids;
};

// One rewrite per (record, strategy). Output order follows the input order
// regardless of completion order; cache hits skip backend calls. Throws
// BackendError once retries are exhausted, leaving the cache consistent.
std::pair<std::vector<AugmentedRecord>, RewriteReport> rewrite_dataset(
    const std::vector<AugmentedRecord>& records, const RewriteOptions& options,
    CompletionBackend& backend, RewriteCache* cache = nullptr);

}  // namespace laclip
