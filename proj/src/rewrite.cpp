#include "laclip/rewrite.hpp"

#include <atomic>
#include <chrono>
#include <fstream>
#include <thread>

#include <nlohmann/json.hpp>

#include "laclip/http_util.hpp"

namespace laclip {

using nlohmann::json;

PromptContext build_prompt(Strategy strategy, const std::string& query, Rng& rng) {
    if (trim(query).empty()) throw EmptyInput("prompt query is empty");
    const auto& pairs = meta_pairs(strategy);

    // Partial Fisher-Yates over pair indices: three distinct picks.
    std::array<std::size_t, 16> idx{};
    for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
    PromptContext ctx;
    ctx.strategy = strategy;
    ctx.query = query;
    for (std::size_t k = 0; k < 3; ++k) {
        std::size_t j = k + uniform_index(rng, idx.size() - k);
        std::swap(idx[k], idx[j]);
        ctx.examples[k] = pairs[idx[k]];
    }

    std::string& r = ctx.rendered;
    r.append(kRewriteTaskSentence);
    for (const auto& ex : ctx.examples) {
        r.push_back('\n');
        r.append(ex.source);
        r.append(" => ");
        r.append(ex.target);
    }
    r.push_back('\n');
    r.append(query);
    r.append(" =>");
    return ctx;
}

PromptContext build_prompt(std::string_view strategy, const std::string& query, Rng& rng) {
    return build_prompt(parse_strategy(strategy), query, rng);
}

std::string postprocess_completion(const std::string& raw) {
    std::string line = raw.substr(0, raw.find('\n'));
    std::string out = trim(line);
    if (out.rfind("=>", 0) == 0) out = trim(out.substr(2));
    if (out.size() >= 2 && out.compare(out.size() - 2, 2, "=>") == 0) {
        out = trim(out.substr(0, out.size() - 2));
    }
    if (out.empty()) throw EmptyRewrite();
    return out;
}

std::unique_ptr<FixtureCompletionBackend> FixtureCompletionBackend::echo() {
    return std::make_unique<FixtureCompletionBackend>(
        [](const CompletionRequest& request) {
            // Last prompt line is "query =>"; answer with a title-cased echo.
            auto nl = request.prompt.rfind('\n');
            std::string query = request.prompt.substr(nl == std::string::npos ? 0 : nl + 1);
            if (query.size() >= 3 && query.compare(query.size() - 3, 3, " =>") == 0) {
                query.resize(query.size() - 3);
            }
            if (!query.empty() && query[0] >= 'a' && query[0] <= 'z') {
                query[0] = static_cast<char>(query[0] - 'a' + 'A');
            }
            return " " + query + ", rephrased.";
        },
        "fixture-echo");
}

HttpCompletionBackend::HttpCompletionBackend(std::string endpoint, std::string api_key)
    : endpoint_(std::move(endpoint)), api_key_(std::move(api_key)) {
    if (endpoint_.empty()) {
        const char* env = std::getenv("COMPLETION_ENDPOINT");
        if (env) endpoint_ = env;
    }
    if (api_key_.empty()) {
        const char* env = std::getenv("COMPLETION_API_KEY");
        if (env) api_key_ = env;
    }
    if (endpoint_.empty()) {
        throw ConfigError("no completion endpoint given and COMPLETION_ENDPOINT is unset");
    }
}

std::string HttpCompletionBackend::complete(const CompletionRequest& request) {
    json body = {{"prompt", request.prompt},
                 {"temperature", request.temperature},
                 {"max_tokens", request.max_tokens},
                 {"stop", request.stop}};
    std::map<std::string, std::string> headers;
    if (!api_key_.empty()) headers["Authorization"] = "Bearer " + api_key_;
    std::string request_id = "completion:" + std::to_string(stable_hash64(request.prompt));
    json reply = http_post_json(endpoint_, "/complete", body, headers, request_id);
    if (!reply.contains("text") || !reply["text"].is_string()) {
        throw BackendError("response missing 'text'", request_id);
    }
    return reply["text"].get<std::string>();
}

std::uint64_t rewrite_cache_key(Strategy strategy, const std::string& prompt, double temperature,
                                std::uint64_t seed) {
    // Canonical byte encoding: fields joined by 0x1f, temperature printed
    // with 17 significant digits.
    char temp_buf[40];
    std::snprintf(temp_buf, sizeof(temp_buf), "%.17g", temperature);
    std::string bytes;
    bytes.append(strategy_name(strategy));
    bytes.push_back('\x1f');
    bytes.append(prompt);
    bytes.push_back('\x1f');
    bytes.append(temp_buf);
    bytes.push_back('\x1f');
    bytes.append(std::to_string(seed));
    return fnv1a64(bytes);
}

RewriteCache::RewriteCache(std::string path) : path_(std::move(path)) {
    std::ifstream in(path_);
    if (!in) return;  // fresh cache file, created on first append
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (trim(line).empty()) continue;
        json j = json::parse(line, nullptr, false);
        if (j.is_discarded() || !j.contains("key") || !j.contains("completion")) {
            throw ParseError("bad cache entry", lineno);
        }
        RewriteCacheEntry entry;
        entry.key = j["key"].get<std::uint64_t>();
        entry.completion = j["completion"].get<std::string>();
        entry.backend_id = j.value("backend_id", "");
        entry.created_at = j.value("created_at", std::int64_t{0});
        entries_.emplace(entry.key, std::move(entry));
    }
}

std::optional<RewriteCacheEntry> RewriteCache::lookup(std::uint64_t key) const {
    std::lock_guard<std::mutex> lock(mutex_);
    auto it = entries_.find(key);
    if (it == entries_.end()) return std::nullopt;
    return it->second;
}

void RewriteCache::append(const RewriteCacheEntry& entry) {
    std::lock_guard<std::mutex> lock(mutex_);
    auto [it, inserted] = entries_.emplace(entry.key, entry);
    if (!inserted) return;  // concurrent fetch of the same key; keep the first
    if (path_.empty()) return;
    std::ofstream out(path_, std::ios::app);
    if (!out) throw IoError("cannot append to cache " + path_);
    json j;
    j["backend_id"] = entry.backend_id;
    j["completion"] = entry.completion;
    j["created_at"] = entry.created_at;
    j["key"] = entry.key;
    out << j.dump() << "\n";
}

namespace {

struct WorkItem {
    std::size_t record_index;
    std::size_t strategy_index;
};

struct WorkResult {
    std::string rewrite;
    std::string backend_id;
    bool fallback = false;
    bool cached = false;
    bool fetched = false;
};

WorkResult run_one(const AugmentedRecord& record, Strategy strategy,
                   const RewriteOptions& options, CompletionBackend& backend,
                   RewriteCache* cache) {
    WorkResult result;
    std::string completion;
    bool have_completion = false;

    for (int attempt = 0; attempt <= options.max_retries && !have_completion; ++attempt) {
        // Fresh demonstration triple per attempt, stable across shard
        // layouts and thread interleavings.
        std::string tag = record.id + "|" + std::string(strategy_name(strategy)) + "|attempt" +
                          std::to_string(attempt);
        Rng rng(derive_seed(options.seed, tag));
        PromptContext prompt = build_prompt(strategy, record.captions.at(0), rng);
        std::uint64_t key =
            rewrite_cache_key(strategy, prompt.rendered, options.temperature, options.seed);

        if (cache) {
            if (auto hit = cache->lookup(key)) {
                completion = hit->completion;
                result.backend_id = hit->backend_id;
                result.cached = true;
                have_completion = true;
                break;
            }
        }
        try {
            completion = backend.complete(
                {prompt.rendered, options.temperature, options.max_tokens, "\n"});
            result.backend_id = backend.id();
            result.fetched = true;
            have_completion = true;
            if (cache) {
                auto now = std::chrono::system_clock::now().time_since_epoch();
                cache->append(
                    {key, completion, backend.id(),
                     std::chrono::duration_cast<std::chrono::seconds>(now).count()});
            }
        } catch (const BackendError&) {
            if (attempt == options.max_retries) throw;
            std::this_thread::sleep_for(
                std::chrono::milliseconds(options.backoff_initial_ms << attempt));
        }
    }

    try {
        result.rewrite = postprocess_completion(completion);
    } catch (const EmptyRewrite&) {
        result.rewrite = record.captions.at(0);
        result.fallback = true;
    }
    return result;
}

}  // namespace

std::pair<std::vector<AugmentedRecord>, RewriteReport> rewrite_dataset(
    const std::vector<AugmentedRecord>& records, const RewriteOptions& options,
    CompletionBackend& backend, RewriteCache* cache) {
    if (options.strategies.empty()) throw ConfigError("rewrite needs at least one strategy");
    if (options.concurrency < 1) throw ConfigError("concurrency must be >= 1");
    for (const auto& rec : records) rec.validate();

    std::vector<WorkItem> items;
    items.reserve(records.size() * options.strategies.size());
    for (std::size_t r = 0; r < records.size(); ++r) {
        for (std::size_t s = 0; s < options.strategies.size(); ++s) items.push_back({r, s});
    }

    std::vector<WorkResult> results(items.size());
    std::atomic<std::size_t> next{0};
    std::atomic<bool> failed{false};
    std::exception_ptr first_error;
    std::mutex error_mutex;

    auto worker = [&]() {
        while (!failed.load()) {
            std::size_t i = next.fetch_add(1);
            if (i >= items.size()) return;
            const WorkItem& item = items[i];
            try {
                results[i] = run_one(records[item.record_index],
                                     options.strategies[item.strategy_index], options, backend,
                                     cache);
            } catch (...) {
                std::lock_guard<std::mutex> lock(error_mutex);
                if (!first_error) first_error = std::current_exception();
                failed.store(true);
                return;
            }
        }
    };

    const int n_threads = std::min<int>(options.concurrency, static_cast<int>(items.size()));
    if (n_threads <= 1) {
        worker();
    } else {
        std::vector<std::thread> threads;
        threads.reserve(static_cast<std::size_t>(n_threads));
        for (int t = 0; t < n_threads; ++t) threads.emplace_back(worker);
        for (auto& t : threads) t.join();
    }
    if (first_error) std::rethrow_exception(first_error);

    RewriteReport report;
    std::vector<AugmentedRecord> out;
    out.reserve(records.size());
    for (std::size_t r = 0; r < records.size(); ++r) {
        AugmentedRecord rec;
        rec.id = records[r].id;
        rec.image_ref = records[r].image_ref;
        rec.captions.push_back(records[r].captions.at(0));
        for (std::size_t s = 0; s < options.strategies.size(); ++s) {
            const WorkResult& wr = results[r * options.strategies.size() + s];
            rec.captions.push_back(wr.rewrite);
            rec.rewrite_meta.push_back(
                {std::string(strategy_name(options.strategies[s])), wr.backend_id});
            report.cached += wr.cached ? 1 : 0;
            report.fetched += wr.fetched ? 1 : 0;
            if (wr.fallback) {
                ++report.fallback;
                report.fallback_ids.push_back(rec.id);
            }
        }
        rec.validate();
        out.push_back(std::move(rec));
    }
    return {std::move(out), std::move(report)};
}

}  // namespace laclip
