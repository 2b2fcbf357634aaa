#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <atomic>
#include <cstdio>
#include <fstream>
#include <set>
#include <sstream>

#include "laclip/dataset.hpp"
#include "laclip/rewrite.hpp"

using namespace laclip;

namespace {

std::string slurp(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    REQUIRE(in);
    std::ostringstream out;
    out << in.rdbuf();
    return out.str();
}

std::vector<std::string> lines_of(const std::string& text) {
    std::vector<std::string> lines;
    std::size_t start = 0;
    while (start <= text.size()) {
        std::size_t nl = text.find('\n', start);
        if (nl == std::string::npos) {
            lines.push_back(text.substr(start));
            break;
        }
        lines.push_back(text.substr(start, nl - start));
        start = nl + 1;
    }
    return lines;
}

std::vector<AugmentedRecord> caption_records(int n) {
    std::vector<AugmentedRecord> records;
    for (int i = 0; i < n; ++i) {
        AugmentedRecord rec;
        rec.id = "rec" + std::to_string(i);
        rec.image_ref = "img" + std::to_string(i);
        rec.captions.push_back("caption number " + std::to_string(i) + " about a cat");
        records.push_back(std::move(rec));
    }
    return records;
}

std::string serialize(const std::vector<AugmentedRecord>& records) {
    std::string out;
    for (const auto& r : records) out += augmented_record_line(r) + "\n";
    return out;
}

std::string temp_path(const std::string& name) {
    return std::string("/tmp/laclip_test_") + std::to_string(getpid()) + "_" + name;
}

}  // namespace

TEST_CASE("meta pair registry holds 16 sound pairs per strategy") {
    for (Strategy s : kAllStrategies) {
        const auto& pairs = meta_pairs(s);
        CHECK(pairs.size() == 16);
        std::set<std::string_view> sources;
        for (const auto& p : pairs) {
            CHECK(!p.source.empty());
            CHECK(!p.target.empty());
            CHECK(p.strategy == s);
            sources.insert(p.source);
        }
        // Bard reuses one chatgpt source caption; pairs are still distinct.
        CHECK(sources.size() == 16);
    }
    CHECK(parse_strategy("human") == Strategy::human);
    CHECK_THROWS_AS(parse_strategy("gpt5"), UnknownStrategy);
}

TEST_CASE("build_prompt reproduces the golden fixtures byte-exactly") {
    struct Fixture {
        Strategy strategy;
        std::uint64_t seed;
        const char* query;
        const char* file;
    };
    const Fixture fixtures[] = {
        {Strategy::chatgpt, 2, "a dog on grass", "prompt_chatgpt_seed2.txt"},
        {Strategy::bard, 7, "two boats in the harbor", "prompt_bard_seed7.txt"},
        {Strategy::mscoco, 3, "a plate of pasta", "prompt_mscoco_seed3.txt"},
    };
    for (const auto& f : fixtures) {
        Rng rng(f.seed);
        PromptContext ctx = build_prompt(f.strategy, f.query, rng);
        CHECK(ctx.rendered == slurp(std::string(LACLIP_GOLDEN_DIR) + "/" + f.file));
        CHECK(lines_of(ctx.rendered).size() == 5);
    }
}

TEST_CASE("golden chatgpt prompt carries pair 13 and the => layout") {
    Rng rng(2);
    PromptContext ctx = build_prompt(Strategy::chatgpt, "a dog on grass", rng);
    CHECK(ctx.rendered.find("man driving a car through the mountains => A man confidently "
                            "navigating a winding mountain road with breathtaking views.") !=
          std::string::npos);
    CHECK(ctx.rendered.substr(ctx.rendered.size() - 17) == "a dog on grass =>");
}

TEST_CASE("build_prompt determinism and sampling range") {
    Rng a(99), b(99);
    CHECK(build_prompt(Strategy::human, "x y z", a).rendered ==
          build_prompt(Strategy::human, "x y z", b).rendered);

    // Across seeds, prompts differ only in which 3 of the 16 pairs appear.
    const auto& registry = meta_pairs(Strategy::chatgpt);
    std::set<std::string> triples;
    for (std::uint64_t seed = 0; seed < 300; ++seed) {
        Rng rng(seed);
        PromptContext ctx = build_prompt(Strategy::chatgpt, "a dog on grass", rng);
        auto lines = lines_of(ctx.rendered);
        REQUIRE(lines.size() == 5);
        CHECK(lines[0] == kRewriteTaskSentence);
        CHECK(lines[4] == "a dog on grass =>");
        std::set<std::string_view> seen_sources;
        for (int i = 1; i <= 3; ++i) {
            bool in_registry = false;
            for (const auto& p : registry) {
                std::string expected = std::string(p.source) + " => " + std::string(p.target);
                if (lines[static_cast<std::size_t>(i)] == expected) {
                    in_registry = true;
                    seen_sources.insert(p.source);
                    break;
                }
            }
            CHECK(in_registry);
        }
        CHECK(seen_sources.size() == 3);  // sampled without replacement
        triples.insert(lines[1] + "|" + lines[2] + "|" + lines[3]);
    }
    CHECK(triples.size() > 100);  // many distinct ordered triples are reachable

    Rng rng(1);
    CHECK_THROWS_AS(build_prompt(Strategy::chatgpt, "   ", rng), EmptyInput);
}

TEST_CASE("postprocess_completion") {
    CHECK(postprocess_completion("A cat sleeps.\nnext line garbage") == "A cat sleeps.");
    CHECK(postprocess_completion("   spaced   ") == "spaced");
    CHECK(postprocess_completion("=> arrow prefix") == "arrow prefix");
    CHECK(postprocess_completion("arrow suffix =>") == "arrow suffix");
    CHECK(postprocess_completion(" result => tail\nmore") == "result => tail");
    CHECK_THROWS_AS(postprocess_completion("\n\n"), EmptyRewrite);
    CHECK_THROWS_AS(postprocess_completion("  =>  "), EmptyRewrite);
}

TEST_CASE("cache keys: one million distinct tuples, zero collisions") {
    std::vector<std::uint64_t> keys;
    keys.reserve(1000000);
    int i = 0;
    for (std::uint64_t seed = 0; seed < 250; ++seed) {
        for (Strategy s : kAllStrategies) {
            for (int q = 0; q < 1000; ++q) {
                std::string prompt = "prompt body " + std::to_string(q) + " of tuple " +
                                     std::to_string(i++);
                double temp = 0.3 + 0.001 * static_cast<double>(q % 2);
                keys.push_back(rewrite_cache_key(s, prompt, temp, seed));
            }
        }
    }
    REQUIRE(keys.size() == 1000000);
    std::sort(keys.begin(), keys.end());
    CHECK(std::adjacent_find(keys.begin(), keys.end()) == keys.end());
}

TEST_CASE("cache key depends on every tuple field") {
    std::uint64_t base = rewrite_cache_key(Strategy::bard, "p", 0.9, 1);
    CHECK(base != rewrite_cache_key(Strategy::human, "p", 0.9, 1));
    CHECK(base != rewrite_cache_key(Strategy::bard, "q", 0.9, 1));
    CHECK(base != rewrite_cache_key(Strategy::bard, "p", 0.7, 1));
    CHECK(base != rewrite_cache_key(Strategy::bard, "p", 0.9, 2));
}

TEST_CASE("rewrite cache persists appends across reopen") {
    std::string path = temp_path("cache.jsonl");
    std::remove(path.c_str());
    {
        RewriteCache cache(path);
        CHECK_FALSE(cache.lookup(42).has_value());
        cache.append({42, "a rewrite", "fixture", 1700000000});
        cache.append({42, "a different rewrite", "fixture", 1700000001});  // first one wins
        REQUIRE(cache.lookup(42).has_value());
        CHECK(cache.lookup(42)->completion == "a rewrite");
    }
    RewriteCache reopened(path);
    CHECK(reopened.size() == 1);
    REQUIRE(reopened.lookup(42).has_value());
    CHECK(reopened.lookup(42)->completion == "a rewrite");
    CHECK(reopened.lookup(42)->backend_id == "fixture");
    std::remove(path.c_str());
}

TEST_CASE("rewrite_dataset: cold cache, warm cache, fallback") {
    auto records = caption_records(2);
    RewriteOptions options;
    options.strategies = {Strategy::chatgpt, Strategy::bard, Strategy::mscoco, Strategy::human};
    options.seed = 5;
    options.backoff_initial_ms = 0;

    std::atomic<int> calls{0};
    FixtureCompletionBackend counting(
        [&calls](const CompletionRequest& request) {
            ++calls;
            return FixtureCompletionBackend::echo()->complete(request);
        },
        "fixture-echo");

    RewriteCache cache;
    auto [out, report] = rewrite_dataset(records, options, counting, &cache);
    CHECK(calls.load() == 8);  // 2 records x 4 strategies, no cache hits
    CHECK(report.fetched == 8);
    CHECK(report.cached == 0);
    CHECK(report.fallback == 0);
    REQUIRE(out.size() == 2);
    for (std::size_t i = 0; i < out.size(); ++i) {
        CHECK(out[i].rewrite_count() == 4);
        CHECK(out[i].captions[0] == records[i].captions[0]);
        CHECK(out[i].id == records[i].id);
        for (std::size_t s = 0; s < 4; ++s) {
            CHECK(out[i].rewrite_meta[s].strategy ==
                  strategy_name(options.strategies[s]));
        }
    }

    // Immediate re-run against the same cache: zero backend calls,
    // byte-identical output.
    auto [out2, report2] = rewrite_dataset(records, options, counting, &cache);
    CHECK(calls.load() == 8);
    CHECK(report2.cached == 8);
    CHECK(report2.fetched == 0);
    CHECK(serialize(out2) == serialize(out));

    // A backend that only produces empty strings: every rewrite falls back
    // to the original caption.
    FixtureCompletionBackend empty([](const CompletionRequest&) { return std::string("\n\n"); });
    auto [out3, report3] = rewrite_dataset(records, options, empty, nullptr);
    CHECK(report3.fallback == 8);
    CHECK(report3.fallback_ids.size() == 8);
    for (const auto& rec : out3) {
        for (int j = 1; j <= rec.rewrite_count(); ++j) {
            CHECK(rec.captions[static_cast<std::size_t>(j)] == rec.captions[0]);
        }
    }
}

TEST_CASE("rewrite_dataset output is independent of concurrency") {
    auto records = caption_records(40);
    RewriteOptions options;
    options.strategies = {Strategy::chatgpt, Strategy::mscoco};
    options.seed = 11;
    options.backoff_initial_ms = 0;

    auto backend = FixtureCompletionBackend::echo();
    options.concurrency = 1;
    auto [serial, report_a] = rewrite_dataset(records, options, *backend, nullptr);
    options.concurrency = 16;
    auto [parallel, report_b] = rewrite_dataset(records, options, *backend, nullptr);
    CHECK(serialize(serial) == serialize(parallel));
    CHECK(report_a.fetched == report_b.fetched);

    // Output order follows input order.
    for (std::size_t i = 0; i < records.size(); ++i) CHECK(parallel[i].id == records[i].id);
}

TEST_CASE("rewrite_dataset retries then aborts on a persistent backend failure") {
    auto records = caption_records(1);
    RewriteOptions options;
    options.strategies = {Strategy::chatgpt};
    options.max_retries = 3;
    options.backoff_initial_ms = 0;

    std::atomic<int> attempts{0};
    FixtureCompletionBackend down(
        [&attempts](const CompletionRequest&) -> std::string {
            ++attempts;
            throw BackendError("unreachable", "req-7");
        },
        "fixture-down");
    RewriteCache cache;
    CHECK_THROWS_AS(rewrite_dataset(records, options, down, &cache), BackendError);
    CHECK(attempts.load() == 4);  // initial try plus three retries
    CHECK(cache.size() == 0);     // nothing partial was cached

    // A transient failure heals: two errors, then success.
    std::atomic<int> n{0};
    FixtureCompletionBackend flaky(
        [&n](const CompletionRequest& request) -> std::string {
            if (n.fetch_add(1) < 2) throw BackendError("blip", "req-8");
            return FixtureCompletionBackend::echo()->complete(request);
        },
        "fixture-flaky");
    auto [out, report] = rewrite_dataset(records, options, flaky, nullptr);
    CHECK(out.at(0).rewrite_count() == 1);
    CHECK(report.fetched == 1);
}

TEST_CASE("rewrite_dataset validates options") {
    auto records = caption_records(1);
    auto backend = FixtureCompletionBackend::echo();
    RewriteOptions options;
    CHECK_THROWS_AS(rewrite_dataset(records, options, *backend, nullptr), ConfigError);
    options.strategies = {Strategy::human};
    options.concurrency = 0;
    CHECK_THROWS_AS(rewrite_dataset(records, options, *backend, nullptr), ConfigError);
}
