#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "laclip/common.hpp"
#include "laclip/textaug.hpp"
#include "laclip/tokenizer.hpp"

namespace laclip {

// Every on-disk format starts with this line.
constexpr std::string_view kFormatVersionLine = "#laclip-kit v1";

// --- caption / augmented record files (one JSON object per line) ---

// {id, image_ref, caption} lines -> records with M=0.
// Throws ParseError(line) / DuplicateId.
std::vector<AugmentedRecord> read_caption_file(const std::string& path);
void write_caption_file(const std::string& path, const std::vector<AugmentedRecord>& records);

// {id, image_ref, captions, rewrite_meta} lines. Canonical encoding:
// sorted keys, no insignificant whitespace, newline-terminated.
std::vector<AugmentedRecord> read_augmented_file(const std::string& path);
void write_augmented_file(const std::string& path, const std::vector<AugmentedRecord>& records);
std::string augmented_record_line(const AugmentedRecord& record);

// --- sharding ---

std::size_t shard_index(const std::string& id, std::size_t n_shards);

// Partition by stable hash of id; the union equals the input as a multiset.
std::vector<std::vector<AugmentedRecord>> shard_records(
    const std::vector<AugmentedRecord>& records, std::size_t n_shards);

// --- feature sidecar ---

// Rows of image features keyed by id. On disk: version line, a JSON header
// {count, dim, ids_sha}, then count*dim little-endian float32 values. The id
// order itself lives in whatever record file the sidecar accompanies;
// ids_sha pins it.
struct FeatureStore {
    int dim = 0;
    std::vector<std::string> ids;
    Matrix rows;  // count x dim

    const Eigen::Index count() const { return rows.rows(); }
    Eigen::Index row_for(const std::string& id) const;
    Matrix gather(const std::vector<std::string>& keys) const;

private:
    mutable std::map<std::string, Eigen::Index> index_;
};

std::string ids_sha256(const std::vector<std::string>& ids);
void write_feature_store(const std::string& path, const FeatureStore& store);
FeatureStore read_feature_store(const std::string& path, std::vector<std::string> expected_ids);

// --- labels (evaluation sidecar, one {id, label} object per line) ---

void write_labels_file(const std::string& path, const std::vector<std::string>& ids,
                       const std::vector<int>& labels);
std::pair<std::vector<std::string>, std::vector<int>> read_labels_file(const std::string& path);

void write_class_names(const std::string& path, const std::vector<std::string>& names);
std::vector<std::string> read_class_names(const std::string& path);

// --- epoch batching ---

struct BatchPairs {
    Matrix image_features;                    // N x D_in
    std::vector<TokenSeq> tokens;             // chosen caption per record
    std::vector<std::string> record_ids;      // N
    std::vector<std::vector<TokenSeq>> text_slots;  // all M+1 captions (CaptionChoice::all only)
};

enum class CaptionChoice {
    original,  // always captions[0]
    sampled,   // uniform over captions (one rng draw per record per epoch)
    all,       // every caption slot, for the multi-text loss
};

// One epoch over the records: a seed-determined permutation cut into
// batches of batch_size, final short batch kept.
class BatchIterator {
public:
    BatchIterator(const std::vector<AugmentedRecord>& records, const FeatureStore& features,
                  TokenizerConfig tokenizer, int batch_size, std::uint64_t epoch_seed,
                  CaptionChoice choice);

    std::optional<BatchPairs> next();

private:
    const std::vector<AugmentedRecord>& records_;
    const FeatureStore& features_;
    TokenizerConfig tokenizer_;
    int batch_size_;
    std::uint64_t epoch_seed_;
    CaptionChoice choice_;
    std::vector<std::size_t> order_;
    std::size_t cursor_ = 0;
};

// --- synthetic paired data ---

struct SyntheticSpec {
    int n_classes = 32;
    int samples_per_class = 64;
    int feature_dim = 64;
    std::vector<std::string> caption_templates;     // must contain a {class} slot
    std::vector<std::string> paraphrase_templates;  // disjoint from caption_templates
    double noise_sigma = 0.1;
    int test_samples_per_class = 16;
    int rewrites_per_caption = 4;  // paraphrase-template rewrites on train records

    void validate() const;
};

SyntheticSpec default_synthetic_spec();

struct SyntheticData {
    std::vector<AugmentedRecord> train;          // with paraphrase rewrites attached
    std::vector<AugmentedRecord> test;           // caption-template captions
    std::vector<AugmentedRecord> test_shifted;   // paraphrase-template captions, same samples
    FeatureStore train_features;
    FeatureStore test_features;
    std::vector<int> train_labels;  // parallel to train
    std::vector<int> test_labels;   // parallel to test / test_shifted
    std::vector<std::string> class_names;
};

// Class means are orthonormalized when feature_dim allows; each sample is
// unit-norm(mu_c + noise_sigma * eps). Deterministic given seed.
SyntheticData gen_synthetic(const SyntheticSpec& spec, std::uint64_t seed);

}  // namespace laclip
