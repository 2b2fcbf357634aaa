#pragma once

#include <string>
#include <vector>

#include "laclip/dataset.hpp"
#include "laclip/encoder.hpp"

namespace laclip {

enum class TrainMode { clip, laclip, laclip_mt };

TrainMode parse_train_mode(std::string_view name);
std::string_view train_mode_name(TrainMode mode);

struct TrainConfig {
    TrainMode mode = TrainMode::clip;
    EncoderConfig encoder;
    AdamHyper hyper;  // warmup_steps/total_steps are derived from the epochs below
    int epochs = 20;
    int warmup_epochs = 1;
    int batch_size = 256;
    double aug_sigma = 0.05;
    double aug_dropout = 0.1;
    bool mt_paper_scaling = false;
    std::uint64_t seed = 0;

    void validate() const;
};

// Canonical 64-bit hash of the full configuration, hex-encoded.
std::string config_hash_of(const TrainConfig& config);

struct MetricsRow {
    std::int64_t step = 0;
    int epoch = 0;
    double loss = 0.0;
    double l_image = 0.0;
    double l_text = 0.0;
    double tau = 0.0;
    double lr = 0.0;
};

struct TrainResult {
    EncoderParams params;
    std::vector<MetricsRow> metrics;
    std::string config_hash;
};

// Deterministic given (config.seed, config): the epoch order, caption
// choices and feature augmentation all flow from derived seeds.
TrainResult train(const TrainConfig& config, const std::vector<AugmentedRecord>& records,
                  const FeatureStore& features);

// step,epoch,loss,l_image,l_text,tau,lr with 17-digit doubles.
void write_metrics_csv(const std::string& path, const std::vector<MetricsRow>& metrics);

// Versioned binary: JSON header then raw little-endian float64 tensors.
// The header also records the tokenizer context length so evaluation can
// rebuild the text pipeline from the file alone.
void save_checkpoint(const std::string& path, const EncoderParams& params,
                     const std::string& config_hash, int context_len = 77);
EncoderParams load_checkpoint(const std::string& path, std::string* config_hash = nullptr,
                              int* context_len = nullptr);

}  // namespace laclip
