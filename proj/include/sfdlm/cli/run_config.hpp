#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "sfdlm/diffusion/schedule.hpp"
#include "sfdlm/model/config.hpp"
#include "sfdlm/training/train.hpp"

namespace sfdlm::cli {

/// Every tunable of a run, read from one flat JSON object.
struct RunConfig {
    // model (vocab_size comes from the tokenizer)
    std::size_t seq_len = 128;
    std::size_t embed_dim = 64;
    std::size_t unet_levels = 2;
    std::size_t blocks_per_level = 2;
    std::size_t ssm_state_dim = 4;
    std::size_t ssm_kernel_len = 16;
    std::size_t fourier_hidden = 128;
    bool fourier_after_ssm = false;

    // noise schedule
    std::size_t diffusion_steps = 8;
    double beta_start = 0.1;
    double beta_end = 0.3;
    /// Explicit betas; replaces the linear ramp when set.
    std::optional<std::vector<double>> betas;

    // tokenizer
    std::string tokenizer = "char";  // "char" | "bpe"
    std::size_t bpe_merges = 0;

    // data
    std::string corpus = "data/corpus.txt";
    std::string output_dir = "runs/default";
    double heldout_fraction = 0.1;
    std::size_t window_stride = 32;
    std::size_t eval_max_windows = 64;

    // training
    std::uint64_t seed = 0;
    std::size_t batch_size = 16;
    std::uint64_t total_steps = 2000;
    double lr = 3e-4;
    std::uint64_t warmup_steps = 100;
    double weight_decay = 0.01;
    double clip_norm = 1.0;
    std::uint64_t checkpoint_interval = 500;
    std::uint64_t eval_interval = 500;
    std::uint64_t log_interval = 1;
    bool per_batch_t = false;

    /// Throws InputError describing the first invalid field.
    void validate() const;

    model::ModelConfig model_config(std::size_t vocab_size) const;
    training::TrainConfig train_config() const;
    diffusion::NoiseSchedule schedule() const;

    bool operator==(const RunConfig&) const = default;
};

/// Parses a JSON object; unknown keys and mistyped values raise InputError.
/// Missing keys keep their defaults.
RunConfig parse_run_config(const std::string& json_text);
RunConfig load_run_config(const std::string& path);

/// Pretty-printed JSON with every key.
std::string to_json(const RunConfig& config);

/// Applies "key=value"; the value is read as JSON when it parses, otherwise as
/// a plain string.
void apply_override(RunConfig& config, const std::string& assignment);

}  // namespace sfdlm::cli
