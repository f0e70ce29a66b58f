#pragma once

#include <cstdint>
#include <vector>

#include "sfdlm/diffusion/schedule.hpp"
#include "sfdlm/model/unet.hpp"
#include "sfdlm/rng.hpp"
#include "sfdlm/training/optimizer.hpp"
#include "sfdlm/types.hpp"

namespace sfdlm::training {

struct TrainConfig {
    std::size_t batch_size = 16;
    std::uint64_t total_steps = 2000;
    double lr = 3e-4;
    std::uint64_t warmup_steps = 100;
    double weight_decay = 0.01;
    double clip_norm = 1.0;
    std::uint64_t seed = 0;
    std::uint64_t checkpoint_interval = 500;
    std::uint64_t eval_interval = 500;
    /// One diffusion step shared by the whole batch instead of one per sequence.
    bool per_batch_t = false;

    /// Throws std::invalid_argument on the first violated constraint.
    void validate() const;
    AdamWConfig optimizer() const;

    bool operator==(const TrainConfig&) const = default;
};

struct StepResult {
    double loss = 0.0;
    double t_mean = 0.0;
    double lr = 0.0;
    double grad_norm = 0.0;
};

/// Samples t per sequence (or per batch), builds (x^{t+1}, x^t) pairs,
/// minimizes the mean cross-entropy of unet_forward(x^{t+1}, t) against x^t
/// and applies one AdamW update. Throws NumericalError on a non-finite loss.
StepResult train_step(model::Model& model, const std::vector<TokenSequence>& batch,
                      const diffusion::NoiseSchedule& schedule, OptimizerState& optimizer, Rng& rng,
                      bool per_batch_t = false);

/// Drives train_step over a fixed window set. Every step's batch and
/// corruption are derived from (seed, global step), so a run resumed from a
/// checkpoint continues exactly like an uninterrupted one.
class Trainer {
public:
    Trainer(model::Model& model, OptimizerState& optimizer, const diffusion::NoiseSchedule& schedule,
            TrainConfig config, const std::vector<TokenSequence>& windows, std::uint64_t global_step = 0);

    StepResult step();
    std::uint64_t global_step() const { return global_step_; }

private:
    model::Model& model_;
    OptimizerState& optimizer_;
    const diffusion::NoiseSchedule& schedule_;
    TrainConfig config_;
    const std::vector<TokenSequence>& windows_;
    std::uint64_t global_step_;
};

struct EvalResult {
    /// Mean denoising cross-entropy for each t in [0, T).
    std::vector<double> ce_per_step;
    double mean_ce = 0.0;
    /// exp(mean_ce). A denoising metric, not an autoregressive perplexity.
    double denoising_perplexity = 0.0;
};

/// Per-step denoising cross-entropy over held-out windows with corruption
/// drawn from `seed`. Throws InputError on an empty window set.
EvalResult evaluate(const model::Model& model, const std::vector<TokenSequence>& heldout,
                    const diffusion::NoiseSchedule& schedule, std::uint64_t seed);

/// Trailing moving average; entry i averages values[max(0, i-window+1) .. i].
std::vector<double> moving_average(const std::vector<double>& values, std::size_t window);

}  // namespace sfdlm::training
