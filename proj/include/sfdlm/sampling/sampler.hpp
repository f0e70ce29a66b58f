#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "sfdlm/model/unet.hpp"
#include "sfdlm/rng.hpp"
#include "sfdlm/types.hpp"

namespace sfdlm::sampling {

/// Anything that maps (x^{t+1}, t) to per-position logits over the vocabulary.
class Denoiser {
public:
    virtual ~Denoiser() = default;
    virtual std::size_t vocab_size() const = 0;
    virtual std::size_t seq_len() const = 0;
    virtual std::size_t num_steps() const = 0;
    /// Row-major [seq_len, vocab_size] logits for one sequence at step t.
    virtual std::vector<double> logits(const TokenSequence& x, std::size_t t) const = 0;
};

class ModelDenoiser : public Denoiser {
public:
    explicit ModelDenoiser(const model::Model& model) : model_(model) {}
    std::size_t vocab_size() const override { return model_.config().vocab_size; }
    std::size_t seq_len() const override { return model_.config().seq_len; }
    std::size_t num_steps() const override { return model_.config().diffusion_steps; }
    std::vector<double> logits(const TokenSequence& x, std::size_t t) const override;

private:
    const model::Model& model_;
};

enum class SampleMode { generate, inpaint };

struct SampleRequest {
    std::size_t length = 0;
    /// Reverse steps to run, t = steps-1 .. 0. 0 means the denoiser's T.
    std::size_t steps = 0;
    /// 0 selects argmax with lowest-index tie-break.
    double temperature = 1.0;
    std::uint64_t seed = 0;
    SampleMode mode = SampleMode::generate;
    std::optional<TokenSequence> prompt;
    std::optional<std::vector<bool>> freeze_mask;
    bool keep_trace = true;
};

struct SampleResult {
    TokenSequence tokens;
    /// [x^T, x^{T-1}, ..., x^0] when the trace is kept, else empty.
    std::vector<TokenSequence> trace;
};

/// Draws one token per position from softmax(logits / temperature).
TokenSequence sample_tokens(std::span<const double> logits, std::size_t vocab_size, double temperature, Rng& rng);

/// One reverse step x^{t+1} -> x^t.
TokenSequence denoise_once(const Denoiser& denoiser, const TokenSequence& x, std::size_t t, double temperature,
                           Rng& rng);

/// Rng used by the reverse step at t; depends only on (seed, t).
Rng reverse_step_rng(std::uint64_t seed, std::size_t t);

/// Ancestral sampling from uniform noise.
SampleResult generate(const Denoiser& denoiser, const SampleRequest& request);

/// Reverse process over unfrozen positions; frozen ones are reset to the
/// prompt before the first step and after every step.
SampleResult inpaint(const Denoiser& denoiser, const SampleRequest& request);

/// Dispatches on request.mode.
SampleResult run(const Denoiser& denoiser, const SampleRequest& request);

}  // namespace sfdlm::sampling
