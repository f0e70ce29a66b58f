#include "sfdlm/sampling/sampler.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

#include "sfdlm/errors.hpp"

namespace sfdlm::sampling {

namespace {

constexpr std::uint64_t kNoiseStream = 0x5A31;
constexpr std::uint64_t kReverseStream = 0x5A32;

std::size_t resolve_steps(const Denoiser& d, const SampleRequest& r) {
    if (!(r.temperature >= 0.0) || !std::isfinite(r.temperature))
        throw std::invalid_argument("temperature must be >= 0");
    if (r.length != d.seq_len())
        throw std::invalid_argument("sample length " + std::to_string(r.length) + " differs from the model's " +
                                    std::to_string(d.seq_len()));
    const std::size_t steps = r.steps == 0 ? d.num_steps() : r.steps;
    if (steps > d.num_steps())
        throw std::invalid_argument("requested " + std::to_string(steps) + " reverse steps, model has " +
                                    std::to_string(d.num_steps()));
    return steps;
}

TokenSequence uniform_noise(std::size_t n, std::size_t vocab, std::uint64_t seed) {
    Rng rng(seed, kNoiseStream);
    TokenSequence x(n);
    for (auto& v : x) v = static_cast<TokenId>(rng.below(vocab));
    return x;
}

SampleResult reverse_loop(const Denoiser& denoiser, TokenSequence x, std::size_t steps, const SampleRequest& r,
                          const TokenSequence* prompt, const std::vector<bool>* mask) {
    auto pin = [&](TokenSequence& seq) {
        if (prompt == nullptr) return;
        for (std::size_t i = 0; i < seq.size(); ++i)
            if ((*mask)[i]) seq[i] = (*prompt)[i];
    };
    SampleResult result;
    pin(x);
    if (r.keep_trace) result.trace.push_back(x);
    for (std::size_t t = steps; t-- > 0;) {
        auto rng = reverse_step_rng(r.seed, t);
        x = denoise_once(denoiser, x, t, r.temperature, rng);
        pin(x);
        if (r.keep_trace) result.trace.push_back(x);
    }
    result.tokens = std::move(x);
    return result;
}

}  // namespace

std::vector<double> ModelDenoiser::logits(const TokenSequence& x, std::size_t t) const {
    numerics::NoGradScope no_grad;
    const std::size_t steps[1] = {t};
    auto out = model::unet_forward(model_, x, 1, steps);
    return {out.data().begin(), out.data().end()};
}

TokenSequence sample_tokens(std::span<const double> logits, std::size_t vocab_size, double temperature, Rng& rng) {
    if (vocab_size == 0 || logits.size() % vocab_size != 0)
        throw std::invalid_argument("logits size is not a multiple of the vocabulary size");
    if (!(temperature >= 0.0)) throw std::invalid_argument("temperature must be >= 0");
    const std::size_t n = logits.size() / vocab_size;
    TokenSequence out(n);
    std::vector<double> p(vocab_size);
    for (std::size_t i = 0; i < n; ++i) {
        auto row = logits.subspan(i * vocab_size, vocab_size);
        for (double l : row)
            if (!std::isfinite(l)) throw NumericalError("non-finite logit at position " + std::to_string(i));
        const auto best = static_cast<std::size_t>(std::max_element(row.begin(), row.end()) - row.begin());
        if (temperature == 0.0) {
            out[i] = static_cast<TokenId>(best);
            continue;
        }
        double total = 0.0;
        for (std::size_t v = 0; v < vocab_size; ++v) {
            p[v] = std::exp((row[v] - row[best]) / temperature);
            total += p[v];
        }
        const double u = rng.uniform() * total;
        double acc = 0.0;
        std::size_t pick = vocab_size - 1;
        for (std::size_t v = 0; v < vocab_size; ++v) {
            acc += p[v];
            if (u < acc) {
                pick = v;
                break;
            }
        }
        out[i] = static_cast<TokenId>(pick);
    }
    return out;
}

TokenSequence denoise_once(const Denoiser& denoiser, const TokenSequence& x, std::size_t t, double temperature,
                           Rng& rng) {
    if (t >= denoiser.num_steps())
        throw std::out_of_range("denoise step " + std::to_string(t) + " outside [0, " +
                                std::to_string(denoiser.num_steps()) + ")");
    return sample_tokens(denoiser.logits(x, t), denoiser.vocab_size(), temperature, rng);
}

Rng reverse_step_rng(std::uint64_t seed, std::size_t t) { return Rng(seed, kReverseStream).fork(t); }

SampleResult generate(const Denoiser& denoiser, const SampleRequest& request) {
    const std::size_t steps = resolve_steps(denoiser, request);
    return reverse_loop(denoiser, uniform_noise(request.length, denoiser.vocab_size(), request.seed), steps, request,
                        nullptr, nullptr);
}

SampleResult inpaint(const Denoiser& denoiser, const SampleRequest& request) {
    const std::size_t steps = resolve_steps(denoiser, request);
    if (!request.prompt || !request.freeze_mask) throw std::invalid_argument("inpainting needs a prompt and a freeze mask");
    const auto& prompt = *request.prompt;
    const auto& mask = *request.freeze_mask;
    if (prompt.size() != request.length || mask.size() != request.length)
        throw std::invalid_argument("prompt and freeze mask must both have length " + std::to_string(request.length));
    for (auto v : prompt)
        if (v < 0 || static_cast<std::size_t>(v) >= denoiser.vocab_size())
            throw std::invalid_argument("prompt token " + std::to_string(v) + " outside the vocabulary");
    return reverse_loop(denoiser, uniform_noise(request.length, denoiser.vocab_size(), request.seed), steps, request,
                        &prompt, &mask);
}

SampleResult run(const Denoiser& denoiser, const SampleRequest& request) {
    return request.mode == SampleMode::inpaint ? inpaint(denoiser, request) : generate(denoiser, request);
}

}  // namespace sfdlm::sampling
