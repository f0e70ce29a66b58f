#include "sfdlm/diffusion/forward.hpp"

#include <stdexcept>
#include <string>

namespace sfdlm::diffusion {

namespace {

void require_vocab(std::size_t vocab_size) {
    if (vocab_size < 2) throw std::invalid_argument("vocabulary must hold at least 2 tokens");
}

}  // namespace

CorruptedSequence forward_step(const TokenSequence& x, double beta, Rng& rng, std::size_t vocab_size) {
    require_vocab(vocab_size);
    if (!(beta >= 0.0 && beta <= 1.0)) throw std::invalid_argument("beta must lie in [0, 1]");
    CorruptedSequence out{x, std::vector<bool>(x.size(), false)};
    for (std::size_t i = 0; i < x.size(); ++i) {
        if (rng.uniform() < beta) {
            out.tokens[i] = static_cast<TokenId>(rng.below(vocab_size));
            out.replaced[i] = true;
        }
    }
    return out;
}

TokenSequence forward_to_step(const TokenSequence& x0, std::size_t t, const NoiseSchedule& schedule, Rng& rng,
                              std::size_t vocab_size) {
    const double survival = marginal_survival(schedule, t);
    return forward_step(x0, 1.0 - survival, rng, vocab_size).tokens;
}

ForwardSample make_training_pair(const TokenSequence& x0, std::size_t t, const NoiseSchedule& schedule, Rng& rng,
                                 std::size_t vocab_size) {
    if (t >= schedule.steps()) {
        throw std::out_of_range("training step t = " + std::to_string(t) + " outside [0, " +
                                std::to_string(schedule.steps()) + ")");
    }
    ForwardSample sample;
    sample.t = t;
    sample.target = t == 0 ? x0 : forward_to_step(x0, t, schedule, rng, vocab_size);
    auto step = forward_step(sample.target, schedule.beta(t), rng, vocab_size);
    sample.input = std::move(step.tokens);
    sample.changed_mask = std::move(step.replaced);
    return sample;
}

}  // namespace sfdlm::diffusion
