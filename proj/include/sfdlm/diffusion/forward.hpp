#pragma once

#include <cstddef>
#include <vector>

#include "sfdlm/diffusion/schedule.hpp"
#include "sfdlm/rng.hpp"
#include "sfdlm/types.hpp"

namespace sfdlm::diffusion {

struct CorruptedSequence {
    TokenSequence tokens;
    /// True where the position took the replacement branch. A replaced position
    /// may redraw its own value.
    std::vector<bool> replaced;
};

/// One application of the token-replacement kernel
/// q(x' | x) = beta * uniform(x') + (1 - beta) * [x' == x], independently per
/// position.
CorruptedSequence forward_step(const TokenSequence& x, double beta, Rng& rng, std::size_t vocab_size);

/// Direct jump x^0 -> x^t through the closed-form t-step marginal
/// a_t * identity + (1 - a_t) * uniform. Requires 1 <= t <= T.
TokenSequence forward_to_step(const TokenSequence& x0, std::size_t t, const NoiseSchedule& schedule, Rng& rng,
                              std::size_t vocab_size);

/// One supervised denoising example: input x^{t+1}, target x^t, step index t.
struct ForwardSample {
    std::size_t t = 0;
    TokenSequence input;   // x^{t+1}
    TokenSequence target;  // x^t
    std::vector<bool> changed_mask;
};

/// target = x^t (x0 itself when t = 0); input = forward_step(target, beta_t).
ForwardSample make_training_pair(const TokenSequence& x0, std::size_t t, const NoiseSchedule& schedule, Rng& rng,
                                 std::size_t vocab_size);

}  // namespace sfdlm::diffusion
