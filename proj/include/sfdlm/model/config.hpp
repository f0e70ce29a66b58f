#pragma once

#include <cstddef>

namespace sfdlm::model {

struct ModelConfig {
    std::size_t vocab_size = 0;
    std::size_t seq_len = 128;
    std::size_t embed_dim = 64;
    /// Number of sequence halvings in the U-Net.
    std::size_t unet_levels = 2;
    std::size_t blocks_per_level = 2;
    std::size_t ssm_state_dim = 4;
    std::size_t ssm_kernel_len = 16;
    std::size_t fourier_hidden = 128;
    std::size_t diffusion_steps = 8;
    /// Feed the SSM branch output into the Fourier branch instead of running
    /// both branches on the block input.
    bool fourier_after_ssm = false;

    /// Channel width at U-Net depth `level` (0 = input resolution).
    std::size_t width_at(std::size_t level) const { return embed_dim << level; }
    /// Sequence length at U-Net depth `level`.
    std::size_t length_at(std::size_t level) const { return seq_len >> level; }

    /// Throws std::invalid_argument on the first violated constraint.
    void validate() const;

    bool operator==(const ModelConfig&) const = default;
};

}  // namespace sfdlm::model
