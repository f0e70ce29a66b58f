#include "sfdlm/model/config.hpp"

#include <stdexcept>
#include <string>

namespace sfdlm::model {

namespace {

void require(bool ok, const std::string& message) {
    if (!ok) throw std::invalid_argument("model config: " + message);
}

bool power_of_two(std::size_t n) { return n != 0 && (n & (n - 1)) == 0; }

}  // namespace

void ModelConfig::validate() const {
    require(vocab_size >= 2, "vocab_size must be at least 2");
    require(power_of_two(seq_len) && seq_len >= 2, "seq_len must be a power of two >= 2, got " + std::to_string(seq_len));
    require(embed_dim >= 1, "embed_dim must be positive");
    require(unet_levels < 16 && seq_len % (std::size_t{1} << unet_levels) == 0,
            "seq_len " + std::to_string(seq_len) + " not divisible by 2^unet_levels");
    require(length_at(unet_levels) >= 2, "deepest level must keep at least 2 positions");
    require(ssm_state_dim >= 1, "ssm_state_dim must be positive");
    require(ssm_kernel_len >= 1 && ssm_kernel_len <= length_at(unet_levels),
            "ssm_kernel_len must lie in [1, " + std::to_string(length_at(unet_levels)) + "]");
    require(fourier_hidden >= 1, "fourier_hidden must be positive");
    require(diffusion_steps >= 1, "diffusion_steps must be positive");
}

}  // namespace sfdlm::model
