#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "sfdlm/model/config.hpp"
#include "sfdlm/model/layers.hpp"
#include "sfdlm/types.hpp"

namespace sfdlm::model {

/// `standard`: branch projections and head start at zero, so a fresh model
/// emits all-zero logits. `random`: every tensor is drawn at random (used to
/// exercise gradients and sensitivity).
enum class InitMode { standard, random };

struct NamedParameter {
    std::string name;
    Tensor value;
};

/// One resolution of the U-Net: a time table of that width and its blocks.
struct Stage {
    Tensor time;  // [T, width]
    std::vector<BlockParams> blocks;
};

/// Down level: blocks, then pooling and a width-doubling map [2w, w].
struct DownLevel {
    Stage stage;
    Tensor widen_w;
    Tensor widen_b;
};

/// Up level: upsample, width-halving map [w, 2w], skip addition, then blocks.
struct UpLevel {
    Tensor narrow_w;
    Tensor narrow_b;
    Stage stage;
};

class Model {
public:
    Model(ModelConfig config, std::uint64_t seed, InitMode mode = InitMode::standard);

    Model(const Model&) = delete;
    Model& operator=(const Model&) = delete;
    Model(Model&&) = default;
    Model& operator=(Model&&) = default;

    const ModelConfig& config() const { return config_; }

    /// Every trainable tensor in a fixed order with a stable name.
    const std::vector<NamedParameter>& parameters() const { return parameters_; }
    std::size_t parameter_count() const;
    /// Throws std::out_of_range for an unknown name.
    Tensor parameter(const std::string& name) const;

    void zero_grad();

    Tensor embedding;  // [V,D]
    std::vector<DownLevel> down;
    Stage bottleneck;
    std::vector<UpLevel> up;  // up[l] mirrors down[l]
    Tensor head_w;            // [D,V]
    Tensor head_b;            // [V]

private:
    void register_all();

    ModelConfig config_;
    std::vector<NamedParameter> parameters_;
};

/// Logits [B,N,V] for `batch` sequences packed batch-major in `tokens`, with a
/// diffusion step per sequence.
Tensor unet_forward(const Model& model, std::span<const TokenId> tokens, std::size_t batch,
                    std::span<const std::size_t> steps);

/// Same step for every sequence.
Tensor unet_forward(const Model& model, const std::vector<TokenSequence>& batch, std::size_t t);

}  // namespace sfdlm::model
