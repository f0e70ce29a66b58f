#pragma once

#include <cstdint>
#include <string>
#include <string_view>

#include "sfdlm/diffusion/schedule.hpp"
#include "sfdlm/model/unet.hpp"
#include "sfdlm/text/vocab.hpp"
#include "sfdlm/training/optimizer.hpp"

namespace sfdlm::training {

inline constexpr char kCheckpointMagic[4] = {'S', 'F', 'D', 'M'};
inline constexpr std::uint32_t kCheckpointVersion = 1;

/// Everything needed to resume training or sample.
struct Checkpoint {
    model::Model model;
    text::Vocab vocab;
    diffusion::NoiseSchedule schedule;
    OptimizerState optimizer;
    std::uint64_t global_step = 0;
};

/// Layout (all integers and doubles little-endian):
///   "SFDM" | u32 version | u64 header length | JSON header
///   | u64 parameter count | per parameter: u32 name length, name, u32 rank,
///     u64 dims..., f64 values
///   | per parameter: f64 first moments, f64 second moments
/// The header holds the model config, vocabulary, betas, global step and
/// optimizer hyperparameters and step.
std::string serialize_checkpoint(const model::Model& model, const text::Vocab& vocab,
                                 const diffusion::NoiseSchedule& schedule, const OptimizerState& optimizer,
                                 std::uint64_t global_step);

/// Throws InputError on bad magic, unsupported version, truncation, trailing
/// bytes or a parameter table that disagrees with the stored config.
Checkpoint deserialize_checkpoint(std::string_view bytes);

void save_checkpoint(const std::string& path, const model::Model& model, const text::Vocab& vocab,
                     const diffusion::NoiseSchedule& schedule, const OptimizerState& optimizer,
                     std::uint64_t global_step);
Checkpoint load_checkpoint(const std::string& path);

}  // namespace sfdlm::training
