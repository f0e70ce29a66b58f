#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "sfdlm/model/unet.hpp"

namespace sfdlm::training {

struct AdamWConfig {
    double lr = 3e-4;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
    double weight_decay = 0.01;
    /// Linear ramp from 0 to lr over this many steps, constant afterwards.
    std::uint64_t warmup_steps = 100;
    /// Global gradient-norm ceiling; 0 disables clipping.
    double clip_norm = 1.0;

    bool operator==(const AdamWConfig&) const = default;
};

struct OptimizerState {
    AdamWConfig config;
    /// Number of updates applied so far.
    std::uint64_t step = 0;
    /// First and second moments, one buffer per model parameter in registry order.
    std::vector<std::vector<double>> m;
    std::vector<std::vector<double>> v;

    bool operator==(const OptimizerState&) const = default;
};

OptimizerState make_optimizer(const model::Model& model, const AdamWConfig& config);

/// Learning rate used by update number `step` (1-based).
double scheduled_lr(const AdamWConfig& config, std::uint64_t step);

/// One bias-corrected AdamW update of a single tensor with decoupled decay:
/// p <- p - lr * (m_hat / (sqrt(v_hat) + eps) + wd * p).
void adamw_update(std::span<double> param, std::span<const double> grad, std::span<double> m, std::span<double> v,
                  std::uint64_t step, double lr, const AdamWConfig& config);

/// Global L2 norm of all parameter gradients (missing gradients count as zero).
double gradient_norm(const model::Model& model);

/// Scales gradients so their global norm is at most max_norm. Returns the norm
/// before scaling.
double clip_gradients(model::Model& model, double max_norm);

/// Clips, advances the step counter and updates every parameter. Returns the
/// learning rate that was applied.
double optimizer_step(model::Model& model, OptimizerState& state);

}  // namespace sfdlm::training
