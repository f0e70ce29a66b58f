#include "sfdlm/training/optimizer.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace sfdlm::training {

OptimizerState make_optimizer(const model::Model& model, const AdamWConfig& config) {
    OptimizerState state;
    state.config = config;
    for (const auto& p : model.parameters()) {
        state.m.emplace_back(p.value.numel(), 0.0);
        state.v.emplace_back(p.value.numel(), 0.0);
    }
    return state;
}

double scheduled_lr(const AdamWConfig& config, std::uint64_t step) {
    if (config.warmup_steps == 0 || step >= config.warmup_steps) return config.lr;
    return config.lr * static_cast<double>(step) / static_cast<double>(config.warmup_steps);
}

void adamw_update(std::span<double> param, std::span<const double> grad, std::span<double> m, std::span<double> v,
                  std::uint64_t step, double lr, const AdamWConfig& config) {
    if (step == 0) throw std::invalid_argument("adamw_update: step counts from 1");
    if (m.size() != param.size() || v.size() != param.size() || (!grad.empty() && grad.size() != param.size()))
        throw std::invalid_argument("adamw_update: buffer sizes do not match the parameter");
    const double c1 = 1.0 - std::pow(config.beta1, static_cast<double>(step));
    const double c2 = 1.0 - std::pow(config.beta2, static_cast<double>(step));
    for (std::size_t i = 0; i < param.size(); ++i) {
        const double g = grad.empty() ? 0.0 : grad[i];
        m[i] = config.beta1 * m[i] + (1.0 - config.beta1) * g;
        v[i] = config.beta2 * v[i] + (1.0 - config.beta2) * g * g;
        const double m_hat = m[i] / c1;
        const double v_hat = v[i] / c2;
        param[i] -= lr * (m_hat / (std::sqrt(v_hat) + config.eps) + config.weight_decay * param[i]);
    }
}

double gradient_norm(const model::Model& model) {
    double sq = 0.0;
    for (const auto& p : model.parameters())
        for (double g : p.value.grad()) sq += g * g;
    return std::sqrt(sq);
}

double clip_gradients(model::Model& model, double max_norm) {
    const double norm = gradient_norm(model);
    if (max_norm > 0.0 && norm > max_norm) {
        const double factor = max_norm / norm;
        for (const auto& p : model.parameters())
            for (double& g : p.value.impl()->grad) g *= factor;
    }
    return norm;
}

double optimizer_step(model::Model& model, OptimizerState& state) {
    const auto& params = model.parameters();
    if (state.m.size() != params.size()) throw std::invalid_argument("optimizer state does not match the model");
    clip_gradients(model, state.config.clip_norm);
    ++state.step;
    const double lr = scheduled_lr(state.config, state.step);
    for (std::size_t i = 0; i < params.size(); ++i) {
        auto value = params[i].value;
        adamw_update(value.mutable_data(), value.grad(), state.m[i], state.v[i], state.step, lr, state.config);
    }
    return lr;
}

}  // namespace sfdlm::training
