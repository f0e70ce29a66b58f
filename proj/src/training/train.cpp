#include "sfdlm/training/train.hpp"

#include <cmath>
#include <sstream>
#include <stdexcept>

#include "sfdlm/diffusion/forward.hpp"
#include "sfdlm/errors.hpp"
#include "sfdlm/numerics/ops.hpp"

namespace sfdlm::training {

namespace ops = sfdlm::numerics;

namespace {

constexpr std::uint64_t kBatchStream = 0xBA7C;
constexpr std::uint64_t kEvalStream = 0xE7A1;
constexpr std::size_t kEvalChunk = 32;

void require(bool ok, const std::string& message) {
    if (!ok) throw std::invalid_argument("train config: " + message);
}

}  // namespace

void TrainConfig::validate() const {
    require(batch_size > 0, "batch_size must be positive");
    require(total_steps > 0, "total_steps must be positive");
    require(lr > 0.0 && std::isfinite(lr), "lr must be positive");
    require(warmup_steps <= total_steps, "warmup_steps must not exceed total_steps");
    require(weight_decay >= 0.0, "weight_decay must be nonnegative");
    require(clip_norm >= 0.0, "clip_norm must be nonnegative");
    require(checkpoint_interval > 0, "checkpoint_interval must be positive");
    require(eval_interval > 0, "eval_interval must be positive");
}

AdamWConfig TrainConfig::optimizer() const {
    AdamWConfig c;
    c.lr = lr;
    c.weight_decay = weight_decay;
    c.warmup_steps = warmup_steps;
    c.clip_norm = clip_norm;
    return c;
}

StepResult train_step(model::Model& model, const std::vector<TokenSequence>& batch,
                      const diffusion::NoiseSchedule& schedule, OptimizerState& optimizer, Rng& rng,
                      bool per_batch_t) {
    const auto& cfg = model.config();
    if (batch.empty()) throw std::invalid_argument("train_step: empty batch");
    if (schedule.steps() != cfg.diffusion_steps) throw std::invalid_argument("train_step: schedule length differs from model T");

    std::vector<std::size_t> steps(batch.size());
    const std::size_t shared_t = rng.below(schedule.steps());
    TokenSequence inputs, targets;
    double t_sum = 0.0;
    for (std::size_t i = 0; i < batch.size(); ++i) {
        steps[i] = per_batch_t ? shared_t : rng.below(schedule.steps());
        t_sum += static_cast<double>(steps[i]);
        auto pair_rng = rng.fork(i);
        auto pair = diffusion::make_training_pair(batch[i], steps[i], schedule, pair_rng, cfg.vocab_size);
        inputs.insert(inputs.end(), pair.input.begin(), pair.input.end());
        targets.insert(targets.end(), pair.target.begin(), pair.target.end());
    }

    model.zero_grad();
    numerics::Tape tape;
    double loss_value = 0.0;
    {
        numerics::TapeScope scope(tape);
        auto loss = ops::softmax_cross_entropy(unet_forward(model, inputs, batch.size(), steps), targets);
        loss_value = loss.item();
        if (!std::isfinite(loss_value)) {
            std::ostringstream msg;
            msg << "non-finite training loss " << loss_value << " at optimizer step " << optimizer.step + 1;
            throw NumericalError(msg.str());
        }
        tape.backward(loss);
    }

    StepResult result;
    result.loss = loss_value;
    result.t_mean = t_sum / static_cast<double>(batch.size());
    result.grad_norm = gradient_norm(model);
    if (!std::isfinite(result.grad_norm)) {
        throw NumericalError("non-finite gradient norm at optimizer step " + std::to_string(optimizer.step + 1));
    }
    result.lr = optimizer_step(model, optimizer);
    model.zero_grad();
    return result;
}

Trainer::Trainer(model::Model& model, OptimizerState& optimizer, const diffusion::NoiseSchedule& schedule,
                 TrainConfig config, const std::vector<TokenSequence>& windows, std::uint64_t global_step)
    : model_(model),
      optimizer_(optimizer),
      schedule_(schedule),
      config_(config),
      windows_(windows),
      global_step_(global_step) {
    config_.validate();
    if (windows_.empty()) throw InputError("no training windows: corpus shorter than one sequence");
}

StepResult Trainer::step() {
    ++global_step_;
    Rng rng = Rng(config_.seed, kBatchStream).fork(global_step_);
    std::vector<TokenSequence> batch;
    batch.reserve(config_.batch_size);
    for (std::size_t i = 0; i < config_.batch_size; ++i) batch.push_back(windows_[rng.below(windows_.size())]);
    return train_step(model_, batch, schedule_, optimizer_, rng, config_.per_batch_t);
}

EvalResult evaluate(const model::Model& model, const std::vector<TokenSequence>& heldout,
                    const diffusion::NoiseSchedule& schedule, std::uint64_t seed) {
    if (heldout.empty()) throw InputError("evaluation needs at least one held-out window");
    const auto& cfg = model.config();
    numerics::NoGradScope no_grad;
    const Rng base(seed, kEvalStream);
    EvalResult result;
    for (std::size_t t = 0; t < schedule.steps(); ++t) {
        const Rng step_rng = base.fork(t);
        double total = 0.0;
        for (std::size_t start = 0; start < heldout.size(); start += kEvalChunk) {
            const std::size_t count = std::min(kEvalChunk, heldout.size() - start);
            TokenSequence inputs, targets;
            for (std::size_t i = start; i < start + count; ++i) {
                auto rng = step_rng.fork(i);
                auto pair = diffusion::make_training_pair(heldout[i], t, schedule, rng, cfg.vocab_size);
                inputs.insert(inputs.end(), pair.input.begin(), pair.input.end());
                targets.insert(targets.end(), pair.target.begin(), pair.target.end());
            }
            std::vector<std::size_t> steps(count, t);
            auto loss = ops::softmax_cross_entropy(unet_forward(model, inputs, count, steps), targets);
            total += loss.item() * static_cast<double>(count);
        }
        result.ce_per_step.push_back(total / static_cast<double>(heldout.size()));
    }
    double sum = 0.0;
    for (double ce : result.ce_per_step) sum += ce;
    result.mean_ce = sum / static_cast<double>(result.ce_per_step.size());
    result.denoising_perplexity = std::exp(result.mean_ce);
    return result;
}

std::vector<double> moving_average(const std::vector<double>& values, std::size_t window) {
    if (window == 0) throw std::invalid_argument("moving_average: window must be positive");
    std::vector<double> out(values.size());
    double sum = 0.0;
    for (std::size_t i = 0; i < values.size(); ++i) {
        sum += values[i];
        if (i >= window) sum -= values[i - window];
        out[i] = sum / static_cast<double>(std::min(i + 1, window));
    }
    return out;
}

}  // namespace sfdlm::training
