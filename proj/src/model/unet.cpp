#include "sfdlm/model/unet.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

#include "sfdlm/numerics/ops.hpp"
#include "sfdlm/rng.hpp"

namespace sfdlm::model {

namespace ops = sfdlm::numerics;
using numerics::Shape;

namespace {

class Initializer {
public:
    Initializer(std::uint64_t seed, InitMode mode) : rng_(seed, 0x1417), mode_(mode) {}

    Tensor normal(Shape shape, double stddev) {
        auto t = Tensor::zeros(std::move(shape), true);
        for (auto& v : t.mutable_data()) v = stddev * rng_.normal();
        return t;
    }

    /// Zero in standard mode.
    Tensor output(Shape shape, double stddev) {
        return mode_ == InitMode::random ? normal(std::move(shape), stddev) : Tensor::zeros(std::move(shape), true);
    }

    Tensor bias(std::size_t n) { return output({n}, 0.1); }

    Tensor constant(Shape shape, double value, double random_stddev) {
        return mode_ == InitMode::random ? normal(std::move(shape), random_stddev)
                                         : Tensor::full(std::move(shape), value, true);
    }

    /// Raw decay parameters whose squashed values spread over [0.3, 0.95].
    Tensor decays(Shape shape) {
        if (mode_ == InitMode::random) return normal(std::move(shape), 0.5);
        auto t = Tensor::zeros(std::move(shape), true);
        for (auto& v : t.mutable_data()) v = std::atanh((0.3 + 0.65 * rng_.uniform()) / kMaxDecay);
        return t;
    }

private:
    Rng rng_;
    InitMode mode_;
};

BlockParams make_block(const ModelConfig& cfg, std::size_t width, std::size_t length, Initializer& init) {
    const std::size_t m = cfg.ssm_state_dim, spectral = 2 * (length / 2 + 1), hidden = cfg.fourier_hidden;
    const double state_scale = 1.0 / std::sqrt(static_cast<double>(m));
    const double width_scale = 1.0 / std::sqrt(static_cast<double>(width));
    BlockParams p;
    p.ssm.a_raw = init.decays({width, m});
    p.ssm.b_in = init.normal({width, m}, state_scale);
    p.ssm.c_out = init.normal({width, m}, state_scale);
    p.ssm.d_skip = init.constant({width}, 1.0, 1.0);
    p.fourier.w1 = init.normal({spectral, hidden}, 1.0 / std::sqrt(static_cast<double>(spectral)));
    p.fourier.b1 = init.bias(hidden);
    p.fourier.w2 = init.normal({hidden, spectral}, 1.0 / std::sqrt(static_cast<double>(hidden)));
    p.fourier.b2 = init.bias(spectral);
    p.ssm_proj_w = init.output({width, width}, width_scale);
    p.ssm_proj_b = init.bias(width);
    p.fourier_proj_w = init.output({width, width}, width_scale);
    p.fourier_proj_b = init.bias(width);
    return p;
}

Stage make_stage(const ModelConfig& cfg, std::size_t level, Initializer& init) {
    Stage s;
    s.time = init.normal({cfg.diffusion_steps, cfg.width_at(level)}, 0.1);
    for (std::size_t i = 0; i < cfg.blocks_per_level; ++i)
        s.blocks.push_back(make_block(cfg, cfg.width_at(level), cfg.length_at(level), init));
    return s;
}

void add_stage(std::vector<NamedParameter>& out, const std::string& prefix, const Stage& s) {
    out.push_back({prefix + ".time", s.time});
    for (std::size_t i = 0; i < s.blocks.size(); ++i) {
        const auto& b = s.blocks[i];
        const std::string p = prefix + ".block" + std::to_string(i) + ".";
        out.push_back({p + "ssm.a_raw", b.ssm.a_raw});
        out.push_back({p + "ssm.b_in", b.ssm.b_in});
        out.push_back({p + "ssm.c_out", b.ssm.c_out});
        out.push_back({p + "ssm.d_skip", b.ssm.d_skip});
        out.push_back({p + "fourier.w1", b.fourier.w1});
        out.push_back({p + "fourier.b1", b.fourier.b1});
        out.push_back({p + "fourier.w2", b.fourier.w2});
        out.push_back({p + "fourier.b2", b.fourier.b2});
        out.push_back({p + "ssm_proj_w", b.ssm_proj_w});
        out.push_back({p + "ssm_proj_b", b.ssm_proj_b});
        out.push_back({p + "fourier_proj_w", b.fourier_proj_w});
        out.push_back({p + "fourier_proj_b", b.fourier_proj_b});
    }
}

Tensor run_stage(Tensor x, const Stage& s, std::span<const std::size_t> steps, const BlockOptions& options) {
    for (const auto& b : s.blocks) x = block(x, s.time, steps, b, options);
    return x;
}

}  // namespace

Model::Model(ModelConfig config, std::uint64_t seed, InitMode mode) : config_(config) {
    config_.validate();
    Initializer init(seed, mode);
    const std::size_t d = config_.embed_dim, v = config_.vocab_size;
    embedding = init.normal({v, d}, 1.0);
    for (std::size_t l = 0; l < config_.unet_levels; ++l) {
        DownLevel level;
        level.stage = make_stage(config_, l, init);
        const std::size_t w = config_.width_at(l);
        level.widen_w = init.normal({2 * w, w}, 1.0 / std::sqrt(static_cast<double>(w)));
        level.widen_b = init.bias(2 * w);
        down.push_back(std::move(level));
    }
    bottleneck = make_stage(config_, config_.unet_levels, init);
    up.resize(config_.unet_levels);
    for (std::size_t l = config_.unet_levels; l-- > 0;) {
        const std::size_t w = config_.width_at(l);
        up[l].narrow_w = init.normal({w, 2 * w}, 1.0 / std::sqrt(static_cast<double>(2 * w)));
        up[l].narrow_b = init.bias(w);
        up[l].stage = make_stage(config_, l, init);
    }
    head_w = init.output({d, v}, 1.0 / std::sqrt(static_cast<double>(d)));
    head_b = init.bias(v);
    register_all();
}

void Model::register_all() {
    parameters_.clear();
    parameters_.push_back({"embedding", embedding});
    for (std::size_t l = 0; l < down.size(); ++l) {
        const std::string p = "down" + std::to_string(l);
        add_stage(parameters_, p, down[l].stage);
        parameters_.push_back({p + ".widen_w", down[l].widen_w});
        parameters_.push_back({p + ".widen_b", down[l].widen_b});
    }
    add_stage(parameters_, "bottleneck", bottleneck);
    for (std::size_t l = up.size(); l-- > 0;) {
        const std::string p = "up" + std::to_string(l);
        parameters_.push_back({p + ".narrow_w", up[l].narrow_w});
        parameters_.push_back({p + ".narrow_b", up[l].narrow_b});
        add_stage(parameters_, p, up[l].stage);
    }
    parameters_.push_back({"head_w", head_w});
    parameters_.push_back({"head_b", head_b});
}

std::size_t Model::parameter_count() const {
    std::size_t n = 0;
    for (const auto& p : parameters_) n += p.value.numel();
    return n;
}

Tensor Model::parameter(const std::string& name) const {
    for (const auto& p : parameters_)
        if (p.name == name) return p.value;
    throw std::out_of_range("no parameter named '" + name + "'");
}

void Model::zero_grad() {
    for (auto& p : parameters_) p.value.zero_grad();
}

Tensor unet_forward(const Model& model, std::span<const TokenId> tokens, std::size_t batch,
                    std::span<const std::size_t> steps) {
    const auto& cfg = model.config();
    if (batch == 0) throw std::invalid_argument("unet_forward: empty batch");
    if (tokens.size() != batch * cfg.seq_len) {
        throw std::invalid_argument("unet_forward: expected " + std::to_string(batch) + " sequences of length " +
                                    std::to_string(cfg.seq_len) + ", got " + std::to_string(tokens.size()) +
                                    " tokens");
    }
    if (steps.size() != batch) throw std::invalid_argument("unet_forward: need one step per sequence");
    for (auto t : steps) {
        if (t >= cfg.diffusion_steps) {
            throw std::out_of_range("unet_forward: step " + std::to_string(t) + " outside [0, " +
                                    std::to_string(cfg.diffusion_steps) + ")");
        }
    }

    const BlockOptions options{cfg.ssm_kernel_len, cfg.fourier_after_ssm};
    auto x = ops::embedding(model.embedding, tokens, batch);
    std::vector<Tensor> skips;
    for (const auto& level : model.down) {
        x = run_stage(x, level.stage, steps, options);
        skips.push_back(x);
        x = ops::channel_linear(ops::avg_pool2(x), level.widen_w, level.widen_b);
    }
    x = run_stage(x, model.bottleneck, steps, options);
    for (std::size_t l = model.up.size(); l-- > 0;) {
        const auto& level = model.up[l];
        x = ops::add(ops::channel_linear(ops::upsample2(x), level.narrow_w, level.narrow_b), skips[l]);
        x = run_stage(x, level.stage, steps, options);
    }

    const std::size_t n = cfg.seq_len, d = cfg.embed_dim, v = cfg.vocab_size;
    auto rows = ops::reshape(ops::transpose_last2(x), {batch * n, d});
    auto logits = ops::add_row_bias(ops::matmul(rows, model.head_w), model.head_b);
    return ops::reshape(logits, {batch, n, v});
}

Tensor unet_forward(const Model& model, const std::vector<TokenSequence>& batch, std::size_t t) {
    TokenSequence packed;
    for (const auto& seq : batch) packed.insert(packed.end(), seq.begin(), seq.end());
    std::vector<std::size_t> steps(batch.size(), t);
    return unet_forward(model, packed, batch.size(), steps);
}

}  // namespace sfdlm::model
