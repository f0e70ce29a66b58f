#include <memory>

#include "sfdlm/cli/commands.hpp"
#include "sfdlm/model/unet.hpp"
#include "sfdlm/numerics/ops.hpp"
#include "sfdlm/rng.hpp"

namespace sfdlm::cli {

namespace {

namespace ops = sfdlm::numerics;
using numerics::GradCheckResult;
using numerics::Shape;
using numerics::Tensor;

constexpr std::uint64_t kSuiteSeed = 20240601;

Tensor randn(Shape shape, Rng& rng, double scale = 1.0) {
    auto t = Tensor::zeros(std::move(shape), true);
    for (auto& v : t.mutable_data()) v = scale * rng.normal();
    return t;
}

Tensor weights_like(const Tensor& t, Rng& rng) {
    auto w = Tensor::zeros(t.shape());
    for (auto& v : w.mutable_data()) v = rng.normal();
    return w;
}

/// sum(f(inputs) * W) with a fixed random W, so every output coordinate matters.
GradCheckResult check(std::vector<Tensor> inputs, const std::function<Tensor(const std::vector<Tensor>&)>& f,
                      std::uint64_t salt) {
    Rng rng(kSuiteSeed, salt);
    Tensor w;
    {
        numerics::NoGradScope no_grad;
        w = weights_like(f(inputs), rng);
    }
    return numerics::check_gradients([&] { return ops::sum(ops::mul(f(inputs), w)); }, inputs);
}

model::ModelConfig tiny_model_config() {
    model::ModelConfig c;
    c.vocab_size = 5;
    c.seq_len = 8;
    c.embed_dim = 4;
    c.unet_levels = 1;
    c.blocks_per_level = 1;
    c.ssm_state_dim = 2;
    c.ssm_kernel_len = 4;
    c.fourier_hidden = 6;
    c.diffusion_steps = 4;
    return c;
}

}  // namespace

std::vector<GradCheckCase> grad_check_cases() {
    std::vector<GradCheckCase> cases;
    auto add = [&](std::string name, std::function<GradCheckResult(Rng&)> body) {
        const auto salt = cases.size() + 1;
        cases.push_back({std::move(name), [body, salt] {
                             Rng rng(kSuiteSeed, 1000 + salt);
                             return body(rng);
                         }});
    };
    using V = std::vector<Tensor>;

    add("add", [](Rng& r) { return check({randn({3, 4}, r), randn({3, 4}, r)}, [](const V& x) { return ops::add(x[0], x[1]); }, 1); });
    add("sub", [](Rng& r) { return check({randn({3, 4}, r), randn({3, 4}, r)}, [](const V& x) { return ops::sub(x[0], x[1]); }, 2); });
    add("mul", [](Rng& r) { return check({randn({3, 4}, r), randn({3, 4}, r)}, [](const V& x) { return ops::mul(x[0], x[1]); }, 3); });
    add("scale", [](Rng& r) { return check({randn({5}, r)}, [](const V& x) { return ops::scale(x[0], -1.7); }, 4); });
    add("tanh", [](Rng& r) { return check({randn({2, 6}, r)}, [](const V& x) { return ops::tanh(x[0]); }, 5); });
    add("gelu", [](Rng& r) { return check({randn({2, 6}, r)}, [](const V& x) { return ops::gelu(x[0]); }, 6); });
    add("sum", [](Rng& r) { return check({randn({3, 3}, r)}, [](const V& x) { return ops::sum(x[0]); }, 7); });
    add("mean", [](Rng& r) { return check({randn({3, 3}, r)}, [](const V& x) { return ops::mean(x[0]); }, 8); });
    add("matmul", [](Rng& r) { return check({randn({3, 4}, r), randn({4, 2}, r)}, [](const V& x) { return ops::matmul(x[0], x[1]); }, 9); });
    add("add_row_bias",
        [](Rng& r) { return check({randn({2, 3, 4}, r), randn({4}, r)}, [](const V& x) { return ops::add_row_bias(x[0], x[1]); }, 10); });
    add("channel_linear", [](Rng& r) {
        return check({randn({2, 3, 5}, r), randn({4, 3}, r), randn({4}, r)},
                     [](const V& x) { return ops::channel_linear(x[0], x[1], x[2]); }, 11);
    });
    add("embedding", [](Rng& r) {
        const std::vector<TokenId> ids{0, 2, 2, 4, 1, 0};
        return check({randn({5, 3}, r)}, [ids](const V& x) { return ops::embedding(x[0], ids, 2); }, 12);
    });
    add("add_step_embedding", [](Rng& r) {
        const std::vector<std::size_t> steps{2, 0};
        return check({randn({2, 3, 4}, r), randn({3, 3}, r)},
                     [steps](const V& x) { return ops::add_step_embedding(x[0], x[1], steps); }, 13);
    });
    add("reshape", [](Rng& r) { return check({randn({2, 6}, r)}, [](const V& x) { return ops::reshape(x[0], {3, 4}); }, 14); });
    add("transpose_last2", [](Rng& r) { return check({randn({2, 3, 4}, r)}, [](const V& x) { return ops::transpose_last2(x[0]); }, 15); });
    add("concat_last",
        [](Rng& r) { return check({randn({2, 3}, r), randn({2, 5}, r)}, [](const V& x) { return ops::concat_last(x[0], x[1]); }, 16); });
    add("slice_last", [](Rng& r) { return check({randn({2, 7}, r)}, [](const V& x) { return ops::slice_last(x[0], 2, 6); }, 17); });
    add("avg_pool2", [](Rng& r) { return check({randn({2, 3, 8}, r)}, [](const V& x) { return ops::avg_pool2(x[0]); }, 18); });
    add("upsample2", [](Rng& r) { return check({randn({2, 3, 4}, r)}, [](const V& x) { return ops::upsample2(x[0]); }, 19); });
    add("causal_depthwise_conv", [](Rng& r) {
        return check({randn({2, 3, 8}, r), randn({3, 4}, r)},
                     [](const V& x) { return ops::causal_depthwise_conv(x[0], x[1]); }, 20);
    });
    add("rfft", [](Rng& r) {
        return check({randn({2, 8}, r)},
                     [](const V& x) {
                         auto s = ops::rfft(x[0]);
                         return ops::concat_last(s.real, s.imag);
                     },
                     21);
    });
    add("rfft_odd_length", [](Rng& r) {
        return check({randn({2, 7}, r)},
                     [](const V& x) {
                         auto s = ops::rfft(x[0]);
                         return ops::concat_last(s.real, s.imag);
                     },
                     22);
    });
    add("irfft", [](Rng& r) {
        return check({randn({2, 5}, r), randn({2, 5}, r)},
                     [](const V& x) { return ops::irfft({x[0], x[1], 8}, 8); }, 23);
    });
    add("softmax_cross_entropy", [](Rng& r) {
        const std::vector<TokenId> targets{0, 3, 2, 1, 4, 4};
        auto logits = randn({2, 3, 5}, r);
        std::vector<Tensor> in{logits};
        return numerics::check_gradients([&] { return ops::softmax_cross_entropy(in[0], targets); }, in);
    });
    add("ssm_kernel", [](Rng& r) {
        return check({randn({3, 2}, r), randn({3, 2}, r), randn({3, 2}, r), randn({3}, r)},
                     [](const V& x) { return model::ssm_kernel({x[0], x[1], x[2], x[3]}, 6); }, 25);
    });
    add("ssm_layer", [](Rng& r) {
        return check({randn({2, 3, 8}, r), randn({3, 2}, r), randn({3, 2}, r), randn({3, 2}, r), randn({3}, r)},
                     [](const V& x) { return model::ssm_layer(x[0], {x[1], x[2], x[3], x[4]}, 5); }, 26);
    });
    add("fourier_mlp_layer", [](Rng& r) {
        return check({randn({2, 3, 8}, r), randn({10, 6}, r, 0.4), randn({6}, r, 0.4), randn({6, 10}, r, 0.4),
                      randn({10}, r, 0.4)},
                     [](const V& x) { return model::fourier_mlp_layer(x[0], {x[1], x[2], x[3], x[4]}); }, 27);
    });
    for (bool sequential : {false, true}) {
        add(sequential ? "block_sequential" : "block", [sequential](Rng& r) {
            auto m = std::make_shared<model::Model>(tiny_model_config(), 31, model::InitMode::random);
            const auto& stage = m->down[0].stage;
            std::vector<Tensor> in{randn({2, 4, 8}, r), stage.time};
            for (const auto& p : m->parameters())
                if (p.name.starts_with("down0.block0.")) in.push_back(p.value);
            const std::vector<std::size_t> steps{3, 1};
            const auto& params = stage.blocks[0];
            return check(in,
                         [m, &stage, &params, steps, sequential](const V& x) {
                             return model::block(x[0], stage.time, steps, params, {4, sequential});
                         },
                         28);
        });
    }
    add("unet_end_to_end", [](Rng& r) {
        model::Model m(tiny_model_config(), 37, model::InitMode::random);
        std::vector<TokenId> tokens(16), targets(16);
        for (auto& v : tokens) v = static_cast<TokenId>(r.below(5));
        for (auto& v : targets) v = static_cast<TokenId>(r.below(5));
        const std::vector<std::size_t> steps{0, 3};
        std::vector<Tensor> params;
        for (const auto& p : m.parameters()) params.push_back(p.value);
        return numerics::check_gradients(
            [&] { return ops::softmax_cross_entropy(model::unet_forward(m, tokens, 2, steps), targets); }, params);
    });
    return cases;
}

}  // namespace sfdlm::cli
