#pragma once

#include <cstddef>
#include <span>

#include "sfdlm/numerics/tensor.hpp"

namespace sfdlm::model {

using numerics::Tensor;

/// Largest decay magnitude the squashing map can produce.
inline constexpr double kMaxDecay = 0.999;

/// Diagonal real state-space parameters, one M-dimensional system per channel.
struct SsmLayerParams {
    Tensor a_raw;   // [D,M], decay = kMaxDecay * tanh(a_raw)
    Tensor b_in;    // [D,M]
    Tensor c_out;   // [D,M]
    Tensor d_skip;  // [D]
};

/// kMaxDecay * tanh(a_raw); every entry has magnitude < 1.
Tensor ssm_decay(const Tensor& a_raw);

/// Impulse response with explicit decays:
/// k[d,0] = sum_m c[d,m] b[d,m] + d_skip[d], k[d,n] = sum_m c[d,m] a[d,m]^n b[d,m].
Tensor ssm_kernel_from_decay(const Tensor& decay, const Tensor& b_in, const Tensor& c_out, const Tensor& d_skip,
                             std::size_t length);

/// [D,K] kernel of the squashed parameters.
Tensor ssm_kernel(const SsmLayerParams& p, std::size_t length);

/// Causal depthwise convolution of x[B,D,N] with the materialized kernel.
Tensor ssm_layer(const Tensor& x, const SsmLayerParams& p, std::size_t kernel_len);

enum class Activation { gelu, identity };

/// Perceptron acting on concatenated [real, imag] half-spectrum bins.
/// Widths: 2F -> H -> 2F with F = N/2 + 1. Shared across batch and channels.
struct FourierMlpParams {
    Tensor w1;  // [2F,H]
    Tensor b1;  // [H]
    Tensor w2;  // [H,2F]
    Tensor b2;  // [2F]
    Activation activation = Activation::gelu;

    std::size_t bins() const { return w1.dim(0) / 2; }
};

/// rfft along positions, f_phi on [real, imag], irfft back to N.
Tensor fourier_mlp_layer(const Tensor& x, const FourierMlpParams& p);

struct BlockParams {
    SsmLayerParams ssm;
    FourierMlpParams fourier;
    Tensor ssm_proj_w;      // [D,D], zero at init
    Tensor ssm_proj_b;      // [D]
    Tensor fourier_proj_w;  // [D,D], zero at init
    Tensor fourier_proj_b;  // [D]
};

struct BlockOptions {
    std::size_t kernel_len = 16;
    bool fourier_after_ssm = false;
};

/// h = x + time[steps[b]];
/// out = x + P_s(gelu(ssm(h))) + P_f(fourier(h)).
Tensor block(const Tensor& x, const Tensor& time_table, std::span<const std::size_t> steps, const BlockParams& p,
             const BlockOptions& options);

}  // namespace sfdlm::model
