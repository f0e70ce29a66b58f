#pragma once

#include <cstddef>
#include <span>

#include "sfdlm/numerics/tensor.hpp"
#include "sfdlm/types.hpp"

namespace sfdlm::numerics {

/// Half spectrum of a real signal along the last axis. Shapes are [..., n/2+1].
struct ComplexSpectrum {
    Tensor real;
    Tensor imag;
    std::size_t original_length = 0;
};

// Elementwise. Operands must have identical shapes.
Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor scale(const Tensor& a, double factor);
Tensor tanh(const Tensor& x);
/// tanh-approximation GELU.
Tensor gelu(const Tensor& x);

// Reductions to a scalar.
Tensor sum(const Tensor& x);
Tensor mean(const Tensor& x);

/// [M,K] x [K,N] -> [M,N].
Tensor matmul(const Tensor& a, const Tensor& b);

/// x[..., C] + bias[C], broadcast over leading axes.
Tensor add_row_bias(const Tensor& x, const Tensor& bias);

/// Per-position channel mixing: y[b,o,n] = sum_i w[o,i] x[b,i,n] + bias[o].
/// `bias` may be an undefined Tensor.
Tensor channel_linear(const Tensor& x, const Tensor& weight, const Tensor& bias);

/// Row lookup into table[V,D] producing a channel-first [B,D,N] map.
/// ids holds B*N entries, batch-major.
Tensor embedding(const Tensor& table, std::span<const TokenId> ids, std::size_t batch);

/// x[B,D,N] + table[steps[b], :] broadcast over positions.
Tensor add_step_embedding(const Tensor& x, const Tensor& table, std::span<const std::size_t> steps);

/// Row-major reinterpretation with the same element count.
Tensor reshape(const Tensor& x, Shape shape);

/// [A,B,C] -> [A,C,B].
Tensor transpose_last2(const Tensor& x);

/// Concatenation / slicing along the last axis.
Tensor concat_last(const Tensor& a, const Tensor& b);
Tensor slice_last(const Tensor& x, std::size_t begin, std::size_t end);

/// Average of adjacent pairs along positions: [B,D,N] -> [B,D,N/2]. N must be even.
Tensor avg_pool2(const Tensor& x);
/// Nearest-neighbour repeat along positions: [B,D,N] -> [B,D,2N].
Tensor upsample2(const Tensor& x);

/// y[b,d,n] = sum_{j<K} k[d,j] x[b,d,n-j], terms with n-j < 0 dropped.
Tensor causal_depthwise_conv(const Tensor& x, const Tensor& kernel);

/// Unnormalized forward real FFT along the last axis (length >= 2).
ComplexSpectrum rfft(const Tensor& x);
/// Inverse of rfft including the 1/n factor. Imaginary parts of the DC bin
/// (and of the Nyquist bin for even n) are ignored.
Tensor irfft(const ComplexSpectrum& spectrum, std::size_t n);

/// Mean softmax cross-entropy over all B*N positions of logits[B,N,V].
Tensor softmax_cross_entropy(const Tensor& logits, std::span<const TokenId> targets);

}  // namespace sfdlm::numerics
