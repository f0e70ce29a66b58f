#include "sfdlm/model/layers.hpp"

#include <cmath>
#include <stdexcept>
#include <string>
#include <vector>

#include "sfdlm/numerics/ops.hpp"

namespace sfdlm::model {

namespace ops = sfdlm::numerics;

namespace {

std::span<double> grad_of(const std::shared_ptr<numerics::TensorImpl>& t) {
    if (!t->requires_grad) return {};
    return t->grad_buffer();
}

void require(bool ok, const std::string& message) {
    if (!ok) throw std::invalid_argument(message);
}

Tensor activate(const Tensor& x, Activation a) { return a == Activation::gelu ? ops::gelu(x) : x; }

}  // namespace

Tensor ssm_decay(const Tensor& a_raw) { return ops::scale(ops::tanh(a_raw), kMaxDecay); }

Tensor ssm_kernel_from_decay(const Tensor& decay, const Tensor& b_in, const Tensor& c_out, const Tensor& d_skip,
                             std::size_t length) {
    require(length >= 1, "ssm_kernel: length must be at least 1");
    require(decay.rank() == 2, "ssm_kernel: decay must be [D,M]");
    require(b_in.shape() == decay.shape() && c_out.shape() == decay.shape(),
            "ssm_kernel: B and C must match decay shape " + numerics::shape_str(decay.shape()));
    const std::size_t width = decay.dim(0), state = decay.dim(1);
    require(d_skip.shape() == numerics::Shape{width}, "ssm_kernel: D_skip must be [D]");

    auto out = Tensor::zeros({width, length});
    auto k = out.mutable_data();
    for (std::size_t d = 0; d < width; ++d) {
        for (std::size_t m = 0; m < state; ++m) {
            const std::size_t i = d * state + m;
            const double a = decay.at(i);
            double term = c_out.at(i) * b_in.at(i);
            for (std::size_t n = 0; n < length; ++n) {
                k[d * length + n] += term;
                term *= a;
            }
        }
        k[d * length] += d_skip.at(d);
    }

    if (numerics::needs_recording({&decay, &b_in, &c_out, &d_skip})) {
        numerics::Tape::active()->record(
            {decay.impl(), b_in.impl(), c_out.impl(), d_skip.impl()}, out,
            [ai = decay.impl(), bi = b_in.impl(), ci = c_out.impl(), di = d_skip.impl(), o = out.impl().get(), width,
             state, length] {
                auto ga = grad_of(ai);
                auto gb = grad_of(bi);
                auto gc = grad_of(ci);
                auto gd = grad_of(di);
                for (std::size_t d = 0; d < width; ++d) {
                    const double* g = &o->grad[d * length];
                    if (!gd.empty()) gd[d] += g[0];
                    for (std::size_t m = 0; m < state; ++m) {
                        const std::size_t i = d * state + m;
                        const double a = ai->data[i], b = bi->data[i], c = ci->data[i];
                        // s0 = sum g[n] a^n, s1 = sum n g[n] a^(n-1)
                        double s0 = 0.0, s1 = 0.0, pw = 1.0, pw_prev = 0.0;
                        for (std::size_t n = 0; n < length; ++n) {
                            s0 += g[n] * pw;
                            s1 += static_cast<double>(n) * g[n] * pw_prev;
                            pw_prev = pw;
                            pw *= a;
                        }
                        if (!ga.empty()) ga[i] += c * b * s1;
                        if (!gb.empty()) gb[i] += c * s0;
                        if (!gc.empty()) gc[i] += b * s0;
                    }
                }
            });
    }
    return out;
}

Tensor ssm_kernel(const SsmLayerParams& p, std::size_t length) {
    return ssm_kernel_from_decay(ssm_decay(p.a_raw), p.b_in, p.c_out, p.d_skip, length);
}

Tensor ssm_layer(const Tensor& x, const SsmLayerParams& p, std::size_t kernel_len) {
    return ops::causal_depthwise_conv(x, ssm_kernel(p, kernel_len));
}

Tensor fourier_mlp_layer(const Tensor& x, const FourierMlpParams& p) {
    require(x.rank() == 3, "fourier_mlp_layer: expected [B,D,N], got " + numerics::shape_str(x.shape()));
    const std::size_t batch = x.dim(0), width = x.dim(1), len = x.dim(2);
    const std::size_t bins = len / 2 + 1;
    require(p.w1.rank() == 2 && p.w1.dim(0) == 2 * bins,
            "fourier_mlp_layer: layer configured for " + std::to_string(p.w1.rank() == 2 ? p.w1.dim(0) : 0) +
                " spectral inputs, sequence length " + std::to_string(len) + " gives " + std::to_string(2 * bins));

    auto spectrum = ops::rfft(x);
    auto z = ops::reshape(ops::concat_last(spectrum.real, spectrum.imag), {batch * width, 2 * bins});
    auto hidden = activate(ops::add_row_bias(ops::matmul(z, p.w1), p.b1), p.activation);
    auto mixed = ops::reshape(ops::add_row_bias(ops::matmul(hidden, p.w2), p.b2), {batch, width, 2 * bins});
    numerics::ComplexSpectrum adjusted{ops::slice_last(mixed, 0, bins), ops::slice_last(mixed, bins, 2 * bins), len};
    return ops::irfft(adjusted, len);
}

Tensor block(const Tensor& x, const Tensor& time_table, std::span<const std::size_t> steps, const BlockParams& p,
             const BlockOptions& options) {
    auto h = ops::add_step_embedding(x, time_table, steps);
    auto s = ops::gelu(ssm_layer(h, p.ssm, options.kernel_len));
    auto f = fourier_mlp_layer(options.fourier_after_ssm ? s : h, p.fourier);
    auto out = ops::add(x, ops::channel_linear(s, p.ssm_proj_w, p.ssm_proj_b));
    return ops::add(out, ops::channel_linear(f, p.fourier_proj_w, p.fourier_proj_b));
}

}  // namespace sfdlm::model
