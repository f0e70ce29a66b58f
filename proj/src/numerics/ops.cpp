#include "sfdlm/numerics/ops.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>
#include <string>

#include "sfdlm/errors.hpp"
#include "sfdlm/numerics/fft.hpp"

namespace sfdlm::numerics {

namespace {

using ImplPtr = std::shared_ptr<TensorImpl>;

void require(bool ok, const std::string& message) {
    if (!ok) throw std::invalid_argument(message);
}

void require_same_shape(const Tensor& a, const Tensor& b, const char* op) {
    require(a.shape() == b.shape(), std::string(op) + ": shape mismatch " + shape_str(a.shape()) + " vs " +
                                        shape_str(b.shape()));
}

void require_rank(const Tensor& x, std::size_t rank, const char* op) {
    require(x.rank() == rank, std::string(op) + ": expected rank " + std::to_string(rank) + ", got " +
                                  shape_str(x.shape()));
}

/// Grad buffer of `t` when it participates in differentiation, else empty.
std::span<double> grad_of(const ImplPtr& t) {
    if (!t->requires_grad) return {};
    return t->grad_buffer();
}

template <class Fn>
void record_if_needed(std::initializer_list<const Tensor*> inputs, const Tensor& out, Fn&& backward) {
    if (!needs_recording(inputs)) return;
    std::vector<ImplPtr> impls;
    for (const auto* t : inputs) {
        if (t != nullptr && t->defined()) impls.push_back(t->impl());
    }
    Tape::active()->record(std::move(impls), out, std::forward<Fn>(backward));
}

template <class Forward, class Derivative>
Tensor unary(const Tensor& x, Forward f, Derivative df) {
    auto out = Tensor::zeros(x.shape());
    auto src = x.data();
    auto dst = out.mutable_data();
    for (std::size_t i = 0; i < src.size(); ++i) dst[i] = f(src[i]);
    record_if_needed({&x}, out, [xi = x.impl(), o = out.impl().get(), df] {
        auto gx = grad_of(xi);
        for (std::size_t i = 0; i < gx.size(); ++i) gx[i] += o->grad[i] * df(xi->data[i], o->data[i]);
    });
    return out;
}

/// Rows of length `last` for a tensor viewed as [rows, last].
std::size_t leading_rows(const Tensor& x) { return x.numel() / x.shape().back(); }

}  // namespace

Tensor add(const Tensor& a, const Tensor& b) {
    require_same_shape(a, b, "add");
    auto out = Tensor::zeros(a.shape());
    auto dst = out.mutable_data();
    for (std::size_t i = 0; i < dst.size(); ++i) dst[i] = a.data()[i] + b.data()[i];
    record_if_needed({&a, &b}, out, [ai = a.impl(), bi = b.impl(), o = out.impl().get()] {
        for (const auto& in : {ai, bi}) {
            auto g = grad_of(in);
            for (std::size_t i = 0; i < g.size(); ++i) g[i] += o->grad[i];
        }
    });
    return out;
}

Tensor sub(const Tensor& a, const Tensor& b) {
    require_same_shape(a, b, "sub");
    auto out = Tensor::zeros(a.shape());
    auto dst = out.mutable_data();
    for (std::size_t i = 0; i < dst.size(); ++i) dst[i] = a.data()[i] - b.data()[i];
    record_if_needed({&a, &b}, out, [ai = a.impl(), bi = b.impl(), o = out.impl().get()] {
        auto ga = grad_of(ai);
        for (std::size_t i = 0; i < ga.size(); ++i) ga[i] += o->grad[i];
        auto gb = grad_of(bi);
        for (std::size_t i = 0; i < gb.size(); ++i) gb[i] -= o->grad[i];
    });
    return out;
}

Tensor mul(const Tensor& a, const Tensor& b) {
    require_same_shape(a, b, "mul");
    auto out = Tensor::zeros(a.shape());
    auto dst = out.mutable_data();
    for (std::size_t i = 0; i < dst.size(); ++i) dst[i] = a.data()[i] * b.data()[i];
    record_if_needed({&a, &b}, out, [ai = a.impl(), bi = b.impl(), o = out.impl().get()] {
        auto ga = grad_of(ai);
        for (std::size_t i = 0; i < ga.size(); ++i) ga[i] += o->grad[i] * bi->data[i];
        auto gb = grad_of(bi);
        for (std::size_t i = 0; i < gb.size(); ++i) gb[i] += o->grad[i] * ai->data[i];
    });
    return out;
}

Tensor scale(const Tensor& a, double factor) {
    return unary(a, [factor](double v) { return v * factor; }, [factor](double, double) { return factor; });
}

Tensor tanh(const Tensor& x) {
    return unary(x, [](double v) { return std::tanh(v); }, [](double, double y) { return 1.0 - y * y; });
}

Tensor gelu(const Tensor& x) {
    static constexpr double kC = 0.7978845608028654;  // sqrt(2/pi)
    static constexpr double kA = 0.044715;
    return unary(
        x,
        [](double v) { return 0.5 * v * (1.0 + std::tanh(kC * (v + kA * v * v * v))); },
        [](double v, double) {
            const double th = std::tanh(kC * (v + kA * v * v * v));
            const double dinner = kC * (1.0 + 3.0 * kA * v * v);
            return 0.5 * (1.0 + th) + 0.5 * v * (1.0 - th * th) * dinner;
        });
}

Tensor sum(const Tensor& x) {
    double total = 0.0;
    for (double v : x.data()) total += v;
    auto out = Tensor::scalar(total);
    record_if_needed({&x}, out, [xi = x.impl(), o = out.impl().get()] {
        auto g = grad_of(xi);
        for (auto& v : g) v += o->grad[0];
    });
    return out;
}

Tensor mean(const Tensor& x) {
    require(x.numel() > 0, "mean: empty tensor");
    return scale(sum(x), 1.0 / static_cast<double>(x.numel()));
}

Tensor matmul(const Tensor& a, const Tensor& b) {
    require_rank(a, 2, "matmul");
    require_rank(b, 2, "matmul");
    const std::size_t m = a.dim(0), k = a.dim(1), n = b.dim(1);
    require(b.dim(0) == k, "matmul: inner dimension mismatch " + shape_str(a.shape()) + " x " + shape_str(b.shape()));
    auto out = Tensor::zeros({m, n});
    auto c = out.mutable_data();
    auto av = a.data();
    auto bv = b.data();
    for (std::size_t i = 0; i < m; ++i) {
        for (std::size_t p = 0; p < k; ++p) {
            const double aip = av[i * k + p];
            if (aip == 0.0) continue;
            const double* brow = &bv[p * n];
            double* crow = &c[i * n];
            for (std::size_t j = 0; j < n; ++j) crow[j] += aip * brow[j];
        }
    }
    record_if_needed({&a, &b}, out, [ai = a.impl(), bi = b.impl(), o = out.impl().get(), m, k, n] {
        const auto& g = o->grad;
        if (auto ga = grad_of(ai); !ga.empty()) {
            // dA = G B^T
            for (std::size_t i = 0; i < m; ++i) {
                for (std::size_t p = 0; p < k; ++p) {
                    double acc = 0.0;
                    for (std::size_t j = 0; j < n; ++j) acc += g[i * n + j] * bi->data[p * n + j];
                    ga[i * k + p] += acc;
                }
            }
        }
        if (auto gb = grad_of(bi); !gb.empty()) {
            // dB = A^T G
            for (std::size_t i = 0; i < m; ++i) {
                for (std::size_t p = 0; p < k; ++p) {
                    const double aip = ai->data[i * k + p];
                    if (aip == 0.0) continue;
                    for (std::size_t j = 0; j < n; ++j) gb[p * n + j] += aip * g[i * n + j];
                }
            }
        }
    });
    return out;
}

Tensor add_row_bias(const Tensor& x, const Tensor& bias) {
    require_rank(bias, 1, "add_row_bias");
    require(x.rank() >= 1 && x.shape().back() == bias.dim(0), "add_row_bias: bias width mismatch");
    const std::size_t cols = bias.dim(0);
    const std::size_t rows = leading_rows(x);
    auto out = Tensor::zeros(x.shape());
    auto dst = out.mutable_data();
    for (std::size_t r = 0; r < rows; ++r)
        for (std::size_t c = 0; c < cols; ++c) dst[r * cols + c] = x.data()[r * cols + c] + bias.data()[c];
    record_if_needed({&x, &bias}, out, [xi = x.impl(), bi = bias.impl(), o = out.impl().get(), rows, cols] {
        auto gx = grad_of(xi);
        for (std::size_t i = 0; i < gx.size(); ++i) gx[i] += o->grad[i];
        auto gb = grad_of(bi);
        if (!gb.empty())
            for (std::size_t r = 0; r < rows; ++r)
                for (std::size_t c = 0; c < cols; ++c) gb[c] += o->grad[r * cols + c];
    });
    return out;
}

Tensor channel_linear(const Tensor& x, const Tensor& weight, const Tensor& bias) {
    require_rank(x, 3, "channel_linear");
    require_rank(weight, 2, "channel_linear");
    const std::size_t batch = x.dim(0), cin = x.dim(1), len = x.dim(2), cout = weight.dim(0);
    require(weight.dim(1) == cin, "channel_linear: weight " + shape_str(weight.shape()) + " incompatible with input " +
                                      shape_str(x.shape()));
    const bool has_bias = bias.defined();
    if (has_bias) require(bias.rank() == 1 && bias.dim(0) == cout, "channel_linear: bias width mismatch");

    auto out = Tensor::zeros({batch, cout, len});
    auto y = out.mutable_data();
    auto xv = x.data();
    auto wv = weight.data();
    for (std::size_t b = 0; b < batch; ++b) {
        for (std::size_t o = 0; o < cout; ++o) {
            double* yrow = &y[(b * cout + o) * len];
            if (has_bias) std::fill(yrow, yrow + len, bias.data()[o]);
            for (std::size_t i = 0; i < cin; ++i) {
                const double w = wv[o * cin + i];
                if (w == 0.0) continue;
                const double* xrow = &xv[(b * cin + i) * len];
                for (std::size_t n = 0; n < len; ++n) yrow[n] += w * xrow[n];
            }
        }
    }
    record_if_needed({&x, &weight, &bias}, out,
                     [xi = x.impl(), wi = weight.impl(), bi = has_bias ? bias.impl() : nullptr, o = out.impl().get(),
                      batch, cin, cout, len] {
                         const auto& g = o->grad;
                         auto gx = grad_of(xi);
                         auto gw = grad_of(wi);
                         std::span<double> gb = bi ? grad_of(bi) : std::span<double>{};
                         for (std::size_t b = 0; b < batch; ++b) {
                             for (std::size_t oc = 0; oc < cout; ++oc) {
                                 const double* grow = &g[(b * cout + oc) * len];
                                 if (!gb.empty())
                                     for (std::size_t n = 0; n < len; ++n) gb[oc] += grow[n];
                                 for (std::size_t i = 0; i < cin; ++i) {
                                     const double* xrow = &xi->data[(b * cin + i) * len];
                                     if (!gw.empty()) {
                                         double acc = 0.0;
                                         for (std::size_t n = 0; n < len; ++n) acc += grow[n] * xrow[n];
                                         gw[oc * cin + i] += acc;
                                     }
                                     if (!gx.empty()) {
                                         const double w = wi->data[oc * cin + i];
                                         double* gxrow = &gx[(b * cin + i) * len];
                                         for (std::size_t n = 0; n < len; ++n) gxrow[n] += w * grow[n];
                                     }
                                 }
                             }
                         }
                     });
    return out;
}

Tensor embedding(const Tensor& table, std::span<const TokenId> ids, std::size_t batch) {
    require_rank(table, 2, "embedding");
    require(batch > 0 && ids.size() % batch == 0, "embedding: id count not divisible by batch");
    const std::size_t vocab = table.dim(0), width = table.dim(1), len = ids.size() / batch;
    for (auto id : ids) {
        require(id >= 0 && static_cast<std::size_t>(id) < vocab, "embedding: token id " + std::to_string(id) +
                                                                     " out of range [0," + std::to_string(vocab) + ")");
    }
    auto out = Tensor::zeros({batch, width, len});
    auto y = out.mutable_data();
    for (std::size_t b = 0; b < batch; ++b)
        for (std::size_t n = 0; n < len; ++n) {
            const auto row = static_cast<std::size_t>(ids[b * len + n]) * width;
            for (std::size_t d = 0; d < width; ++d) y[(b * width + d) * len + n] = table.data()[row + d];
        }
    record_if_needed({&table}, out,
                     [ti = table.impl(), o = out.impl().get(), idv = std::vector<TokenId>(ids.begin(), ids.end()),
                      batch, width, len] {
                         auto gt = grad_of(ti);
                         for (std::size_t b = 0; b < batch; ++b)
                             for (std::size_t n = 0; n < len; ++n) {
                                 const auto row = static_cast<std::size_t>(idv[b * len + n]) * width;
                                 for (std::size_t d = 0; d < width; ++d) gt[row + d] += o->grad[(b * width + d) * len + n];
                             }
                     });
    return out;
}

Tensor add_step_embedding(const Tensor& x, const Tensor& table, std::span<const std::size_t> steps) {
    require_rank(x, 3, "add_step_embedding");
    require_rank(table, 2, "add_step_embedding");
    const std::size_t batch = x.dim(0), width = x.dim(1), len = x.dim(2);
    require(table.dim(1) == width, "add_step_embedding: table width mismatch");
    require(steps.size() == batch, "add_step_embedding: need one step per batch row");
    for (auto s : steps) require(s < table.dim(0), "add_step_embedding: step " + std::to_string(s) + " out of range");

    auto out = Tensor::zeros(x.shape());
    auto y = out.mutable_data();
    for (std::size_t b = 0; b < batch; ++b)
        for (std::size_t d = 0; d < width; ++d) {
            const double e = table.data()[steps[b] * width + d];
            for (std::size_t n = 0; n < len; ++n) {
                const std::size_t i = (b * width + d) * len + n;
                y[i] = x.data()[i] + e;
            }
        }
    record_if_needed({&x, &table}, out,
                     [xi = x.impl(), ti = table.impl(), o = out.impl().get(),
                      sv = std::vector<std::size_t>(steps.begin(), steps.end()), batch, width, len] {
                         auto gx = grad_of(xi);
                         for (std::size_t i = 0; i < gx.size(); ++i) gx[i] += o->grad[i];
                         auto gt = grad_of(ti);
                         if (gt.empty()) return;
                         for (std::size_t b = 0; b < batch; ++b)
                             for (std::size_t d = 0; d < width; ++d) {
                                 double acc = 0.0;
                                 for (std::size_t n = 0; n < len; ++n) acc += o->grad[(b * width + d) * len + n];
                                 gt[sv[b] * width + d] += acc;
                             }
                     });
    return out;
}

Tensor reshape(const Tensor& x, Shape shape) {
    require(shape_numel(shape) == x.numel(),
            "reshape: cannot view " + shape_str(x.shape()) + " as " + shape_str(shape));
    auto out = Tensor::from(std::move(shape), std::vector<double>(x.data().begin(), x.data().end()));
    record_if_needed({&x}, out, [xi = x.impl(), o = out.impl().get()] {
        auto g = grad_of(xi);
        for (std::size_t i = 0; i < g.size(); ++i) g[i] += o->grad[i];
    });
    return out;
}

Tensor transpose_last2(const Tensor& x) {
    require_rank(x, 3, "transpose_last2");
    const std::size_t a = x.dim(0), r = x.dim(1), c = x.dim(2);
    auto out = Tensor::zeros({a, c, r});
    auto y = out.mutable_data();
    for (std::size_t i = 0; i < a; ++i)
        for (std::size_t j = 0; j < r; ++j)
            for (std::size_t k = 0; k < c; ++k) y[(i * c + k) * r + j] = x.data()[(i * r + j) * c + k];
    record_if_needed({&x}, out, [xi = x.impl(), o = out.impl().get(), a, r, c] {
        auto g = grad_of(xi);
        for (std::size_t i = 0; i < a; ++i)
            for (std::size_t j = 0; j < r; ++j)
                for (std::size_t k = 0; k < c; ++k) g[(i * r + j) * c + k] += o->grad[(i * c + k) * r + j];
    });
    return out;
}

Tensor concat_last(const Tensor& a, const Tensor& b) {
    require(a.rank() >= 1 && a.rank() == b.rank(), "concat_last: rank mismatch");
    require(std::equal(a.shape().begin(), a.shape().end() - 1, b.shape().begin()),
            "concat_last: leading shape mismatch " + shape_str(a.shape()) + " vs " + shape_str(b.shape()));
    const std::size_t rows = leading_rows(a), wa = a.shape().back(), wb = b.shape().back();
    Shape shape = a.shape();
    shape.back() = wa + wb;
    auto out = Tensor::zeros(shape);
    auto y = out.mutable_data();
    for (std::size_t r = 0; r < rows; ++r) {
        std::copy_n(&a.data()[r * wa], wa, &y[r * (wa + wb)]);
        std::copy_n(&b.data()[r * wb], wb, &y[r * (wa + wb) + wa]);
    }
    record_if_needed({&a, &b}, out, [ai = a.impl(), bi = b.impl(), o = out.impl().get(), rows, wa, wb] {
        auto ga = grad_of(ai);
        auto gb = grad_of(bi);
        for (std::size_t r = 0; r < rows; ++r) {
            if (!ga.empty())
                for (std::size_t c = 0; c < wa; ++c) ga[r * wa + c] += o->grad[r * (wa + wb) + c];
            if (!gb.empty())
                for (std::size_t c = 0; c < wb; ++c) gb[r * wb + c] += o->grad[r * (wa + wb) + wa + c];
        }
    });
    return out;
}

Tensor slice_last(const Tensor& x, std::size_t begin, std::size_t end) {
    require(x.rank() >= 1 && begin <= end && end <= x.shape().back(), "slice_last: range out of bounds");
    const std::size_t rows = leading_rows(x), width = x.shape().back(), w = end - begin;
    Shape shape = x.shape();
    shape.back() = w;
    auto out = Tensor::zeros(shape);
    auto y = out.mutable_data();
    for (std::size_t r = 0; r < rows; ++r) std::copy_n(&x.data()[r * width + begin], w, &y[r * w]);
    record_if_needed({&x}, out, [xi = x.impl(), o = out.impl().get(), rows, width, w, begin] {
        auto g = grad_of(xi);
        for (std::size_t r = 0; r < rows; ++r)
            for (std::size_t c = 0; c < w; ++c) g[r * width + begin + c] += o->grad[r * w + c];
    });
    return out;
}

Tensor avg_pool2(const Tensor& x) {
    require_rank(x, 3, "avg_pool2");
    const std::size_t rows = x.dim(0) * x.dim(1), len = x.dim(2);
    require(len % 2 == 0, "avg_pool2: sequence length must be even");
    const std::size_t half = len / 2;
    auto out = Tensor::zeros({x.dim(0), x.dim(1), half});
    auto y = out.mutable_data();
    for (std::size_t r = 0; r < rows; ++r)
        for (std::size_t n = 0; n < half; ++n)
            y[r * half + n] = 0.5 * (x.data()[r * len + 2 * n] + x.data()[r * len + 2 * n + 1]);
    record_if_needed({&x}, out, [xi = x.impl(), o = out.impl().get(), rows, len, half] {
        auto g = grad_of(xi);
        for (std::size_t r = 0; r < rows; ++r)
            for (std::size_t n = 0; n < half; ++n) {
                const double gv = 0.5 * o->grad[r * half + n];
                g[r * len + 2 * n] += gv;
                g[r * len + 2 * n + 1] += gv;
            }
    });
    return out;
}

Tensor upsample2(const Tensor& x) {
    require_rank(x, 3, "upsample2");
    const std::size_t rows = x.dim(0) * x.dim(1), len = x.dim(2);
    auto out = Tensor::zeros({x.dim(0), x.dim(1), 2 * len});
    auto y = out.mutable_data();
    for (std::size_t r = 0; r < rows; ++r)
        for (std::size_t n = 0; n < len; ++n) {
            y[r * 2 * len + 2 * n] = x.data()[r * len + n];
            y[r * 2 * len + 2 * n + 1] = x.data()[r * len + n];
        }
    record_if_needed({&x}, out, [xi = x.impl(), o = out.impl().get(), rows, len] {
        auto g = grad_of(xi);
        for (std::size_t r = 0; r < rows; ++r)
            for (std::size_t n = 0; n < len; ++n)
                g[r * len + n] += o->grad[r * 2 * len + 2 * n] + o->grad[r * 2 * len + 2 * n + 1];
    });
    return out;
}

Tensor causal_depthwise_conv(const Tensor& x, const Tensor& kernel) {
    require_rank(x, 3, "causal_depthwise_conv");
    require_rank(kernel, 2, "causal_depthwise_conv");
    const std::size_t batch = x.dim(0), width = x.dim(1), len = x.dim(2), klen = kernel.dim(1);
    require(kernel.dim(0) == width, "causal_depthwise_conv: kernel has " + std::to_string(kernel.dim(0)) +
                                        " channels, input has " + std::to_string(width));
    require(klen > 0, "causal_depthwise_conv: kernel length must be positive");
    require(klen <= len, "causal_depthwise_conv: kernel length " + std::to_string(klen) + " exceeds sequence length " +
                             std::to_string(len));

    auto out = Tensor::zeros(x.shape());
    auto y = out.mutable_data();
    for (std::size_t b = 0; b < batch; ++b)
        for (std::size_t d = 0; d < width; ++d) {
            const double* xrow = &x.data()[(b * width + d) * len];
            const double* k = &kernel.data()[d * klen];
            double* yrow = &y[(b * width + d) * len];
            for (std::size_t n = 0; n < len; ++n) {
                double acc = 0.0;
                const std::size_t jmax = std::min(klen - 1, n);
                for (std::size_t j = 0; j <= jmax; ++j) acc += k[j] * xrow[n - j];
                yrow[n] = acc;
            }
        }
    record_if_needed({&x, &kernel}, out,
                     [xi = x.impl(), ki = kernel.impl(), o = out.impl().get(), batch, width, len, klen] {
                         auto gx = grad_of(xi);
                         auto gk = grad_of(ki);
                         for (std::size_t b = 0; b < batch; ++b)
                             for (std::size_t d = 0; d < width; ++d) {
                                 const std::size_t row = (b * width + d) * len;
                                 for (std::size_t n = 0; n < len; ++n) {
                                     const double g = o->grad[row + n];
                                     if (g == 0.0) continue;
                                     const std::size_t jmax = std::min(klen - 1, n);
                                     for (std::size_t j = 0; j <= jmax; ++j) {
                                         if (!gx.empty()) gx[row + n - j] += ki->data[d * klen + j] * g;
                                         if (!gk.empty()) gk[d * klen + j] += xi->data[row + n - j] * g;
                                     }
                                 }
                             }
                     });
    return out;
}

ComplexSpectrum rfft(const Tensor& x) {
    require(x.rank() >= 1, "rfft: input must have at least one axis");
    const std::size_t n = x.shape().back();
    require(n >= 2, "rfft: length must be at least 2, got " + std::to_string(n));
    for (double v : x.data()) require(std::isfinite(v), "rfft: non-finite input value");

    const std::size_t rows = leading_rows(x), bins = fft::rfft_bins(n);
    Shape shape = x.shape();
    shape.back() = bins;
    ComplexSpectrum spec{Tensor::zeros(shape), Tensor::zeros(shape), n};
    auto re = spec.real.mutable_data();
    auto im = spec.imag.mutable_data();
    std::vector<fft::Complex> buf(n);
    for (std::size_t r = 0; r < rows; ++r) {
        for (std::size_t j = 0; j < n; ++j) buf[j] = {x.data()[r * n + j], 0.0};
        fft::transform(buf, -1);
        for (std::size_t k = 0; k < bins; ++k) {
            re[r * bins + k] = buf[k].real();
            im[r * bins + k] = buf[k].imag();
        }
    }
    // The exact zeros of a real signal's spectrum.
    for (std::size_t r = 0; r < rows; ++r) {
        im[r * bins] = 0.0;
        if (n % 2 == 0) im[r * bins + bins - 1] = 0.0;
    }

    // Adjoint: dx_n = Re(sum_k G_k e^{+2 pi i k n / N}) over the stored half
    // spectrum, with G_k = g_real for the real part and i * g_imag for the
    // imaginary part.
    auto adjoint = [n, rows, bins](const ImplPtr& xi, const TensorImpl* o, bool imag_part) {
        auto gx = grad_of(xi);
        std::vector<fft::Complex> z(n);
        for (std::size_t r = 0; r < rows; ++r) {
            std::fill(z.begin(), z.end(), fft::Complex{});
            for (std::size_t k = 0; k < bins; ++k) {
                const double g = o->grad[r * bins + k];
                z[k] = imag_part ? fft::Complex{0.0, g} : fft::Complex{g, 0.0};
            }
            fft::transform(z, +1);
            for (std::size_t j = 0; j < n; ++j) gx[r * n + j] += z[j].real();
        }
    };
    record_if_needed({&x}, spec.real,
                     [xi = x.impl(), o = spec.real.impl().get(), adjoint] { adjoint(xi, o, false); });
    record_if_needed({&x}, spec.imag,
                     [xi = x.impl(), o = spec.imag.impl().get(), adjoint] { adjoint(xi, o, true); });
    return spec;
}

Tensor irfft(const ComplexSpectrum& spectrum, std::size_t n) {
    const auto& re_t = spectrum.real;
    const auto& im_t = spectrum.imag;
    require(re_t.defined() && im_t.defined() && re_t.shape() == im_t.shape(),
            "irfft: real and imaginary parts must have identical shapes");
    require(n >= 2, "irfft: length must be at least 2");
    const std::size_t bins = re_t.shape().back();
    require(bins == fft::rfft_bins(n), "irfft: " + std::to_string(bins) + " bins inconsistent with length " +
                                           std::to_string(n));
    const std::size_t rows = leading_rows(re_t);
    Shape shape = re_t.shape();
    shape.back() = n;
    auto out = Tensor::zeros(shape);
    auto y = out.mutable_data();
    std::vector<fft::Complex> z(n);
    const double inv_n = 1.0 / static_cast<double>(n);
    for (std::size_t r = 0; r < rows; ++r) {
        std::fill(z.begin(), z.end(), fft::Complex{});
        for (std::size_t k = 0; k < bins; ++k) {
            const fft::Complex v{re_t.data()[r * bins + k], im_t.data()[r * bins + k]};
            z[k] = v;
            if (k > 0 && n - k != k) z[n - k] = std::conj(v);
        }
        fft::transform(z, +1);
        for (std::size_t j = 0; j < n; ++j) y[r * n + j] = z[j].real() * inv_n;
    }

    record_if_needed({&re_t, &im_t}, out,
                     [ri = re_t.impl(), ii = im_t.impl(), o = out.impl().get(), n, rows, bins, inv_n] {
                         auto gr = grad_of(ri);
                         auto gi = grad_of(ii);
                         std::vector<fft::Complex> buf(n);
                         for (std::size_t r = 0; r < rows; ++r) {
                             for (std::size_t j = 0; j < n; ++j) buf[j] = {o->grad[r * n + j], 0.0};
                             fft::transform(buf, -1);
                             for (std::size_t k = 0; k < bins; ++k) {
                                 const bool edge = k == 0 || (n % 2 == 0 && k == n / 2);
                                 const double w = (edge ? 1.0 : 2.0) * inv_n;
                                 if (!gr.empty()) gr[r * bins + k] += w * buf[k].real();
                                 if (!gi.empty() && !edge) gi[r * bins + k] += w * buf[k].imag();
                             }
                         }
                     });
    return out;
}

Tensor softmax_cross_entropy(const Tensor& logits, std::span<const TokenId> targets) {
    require_rank(logits, 3, "softmax_cross_entropy");
    const std::size_t rows = logits.dim(0) * logits.dim(1), vocab = logits.dim(2);
    require(targets.size() == rows, "softmax_cross_entropy: expected " + std::to_string(rows) + " targets, got " +
                                        std::to_string(targets.size()));
    for (auto t : targets) {
        require(t >= 0 && static_cast<std::size_t>(t) < vocab,
                "softmax_cross_entropy: target id " + std::to_string(t) + " out of range [0," +
                    std::to_string(vocab) + ")");
    }
    for (double v : logits.data()) {
        if (!std::isfinite(v)) throw NumericalError("softmax_cross_entropy: non-finite logit");
    }

    std::vector<double> probs(logits.numel());
    double total = 0.0;
    for (std::size_t r = 0; r < rows; ++r) {
        const double* l = &logits.data()[r * vocab];
        const double mx = *std::max_element(l, l + vocab);
        double z = 0.0;
        for (std::size_t v = 0; v < vocab; ++v) {
            probs[r * vocab + v] = std::exp(l[v] - mx);
            z += probs[r * vocab + v];
        }
        for (std::size_t v = 0; v < vocab; ++v) probs[r * vocab + v] /= z;
        total += (std::log(z) + mx) - l[targets[r]];
    }
    const double inv_rows = 1.0 / static_cast<double>(rows);
    auto out = Tensor::scalar(total * inv_rows);
    record_if_needed({&logits}, out,
                     [li = logits.impl(), o = out.impl().get(), probs = std::move(probs),
                      tv = std::vector<TokenId>(targets.begin(), targets.end()), rows, vocab, inv_rows] {
                         auto g = grad_of(li);
                         const double scale = o->grad[0] * inv_rows;
                         for (std::size_t r = 0; r < rows; ++r) {
                             for (std::size_t v = 0; v < vocab; ++v) g[r * vocab + v] += scale * probs[r * vocab + v];
                             g[r * vocab + static_cast<std::size_t>(tv[r])] -= scale;
                         }
                     });
    return out;
}

}  // namespace sfdlm::numerics
