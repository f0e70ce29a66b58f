#include <cmath>
#include <complex>
#include <numbers>
#include <vector>

#include "doctest.h"
#include "sfdlm/errors.hpp"
#include "sfdlm/numerics/fft.hpp"
#include "sfdlm/numerics/grad_check.hpp"
#include "sfdlm/numerics/ops.hpp"
#include "sfdlm/rng.hpp"

using namespace sfdlm;
using namespace sfdlm::numerics;

namespace {

Tensor random_tensor(Shape shape, Rng& rng, bool requires_grad = false) {
    std::vector<double> v(shape_numel(shape));
    for (auto& x : v) x = 2.0 * rng.uniform() - 1.0;
    return Tensor::from(std::move(shape), std::move(v), requires_grad);
}

/// Test-side DFT oracle, written straight from the sum definition.
std::vector<std::complex<double>> naive_rdft(const std::vector<double>& x) {
    const std::size_t n = x.size();
    std::vector<std::complex<double>> out(n / 2 + 1);
    for (std::size_t k = 0; k < out.size(); ++k)
        for (std::size_t j = 0; j < n; ++j) {
            const double a = -2.0 * std::numbers::pi * static_cast<double>(k * j) / static_cast<double>(n);
            out[k] += x[j] * std::complex<double>(std::cos(a), std::sin(a));
        }
    return out;
}

void check_close(std::span<const double> got, const std::vector<double>& want, double tol) {
    REQUIRE(got.size() == want.size());
    for (std::size_t i = 0; i < want.size(); ++i) CHECK(std::abs(got[i] - want[i]) <= tol);
}

double max_abs_diff(std::span<const double> a, std::span<const double> b) {
    double m = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
    return m;
}

/// Fixed random projection so gradients are O(1) and non-symmetric.
Tensor weighted_sum(const Tensor& y, std::uint64_t seed) {
    Rng rng(seed, 99);
    auto w = random_tensor(y.shape(), rng);
    return sum(mul(y, w));
}

}  // namespace

TEST_CASE("rfft examples") {
    auto dc = rfft(Tensor::from({1, 1, 4}, {1, 1, 1, 1}));
    check_close(dc.real.data(), {4, 0, 0}, 1e-12);
    check_close(dc.imag.data(), {0, 0, 0}, 1e-12);
    CHECK(dc.real.shape() == Shape{1, 1, 3});

    auto impulse = rfft(Tensor::from({1, 1, 4}, {1, 0, 0, 0}));
    check_close(impulse.real.data(), {1, 1, 1}, 1e-12);
    check_close(impulse.imag.data(), {0, 0, 0}, 1e-12);

    // X_1 = e^{-i pi/2} - e^{-3 i pi/2} = -2i
    auto sine = rfft(Tensor::from({1, 1, 4}, {0, 1, 0, -1}));
    check_close(sine.real.data(), {0, 0, 0}, 1e-12);
    check_close(sine.imag.data(), {0, -2, 0}, 1e-12);
}

TEST_CASE("rfft rejects short or non-finite input") {
    CHECK_THROWS_AS(rfft(Tensor::from({1}, {1.0})), std::invalid_argument);
    CHECK_THROWS_AS(rfft(Tensor::from({2}, {1.0, std::nan("")})), std::invalid_argument);
    CHECK_THROWS_AS(rfft(Tensor::from({2}, {1.0, INFINITY})), std::invalid_argument);
}

TEST_CASE("irfft examples") {
    auto x = Tensor::from({4}, {1, 2, 3, 4});
    auto back = irfft(rfft(x), 4);
    CHECK(max_abs_diff(back.data(), x.data()) < 1e-9);

    ComplexSpectrum dc{Tensor::from({3}, {4, 0, 0}), Tensor::from({3}, {0, 0, 0}), 4};
    check_close(irfft(dc, 4).data(), {1, 1, 1, 1}, 1e-12);

    ComplexSpectrum sine{Tensor::from({3}, {0, 0, 0}), Tensor::from({3}, {0, -2, 0}), 4};
    check_close(irfft(sine, 4).data(), {0, 1, 0, -1}, 1e-12);

    CHECK_THROWS_AS(irfft(dc, 6), std::invalid_argument);
    CHECK_THROWS_AS(irfft(dc, 3), std::invalid_argument);
}

TEST_CASE("radix-2 and direct transforms agree with the naive oracle") {
    Rng rng(7);
    for (std::size_t n : {2u, 3u, 5u, 8u, 12u, 16u, 64u}) {
        std::vector<double> x(n);
        for (auto& v : x) v = rng.uniform() - 0.5;
        auto spec = rfft(Tensor::from({n}, x));
        auto want = naive_rdft(x);
        for (std::size_t k = 0; k < want.size(); ++k) {
            CHECK(std::abs(spec.real.at(k) - want[k].real()) < 1e-12);
            CHECK(std::abs(spec.imag.at(k) - want[k].imag()) < 1e-12);
        }
    }
}

TEST_CASE("fft invariants: round trip, linearity, Parseval") {
    Rng rng(11);
    for (std::size_t n = 2; n <= 64; ++n) {
        auto x = random_tensor({2, n}, rng);
        auto y = random_tensor({2, n}, rng);
        CHECK(max_abs_diff(irfft(rfft(x), n).data(), x.data()) < 1e-9);

        const double a = 0.7, b = -1.3;
        auto lhs = rfft(add(scale(x, a), scale(y, b)));
        auto sx = rfft(x), sy = rfft(y);
        auto rhs_re = add(scale(sx.real, a), scale(sy.real, b));
        auto rhs_im = add(scale(sx.imag, a), scale(sy.imag, b));
        CHECK(max_abs_diff(lhs.real.data(), rhs_re.data()) < 1e-9);
        CHECK(max_abs_diff(lhs.imag.data(), rhs_im.data()) < 1e-9);

        const std::size_t bins = n / 2 + 1;
        for (std::size_t r = 0; r < 2; ++r) {
            double energy = 0.0;
            for (std::size_t j = 0; j < n; ++j) energy += x.at(r * n + j) * x.at(r * n + j);
            double spectral = 0.0;
            for (std::size_t k = 0; k < bins; ++k) {
                const double mag2 = sx.real.at(r * bins + k) * sx.real.at(r * bins + k) +
                                    sx.imag.at(r * bins + k) * sx.imag.at(r * bins + k);
                const bool edge = k == 0 || (n % 2 == 0 && k == n / 2);
                spectral += edge ? mag2 : 2.0 * mag2;
            }
            CHECK(std::abs(energy - spectral / static_cast<double>(n)) < 1e-9);
        }
        // imag of DC (and Nyquist for even n) vanish for real input
        CHECK(sx.imag.at(0) == 0.0);
        if (n % 2 == 0) CHECK(sx.imag.at(bins - 1) == 0.0);
    }
}

TEST_CASE("causal depthwise convolution examples") {
    Rng rng(3);
    auto x = random_tensor({2, 3, 5}, rng);
    auto ident = Tensor::from({3, 3}, {1, 0, 0, 1, 0, 0, 1, 0, 0});
    CHECK(max_abs_diff(causal_depthwise_conv(x, ident).data(), x.data()) == 0.0);

    auto shift = causal_depthwise_conv(Tensor::from({1, 1, 4}, {1, 2, 3, 4}), Tensor::from({1, 2}, {0, 1}));
    check_close(shift.data(), {0, 1, 2, 3}, 1e-15);

    auto avg = causal_depthwise_conv(Tensor::from({1, 1, 4}, {1, 1, 1, 1}), Tensor::from({1, 2}, {0.5, 0.5}));
    check_close(avg.data(), {0.5, 1, 1, 1}, 1e-15);

    CHECK_THROWS_AS(causal_depthwise_conv(Tensor::zeros({1, 1, 2}), Tensor::zeros({1, 3})), std::invalid_argument);
    CHECK_THROWS_AS(causal_depthwise_conv(Tensor::zeros({1, 1, 2}), Tensor::zeros({1, 0})), std::invalid_argument);
}

TEST_CASE("causal convolution ignores future positions") {
    Rng rng(5);
    auto x = random_tensor({1, 2, 16}, rng);
    auto k = random_tensor({2, 6}, rng);
    auto y = causal_depthwise_conv(x, k);
    for (std::size_t cut = 0; cut < 16; ++cut) {
        auto x2 = x.detach();
        auto v = x2.mutable_data();
        for (std::size_t c = 0; c < 2; ++c)
            for (std::size_t n = cut + 1; n < 16; ++n) v[c * 16 + n] += 10.0 * rng.uniform();
        auto y2 = causal_depthwise_conv(x2, k);
        for (std::size_t c = 0; c < 2; ++c)
            for (std::size_t n = 0; n <= cut; ++n) CHECK(y2.at(c * 16 + n) == y.at(c * 16 + n));
    }
}

TEST_CASE("softmax cross-entropy examples") {
    auto uniform = softmax_cross_entropy(Tensor::zeros({2, 3, 4}), std::vector<TokenId>{0, 1, 2, 3, 0, 1});
    CHECK(std::abs(uniform.item() - std::log(4.0)) < 1e-15);

    auto sharp = softmax_cross_entropy(Tensor::from({1, 1, 4}, {0, 0, 30, 0}), std::vector<TokenId>{2});
    CHECK(sharp.item() < 1e-9);
    CHECK(sharp.item() >= 0.0);

    auto hand = softmax_cross_entropy(Tensor::from({1, 1, 4}, {1, 0, 0, 0}), std::vector<TokenId>{0});
    const double e = std::exp(1.0);
    CHECK(std::abs(hand.item() - (-std::log(e / (e + 3.0)))) < 1e-15);
    CHECK(std::abs(hand.item() - 0.743668) < 1e-6);

    CHECK_THROWS_AS(softmax_cross_entropy(Tensor::zeros({1, 1, 4}), std::vector<TokenId>{4}), std::invalid_argument);
    CHECK_THROWS_AS(softmax_cross_entropy(Tensor::zeros({1, 1, 4}), std::vector<TokenId>{-1}), std::invalid_argument);
    CHECK_THROWS_AS(softmax_cross_entropy(Tensor::from({1, 1, 2}, {0, NAN}), std::vector<TokenId>{0}), NumericalError);
}

TEST_CASE("cross-entropy gradient is (softmax - onehot) / positions") {
    auto logits = Tensor::from({1, 2, 3}, {0.2, -0.1, 0.5, 1.0, 0.0, -1.0}, true);
    Tape tape;
    TapeScope scope(tape);
    std::vector<TokenId> targets{2, 0};
    backward(softmax_cross_entropy(logits, targets));
    for (std::size_t r = 0; r < 2; ++r) {
        double z = 0.0;
        for (std::size_t v = 0; v < 3; ++v) z += std::exp(logits.at(r * 3 + v));
        for (std::size_t v = 0; v < 3; ++v) {
            const double p = std::exp(logits.at(r * 3 + v)) / z;
            const double want = (p - (static_cast<TokenId>(v) == targets[r] ? 1.0 : 0.0)) / 2.0;
            CHECK(std::abs(logits.grad()[r * 3 + v] - want) < 1e-15);
        }
    }
}

TEST_CASE("backward examples") {
    {
        auto x = Tensor::from({3}, {1, 2, 3}, true);
        Tape tape;
        TapeScope scope(tape);
        backward(sum(mul(x, x)));
        check_close(x.grad(), {2, 4, 6}, 1e-15);
    }
    {
        Rng rng(1);
        auto x = random_tensor({2, 8}, rng, true);
        Tape tape;
        TapeScope scope(tape);
        backward(sum(irfft(rfft(x), 8)));
        for (double g : x.grad()) CHECK(std::abs(g - 1.0) < 1e-12);
    }
    {
        Tape tape;
        TapeScope scope(tape);
        auto x = Tensor::from({2}, {1, 2}, true);
        CHECK_THROWS_AS(backward(mul(x, x)), std::invalid_argument);
        CHECK_THROWS_AS(backward(Tensor::scalar(1.0, true)), std::invalid_argument);
    }
}

TEST_CASE("gradient accumulates across fan-out") {
    auto x = Tensor::from({3}, {0.5, -1.0, 2.0}, true);
    auto w = Tensor::from({3}, {1.0, 2.0, 3.0});
    std::vector<double> once;
    {
        Tape tape;
        TapeScope scope(tape);
        backward(sum(mul(x, w)));
        once.assign(x.grad().begin(), x.grad().end());
    }
    x.zero_grad();
    {
        Tape tape;
        TapeScope scope(tape);
        backward(add(sum(mul(x, w)), sum(mul(x, w))));
    }
    for (std::size_t i = 0; i < 3; ++i) CHECK(x.grad()[i] == 2.0 * once[i]);
}

TEST_CASE("tape is topological and records each produced tensor once") {
    Tape tape;
    TapeScope scope(tape);
    auto x = Tensor::from({2}, {1, 2}, true);
    auto a = mul(x, x);
    auto b = add(a, x);
    auto c = sum(b);
    CHECK(tape.size() == 3);
    CHECK(a.node_id() == 0);
    CHECK(b.node_id() == 1);
    CHECK(c.node_id() == 2);
    for (std::size_t id = 0; id < tape.size(); ++id)
        for (auto in : tape.inputs_of(id)) CHECK((in == kNoNode || in < id));
}

TEST_CASE("ops outside a tape are not recorded") {
    auto x = Tensor::from({2}, {1, 2}, true);
    auto y = mul(x, x);
    CHECK_FALSE(y.requires_grad());
    CHECK(y.node_id() == kNoNode);
    Tape tape;
    TapeScope scope(tape);
    {
        NoGradScope no_grad;
        auto z = mul(x, x);
        CHECK(tape.size() == 0);
    }
    auto z = mul(x, x);
    CHECK(tape.size() == 1);
}

TEST_CASE("grad_check examples") {
    Rng rng(2024);
    auto x = random_tensor({3}, rng);
    CHECK(grad_check([](const Tensor& t) { return sum(mul(t, t)); }, x) < 1e-7);

    auto kernel = random_tensor({2, 3}, rng);
    auto cx = random_tensor({2, 2, 8}, rng);
    CHECK(grad_check([&](const Tensor& t) { return weighted_sum(causal_depthwise_conv(t, kernel), 1); }, cx) < 1e-4);

    auto w1 = random_tensor({10, 6}, rng);
    auto w2 = random_tensor({6, 10}, rng);
    auto fx = random_tensor({3, 8}, rng);
    auto chain = [&](const Tensor& t) {
        auto spec = rfft(t);
        auto h = gelu(matmul(concat_last(spec.real, spec.imag), w1));
        auto v = matmul(h, w2);
        ComplexSpectrum out{slice_last(v, 0, 5), slice_last(v, 5, 10), 8};
        return weighted_sum(irfft(out, 8), 2);
    };
    CHECK(grad_check(chain, fx) < 1e-4);

    CHECK_THROWS_AS(grad_check([](const Tensor& t) { return sum(t); }, x, 0.0), std::invalid_argument);
    CHECK_THROWS_AS(grad_check([](const Tensor& t) { return sum(t); }, x, -1e-5), std::invalid_argument);
}

TEST_CASE("every differentiable op passes a randomized gradient check") {
    Rng rng(77);
    const double tol = 1e-4;
    auto other = random_tensor({2, 3, 8}, rng);

    SUBCASE("elementwise") {
        auto x = random_tensor({2, 3, 8}, rng);
        CHECK(grad_check([&](const Tensor& t) { return weighted_sum(add(t, other), 3); }, x) < tol);
        CHECK(grad_check([&](const Tensor& t) { return weighted_sum(sub(other, t), 3); }, x) < tol);
        CHECK(grad_check([&](const Tensor& t) { return weighted_sum(mul(t, other), 3); }, x) < tol);
        CHECK(grad_check([&](const Tensor& t) { return weighted_sum(scale(t, -2.5), 3); }, x) < tol);
        CHECK(grad_check([&](const Tensor& t) { return weighted_sum(tanh(t), 3); }, x) < tol);
        CHECK(grad_check([&](const Tensor& t) { return weighted_sum(gelu(t), 3); }, x) < tol);
        CHECK(grad_check([&](const Tensor& t) { return mean(mul(t, t)); }, x) < tol);
    }
    SUBCASE("affine") {
        auto a = random_tensor({4, 5}, rng);
        auto b = random_tensor({5, 3}, rng);
        CHECK(grad_check([&](const Tensor& t) { return weighted_sum(matmul(t, b), 4); }, a) < tol);
        CHECK(grad_check([&](const Tensor& t) { return weighted_sum(matmul(a, t), 4); }, b) < tol);
        auto bias = random_tensor({5}, rng);
        CHECK(grad_check([&](const Tensor& t) { return weighted_sum(add_row_bias(a, t), 5); }, bias) < tol);
        CHECK(grad_check([&](const Tensor& t) { return weighted_sum(add_row_bias(t, bias), 5); }, a) < tol);

        auto x = random_tensor({2, 3, 6}, rng);
        auto w = random_tensor({4, 3}, rng);
        auto cb = random_tensor({4}, rng);
        CHECK(grad_check([&](const Tensor& t) { return weighted_sum(channel_linear(t, w, cb), 6); }, x) < tol);
        CHECK(grad_check([&](const Tensor& t) { return weighted_sum(channel_linear(x, t, cb), 6); }, w) < tol);
        CHECK(grad_check([&](const Tensor& t) { return weighted_sum(channel_linear(x, w, t), 6); }, cb) < tol);
        CHECK(grad_check([&](const Tensor& t) { return weighted_sum(channel_linear(x, t, Tensor{}), 6); }, w) < tol);
    }
    SUBCASE("lookups") {
        auto table = random_tensor({5, 3}, rng);
        std::vector<TokenId> ids{0, 4, 4, 2, 1, 3, 0, 0};
        CHECK(grad_check([&](const Tensor& t) { return weighted_sum(embedding(t, ids, 2), 7); }, table) < tol);
        auto steps_table = random_tensor({4, 3}, rng);
        auto x = random_tensor({2, 3, 4}, rng);
        std::vector<std::size_t> steps{3, 1};
        CHECK(grad_check([&](const Tensor& t) { return weighted_sum(add_step_embedding(x, t, steps), 8); },
                         steps_table) < tol);
        CHECK(grad_check([&](const Tensor& t) { return weighted_sum(add_step_embedding(t, steps_table, steps), 8); },
                         x) < tol);
    }
    SUBCASE("layout") {
        auto x = random_tensor({2, 3, 8}, rng);
        CHECK(grad_check([&](const Tensor& t) { return weighted_sum(reshape(t, {6, 8}), 9); }, x) < tol);
        CHECK(grad_check([&](const Tensor& t) { return weighted_sum(transpose_last2(t), 9); }, x) < tol);
        CHECK(grad_check([&](const Tensor& t) { return weighted_sum(concat_last(t, other), 9); }, x) < tol);
        CHECK(grad_check([&](const Tensor& t) { return weighted_sum(slice_last(t, 2, 7), 9); }, x) < tol);
        CHECK(grad_check([&](const Tensor& t) { return weighted_sum(avg_pool2(t), 9); }, x) < tol);
        CHECK(grad_check([&](const Tensor& t) { return weighted_sum(upsample2(t), 9); }, x) < tol);
    }
    SUBCASE("convolution and spectra") {
        auto x = random_tensor({2, 3, 8}, rng);
        auto k = random_tensor({3, 4}, rng);
        CHECK(grad_check([&](const Tensor& t) { return weighted_sum(causal_depthwise_conv(x, t), 10); }, k) < tol);
        for (std::size_t n : {2u, 5u, 8u, 16u}) {
            auto s = random_tensor({2, n}, rng);
            CHECK(grad_check([&](const Tensor& t) { return weighted_sum(rfft(t).real, 11); }, s) < tol);
            CHECK(grad_check([&](const Tensor& t) { return weighted_sum(rfft(t).imag, 12); }, s) < tol);
            const std::size_t bins = n / 2 + 1;
            auto re = random_tensor({2, bins}, rng);
            auto im = random_tensor({2, bins}, rng);
            CHECK(grad_check([&](const Tensor& t) { return weighted_sum(irfft({t, im, n}, n), 13); }, re) < tol);
            CHECK(grad_check([&](const Tensor& t) { return weighted_sum(irfft({re, t, n}, n), 13); }, im) < tol);
        }
    }
    SUBCASE("cross entropy") {
        auto logits = random_tensor({2, 3, 5}, rng);
        std::vector<TokenId> targets{0, 4, 2, 2, 1, 3};
        CHECK(grad_check([&](const Tensor& t) { return softmax_cross_entropy(t, targets); }, logits) < tol);
    }
}

TEST_CASE("resampling identity and zero examples") {
    auto x = Tensor::from({1, 1, 4}, {1, 3, 5, 7});
    check_close(avg_pool2(x).data(), {2, 6}, 1e-15);
    check_close(upsample2(Tensor::from({1, 1, 2}, {2, 6})).data(), {2, 2, 6, 6}, 1e-15);
    check_close(avg_pool2(upsample2(x)).data(), {1, 3, 5, 7}, 1e-15);
    CHECK_THROWS_AS(avg_pool2(Tensor::zeros({1, 1, 3})), std::invalid_argument);
    check_close(matmul(Tensor::from({2, 2}, {1, 0, 0, 1}), Tensor::from({2, 1}, {4, 5})).data(), {4, 5}, 1e-15);
    CHECK(sum(Tensor::zeros({3, 3})).item() == 0.0);
    CHECK(gelu(Tensor::zeros({2})).at(0) == 0.0);
}
