#include "sfdlm/numerics/fft.hpp"

#include <cmath>
#include <numbers>
#include <utility>

namespace sfdlm::numerics::fft {

bool is_power_of_two(std::size_t n) { return n != 0 && (n & (n - 1)) == 0; }

std::vector<Complex> direct_dft(std::span<const Complex> values, int sign) {
    const std::size_t n = values.size();
    std::vector<Complex> out(n);
    for (std::size_t k = 0; k < n; ++k) {
        Complex acc{0.0, 0.0};
        for (std::size_t j = 0; j < n; ++j) {
            // reduce k*j mod n first so the angle stays small and exact for
            // the multiples of pi/2 that tests rely on
            const auto r = static_cast<double>((k * j) % n);
            const double angle = sign * 2.0 * std::numbers::pi * r / static_cast<double>(n);
            acc += values[j] * Complex(std::cos(angle), std::sin(angle));
        }
        out[k] = acc;
    }
    return out;
}

void transform(std::span<Complex> values, int sign) {
    const std::size_t n = values.size();
    if (n <= 1) return;
    if (!is_power_of_two(n)) {
        auto out = direct_dft(values, sign);
        std::copy(out.begin(), out.end(), values.begin());
        return;
    }

    for (std::size_t i = 1, j = 0; i < n; ++i) {
        std::size_t bit = n >> 1;
        for (; j & bit; bit >>= 1) j ^= bit;
        j ^= bit;
        if (i < j) std::swap(values[i], values[j]);
    }

    for (std::size_t len = 2; len <= n; len <<= 1) {
        const std::size_t half = len / 2;
        // twiddles computed directly per index rather than by repeated
        // multiplication, which keeps round-off at the 1e-15 level
        for (std::size_t k = 0; k < half; ++k) {
            const double angle = sign * 2.0 * std::numbers::pi * static_cast<double>(k) / static_cast<double>(len);
            const Complex w(std::cos(angle), std::sin(angle));
            for (std::size_t start = 0; start < n; start += len) {
                const Complex u = values[start + k];
                const Complex v = values[start + k + half] * w;
                values[start + k] = u + v;
                values[start + k + half] = u - v;
            }
        }
    }
}

}  // namespace sfdlm::numerics::fft
