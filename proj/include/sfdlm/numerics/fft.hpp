#pragma once

#include <complex>
#include <cstddef>
#include <span>
#include <vector>

namespace sfdlm::numerics::fft {

using Complex = std::complex<double>;

bool is_power_of_two(std::size_t n);

/// In-place unnormalized DFT. Sign -1 is the forward transform
/// X_k = sum_n x_n exp(-2 pi i k n / N); sign +1 is the unnormalized inverse.
/// Iterative radix-2 for power-of-two lengths, direct O(N^2) sum otherwise.
void transform(std::span<Complex> values, int sign);

/// Direct O(N^2) evaluation of the DFT sum; reference path for any length.
std::vector<Complex> direct_dft(std::span<const Complex> values, int sign);

/// Number of non-redundant bins of a real length-n signal.
constexpr std::size_t rfft_bins(std::size_t n) { return n / 2 + 1; }

}  // namespace sfdlm::numerics::fft
