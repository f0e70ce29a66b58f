#pragma once

#include <cstddef>
#include <functional>
#include <span>

#include "sfdlm/numerics/tensor.hpp"

namespace sfdlm::numerics {

inline constexpr double kDefaultGradCheckEps = 1e-5;
inline constexpr double kRelativeErrorFloor = 1e-8;

struct GradCheckResult {
    double max_relative_error = 0.0;
    std::size_t worst_input = 0;
    std::size_t worst_index = 0;
    double worst_analytic = 0.0;
    double worst_numeric = 0.0;
    std::size_t coordinates = 0;
};

/// |a - b| / max(|a|, |b|, 1e-8)
double relative_error(double analytic, double numeric);

/// Compares backward() gradients of a scalar loss against central differences,
/// perturbing every coordinate of every tensor in `inputs` in place. Inputs must
/// require gradients; their existing gradients are cleared.
GradCheckResult check_gradients(const std::function<Tensor()>& loss, std::span<Tensor> inputs,
                                double eps = kDefaultGradCheckEps);

/// Single-input form: max relative error of d f(x) / dx.
double grad_check(const std::function<Tensor(const Tensor&)>& f, const Tensor& x,
                  double eps = kDefaultGradCheckEps);

}  // namespace sfdlm::numerics
