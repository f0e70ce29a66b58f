#include "sfdlm/numerics/grad_check.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <vector>

namespace sfdlm::numerics {

double relative_error(double analytic, double numeric) {
    const double denom = std::max({std::abs(analytic), std::abs(numeric), kRelativeErrorFloor});
    return std::abs(analytic - numeric) / denom;
}

GradCheckResult check_gradients(const std::function<Tensor()>& loss, std::span<Tensor> inputs, double eps) {
    if (!(eps > 0.0)) throw std::invalid_argument("grad_check: eps must be positive");
    for (auto& t : inputs) {
        if (!t.requires_grad()) throw std::invalid_argument("grad_check: input does not require grad");
        t.zero_grad();
    }

    std::vector<std::vector<double>> analytic;
    {
        Tape tape;
        TapeScope scope(tape);
        auto value = loss();
        if (value.numel() != 1) throw std::invalid_argument("grad_check: function must be scalar-valued");
        tape.backward(value);
        for (auto& t : inputs) {
            analytic.emplace_back(t.has_grad() ? std::vector<double>(t.grad().begin(), t.grad().end())
                                               : std::vector<double>(t.numel(), 0.0));
        }
    }

    GradCheckResult result;
    NoGradScope no_grad;
    for (std::size_t i = 0; i < inputs.size(); ++i) {
        auto values = inputs[i].mutable_data();
        for (std::size_t j = 0; j < values.size(); ++j) {
            const double saved = values[j];
            values[j] = saved + eps;
            const double plus = loss().item();
            values[j] = saved - eps;
            const double minus = loss().item();
            values[j] = saved;
            const double numeric = (plus - minus) / (2.0 * eps);
            const double err = relative_error(analytic[i][j], numeric);
            ++result.coordinates;
            if (err > result.max_relative_error || result.coordinates == 1) {
                result.max_relative_error = err;
                result.worst_input = i;
                result.worst_index = j;
                result.worst_analytic = analytic[i][j];
                result.worst_numeric = numeric;
            }
        }
    }
    return result;
}

double grad_check(const std::function<Tensor(const Tensor&)>& f, const Tensor& x, double eps) {
    if (!(eps > 0.0)) throw std::invalid_argument("grad_check: eps must be positive");
    std::vector<Tensor> inputs{Tensor::from(x.shape(), std::vector<double>(x.data().begin(), x.data().end()), true)};
    const Tensor leaf = inputs[0];
    return check_gradients([&] { return f(leaf); }, inputs, eps).max_relative_error;
}

}  // namespace sfdlm::numerics
