#include "sfdlm/diffusion/schedule.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

namespace sfdlm::diffusion {

NoiseSchedule::NoiseSchedule(std::vector<double> betas) : betas_(std::move(betas)) {
    if (betas_.empty() || betas_.size() > kMaxSteps) {
        throw std::invalid_argument("schedule needs between 1 and " + std::to_string(kMaxSteps) + " steps, got " +
                                    std::to_string(betas_.size()));
    }
    double a = 1.0;
    for (std::size_t t = 0; t < betas_.size(); ++t) {
        const double b = betas_[t];
        if (!(b >= 0.0 && b <= 1.0)) {
            throw std::invalid_argument("beta_" + std::to_string(t) + " = " + std::to_string(b) + " outside [0, 1]");
        }
        if (t > 0 && b < betas_[t - 1]) throw std::invalid_argument("betas must be nondecreasing");
        a *= 1.0 - b;
        survival_.push_back(a);
    }
}

NoiseSchedule make_linear_schedule(std::size_t steps, double beta_start, double beta_end) {
    if (steps < 1 || steps > kMaxSteps) {
        throw std::invalid_argument("diffusion steps must lie in [1, " + std::to_string(kMaxSteps) + "]");
    }
    if (!(beta_start >= 0.0 && beta_end <= 1.0)) throw std::invalid_argument("betas must lie in [0, 1]");
    if (beta_end < beta_start) throw std::invalid_argument("beta_end must not be below beta_start");
    std::vector<double> betas(steps, beta_start);
    if (steps > 1) {
        const double delta = (beta_end - beta_start) / static_cast<double>(steps - 1);
        for (std::size_t t = 0; t < steps; ++t) betas[t] = beta_start + static_cast<double>(t) * delta;
        betas.back() = beta_end;
    }
    return NoiseSchedule(std::move(betas));
}

double marginal_survival(const NoiseSchedule& schedule, std::size_t t) {
    if (t < 1 || t > schedule.steps()) {
        throw std::out_of_range("marginal_survival: t = " + std::to_string(t) + " outside [1, " +
                                std::to_string(schedule.steps()) + "]");
    }
    return schedule.survival()[t - 1];
}

double match_probability(double survival, std::size_t vocab_size) {
    return survival + (1.0 - survival) / static_cast<double>(vocab_size);
}

}  // namespace sfdlm::diffusion
