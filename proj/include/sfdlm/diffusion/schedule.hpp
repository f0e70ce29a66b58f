#pragma once

#include <cstddef>
#include <vector>

namespace sfdlm::diffusion {

inline constexpr std::size_t kMaxSteps = 64;

/// Per-step replacement probabilities beta_0..beta_{T-1} and the survival
/// products a_t = prod_{u<t} (1 - beta_u) for t = 1..T.
class NoiseSchedule {
public:
    /// Validates 0 <= beta <= 1, nondecreasing, 1 <= T <= kMaxSteps.
    explicit NoiseSchedule(std::vector<double> betas);

    std::size_t steps() const { return betas_.size(); }
    const std::vector<double>& betas() const { return betas_; }
    double beta(std::size_t t) const { return betas_.at(t); }
    /// survival()[t-1] == a_t.
    const std::vector<double>& survival() const { return survival_; }

    bool operator==(const NoiseSchedule& other) const { return betas_ == other.betas_; }

private:
    std::vector<double> betas_;
    std::vector<double> survival_;
};

/// beta_t = start + t (end - start) / (T - 1); beta_0 = start when T = 1.
NoiseSchedule make_linear_schedule(std::size_t steps, double beta_start, double beta_end);

/// Probability a_t that a token survives t forward steps untouched. The t-step
/// kernel is a_t * identity + (1 - a_t) * uniform. Requires 1 <= t <= T.
double marginal_survival(const NoiseSchedule& schedule, std::size_t t);

/// P(x^t == x^0) under the uniform-replacement kernel: a_t + (1 - a_t) / V.
double match_probability(double survival, std::size_t vocab_size);

}  // namespace sfdlm::diffusion
