#pragma once

// Test-only reference computations. Each one follows the textbook definition
// directly and shares no code path with the library routine it checks.

#include <cmath>
#include <cstddef>
#include <vector>

namespace sfdlm::oracle {

using Matrix = std::vector<std::vector<double>>;

/// Transition matrix of one replacement step: beta * uniform + (1 - beta) * I.
inline Matrix replacement_kernel(double beta, std::size_t vocab) {
    Matrix q(vocab, std::vector<double>(vocab, beta / static_cast<double>(vocab)));
    for (std::size_t i = 0; i < vocab; ++i) q[i][i] += 1.0 - beta;
    return q;
}

inline Matrix multiply(const Matrix& a, const Matrix& b) {
    const std::size_t n = a.size();
    Matrix c(n, std::vector<double>(n, 0.0));
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t k = 0; k < n; ++k)
            for (std::size_t j = 0; j < n; ++j) c[i][j] += a[i][k] * b[k][j];
    return c;
}

/// Exact P(x^t == x^0) by multiplying the per-step transition matrices.
inline double enumerated_match_probability(const std::vector<double>& betas, std::size_t steps, std::size_t vocab) {
    Matrix acc = replacement_kernel(0.0, vocab);
    for (std::size_t t = 0; t < steps; ++t) acc = multiply(acc, replacement_kernel(betas[t], vocab));
    return acc[0][0];
}

inline double binomial_sigma(double p, std::size_t n) { return std::sqrt(p * (1.0 - p) / static_cast<double>(n)); }

/// Literal diagonal state-space recurrence for one channel, z(0) = 0:
/// z <- A z + B u(n); y(n) = C z + D u(n), i.e. the output reads the state
/// after it has absorbed u(n). Its impulse response is C A^n B + D delta(n).
inline std::vector<double> ssm_recurrence(const std::vector<double>& a, const std::vector<double>& b,
                                          const std::vector<double>& c, double d, const std::vector<double>& u) {
    std::vector<double> z(a.size(), 0.0);
    std::vector<double> y(u.size(), 0.0);
    for (std::size_t n = 0; n < u.size(); ++n) {
        double out = d * u[n];
        for (std::size_t m = 0; m < a.size(); ++m) {
            z[m] = a[m] * z[m] + b[m] * u[n];
            out += c[m] * z[m];
        }
        y[n] = out;
    }
    return y;
}

}  // namespace sfdlm::oracle
