#pragma once
// Shared helpers for the test suites: seeded random data and naive reference
// computations that deliberately avoid the library's own code paths.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <random>
#include <vector>

#include "desate/tensor.hpp"

namespace testing_support {

inline std::vector<double> random_vector(std::size_t n, std::uint64_t seed, double lo = -1.0,
                                         double hi = 1.0) {
    std::mt19937_64 gen(seed);
    std::uniform_real_distribution<double> dist(lo, hi);
    std::vector<double> v(n);
    for (double& x : v) x = dist(gen);
    return v;
}

inline desate::Tensor random_tensor(std::size_t rows, std::size_t cols, std::uint64_t seed,
                                    bool requires_grad = false, double lo = -1.0, double hi = 1.0) {
    return desate::Tensor::from(rows, cols, random_vector(rows * cols, seed, lo, hi), requires_grad);
}

// Naive row-major triple loop.
inline std::vector<double> naive_matmul(const std::vector<double>& a, const std::vector<double>& b,
                                        std::size_t m, std::size_t k, std::size_t n) {
    std::vector<double> c(m * n, 0.0);
    for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = 0; j < n; ++j) {
            double s = 0.0;
            for (std::size_t p = 0; p < k; ++p) s += a[i * k + p] * b[p * n + j];
            c[i * n + j] = s;
        }
    return c;
}

inline double max_abs_diff(const std::vector<double>& a, const std::vector<double>& b) {
    double m = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
    return m;
}

template <typename Span>
inline std::vector<double> to_vec(const Span& s) {
    return std::vector<double>(s.begin(), s.end());
}

// Relative error with a small-magnitude floor so components that are
// essentially zero are compared absolutely.
inline double rel_err(double analytic, double numeric, double floor = 1e-6) {
    return std::abs(analytic - numeric) / std::max({std::abs(analytic), std::abs(numeric), floor});
}

}  // namespace testing_support

namespace testing_support {

struct GradCheck {
    double worst_rel_err = 0.0;
    std::size_t components = 0;
};

// Compares reverse-mode gradients of loss_fn with respect to `params` against
// central finite differences with step h. loss_fn must return a scalar tensor
// and is evaluated without an active tape for the finite differences.
template <typename F>
GradCheck check_gradients(std::vector<desate::Tensor> params, F&& loss_fn, double h = 1e-5,
                          double floor = 1e-6) {
    for (auto& p : params) p.zero_grad();
    {
        desate::Tape tape;
        desate::Tape::Scope scope(tape);
        desate::Tensor loss = loss_fn();
        tape.backward(loss);
    }
    GradCheck result;
    for (auto& p : params) {
        auto values = p.mutable_values();
        auto grad = to_vec(p.grad());
        for (std::size_t i = 0; i < values.size(); ++i) {
            const double saved = values[i];
            values[i] = saved + h;
            const double up = loss_fn().item();
            values[i] = saved - h;
            const double down = loss_fn().item();
            values[i] = saved;
            const double fd = (up - down) / (2.0 * h);
            result.worst_rel_err = std::max(result.worst_rel_err, rel_err(grad[i], fd, floor));
            ++result.components;
        }
    }
    return result;
}

}  // namespace testing_support
