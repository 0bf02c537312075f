// NEON (Advanced SIMD, float64x2) variants for aarch64.

#include "desate/kernels.hpp"

#if defined(__aarch64__)

#include <arm_neon.h>

namespace desate::kernels {
namespace {

double dot(const double* a, const double* b, std::size_t n) {
    float64x2_t acc0 = vdupq_n_f64(0.0);
    float64x2_t acc1 = vdupq_n_f64(0.0);
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4) {
        acc0 = vfmaq_f64(acc0, vld1q_f64(a + i), vld1q_f64(b + i));
        acc1 = vfmaq_f64(acc1, vld1q_f64(a + i + 2), vld1q_f64(b + i + 2));
    }
    double s = vaddvq_f64(vaddq_f64(acc0, acc1));
    for (; i < n; ++i) s += a[i] * b[i];
    return s;
}

void axpy(double alpha, const double* x, double* y, std::size_t n) {
    const float64x2_t va = vdupq_n_f64(alpha);
    std::size_t i = 0;
    for (; i + 2 <= n; i += 2) vst1q_f64(y + i, vfmaq_f64(vld1q_f64(y + i), va, vld1q_f64(x + i)));
    for (; i < n; ++i) y[i] += alpha * x[i];
}

inline void row_fma(double s, const double* brow, double* crow, std::size_t n) {
    const float64x2_t vs = vdupq_n_f64(s);
    std::size_t j = 0;
    for (; j + 2 <= n; j += 2)
        vst1q_f64(crow + j, vfmaq_f64(vld1q_f64(crow + j), vs, vld1q_f64(brow + j)));
    for (; j < n; ++j) crow[j] += s * brow[j];
}

void gemm_nn(std::size_t m, std::size_t n, std::size_t k, const double* a, std::size_t lda,
             const double* b, std::size_t ldb, double* c, std::size_t ldc, bool accumulate) {
    for (std::size_t i = 0; i < m; ++i) {
        double* crow = c + i * ldc;
        if (!accumulate)
            for (std::size_t j = 0; j < n; ++j) crow[j] = 0.0;
        for (std::size_t p = 0; p < k; ++p) row_fma(a[i * lda + p], b + p * ldb, crow, n);
    }
}

void gemm_nt(std::size_t m, std::size_t n, std::size_t k, const double* a, std::size_t lda,
             const double* b, std::size_t ldb, double* c, std::size_t ldc, bool accumulate) {
    for (std::size_t i = 0; i < m; ++i) {
        for (std::size_t j = 0; j < n; ++j) {
            const double s = dot(a + i * lda, b + j * ldb, k);
            c[i * ldc + j] = accumulate ? c[i * ldc + j] + s : s;
        }
    }
}

void gemm_tn(std::size_t m, std::size_t n, std::size_t k, const double* a, std::size_t lda,
             const double* b, std::size_t ldb, double* c, std::size_t ldc, bool accumulate) {
    if (!accumulate)
        for (std::size_t i = 0; i < m; ++i)
            for (std::size_t j = 0; j < n; ++j) c[i * ldc + j] = 0.0;
    for (std::size_t p = 0; p < k; ++p) {
        const double* arow = a + p * lda;
        const double* brow = b + p * ldb;
        for (std::size_t i = 0; i < m; ++i) row_fma(arow[i], brow, c + i * ldc, n);
    }
}

}  // namespace

const KernelTable* neon_table() {
    static const KernelTable table{Isa::Neon, dot, axpy, gemm_nn, gemm_nt, gemm_tn};
    return &table;
}

}  // namespace desate::kernels

#else

namespace desate::kernels {
const KernelTable* neon_table() { return nullptr; }
}  // namespace desate::kernels

#endif
