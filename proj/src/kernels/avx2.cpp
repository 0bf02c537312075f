// AVX2+FMA variants. This translation unit is compiled with -mavx2 -mfma;
// nothing here may run before dispatch.cpp has confirmed CPU support.

#include "desate/kernels.hpp"

#if defined(DESATE_HAVE_AVX2)

#include <immintrin.h>

namespace desate::kernels {
namespace {

inline double hsum(__m256d v) {
    const __m128d lo = _mm256_castpd256_pd128(v);
    const __m128d hi = _mm256_extractf128_pd(v, 1);
    const __m128d s = _mm_add_pd(lo, hi);
    return _mm_cvtsd_f64(_mm_add_sd(s, _mm_unpackhi_pd(s, s)));
}

double dot(const double* a, const double* b, std::size_t n) {
    __m256d acc0 = _mm256_setzero_pd();
    __m256d acc1 = _mm256_setzero_pd();
    std::size_t i = 0;
    for (; i + 8 <= n; i += 8) {
        acc0 = _mm256_fmadd_pd(_mm256_loadu_pd(a + i), _mm256_loadu_pd(b + i), acc0);
        acc1 = _mm256_fmadd_pd(_mm256_loadu_pd(a + i + 4), _mm256_loadu_pd(b + i + 4), acc1);
    }
    for (; i + 4 <= n; i += 4)
        acc0 = _mm256_fmadd_pd(_mm256_loadu_pd(a + i), _mm256_loadu_pd(b + i), acc0);
    double s = hsum(_mm256_add_pd(acc0, acc1));
    for (; i < n; ++i) s += a[i] * b[i];
    return s;
}

void axpy(double alpha, const double* x, double* y, std::size_t n) {
    const __m256d va = _mm256_set1_pd(alpha);
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4)
        _mm256_storeu_pd(y + i, _mm256_fmadd_pd(va, _mm256_loadu_pd(x + i), _mm256_loadu_pd(y + i)));
    for (; i < n; ++i) y[i] += alpha * x[i];
}

// crow[0..n) += s * brow[0..n)
inline void row_fma(double s, const double* brow, double* crow, std::size_t n) {
    const __m256d vs = _mm256_set1_pd(s);
    std::size_t j = 0;
    for (; j + 4 <= n; j += 4)
        _mm256_storeu_pd(crow + j,
                         _mm256_fmadd_pd(vs, _mm256_loadu_pd(brow + j), _mm256_loadu_pd(crow + j)));
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

const KernelTable* avx2_compiled_table() {
    static const KernelTable table{Isa::Avx2, dot, axpy, gemm_nn, gemm_nt, gemm_tn};
    return &table;
}

}  // namespace desate::kernels

#else

namespace desate::kernels {
const KernelTable* avx2_compiled_table() { return nullptr; }
}  // namespace desate::kernels

#endif
