#include "desate/kernels.hpp"

namespace desate::kernels {
namespace {

double dot(const double* a, const double* b, std::size_t n) {
    double s = 0.0;
    for (std::size_t i = 0; i < n; ++i) s += a[i] * b[i];
    return s;
}

void axpy(double alpha, const double* x, double* y, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) y[i] += alpha * x[i];
}

void gemm_nn(std::size_t m, std::size_t n, std::size_t k, const double* a, std::size_t lda,
             const double* b, std::size_t ldb, double* c, std::size_t ldc, bool accumulate) {
    for (std::size_t i = 0; i < m; ++i) {
        double* crow = c + i * ldc;
        if (!accumulate)
            for (std::size_t j = 0; j < n; ++j) crow[j] = 0.0;
        for (std::size_t p = 0; p < k; ++p) {
            const double aip = a[i * lda + p];
            const double* brow = b + p * ldb;
            for (std::size_t j = 0; j < n; ++j) crow[j] += aip * brow[j];
        }
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
        for (std::size_t i = 0; i < m; ++i) {
            const double api = arow[i];
            double* crow = c + i * ldc;
            for (std::size_t j = 0; j < n; ++j) crow[j] += api * brow[j];
        }
    }
}

}  // namespace

const KernelTable& scalar_table() {
    static const KernelTable table{Isa::Scalar, dot, axpy, gemm_nn, gemm_nt, gemm_tn};
    return table;
}

}  // namespace desate::kernels
