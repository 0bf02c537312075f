#pragma once
// Dense double-precision inner loops used by the tensor layer.
//
// Every kernel exists as a scalar reference implementation plus SIMD variants
// (AVX2+FMA on x86-64, NEON on aarch64). The variant is chosen once at
// startup from CPU feature detection; DE_SATE_KERNELS=scalar forces the
// reference path. All matrices are row-major with explicit leading dimensions
// so kernels can operate on column blocks (attention heads) in place.

#include <cstddef>
#include <string_view>

namespace desate::kernels {

enum class Isa { Scalar, Avx2, Neon };

std::string_view isa_name(Isa isa);

// Kernel table. `accumulate` selects C += op(A)op(B) instead of C = ...
struct KernelTable {
    Isa isa;
    double (*dot)(const double* a, const double* b, std::size_t n);
    // y += alpha * x
    void (*axpy)(double alpha, const double* x, double* y, std::size_t n);
    // C[m x n] (+)= A[m x k] * B[k x n]
    void (*gemm_nn)(std::size_t m, std::size_t n, std::size_t k,
                    const double* a, std::size_t lda,
                    const double* b, std::size_t ldb,
                    double* c, std::size_t ldc, bool accumulate);
    // C[m x n] (+)= A[m x k] * B[n x k]^T
    void (*gemm_nt)(std::size_t m, std::size_t n, std::size_t k,
                    const double* a, std::size_t lda,
                    const double* b, std::size_t ldb,
                    double* c, std::size_t ldc, bool accumulate);
    // C[m x n] (+)= A[k x m]^T * B[k x n]
    void (*gemm_tn)(std::size_t m, std::size_t n, std::size_t k,
                    const double* a, std::size_t lda,
                    const double* b, std::size_t ldb,
                    double* c, std::size_t ldc, bool accumulate);
};

const KernelTable& scalar_table();
// nullptr when the variant is not compiled in or not supported by this CPU.
const KernelTable* avx2_table();
const KernelTable* neon_table();

// Best supported table, honouring DE_SATE_KERNELS. Resolved once.
const KernelTable& active();

// Test hook: pin the active table (e.g. to compare variants). Not thread-safe
// with respect to concurrent kernel use.
void set_active(const KernelTable& table);

}  // namespace desate::kernels
