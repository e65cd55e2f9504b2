#pragma once

// Flat float32 compute kernels behind a runtime-selected dispatch table.
//
// Every kernel has a scalar reference implementation. Vector variants must
// agree with the reference within float rounding (see tests/unit/test_simd.cpp);
// they are free to reorder accumulations.

#include <cstdint>
#include <string_view>

namespace blobgan::simd {

using index_t = std::int64_t;

struct KernelTable {
    const char* name;

    // C[M,N] = (accumulate ? C : 0) + A[M,K] * B[K,N]; all row-major with
    // explicit leading dimensions.
    void (*gemm)(index_t m, index_t n, index_t k, const float* a, index_t lda,
                 const float* b, index_t ldb, float* c, index_t ldc, bool accumulate);

    void (*axpy)(index_t n, float alpha, const float* x, float* y);       // y += alpha*x
    void (*scale)(index_t n, float alpha, const float* x, float* y);      // y = alpha*x
    void (*add)(index_t n, const float* x, const float* y, float* z);     // z = x+y
    void (*mul)(index_t n, const float* x, const float* y, float* z);     // z = x*y
    void (*mul_acc)(index_t n, const float* x, const float* y, float* z); // z += x*y
    double (*dot)(index_t n, const float* x, const float* y);
    double (*sum)(index_t n, const float* x);

    void (*leaky_relu)(index_t n, float slope, const float* x, float* y);
    // gx += gy * (x > 0 ? 1 : slope)
    void (*leaky_relu_backward)(index_t n, float slope, const float* x, const float* gy, float* gx);

    // One bias-corrected Adam update. step_size = lr / (1 - beta1^t),
    // bias2 = 1 - beta2^t.
    void (*adam)(index_t n, float* param, const float* grad, float* m, float* v, float beta1,
                 float beta2, float step_size, float bias2, float eps);
};

const KernelTable& reference_kernels();

// nullptr when the build or the CPU lacks AVX2+FMA.
const KernelTable* avx2_kernels();

// Table selected on first use: the best variant the CPU supports, unless the
// BLOBGAN_SIMD environment variable names one ("reference" or "avx2").
const KernelTable& active_kernels();

// Overrides the active table for the rest of the process (tests, benchmarks).
// Returns false if the named variant is unavailable.
bool select_kernels(std::string_view name);

}  // namespace blobgan::simd
