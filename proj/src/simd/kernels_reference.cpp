#include "blobgan/simd/kernels.hpp"

#include <cmath>

namespace blobgan::simd {
namespace {

void gemm_ref(index_t m, index_t n, index_t k, const float* a, index_t lda, const float* b,
              index_t ldb, float* c, index_t ldc, bool accumulate) {
    for (index_t i = 0; i < m; ++i) {
        float* crow = c + i * ldc;
        if (!accumulate) {
            for (index_t j = 0; j < n; ++j) crow[j] = 0.0f;
        }
        for (index_t p = 0; p < k; ++p) {
            const float av = a[i * lda + p];
            const float* brow = b + p * ldb;
            for (index_t j = 0; j < n; ++j) crow[j] += av * brow[j];
        }
    }
}

void axpy_ref(index_t n, float alpha, const float* x, float* y) {
    for (index_t i = 0; i < n; ++i) y[i] += alpha * x[i];
}

void scale_ref(index_t n, float alpha, const float* x, float* y) {
    for (index_t i = 0; i < n; ++i) y[i] = alpha * x[i];
}

void add_ref(index_t n, const float* x, const float* y, float* z) {
    for (index_t i = 0; i < n; ++i) z[i] = x[i] + y[i];
}

void mul_ref(index_t n, const float* x, const float* y, float* z) {
    for (index_t i = 0; i < n; ++i) z[i] = x[i] * y[i];
}

void mul_acc_ref(index_t n, const float* x, const float* y, float* z) {
    for (index_t i = 0; i < n; ++i) z[i] += x[i] * y[i];
}

double dot_ref(index_t n, const float* x, const float* y) {
    double acc = 0.0;
    for (index_t i = 0; i < n; ++i) acc += static_cast<double>(x[i]) * static_cast<double>(y[i]);
    return acc;
}

double sum_ref(index_t n, const float* x) {
    double acc = 0.0;
    for (index_t i = 0; i < n; ++i) acc += x[i];
    return acc;
}

void leaky_relu_ref(index_t n, float slope, const float* x, float* y) {
    for (index_t i = 0; i < n; ++i) y[i] = x[i] > 0.0f ? x[i] : slope * x[i];
}

void leaky_relu_backward_ref(index_t n, float slope, const float* x, const float* gy, float* gx) {
    for (index_t i = 0; i < n; ++i) gx[i] += x[i] > 0.0f ? gy[i] : slope * gy[i];
}

void adam_ref(index_t n, float* param, const float* grad, float* m, float* v, float beta1,
              float beta2, float step_size, float bias2, float eps) {
    const float sqrt_bias2 = std::sqrt(bias2);
    for (index_t i = 0; i < n; ++i) {
        const float g = grad[i];
        m[i] = beta1 * m[i] + (1.0f - beta1) * g;
        v[i] = beta2 * v[i] + (1.0f - beta2) * g * g;
        const float denom = std::sqrt(v[i]) / sqrt_bias2 + eps;
        param[i] -= step_size * m[i] / denom;
    }
}

}  // namespace

const KernelTable& reference_kernels() {
    static const KernelTable table{
        "reference", gemm_ref, axpy_ref,       scale_ref,
        add_ref,     mul_ref,  mul_acc_ref,    dot_ref,
        sum_ref,     leaky_relu_ref, leaky_relu_backward_ref, adam_ref,
    };
    return table;
}

}  // namespace blobgan::simd
