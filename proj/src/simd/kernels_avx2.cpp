// Compiled with -mavx2 -mfma. Only reached through the dispatch table after a
// CPU feature check, so nothing here may run on older hardware.

#include "blobgan/simd/kernels.hpp"

#include <immintrin.h>

#include <algorithm>
#include <cmath>

namespace blobgan::simd {
namespace {

inline __m256i tail_mask(index_t remaining) {
    alignas(32) static const int kMaskSource[16] = {-1, -1, -1, -1, -1, -1, -1, -1,
                                                    0,  0,  0,  0,  0,  0,  0,  0};
    return _mm256_loadu_si256(reinterpret_cast<const __m256i*>(kMaskSource + 8 - remaining));
}

inline double hsum_pd(__m256d v) {
    __m128d lo = _mm256_castpd256_pd128(v);
    __m128d hi = _mm256_extractf128_pd(v, 1);
    lo = _mm_add_pd(lo, hi);
    __m128d shuf = _mm_unpackhi_pd(lo, lo);
    return _mm_cvtsd_f64(_mm_add_sd(lo, shuf));
}

// R rows x 16 columns of C, accumulated over the full K extent.
template <int R>
inline void micro_16(index_t k, const float* a, index_t lda, const float* b, index_t ldb,
                     float* c, index_t ldc) {
    __m256 acc0[R];
    __m256 acc1[R];
    for (int r = 0; r < R; ++r) {
        acc0[r] = _mm256_loadu_ps(c + r * ldc);
        acc1[r] = _mm256_loadu_ps(c + r * ldc + 8);
    }
    for (index_t p = 0; p < k; ++p) {
        const __m256 b0 = _mm256_loadu_ps(b + p * ldb);
        const __m256 b1 = _mm256_loadu_ps(b + p * ldb + 8);
        for (int r = 0; r < R; ++r) {
            const __m256 av = _mm256_broadcast_ss(a + r * lda + p);
            acc0[r] = _mm256_fmadd_ps(av, b0, acc0[r]);
            acc1[r] = _mm256_fmadd_ps(av, b1, acc1[r]);
        }
    }
    for (int r = 0; r < R; ++r) {
        _mm256_storeu_ps(c + r * ldc, acc0[r]);
        _mm256_storeu_ps(c + r * ldc + 8, acc1[r]);
    }
}

// R rows x w (< 8 allowed via mask) columns.
template <int R>
inline void micro_8(index_t k, const float* a, index_t lda, const float* b, index_t ldb, float* c,
                    index_t ldc, index_t w) {
    const __m256i mask = tail_mask(std::min<index_t>(w, 8));
    __m256 acc[R];
    for (int r = 0; r < R; ++r) acc[r] = _mm256_maskload_ps(c + r * ldc, mask);
    for (index_t p = 0; p < k; ++p) {
        const __m256 bv = _mm256_maskload_ps(b + p * ldb, mask);
        for (int r = 0; r < R; ++r) {
            acc[r] = _mm256_fmadd_ps(_mm256_broadcast_ss(a + r * lda + p), bv, acc[r]);
        }
    }
    for (int r = 0; r < R; ++r) _mm256_maskstore_ps(c + r * ldc, mask, acc[r]);
}

template <int R>
void row_block(index_t n, index_t k, const float* a, index_t lda, const float* b, index_t ldb,
               float* c, index_t ldc, index_t j0, index_t j1) {
    index_t j = j0;
    for (; j + 16 <= j1; j += 16) micro_16<R>(k, a, lda, b + j, ldb, c + j, ldc);
    for (; j < j1; j += 8) micro_8<R>(k, a, lda, b + j, ldb, c + j, ldc, j1 - j);
    (void)n;
}

void gemm_avx2(index_t m, index_t n, index_t k, const float* a, index_t lda, const float* b,
               index_t ldb, float* c, index_t ldc, bool accumulate) {
    if (!accumulate) {
        for (index_t i = 0; i < m; ++i) std::fill(c + i * ldc, c + i * ldc + n, 0.0f);
    }
    if (k == 0) return;
    // Column panels of B stay cache-resident while all row blocks sweep them.
    constexpr index_t kPanel = 256;
    for (index_t j0 = 0; j0 < n; j0 += kPanel) {
        const index_t j1 = std::min(n, j0 + kPanel);
        index_t i = 0;
        for (; i + 6 <= m; i += 6) row_block<6>(n, k, a + i * lda, lda, b, ldb, c + i * ldc, ldc, j0, j1);
        switch (m - i) {
            case 5: row_block<5>(n, k, a + i * lda, lda, b, ldb, c + i * ldc, ldc, j0, j1); break;
            case 4: row_block<4>(n, k, a + i * lda, lda, b, ldb, c + i * ldc, ldc, j0, j1); break;
            case 3: row_block<3>(n, k, a + i * lda, lda, b, ldb, c + i * ldc, ldc, j0, j1); break;
            case 2: row_block<2>(n, k, a + i * lda, lda, b, ldb, c + i * ldc, ldc, j0, j1); break;
            case 1: row_block<1>(n, k, a + i * lda, lda, b, ldb, c + i * ldc, ldc, j0, j1); break;
            default: break;
        }
    }
}

void axpy_avx2(index_t n, float alpha, const float* x, float* y) {
    const __m256 av = _mm256_set1_ps(alpha);
    index_t i = 0;
    for (; i + 8 <= n; i += 8) {
        _mm256_storeu_ps(y + i, _mm256_fmadd_ps(av, _mm256_loadu_ps(x + i), _mm256_loadu_ps(y + i)));
    }
    for (; i < n; ++i) y[i] += alpha * x[i];
}

void scale_avx2(index_t n, float alpha, const float* x, float* y) {
    const __m256 av = _mm256_set1_ps(alpha);
    index_t i = 0;
    for (; i + 8 <= n; i += 8) _mm256_storeu_ps(y + i, _mm256_mul_ps(av, _mm256_loadu_ps(x + i)));
    for (; i < n; ++i) y[i] = alpha * x[i];
}

void add_avx2(index_t n, const float* x, const float* y, float* z) {
    index_t i = 0;
    for (; i + 8 <= n; i += 8) {
        _mm256_storeu_ps(z + i, _mm256_add_ps(_mm256_loadu_ps(x + i), _mm256_loadu_ps(y + i)));
    }
    for (; i < n; ++i) z[i] = x[i] + y[i];
}

void mul_avx2(index_t n, const float* x, const float* y, float* z) {
    index_t i = 0;
    for (; i + 8 <= n; i += 8) {
        _mm256_storeu_ps(z + i, _mm256_mul_ps(_mm256_loadu_ps(x + i), _mm256_loadu_ps(y + i)));
    }
    for (; i < n; ++i) z[i] = x[i] * y[i];
}

void mul_acc_avx2(index_t n, const float* x, const float* y, float* z) {
    index_t i = 0;
    for (; i + 8 <= n; i += 8) {
        _mm256_storeu_ps(z + i, _mm256_fmadd_ps(_mm256_loadu_ps(x + i), _mm256_loadu_ps(y + i),
                                                _mm256_loadu_ps(z + i)));
    }
    for (; i < n; ++i) z[i] += x[i] * y[i];
}

double dot_avx2(index_t n, const float* x, const float* y) {
    __m256d acc0 = _mm256_setzero_pd();
    __m256d acc1 = _mm256_setzero_pd();
    index_t i = 0;
    for (; i + 8 <= n; i += 8) {
        const __m256 xv = _mm256_loadu_ps(x + i);
        const __m256 yv = _mm256_loadu_ps(y + i);
        acc0 = _mm256_fmadd_pd(_mm256_cvtps_pd(_mm256_castps256_ps128(xv)),
                               _mm256_cvtps_pd(_mm256_castps256_ps128(yv)), acc0);
        acc1 = _mm256_fmadd_pd(_mm256_cvtps_pd(_mm256_extractf128_ps(xv, 1)),
                               _mm256_cvtps_pd(_mm256_extractf128_ps(yv, 1)), acc1);
    }
    double acc = hsum_pd(_mm256_add_pd(acc0, acc1));
    for (; i < n; ++i) acc += static_cast<double>(x[i]) * static_cast<double>(y[i]);
    return acc;
}

double sum_avx2(index_t n, const float* x) {
    __m256d acc0 = _mm256_setzero_pd();
    __m256d acc1 = _mm256_setzero_pd();
    index_t i = 0;
    for (; i + 8 <= n; i += 8) {
        const __m256 xv = _mm256_loadu_ps(x + i);
        acc0 = _mm256_add_pd(acc0, _mm256_cvtps_pd(_mm256_castps256_ps128(xv)));
        acc1 = _mm256_add_pd(acc1, _mm256_cvtps_pd(_mm256_extractf128_ps(xv, 1)));
    }
    double acc = hsum_pd(_mm256_add_pd(acc0, acc1));
    for (; i < n; ++i) acc += x[i];
    return acc;
}

void leaky_relu_avx2(index_t n, float slope, const float* x, float* y) {
    const __m256 sv = _mm256_set1_ps(slope);
    const __m256 zero = _mm256_setzero_ps();
    index_t i = 0;
    for (; i + 8 <= n; i += 8) {
        const __m256 xv = _mm256_loadu_ps(x + i);
        const __m256 pos = _mm256_cmp_ps(xv, zero, _CMP_GT_OQ);
        _mm256_storeu_ps(y + i, _mm256_blendv_ps(_mm256_mul_ps(sv, xv), xv, pos));
    }
    for (; i < n; ++i) y[i] = x[i] > 0.0f ? x[i] : slope * x[i];
}

void leaky_relu_backward_avx2(index_t n, float slope, const float* x, const float* gy, float* gx) {
    const __m256 sv = _mm256_set1_ps(slope);
    const __m256 one = _mm256_set1_ps(1.0f);
    const __m256 zero = _mm256_setzero_ps();
    index_t i = 0;
    for (; i + 8 <= n; i += 8) {
        const __m256 pos = _mm256_cmp_ps(_mm256_loadu_ps(x + i), zero, _CMP_GT_OQ);
        const __m256 factor = _mm256_blendv_ps(sv, one, pos);
        _mm256_storeu_ps(gx + i, _mm256_add_ps(_mm256_loadu_ps(gx + i),
                                               _mm256_mul_ps(factor, _mm256_loadu_ps(gy + i))));
    }
    for (; i < n; ++i) gx[i] += x[i] > 0.0f ? gy[i] : slope * gy[i];
}

void adam_avx2(index_t n, float* param, const float* grad, float* m, float* v, float beta1,
               float beta2, float step_size, float bias2, float eps) {
    const float sqrt_bias2 = std::sqrt(bias2);
    const __m256 b1 = _mm256_set1_ps(beta1);
    const __m256 b2 = _mm256_set1_ps(beta2);
    const __m256 omb1 = _mm256_set1_ps(1.0f - beta1);
    const __m256 omb2 = _mm256_set1_ps(1.0f - beta2);
    const __m256 step = _mm256_set1_ps(step_size);
    const __m256 sb2 = _mm256_set1_ps(sqrt_bias2);
    const __m256 ev = _mm256_set1_ps(eps);
    index_t i = 0;
    for (; i + 8 <= n; i += 8) {
        const __m256 g = _mm256_loadu_ps(grad + i);
        const __m256 mv = _mm256_add_ps(_mm256_mul_ps(b1, _mm256_loadu_ps(m + i)), _mm256_mul_ps(omb1, g));
        const __m256 vv = _mm256_add_ps(_mm256_mul_ps(b2, _mm256_loadu_ps(v + i)),
                                        _mm256_mul_ps(_mm256_mul_ps(omb2, g), g));
        _mm256_storeu_ps(m + i, mv);
        _mm256_storeu_ps(v + i, vv);
        const __m256 denom = _mm256_add_ps(_mm256_div_ps(_mm256_sqrt_ps(vv), sb2), ev);
        const __m256 upd = _mm256_div_ps(_mm256_mul_ps(step, mv), denom);
        _mm256_storeu_ps(param + i, _mm256_sub_ps(_mm256_loadu_ps(param + i), upd));
    }
    for (; i < n; ++i) {
        const float g = grad[i];
        m[i] = beta1 * m[i] + (1.0f - beta1) * g;
        v[i] = beta2 * v[i] + (1.0f - beta2) * g * g;
        param[i] -= step_size * m[i] / (std::sqrt(v[i]) / sqrt_bias2 + eps);
    }
}

}  // namespace

const KernelTable& avx2_kernel_table() {
    static const KernelTable table{
        "avx2",   gemm_avx2, axpy_avx2,       scale_avx2,
        add_avx2, mul_avx2,  mul_acc_avx2,    dot_avx2,
        sum_avx2, leaky_relu_avx2, leaky_relu_backward_avx2, adam_avx2,
    };
    return table;
}

}  // namespace blobgan::simd
