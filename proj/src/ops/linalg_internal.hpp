#pragma once

#include <algorithm>
#include <cstdint>

namespace blobgan::ops::detail {

// dst[cols, rows] = src[rows, cols]^T
void transpose_into(std::int64_t rows, std::int64_t cols, const float* src, float* dst);

// C[m,n] (+)= op(A) op(B), where A is stored [m,k] (or [k,m] when trans_a)
// and B is stored [k,n] (or [n,k] when trans_b).
void gemm_op(bool trans_a, bool trans_b, std::int64_t m, std::int64_t n, std::int64_t k, const float* a,
             const float* b, float* c, bool accumulate);

}  // namespace blobgan::ops::detail
