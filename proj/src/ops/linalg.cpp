#include <vector>

#include "blobgan/errors.hpp"
#include "blobgan/ops.hpp"
#include "blobgan/simd/kernels.hpp"
#include "linalg_internal.hpp"

namespace blobgan {
namespace ops::detail {

void transpose_into(std::int64_t rows, std::int64_t cols, const float* src, float* dst) {
    constexpr std::int64_t kBlock = 32;
    for (std::int64_t r0 = 0; r0 < rows; r0 += kBlock) {
        const std::int64_t r1 = std::min(rows, r0 + kBlock);
        for (std::int64_t c0 = 0; c0 < cols; c0 += kBlock) {
            const std::int64_t c1 = std::min(cols, c0 + kBlock);
            for (std::int64_t r = r0; r < r1; ++r)
                for (std::int64_t c = c0; c < c1; ++c) dst[c * rows + r] = src[r * cols + c];
        }
    }
}

void gemm_op(bool trans_a, bool trans_b, std::int64_t m, std::int64_t n, std::int64_t k, const float* a,
             const float* b, float* c, bool accumulate) {
    std::vector<float> at;
    std::vector<float> bt;
    if (trans_a) {
        at.resize(static_cast<std::size_t>(m * k));
        transpose_into(k, m, a, at.data());
        a = at.data();
    }
    if (trans_b) {
        bt.resize(static_cast<std::size_t>(k * n));
        transpose_into(n, k, b, bt.data());
        b = bt.data();
    }
    simd::active_kernels().gemm(m, n, k, a, k, b, n, c, n, accumulate);
}

}  // namespace ops::detail

namespace {

struct MatDims {
    std::int64_t m, n, k;
};

MatDims check_dims(const char* op, const Shape& a, const Shape& b, bool ta, bool tb, int rank) {
    if (static_cast<int>(a.size()) != rank || static_cast<int>(b.size()) != rank) {
        throw DomainError(std::string(op) + ": expected rank " + std::to_string(rank) + " operands, got " +
                          shape_string(a) + " and " + shape_string(b));
    }
    const std::size_t r = a.size();
    const std::int64_t m = ta ? a[r - 1] : a[r - 2];
    const std::int64_t ka = ta ? a[r - 2] : a[r - 1];
    const std::int64_t kb = tb ? b[r - 1] : b[r - 2];
    const std::int64_t n = tb ? b[r - 2] : b[r - 1];
    if (ka != kb || (rank == 3 && a[0] != b[0])) {
        throw DomainError(std::string(op) + ": incompatible operands " + shape_string(a) + " and " + shape_string(b));
    }
    return {m, n, ka};
}

// Batched product with per-operand transposes. Gradients follow from
// d(op(A) op(B)) and are routed back through the stored layouts.
Var product(const char* name, const Var& a, const Var& b, bool ta, bool tb, int rank) {
    const MatDims d = check_dims(name, a.shape(), b.shape(), ta, tb, rank);
    const std::int64_t batch = rank == 3 ? a.dim(0) : 1;
    Shape out_shape = rank == 3 ? Shape{batch, d.m, d.n} : Shape{d.m, d.n};
    Tensor out(out_shape);
    const std::int64_t sa = d.m * d.k;
    const std::int64_t sb = d.k * d.n;
    const std::int64_t sc = d.m * d.n;
    for (std::int64_t i = 0; i < batch; ++i) {
        ops::detail::gemm_op(ta, tb, d.m, d.n, d.k, a.value().data() + i * sa, b.value().data() + i * sb,
                             out.data() + i * sc, false);
    }
    return a.tape().record(std::move(out), {a, b}, [a, b, ta, tb, d, batch, sa, sb, sc](Tape& tape, const Tensor&,
                                                                                        const Tensor& g) {
        using ops::detail::gemm_op;
        if (a.requires_grad()) {
            float* ga = tape.grad_slot(a).data();
            const float* bv = b.value().data();
            for (std::int64_t i = 0; i < batch; ++i) {
                if (!ta) {
                    gemm_op(false, !tb, d.m, d.k, d.n, g.data() + i * sc, bv + i * sb, ga + i * sa, true);
                } else {
                    gemm_op(tb, true, d.k, d.m, d.n, bv + i * sb, g.data() + i * sc, ga + i * sa, true);
                }
            }
        }
        if (b.requires_grad()) {
            float* gb = tape.grad_slot(b).data();
            const float* av = a.value().data();
            for (std::int64_t i = 0; i < batch; ++i) {
                if (!tb) {
                    gemm_op(!ta, false, d.k, d.n, d.m, av + i * sa, g.data() + i * sc, gb + i * sb, true);
                } else {
                    gemm_op(true, ta, d.n, d.k, d.m, g.data() + i * sc, av + i * sa, gb + i * sb, true);
                }
            }
        }
    });
}

}  // namespace

Var ops::matmul(const Var& a, const Var& b, bool trans_a, bool trans_b) {
    return product("matmul", a, b, trans_a, trans_b, 2);
}

Var ops::bmm(const Var& a, const Var& b, bool trans_a, bool trans_b) {
    return product("bmm", a, b, trans_a, trans_b, 3);
}

Tensor kernels::matmul(const Tensor& a, const Tensor& b, bool trans_a, bool trans_b) {
    const MatDims d = check_dims("kernels::matmul", a.shape(), b.shape(), trans_a, trans_b, 2);
    Tensor out(Shape{d.m, d.n});
    ops::detail::gemm_op(trans_a, trans_b, d.m, d.n, d.k, a.data(), b.data(), out.data(), false);
    return out;
}

}  // namespace blobgan
