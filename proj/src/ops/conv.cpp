#include <algorithm>
#include <vector>

#include "blobgan/errors.hpp"
#include "blobgan/ops.hpp"
#include "blobgan/simd/kernels.hpp"
#include "linalg_internal.hpp"

namespace blobgan {
namespace {

struct ConvGeom {
    std::int64_t n, c, h, w;  // input
    std::int64_t o, k;        // filters
    std::int64_t ho, wo;      // output
    int pad;

    std::int64_t patch() const { return c * k * k; }
    std::int64_t out_pixels() const { return ho * wo; }
};

ConvGeom geometry(const Shape& x, const Shape& w, int pad) {
    if (x.size() != 4 || w.size() != 4 || w[2] != w[3] || x[1] != w[1] || pad < 0) {
        throw DomainError("conv2d: bad shapes x=" + shape_string(x) + " w=" + shape_string(w) +
                          " pad=" + std::to_string(pad));
    }
    ConvGeom g{x[0], x[1], x[2], x[3], w[0], w[2], 0, 0, pad};
    g.ho = g.h + 2 * pad - g.k + 1;
    g.wo = g.w + 2 * pad - g.k + 1;
    if (g.ho <= 0 || g.wo <= 0) throw DomainError("conv2d: kernel larger than padded input");
    return g;
}

// col[(c,ky,kx), (y,x)] = img[c, y+ky-pad, x+kx-pad] (zero outside)
void im2col(const ConvGeom& g, const float* img, float* col) {
    for (std::int64_t c = 0; c < g.c; ++c) {
        for (std::int64_t ky = 0; ky < g.k; ++ky) {
            for (std::int64_t kx = 0; kx < g.k; ++kx) {
                float* row = col + ((c * g.k + ky) * g.k + kx) * g.out_pixels();
                for (std::int64_t y = 0; y < g.ho; ++y) {
                    const std::int64_t iy = y + ky - g.pad;
                    float* dst = row + y * g.wo;
                    if (iy < 0 || iy >= g.h) {
                        std::fill_n(dst, g.wo, 0.0f);
                        continue;
                    }
                    const float* src = img + (c * g.h + iy) * g.w;
                    const std::int64_t shift = kx - g.pad;
                    const std::int64_t lo = std::clamp<std::int64_t>(-shift, 0, g.wo);
                    const std::int64_t hi = std::clamp<std::int64_t>(g.w - shift, lo, g.wo);
                    std::fill(dst, dst + lo, 0.0f);
                    std::copy(src + lo + shift, src + hi + shift, dst + lo);
                    std::fill(dst + hi, dst + g.wo, 0.0f);
                }
            }
        }
    }
}

// Adjoint of im2col: scatter-adds patches back into the image.
void col2im(const ConvGeom& g, const float* col, float* img) {
    for (std::int64_t c = 0; c < g.c; ++c) {
        for (std::int64_t ky = 0; ky < g.k; ++ky) {
            for (std::int64_t kx = 0; kx < g.k; ++kx) {
                const float* row = col + ((c * g.k + ky) * g.k + kx) * g.out_pixels();
                for (std::int64_t y = 0; y < g.ho; ++y) {
                    const std::int64_t iy = y + ky - g.pad;
                    if (iy < 0 || iy >= g.h) continue;
                    float* dst = img + (c * g.h + iy) * g.w;
                    const float* src = row + y * g.wo;
                    const std::int64_t shift = kx - g.pad;
                    const std::int64_t lo = std::clamp<std::int64_t>(-shift, 0, g.wo);
                    const std::int64_t hi = std::clamp<std::int64_t>(g.w - shift, lo, g.wo);
                    for (std::int64_t x = lo; x < hi; ++x) dst[x + shift] += src[x];
                }
            }
        }
    }
}

void check_out_grad(const ConvGeom& g, const Tensor& gy) {
    if (gy.shape() != Shape{g.n, g.o, g.ho, g.wo}) {
        throw DomainError("conv2d: gradient shape " + shape_string(gy.shape()) + " does not match output");
    }
}

}  // namespace

Tensor kernels::conv2d_forward(const Tensor& x, const Tensor& w, int pad) {
    const ConvGeom g = geometry(x.shape(), w.shape(), pad);
    Tensor out(Shape{g.n, g.o, g.ho, g.wo});
    std::vector<float> col(static_cast<std::size_t>(g.patch() * g.out_pixels()));
    const auto& k = simd::active_kernels();
    for (std::int64_t i = 0; i < g.n; ++i) {
        im2col(g, x.data() + i * g.c * g.h * g.w, col.data());
        k.gemm(g.o, g.out_pixels(), g.patch(), w.data(), g.patch(), col.data(), g.out_pixels(),
               out.data() + i * g.o * g.out_pixels(), g.out_pixels(), false);
    }
    return out;
}

void kernels::conv2d_backward_data(const Tensor& gy, const Tensor& w, int pad, Tensor& gx) {
    const ConvGeom g = geometry(gx.shape(), w.shape(), pad);
    check_out_grad(g, gy);
    std::vector<float> wt(static_cast<std::size_t>(g.patch() * g.o));
    ops::detail::transpose_into(g.o, g.patch(), w.data(), wt.data());
    std::vector<float> col(static_cast<std::size_t>(g.patch() * g.out_pixels()));
    const auto& k = simd::active_kernels();
    for (std::int64_t i = 0; i < g.n; ++i) {
        k.gemm(g.patch(), g.out_pixels(), g.o, wt.data(), g.o, gy.data() + i * g.o * g.out_pixels(),
               g.out_pixels(), col.data(), g.out_pixels(), false);
        col2im(g, col.data(), gx.data() + i * g.c * g.h * g.w);
    }
}

void kernels::conv2d_backward_weight(const Tensor& x, const Tensor& gy, int pad, Tensor& gw) {
    const ConvGeom g = geometry(x.shape(), gw.shape(), pad);
    check_out_grad(g, gy);
    std::vector<float> col(static_cast<std::size_t>(g.patch() * g.out_pixels()));
    std::vector<float> colt(col.size());
    const auto& k = simd::active_kernels();
    for (std::int64_t i = 0; i < g.n; ++i) {
        im2col(g, x.data() + i * g.c * g.h * g.w, col.data());
        ops::detail::transpose_into(g.patch(), g.out_pixels(), col.data(), colt.data());
        k.gemm(g.o, g.patch(), g.out_pixels(), gy.data() + i * g.o * g.out_pixels(), g.out_pixels(), colt.data(),
               g.patch(), gw.data(), g.patch(), true);
    }
}

Var ops::conv2d(const Var& x, const Var& w, int pad) {
    Tensor out = kernels::conv2d_forward(x.value(), w.value(), pad);
    return x.tape().record(std::move(out), {x, w}, [x, w, pad](Tape& tape, const Tensor&, const Tensor& g) {
        if (x.requires_grad()) kernels::conv2d_backward_data(g, w.value(), pad, tape.grad_slot(x));
        if (w.requires_grad()) kernels::conv2d_backward_weight(x.value(), g, pad, tape.grad_slot(w));
    });
}

Var ops::conv2d_input_grad(const Var& gy, const Var& w, int pad, std::int64_t height, std::int64_t width) {
    if (gy.rank() != 4 || w.rank() != 4) throw DomainError("conv2d_input_grad: rank-4 operands expected");
    Tensor out(Shape{gy.dim(0), w.dim(1), height, width});
    kernels::conv2d_backward_data(gy.value(), w.value(), pad, out);
    // out is bilinear in (gy, w): <g, out> = <conv2d(g, w), gy>.
    return gy.tape().record(std::move(out), {gy, w}, [gy, w, pad](Tape& tape, const Tensor&, const Tensor& g) {
        if (gy.requires_grad()) {
            Tensor conv = kernels::conv2d_forward(g, w.value(), pad);
            simd::active_kernels().axpy(conv.numel(), 1.0f, conv.data(), tape.grad_slot(gy).data());
        }
        if (w.requires_grad()) kernels::conv2d_backward_weight(g, gy.value(), pad, tape.grad_slot(w));
    });
}

Var ops::upsample2x(const Var& x) {
    if (x.rank() != 4) throw DomainError("upsample2x: expected [N,C,H,W], got " + shape_string(x.shape()));
    const std::int64_t planes = x.dim(0) * x.dim(1);
    const std::int64_t h = x.dim(2);
    const std::int64_t w = x.dim(3);
    Tensor out(Shape{x.dim(0), x.dim(1), 2 * h, 2 * w});
    const float* src = x.value().data();
    float* dst = out.data();
    for (std::int64_t p = 0; p < planes; ++p) {
        for (std::int64_t y = 0; y < 2 * h; ++y) {
            const float* srow = src + (p * h + y / 2) * w;
            float* drow = dst + (p * 2 * h + y) * 2 * w;
            for (std::int64_t xx = 0; xx < 2 * w; ++xx) drow[xx] = srow[xx / 2];
        }
    }
    return x.tape().record(std::move(out), {x}, [x, planes, h, w](Tape& tape, const Tensor&, const Tensor& g) {
        float* gx = tape.grad_slot(x).data();
        for (std::int64_t p = 0; p < planes; ++p) {
            for (std::int64_t y = 0; y < 2 * h; ++y) {
                const float* grow = g.data() + (p * 2 * h + y) * 2 * w;
                float* xrow = gx + (p * h + y / 2) * w;
                for (std::int64_t xx = 0; xx < 2 * w; ++xx) xrow[xx / 2] += grow[xx];
            }
        }
    });
}

Var ops::avg_pool2x(const Var& x) {
    if (x.rank() != 4 || x.dim(2) % 2 != 0 || x.dim(3) % 2 != 0) {
        throw DomainError("avg_pool2x: expected [N,C,H,W] with even H, W, got " + shape_string(x.shape()));
    }
    const std::int64_t planes = x.dim(0) * x.dim(1);
    const std::int64_t h = x.dim(2) / 2;
    const std::int64_t w = x.dim(3) / 2;
    Tensor out(Shape{x.dim(0), x.dim(1), h, w});
    const float* src = x.value().data();
    for (std::int64_t p = 0; p < planes; ++p) {
        for (std::int64_t y = 0; y < h; ++y) {
            const float* r0 = src + (p * 2 * h + 2 * y) * 2 * w;
            const float* r1 = r0 + 2 * w;
            float* dst = out.data() + (p * h + y) * w;
            for (std::int64_t xx = 0; xx < w; ++xx) {
                dst[xx] = 0.25f * (r0[2 * xx] + r0[2 * xx + 1] + r1[2 * xx] + r1[2 * xx + 1]);
            }
        }
    }
    return x.tape().record(std::move(out), {x}, [x, planes, h, w](Tape& tape, const Tensor&, const Tensor& g) {
        float* gx = tape.grad_slot(x).data();
        for (std::int64_t p = 0; p < planes; ++p) {
            for (std::int64_t y = 0; y < h; ++y) {
                float* r0 = gx + (p * 2 * h + 2 * y) * 2 * w;
                float* r1 = r0 + 2 * w;
                const float* src = g.data() + (p * h + y) * w;
                for (std::int64_t xx = 0; xx < w; ++xx) {
                    const float v = 0.25f * src[xx];
                    r0[2 * xx] += v;
                    r0[2 * xx + 1] += v;
                    r1[2 * xx] += v;
                    r1[2 * xx + 1] += v;
                }
            }
        }
    });
}

}  // namespace blobgan
