#pragma once

// Differentiable primitives. Each function computes its forward value
// eagerly and records a backward rule on the inputs' tape. Binary
// elementwise ops broadcast numpy-style (trailing axes aligned).
//
// Shape errors throw DomainError.

#include <vector>

#include "blobgan/autodiff.hpp"

namespace blobgan::ops {

inline constexpr float kLeakySlope = 0.2f;

// elementwise
Var add(const Var& a, const Var& b);
Var sub(const Var& a, const Var& b);
Var mul(const Var& a, const Var& b);
Var scale(const Var& a, float factor);
Var add_scalar(const Var& a, float value);
Var neg(const Var& a);
Var square(const Var& a);
Var sqrt(const Var& a);
Var exp(const Var& a);
Var sigmoid(const Var& a);
Var tanh(const Var& a);
Var softplus(const Var& a);
Var leaky_relu(const Var& a, float slope = kLeakySlope);

// While alive, tracks the smallest |input| seen by leaky_relu on this thread
// and a hash of the input sign pattern. Finite-difference tests use it to
// detect perturbations that cross a kink.
class KinkProbe {
public:
    KinkProbe();
    ~KinkProbe();
    KinkProbe(const KinkProbe&) = delete;
    KinkProbe& operator=(const KinkProbe&) = delete;
    float min_abs() const noexcept { return min_abs_; }
    std::uint64_t signature() const noexcept { return signature_; }

private:
    friend void note_kinks(const Tensor&);
    float min_abs_;
    std::uint64_t signature_ = 1469598103934665603ull;
    KinkProbe* outer_;
};
// Reports leaky_relu inputs evaluated outside leaky_relu (hand-written
// derivative masks) to the active probe.
void note_kinks(const Tensor& pre);

Var atan2(const Var& y, const Var& x);

// reductions (accumulated in double)
Var sum(const Var& a);
Var mean(const Var& a);
Var sum_axis(const Var& a, int axis, bool keepdim = false);
Var mean_axis(const Var& a, int axis, bool keepdim = false);

// shape
Var reshape(const Var& a, Shape shape);
Var narrow(const Var& a, int axis, std::int64_t start, std::int64_t length);
Var concat(const std::vector<Var>& parts, int axis);
// Swaps the last two axes of a rank-2 or rank-3 tensor.
Var transpose_last2(const Var& a);
// Copies the value as a constant: gradients stop here.
Var detach(const Var& a);

// a / sqrt(sum(a^2 over axis) + eps)
Var l2_normalize(const Var& a, int axis, float eps = 1e-8f);

// linear algebra: [M,K]x[K,N] and batched [B,M,K]x[B,K,N]; the flags
// transpose the stored operand first.
Var matmul(const Var& a, const Var& b, bool trans_a = false, bool trans_b = false);
Var bmm(const Var& a, const Var& b, bool trans_a = false, bool trans_b = false);

// Stride-1 2D convolution. x: [N,C,H,W], w: [O,C,K,K]. pad = K/2 gives
// "same" output for odd K, pad = 0 gives "valid".
Var conv2d(const Var& x, const Var& w, int pad);
// Adjoint of conv2d with respect to its input: maps an output-shaped
// gradient [N,O,H',W'] back to [N,C,H,W]. Itself differentiable in both
// arguments, which is what the R1 penalty path needs.
Var conv2d_input_grad(const Var& gy, const Var& w, int pad, std::int64_t height, std::int64_t width);

// Nearest-neighbour x2 upsampling (adjoint: 2x2 sum pooling).
Var upsample2x(const Var& x);
// 2x2 average pooling on [N,C,H,W] with even H, W.
Var avg_pool2x(const Var& x);

}  // namespace blobgan::ops

namespace blobgan::kernels {

// Non-recording convolution kernels, exposed for oracles and benchmarks.
Tensor conv2d_forward(const Tensor& x, const Tensor& w, int pad);
void conv2d_backward_data(const Tensor& gy, const Tensor& w, int pad, Tensor& gx);
void conv2d_backward_weight(const Tensor& x, const Tensor& gy, int pad, Tensor& gw);

// Plain row-major matrix product through the active SIMD table.
Tensor matmul(const Tensor& a, const Tensor& b, bool trans_a = false, bool trans_b = false);

}  // namespace blobgan::kernels
