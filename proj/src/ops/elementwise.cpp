#include <cmath>
#include <limits>

#include "blobgan/errors.hpp"
#include "blobgan/ops.hpp"
#include "blobgan/simd/kernels.hpp"
#include "ops_internal.hpp"

namespace blobgan::ops {
namespace {

using detail::BroadcastPlan;

BroadcastPlan plan_or_throw(const char* op, const Shape& a, const Shape& b) {
    auto plan = detail::make_broadcast(a, b);
    if (!plan) {
        throw DomainError(std::string(op) + ": shapes " + shape_string(a) + " and " + shape_string(b) +
                          " do not broadcast");
    }
    return *plan;
}

// Sums an output-shaped gradient into one input's (possibly broadcast) slot.
void reduce_into(const BroadcastPlan& plan, const Tensor& grad, Tensor& target, bool first, float sign) {
    const float* g = grad.data();
    float* t = target.data();
    if (first ? plan.a_same : plan.b_same) {
        simd::active_kernels().axpy(grad.numel(), sign, g, t);
        return;
    }
    detail::for_each_broadcast(plan, [&](std::int64_t o, std::int64_t ia, std::int64_t ib) {
        t[first ? ia : ib] += sign * g[o];
    });
}

enum class Binary { kAdd, kSub, kMul };

Var binary(Binary kind, const Var& a, const Var& b) {
    static constexpr const char* kNames[] = {"add", "sub", "mul"};
    const Tensor& av = a.value();
    const Tensor& bv = b.value();
    BroadcastPlan plan = plan_or_throw(kNames[static_cast<int>(kind)], av.shape(), bv.shape());
    Tensor out(plan.out);
    const auto& k = simd::active_kernels();
    if (plan.a_same && plan.b_same) {
        switch (kind) {
            case Binary::kAdd: k.add(out.numel(), av.data(), bv.data(), out.data()); break;
            case Binary::kSub:
                for (std::int64_t i = 0; i < out.numel(); ++i) out[i] = av[i] - bv[i];
                break;
            case Binary::kMul: k.mul(out.numel(), av.data(), bv.data(), out.data()); break;
        }
    } else {
        const float* ap = av.data();
        const float* bp = bv.data();
        float* op = out.data();
        detail::for_each_broadcast(plan, [&](std::int64_t o, std::int64_t ia, std::int64_t ib) {
            switch (kind) {
                case Binary::kAdd: op[o] = ap[ia] + bp[ib]; break;
                case Binary::kSub: op[o] = ap[ia] - bp[ib]; break;
                case Binary::kMul: op[o] = ap[ia] * bp[ib]; break;
            }
        });
    }
    return a.tape().record(std::move(out), {a, b}, [a, b, plan, kind](Tape& tape, const Tensor&, const Tensor& g) {
        if (kind != Binary::kMul) {
            if (a.requires_grad()) reduce_into(plan, g, tape.grad_slot(a), true, 1.0f);
            if (b.requires_grad()) {
                reduce_into(plan, g, tape.grad_slot(b), false, kind == Binary::kSub ? -1.0f : 1.0f);
            }
            return;
        }
        const Tensor& av = a.value();
        const Tensor& bv = b.value();
        const auto& k = simd::active_kernels();
        if (plan.a_same && plan.b_same) {
            if (a.requires_grad()) k.mul_acc(g.numel(), g.data(), bv.data(), tape.grad_slot(a).data());
            if (b.requires_grad()) k.mul_acc(g.numel(), g.data(), av.data(), tape.grad_slot(b).data());
            return;
        }
        const float* gp = g.data();
        if (a.requires_grad()) {
            float* ga = tape.grad_slot(a).data();
            const float* bp = bv.data();
            detail::for_each_broadcast(plan, [&](std::int64_t o, std::int64_t ia, std::int64_t ib) {
                ga[ia] += gp[o] * bp[ib];
            });
        }
        if (b.requires_grad()) {
            float* gb = tape.grad_slot(b).data();
            const float* ap = av.data();
            detail::for_each_broadcast(plan, [&](std::int64_t o, std::int64_t ia, std::int64_t ib) {
                gb[ib] += gp[o] * ap[ia];
            });
        }
    });
}

// Elementwise map; deriv(x, y) returns dy/dx from the input and output.
template <typename Fwd, typename Deriv>
Var unary(const Var& a, Fwd fwd, Deriv deriv) {
    const Tensor& av = a.value();
    Tensor out(av.shape());
    const float* x = av.data();
    float* y = out.data();
    for (std::int64_t i = 0; i < av.numel(); ++i) y[i] = fwd(x[i]);
    return a.tape().record(std::move(out), {a}, [a, deriv](Tape& tape, const Tensor& yv, const Tensor& g) {
        const float* x = a.value().data();
        const float* y = yv.data();
        const float* gp = g.data();
        float* ga = tape.grad_slot(a).data();
        for (std::int64_t i = 0; i < g.numel(); ++i) ga[i] += gp[i] * deriv(x[i], y[i]);
    });
}

float stable_sigmoid(float x) {
    if (x >= 0.0f) return 1.0f / (1.0f + std::exp(-x));
    const float e = std::exp(x);
    return e / (1.0f + e);
}

}  // namespace

Var add(const Var& a, const Var& b) { return binary(Binary::kAdd, a, b); }
Var sub(const Var& a, const Var& b) { return binary(Binary::kSub, a, b); }
Var mul(const Var& a, const Var& b) { return binary(Binary::kMul, a, b); }

Var scale(const Var& a, float factor) {
    const Tensor& av = a.value();
    Tensor out(av.shape());
    simd::active_kernels().scale(av.numel(), factor, av.data(), out.data());
    return a.tape().record(std::move(out), {a}, [a, factor](Tape& tape, const Tensor&, const Tensor& g) {
        simd::active_kernels().axpy(g.numel(), factor, g.data(), tape.grad_slot(a).data());
    });
}

Var add_scalar(const Var& a, float value) {
    return unary(a, [value](float x) { return x + value; }, [](float, float) { return 1.0f; });
}

Var neg(const Var& a) { return scale(a, -1.0f); }

Var square(const Var& a) {
    return unary(a, [](float x) { return x * x; }, [](float x, float) { return 2.0f * x; });
}

Var sqrt(const Var& a) {
    return unary(a, [](float x) { return std::sqrt(x); }, [](float, float y) { return 0.5f / y; });
}

Var exp(const Var& a) {
    return unary(a, [](float x) { return std::exp(x); }, [](float, float y) { return y; });
}

Var sigmoid(const Var& a) {
    return unary(a, stable_sigmoid, [](float, float y) { return y * (1.0f - y); });
}

Var tanh(const Var& a) {
    return unary(a, [](float x) { return std::tanh(x); }, [](float, float y) { return 1.0f - y * y; });
}

Var softplus(const Var& a) {
    return unary(
        a, [](float x) { return x > 0.0f ? x + std::log1p(std::exp(-x)) : std::log1p(std::exp(x)); },
        [](float x, float) { return stable_sigmoid(x); });
}

namespace {
thread_local KinkProbe* active_probe = nullptr;
}  // namespace

KinkProbe::KinkProbe() : min_abs_(std::numeric_limits<float>::infinity()), outer_(active_probe) {
    active_probe = this;
}

KinkProbe::~KinkProbe() {
    active_probe = outer_;
    if (outer_) {
        outer_->min_abs_ = std::min(outer_->min_abs_, min_abs_);
        outer_->signature_ = (outer_->signature_ ^ signature_) * 1099511628211ull;
    }
}

void note_kinks(const Tensor& pre) {
    if (!active_probe) return;
    for (float v : pre.values()) {
        active_probe->min_abs_ = std::min(active_probe->min_abs_, std::abs(v));
        active_probe->signature_ = (active_probe->signature_ ^ (v > 0.0f ? 1u : 2u)) * 1099511628211ull;
    }
}

Var leaky_relu(const Var& a, float slope) {
    note_kinks(a.value());
    const Tensor& av = a.value();
    Tensor out(av.shape());
    simd::active_kernels().leaky_relu(av.numel(), slope, av.data(), out.data());
    return a.tape().record(std::move(out), {a}, [a, slope](Tape& tape, const Tensor&, const Tensor& g) {
        simd::active_kernels().leaky_relu_backward(g.numel(), slope, a.value().data(), g.data(),
                                                   tape.grad_slot(a).data());
    });
}

Var atan2(const Var& y, const Var& x) {
    const Tensor& yv = y.value();
    const Tensor& xv = x.value();
    if (yv.shape() != xv.shape()) {
        throw DomainError("atan2: shape mismatch " + shape_string(yv.shape()) + " vs " + shape_string(xv.shape()));
    }
    Tensor out(yv.shape());
    for (std::int64_t i = 0; i < out.numel(); ++i) out[i] = std::atan2(yv[i], xv[i]);
    return y.tape().record(std::move(out), {y, x}, [y, x](Tape& tape, const Tensor&, const Tensor& g) {
        const Tensor& yv = y.value();
        const Tensor& xv = x.value();
        float* gy = y.requires_grad() ? tape.grad_slot(y).data() : nullptr;
        float* gx = x.requires_grad() ? tape.grad_slot(x).data() : nullptr;
        for (std::int64_t i = 0; i < g.numel(); ++i) {
            const float r2 = xv[i] * xv[i] + yv[i] * yv[i];
            if (r2 == 0.0f) continue;
            if (gy) gy[i] += g[i] * xv[i] / r2;
            if (gx) gx[i] -= g[i] * yv[i] / r2;
        }
    });
}

}  // namespace blobgan::ops
