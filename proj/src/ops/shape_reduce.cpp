#include <algorithm>
#include <cmath>

#include "blobgan/errors.hpp"
#include "blobgan/ops.hpp"
#include "blobgan/simd/kernels.hpp"
#include "ops_internal.hpp"

namespace blobgan::ops {
namespace {

// A tensor viewed as [outer, extent, inner] around one axis.
struct AxisView {
    std::int64_t outer = 1;
    std::int64_t extent = 1;
    std::int64_t inner = 1;
};

AxisView view_around(const Shape& shape, int axis) {
    AxisView v;
    for (int i = 0; i < axis; ++i) v.outer *= shape[static_cast<std::size_t>(i)];
    v.extent = shape[static_cast<std::size_t>(axis)];
    for (std::size_t i = static_cast<std::size_t>(axis) + 1; i < shape.size(); ++i) v.inner *= shape[i];
    return v;
}

int checked_axis(const char* op, int axis, int rank) {
    const int a = detail::normalize_axis(axis, rank);
    if (a < 0 || a >= rank) {
        throw DomainError(std::string(op) + ": axis " + std::to_string(axis) + " out of range for rank " +
                          std::to_string(rank));
    }
    return a;
}

}  // namespace

Var sum(const Var& a) {
    const Tensor& av = a.value();
    Tensor out = Tensor::scalar(static_cast<float>(simd::active_kernels().sum(av.numel(), av.data())));
    return a.tape().record(std::move(out), {a}, [a](Tape& tape, const Tensor&, const Tensor& g) {
        Tensor& ga = tape.grad_slot(a);
        const float gv = g[0];
        for (auto& v : ga.values()) v += gv;
    });
}

Var mean(const Var& a) {
    const auto n = a.numel();
    if (n == 0) throw DomainError("mean of an empty tensor");
    return scale(sum(a), 1.0f / static_cast<float>(n));
}

Var sum_axis(const Var& a, int axis, bool keepdim) {
    const Tensor& av = a.value();
    const int ax = checked_axis("sum_axis", axis, av.rank());
    const AxisView v = view_around(av.shape(), ax);
    Shape out_shape = av.shape();
    if (keepdim) {
        out_shape[static_cast<std::size_t>(ax)] = 1;
    } else {
        out_shape.erase(out_shape.begin() + ax);
    }
    Tensor out(out_shape);
    std::vector<double> acc(static_cast<std::size_t>(v.inner));
    for (std::int64_t o = 0; o < v.outer; ++o) {
        std::fill(acc.begin(), acc.end(), 0.0);
        for (std::int64_t e = 0; e < v.extent; ++e) {
            const float* row = av.data() + (o * v.extent + e) * v.inner;
            for (std::int64_t i = 0; i < v.inner; ++i) acc[static_cast<std::size_t>(i)] += row[i];
        }
        for (std::int64_t i = 0; i < v.inner; ++i) out[o * v.inner + i] = static_cast<float>(acc[static_cast<std::size_t>(i)]);
    }
    return a.tape().record(std::move(out), {a}, [a, v](Tape& tape, const Tensor&, const Tensor& g) {
        float* ga = tape.grad_slot(a).data();
        for (std::int64_t o = 0; o < v.outer; ++o) {
            for (std::int64_t e = 0; e < v.extent; ++e) {
                float* row = ga + (o * v.extent + e) * v.inner;
                const float* gr = g.data() + o * v.inner;
                for (std::int64_t i = 0; i < v.inner; ++i) row[i] += gr[i];
            }
        }
    });
}

Var mean_axis(const Var& a, int axis, bool keepdim) {
    const int ax = checked_axis("mean_axis", axis, a.rank());
    const auto extent = a.dim(ax);
    if (extent == 0) throw DomainError("mean_axis over an empty axis");
    return scale(sum_axis(a, ax, keepdim), 1.0f / static_cast<float>(extent));
}

Var reshape(const Var& a, Shape shape) {
    Tensor out = a.value().reshaped(std::move(shape));
    return a.tape().record(std::move(out), {a}, [a](Tape& tape, const Tensor&, const Tensor& g) {
        Tensor& ga = tape.grad_slot(a);
        simd::active_kernels().axpy(g.numel(), 1.0f, g.data(), ga.data());
    });
}

Var narrow(const Var& a, int axis, std::int64_t start, std::int64_t length) {
    const Tensor& av = a.value();
    const int ax = checked_axis("narrow", axis, av.rank());
    const AxisView v = view_around(av.shape(), ax);
    if (start < 0 || length < 0 || start + length > v.extent) {
        throw DomainError("narrow: range [" + std::to_string(start) + ", " + std::to_string(start + length) +
                          ") outside axis of extent " + std::to_string(v.extent));
    }
    Shape out_shape = av.shape();
    out_shape[static_cast<std::size_t>(ax)] = length;
    Tensor out(out_shape);
    const std::int64_t chunk = length * v.inner;
    for (std::int64_t o = 0; o < v.outer; ++o) {
        std::copy_n(av.data() + (o * v.extent + start) * v.inner, chunk, out.data() + o * chunk);
    }
    return a.tape().record(std::move(out), {a}, [a, v, start, chunk](Tape& tape, const Tensor&, const Tensor& g) {
        float* ga = tape.grad_slot(a).data();
        for (std::int64_t o = 0; o < v.outer; ++o) {
            float* dst = ga + (o * v.extent + start) * v.inner;
            const float* src = g.data() + o * chunk;
            for (std::int64_t i = 0; i < chunk; ++i) dst[i] += src[i];
        }
    });
}

Var concat(const std::vector<Var>& parts, int axis) {
    if (parts.empty()) throw DomainError("concat of zero tensors");
    const Shape& first = parts.front().shape();
    const int ax = checked_axis("concat", axis, static_cast<int>(first.size()));
    std::int64_t total = 0;
    for (const auto& p : parts) {
        Shape s = p.shape();
        if (s.size() != first.size()) throw DomainError("concat: rank mismatch");
        for (std::size_t i = 0; i < s.size(); ++i) {
            if (static_cast<int>(i) != ax && s[i] != first[i]) {
                throw DomainError("concat: shape " + shape_string(s) + " incompatible with " + shape_string(first));
            }
        }
        total += s[static_cast<std::size_t>(ax)];
    }
    Shape out_shape = first;
    out_shape[static_cast<std::size_t>(ax)] = total;
    Tensor out(out_shape);
    const AxisView ov = view_around(out_shape, ax);
    std::vector<std::int64_t> offsets;
    std::int64_t off = 0;
    for (const auto& p : parts) {
        const AxisView pv = view_around(p.shape(), ax);
        const std::int64_t chunk = pv.extent * pv.inner;
        for (std::int64_t o = 0; o < pv.outer; ++o) {
            std::copy_n(p.value().data() + o * chunk, chunk, out.data() + (o * ov.extent + off) * ov.inner);
        }
        offsets.push_back(off);
        off += pv.extent;
    }
    Tape& tape = parts.front().tape();
    return tape.record(std::move(out), parts, [parts, offsets, ov, ax](Tape& tape, const Tensor&, const Tensor& g) {
        for (std::size_t k = 0; k < parts.size(); ++k) {
            if (!parts[k].requires_grad()) continue;
            const AxisView pv = view_around(parts[k].shape(), ax);
            const std::int64_t chunk = pv.extent * pv.inner;
            float* gp = tape.grad_slot(parts[k]).data();
            for (std::int64_t o = 0; o < pv.outer; ++o) {
                const float* src = g.data() + (o * ov.extent + offsets[k]) * ov.inner;
                for (std::int64_t i = 0; i < chunk; ++i) gp[o * chunk + i] += src[i];
            }
        }
    });
}

Var transpose_last2(const Var& a) {
    const Tensor& av = a.value();
    if (av.rank() != 2 && av.rank() != 3) throw DomainError("transpose_last2 needs rank 2 or 3");
    const std::int64_t batch = av.rank() == 3 ? av.dim(0) : 1;
    const std::int64_t rows = av.dim(-2);
    const std::int64_t cols = av.dim(-1);
    Shape out_shape = av.shape();
    std::swap(out_shape[out_shape.size() - 1], out_shape[out_shape.size() - 2]);
    Tensor out(out_shape);
    for (std::int64_t b = 0; b < batch; ++b) {
        const float* src = av.data() + b * rows * cols;
        float* dst = out.data() + b * rows * cols;
        for (std::int64_t r = 0; r < rows; ++r)
            for (std::int64_t c = 0; c < cols; ++c) dst[c * rows + r] = src[r * cols + c];
    }
    return a.tape().record(std::move(out), {a}, [a, batch, rows, cols](Tape& tape, const Tensor&, const Tensor& g) {
        float* ga = tape.grad_slot(a).data();
        for (std::int64_t b = 0; b < batch; ++b) {
            const float* src = g.data() + b * rows * cols;
            float* dst = ga + b * rows * cols;
            for (std::int64_t r = 0; r < rows; ++r)
                for (std::int64_t c = 0; c < cols; ++c) dst[r * cols + c] += src[c * rows + r];
        }
    });
}

Var detach(const Var& a) { return a.tape().constant(a.value()); }

Var l2_normalize(const Var& a, int axis, float eps) {
    const Tensor& av = a.value();
    const int ax = checked_axis("l2_normalize", axis, av.rank());
    const AxisView v = view_around(av.shape(), ax);
    Tensor out(av.shape());
    Tensor norms(Shape{v.outer, v.inner});
    for (std::int64_t o = 0; o < v.outer; ++o) {
        for (std::int64_t i = 0; i < v.inner; ++i) {
            double ss = 0.0;
            for (std::int64_t e = 0; e < v.extent; ++e) {
                const double x = av[(o * v.extent + e) * v.inner + i];
                ss += x * x;
            }
            const float norm = static_cast<float>(std::sqrt(ss + eps));
            norms[o * v.inner + i] = norm;
            for (std::int64_t e = 0; e < v.extent; ++e) {
                const auto idx = (o * v.extent + e) * v.inner + i;
                out[idx] = av[idx] / norm;
            }
        }
    }
    return a.tape().record(std::move(out), {a}, [a, v, norms](Tape& tape, const Tensor& y, const Tensor& g) {
        float* ga = tape.grad_slot(a).data();
        for (std::int64_t o = 0; o < v.outer; ++o) {
            for (std::int64_t i = 0; i < v.inner; ++i) {
                double gy = 0.0;
                for (std::int64_t e = 0; e < v.extent; ++e) {
                    const auto idx = (o * v.extent + e) * v.inner + i;
                    gy += static_cast<double>(g[idx]) * y[idx];
                }
                const float norm = norms[o * v.inner + i];
                for (std::int64_t e = 0; e < v.extent; ++e) {
                    const auto idx = (o * v.extent + e) * v.inner + i;
                    ga[idx] += (g[idx] - static_cast<float>(gy) * y[idx]) / norm;
                }
            }
        }
    });
}

}  // namespace blobgan::ops
