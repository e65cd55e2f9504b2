#pragma once

#include <algorithm>
#include <optional>
#include <vector>

#include "blobgan/tensor.hpp"

namespace blobgan::ops::detail {

struct BroadcastPlan {
    Shape out;
    std::vector<std::int64_t> stride_a;  // per output axis; 0 on broadcast axes
    std::vector<std::int64_t> stride_b;
    bool a_same = false;  // a already has the output shape
    bool b_same = false;
};

inline std::optional<BroadcastPlan> make_broadcast(const Shape& a, const Shape& b) {
    const std::size_t rank = std::max(a.size(), b.size());
    BroadcastPlan plan;
    plan.out.assign(rank, 1);
    plan.stride_a.assign(rank, 0);
    plan.stride_b.assign(rank, 0);
    auto extent = [rank](const Shape& s, std::size_t axis) -> std::int64_t {
        const std::size_t offset = rank - s.size();
        return axis < offset ? 1 : s[axis - offset];
    };
    for (std::size_t axis = 0; axis < rank; ++axis) {
        const auto ea = extent(a, axis);
        const auto eb = extent(b, axis);
        if (ea != eb && ea != 1 && eb != 1) return std::nullopt;
        plan.out[axis] = std::max(ea, eb);
        if (ea == 0 || eb == 0) plan.out[axis] = 0;
    }
    std::int64_t sa = 1;
    std::int64_t sb = 1;
    for (std::size_t axis = rank; axis-- > 0;) {
        const auto ea = extent(a, axis);
        const auto eb = extent(b, axis);
        plan.stride_a[axis] = ea == 1 ? 0 : sa;
        plan.stride_b[axis] = eb == 1 ? 0 : sb;
        sa *= ea;
        sb *= eb;
    }
    plan.a_same = a == plan.out;
    plan.b_same = b == plan.out;
    return plan;
}

// Calls fn(out_index, a_index, b_index) for every output element in order.
template <typename Fn>
void for_each_broadcast(const BroadcastPlan& plan, Fn&& fn) {
    const std::size_t rank = plan.out.size();
    const std::int64_t total = shape_numel(plan.out);
    if (total == 0) return;
    if (rank == 0) {
        fn(0, 0, 0);
        return;
    }
    std::vector<std::int64_t> idx(rank, 0);
    std::int64_t ia = 0;
    std::int64_t ib = 0;
    const std::int64_t inner = plan.out[rank - 1];
    const std::int64_t inner_a = plan.stride_a[rank - 1];
    const std::int64_t inner_b = plan.stride_b[rank - 1];
    for (std::int64_t o = 0; o < total; o += inner) {
        for (std::int64_t j = 0; j < inner; ++j) fn(o + j, ia + j * inner_a, ib + j * inner_b);
        // advance the outer multi-index
        for (std::size_t axis = rank - 1; axis-- > 0;) {
            ++idx[axis];
            ia += plan.stride_a[axis];
            ib += plan.stride_b[axis];
            if (idx[axis] < plan.out[axis]) break;
            ia -= plan.stride_a[axis] * plan.out[axis];
            ib -= plan.stride_b[axis] * plan.out[axis];
            idx[axis] = 0;
        }
    }
}

inline int normalize_axis(int axis, int rank) { return axis < 0 ? axis + rank : axis; }

}  // namespace blobgan::ops::detail
