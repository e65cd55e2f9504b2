#pragma once

// Reverse-mode automatic differentiation over Tensor values.
//
// A Tape owns every value computed during one forward pass. Nodes are
// appended in execution order, which is a topological order, so backward()
// is a single reverse sweep that visits each node at most once. A Tape is
// not thread-safe; independent tapes can be used concurrently.

#include <cstddef>
#include <deque>
#include <functional>
#include <vector>

#include "blobgan/tensor.hpp"

namespace blobgan {

class Tape;

// Handle to a node on a Tape. Cheap to copy; valid while the tape lives.
class Var {
public:
    Var() = default;

    bool valid() const noexcept { return tape_ != nullptr; }
    Tape& tape() const;
    std::size_t id() const noexcept { return id_; }

    const Tensor& value() const;
    const Shape& shape() const { return value().shape(); }
    std::int64_t dim(int axis) const { return value().dim(axis); }
    int rank() const { return value().rank(); }
    std::int64_t numel() const { return value().numel(); }
    bool requires_grad() const;

private:
    friend class Tape;
    Var(Tape* tape, std::size_t id) : tape_(tape), id_(id) {}

    Tape* tape_ = nullptr;
    std::size_t id_ = 0;
};

class Tape {
public:
    // Receives the node's own output value and its gradient, and accumulates
    // into the gradients of its inputs through Tape::grad_slot().
    using BackwardFn = std::function<void(Tape&, const Tensor& out_value, const Tensor& out_grad)>;

    Tape() = default;
    Tape(const Tape&) = delete;
    Tape& operator=(const Tape&) = delete;

    Var leaf(Tensor value, bool requires_grad = true);
    Var constant(Tensor value) { return leaf(std::move(value), false); }

    // Appends an operation result. The backward rule is kept only if some
    // input participates in differentiation.
    Var record(Tensor value, const std::vector<Var>& inputs, BackwardFn backward);

    // Seeds d(loss)/d(loss) = 1 and propagates to every reachable node.
    // Throws DomainError if loss is not a single element or not on this tape.
    void backward(const Var& loss);

    const Tensor& value(const Var& v) const { return node(v).value; }
    bool requires_grad(const Var& v) const { return node(v).requires_grad; }

    // Gradient after backward(); zeros of matching shape when none reached it.
    Tensor grad(const Var& v) const;

    // Mutable gradient buffer, allocated as zeros on first use.
    Tensor& grad_slot(const Var& v);

    std::size_t size() const noexcept { return nodes_.size(); }

private:
    struct Node {
        Tensor value;
        Tensor grad;
        bool requires_grad = false;
        BackwardFn backward;
    };

    const Node& node(const Var& v) const;
    Node& node(const Var& v);

    std::deque<Node> nodes_;
};

}  // namespace blobgan
