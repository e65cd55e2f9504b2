#include "blobgan/autodiff.hpp"

#include "blobgan/errors.hpp"

namespace blobgan {

Tape& Var::tape() const {
    if (tape_ == nullptr) throw StateError("use of an unbound Var");
    return *tape_;
}

const Tensor& Var::value() const { return tape().value(*this); }

bool Var::requires_grad() const { return tape().requires_grad(*this); }

Var Tape::leaf(Tensor value, bool requires_grad) {
    nodes_.push_back(Node{std::move(value), Tensor{}, requires_grad, {}});
    return Var(this, nodes_.size() - 1);
}

Var Tape::record(Tensor value, const std::vector<Var>& inputs, BackwardFn backward) {
    bool needs = false;
    for (const auto& in : inputs) {
        if (in.tape_ != this) throw DomainError("operation mixes values from different tapes");
        needs = needs || node(in).requires_grad;
    }
    nodes_.push_back(Node{std::move(value), Tensor{}, needs, needs ? std::move(backward) : BackwardFn{}});
    return Var(this, nodes_.size() - 1);
}

void Tape::backward(const Var& loss) {
    if (loss.tape_ != this) throw DomainError("loss is not on this tape");
    Node& root = node(loss);
    if (root.value.numel() != 1) {
        throw DomainError("backward() needs a scalar loss, got shape " + shape_string(root.value.shape()));
    }
    if (!root.requires_grad) return;
    grad_slot(loss).fill(1.0f);
    for (std::size_t id = loss.id_ + 1; id-- > 0;) {
        Node& n = nodes_[id];
        if (n.backward && !n.grad.empty()) n.backward(*this, n.value, n.grad);
    }
}

Tensor Tape::grad(const Var& v) const {
    const Node& n = node(v);
    if (n.grad.empty() && n.value.numel() > 0) return Tensor(n.value.shape());
    return n.grad;
}

Tensor& Tape::grad_slot(const Var& v) {
    Node& n = node(v);
    if (n.grad.empty() || n.grad.shape() != n.value.shape()) n.grad = Tensor(n.value.shape());
    return n.grad;
}

const Tape::Node& Tape::node(const Var& v) const {
    if (v.tape_ != this || v.id_ >= nodes_.size()) throw DomainError("Var does not belong to this tape");
    return nodes_[v.id_];
}

Tape::Node& Tape::node(const Var& v) {
    if (v.tape_ != this || v.id_ >= nodes_.size()) throw DomainError("Var does not belong to this tape");
    return nodes_[v.id_];
}

}  // namespace blobgan
