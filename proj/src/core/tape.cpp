#include "gazesim/core/tape.hpp"

namespace gazesim {

Id Tape::leaf(Tensor v, bool requires_grad) {
    Node n;
    n.value = std::move(v);
    n.requires_grad = requires_grad;
    nodes_.push_back(std::move(n));
    return static_cast<Id>(nodes_.size() - 1);
}

Id Tape::make(Tensor v, std::initializer_list<Id> parents, BackwardFn fn) {
    bool rg = false;
    for (Id p : parents) rg = rg || nodes_[check(p)].requires_grad;
    Node n;
    n.value = std::move(v);
    n.requires_grad = rg;
    if (rg) n.backward = std::move(fn);
    nodes_.push_back(std::move(n));
    return static_cast<Id>(nodes_.size() - 1);
}

Id Tape::make(Tensor v, const std::vector<Id>& parents, BackwardFn fn) {
    bool rg = false;
    for (Id p : parents) rg = rg || nodes_[check(p)].requires_grad;
    Node n;
    n.value = std::move(v);
    n.requires_grad = rg;
    if (rg) n.backward = std::move(fn);
    nodes_.push_back(std::move(n));
    return static_cast<Id>(nodes_.size() - 1);
}

Tensor& Tape::grad(Id id) {
    Node& n = nodes_[check(id)];
    if (!n.grad_live) {
        n.grad = Tensor(n.value.rows, n.value.cols);
        n.grad_live = true;
    }
    return n.grad;
}

void Tape::backward(Id root) {
    const size_t r = check(root);
    if (nodes_[r].value.size() != 1)
        throw DimError("backward root must be a scalar");
    for (Node& n : nodes_) n.grad_live = false;
    grad(root).data[0] = 1.0;
    for (size_t i = r + 1; i-- > 0;) {
        Node& n = nodes_[i];
        if (n.grad_live && n.backward) n.backward(*this);
    }
}

void Tape::clear() { nodes_.clear(); }

}  // namespace gazesim
