#pragma once

#include <cstdint>
#include <functional>
#include <vector>

#include "gazesim/core/tensor.hpp"

namespace gazesim {

class Tape;
using Id = std::int32_t;
using BackwardFn = std::function<void(Tape&)>;

// Reverse-mode tape. Nodes are appended in forward order; backward() replays
// registered closures in reverse creation order. Gradients are allocated
// lazily so subgraphs that cannot reach a trainable leaf cost nothing.
class Tape {
public:
    Id leaf(Tensor v, bool requires_grad = true);
    Id constant(Tensor v) { return leaf(std::move(v), false); }
    Id make(Tensor v, std::initializer_list<Id> parents, BackwardFn fn);
    Id make(Tensor v, const std::vector<Id>& parents, BackwardFn fn);

    const Tensor& val(Id id) const { return nodes_[check(id)].value; }
    bool requires_grad(Id id) const { return nodes_[check(id)].requires_grad; }

    // Gradient buffer, zero-allocated on first touch.
    Tensor& grad(Id id);
    bool has_grad(Id id) const { return nodes_[check(id)].grad_live; }

    // Seeds d(root)/d(root) = 1 (root must be 1x1) and replays the tape.
    void backward(Id root);

    size_t size() const { return nodes_.size(); }
    void clear();

private:
    struct Node {
        Tensor value;
        Tensor grad;
        bool grad_live = false;
        bool requires_grad = false;
        BackwardFn backward;
    };

    size_t check(Id id) const {
        if (id < 0 || static_cast<size_t>(id) >= nodes_.size())
            throw DimError("tape id out of range");
        return static_cast<size_t>(id);
    }

    std::vector<Node> nodes_;
};

}  // namespace gazesim
