#pragma once

#include <functional>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "pjfnn/tensor.hpp"

namespace pjfnn {

class Tape;

/// Handle to a value recorded on a Tape. Cheap to copy; valid while its tape lives.
class Var {
public:
    Var() = default;

    const Tensor& value() const;
    const Shape& shape() const { return value().shape(); }
    bool requires_grad() const;
    std::size_t id() const { return id_; }
    Tape& tape() const { return *tape_; }
    bool valid() const { return tape_ != nullptr; }

private:
    friend class Tape;
    Var(Tape* tape, std::size_t id) : tape_(tape), id_(id) {}

    Tape* tape_ = nullptr;
    std::size_t id_ = 0;
};

using Gradients = std::map<std::string, Tensor>;

/// Reverse-mode recording of a computation. Nodes are appended in evaluation
/// order, so the recording is already topologically sorted.
///
/// A tape is confined to one thread. It is neither copyable nor movable
/// because every Var points back at it.
class Tape {
public:
    /// Accumulates d(loss)/d(parent) into each non-null entry of parent_grads,
    /// given d(loss)/d(output). Entries are null for parents that need no gradient.
    using BackwardFn = std::function<void(const Tensor& grad_out, std::span<Tensor* const> parent_grads)>;

    Tape() = default;
    Tape(const Tape&) = delete;
    Tape& operator=(const Tape&) = delete;

    Var constant(Tensor value);
    Var parameter(std::string name, Tensor value);

    /// Records an operation result. The backward function is dropped when no
    /// parent requires a gradient.
    Var record(Tensor value, std::vector<Var> parents, BackwardFn backward);

    /// Gradient of a scalar loss with respect to every parameter on the tape.
    /// Parameters that do not influence the loss receive exact zeros.
    Gradients backward(const Var& loss);

    std::size_t size() const { return nodes_.size(); }
    /// Number of nodes whose backward function ran during the last backward().
    std::size_t last_visit_count() const { return last_visits_; }

private:
    friend class Var;

    struct Node {
        Tensor value;
        std::vector<std::size_t> parents;
        BackwardFn backward;
        bool requires_grad = false;
        std::string parameter_name;
    };

    std::vector<Node> nodes_;
    std::size_t last_visits_ = 0;
};

// Differentiable arithmetic. Operands must live on the same tape.

/// [m x k] x [k x n] -> [m x n].
Var matmul(const Var& a, const Var& b);
Var add(const Var& a, const Var& b);
Var sub(const Var& a, const Var& b);
Var mul(const Var& a, const Var& b);
Var scale(const Var& a, float factor);
Var square(const Var& a);
/// Sum of all elements, returned as a scalar.
Var sum(const Var& a);
Var mean(const Var& a);
/// Largest element as a scalar; ties resolve to the lowest flat index.
Var max(const Var& a);

Tensor matmul(const Tensor& a, const Tensor& b);

}  // namespace pjfnn
