#include "pjfnn/autograd.hpp"

#include <Eigen/Core>
#include <cmath>
#include <optional>

#include "pjfnn/error.hpp"

namespace pjfnn {

namespace {

using RowMatrix = Eigen::Matrix<float, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MatrixMap = Eigen::Map<RowMatrix>;
using ConstMatrixMap = Eigen::Map<const RowMatrix>;

ConstMatrixMap as_matrix(const Tensor& t) {
    return ConstMatrixMap(t.data().data(), static_cast<Eigen::Index>(t.dim(0)), static_cast<Eigen::Index>(t.dim(1)));
}

MatrixMap as_matrix(Tensor& t) {
    return MatrixMap(t.data().data(), static_cast<Eigen::Index>(t.dim(0)), static_cast<Eigen::Index>(t.dim(1)));
}

void check_same_tape(const Var& a, const Var& b) {
    if (!a.valid() || !b.valid() || &a.tape() != &b.tape()) {
        throw ContractError("operands recorded on different tapes");
    }
}

void check_same_shape(const char* op, const Var& a, const Var& b) {
    check_same_tape(a, b);
    if (a.shape() != b.shape()) {
        throw DimensionError(std::string(op) + ": shape mismatch " + shape_string(a.shape()) + " vs " +
                             shape_string(b.shape()));
    }
}

}  // namespace

const Tensor& Var::value() const {
    if (!tape_) throw ContractError("use of an empty Var");
    return tape_->nodes_[id_].value;
}

bool Var::requires_grad() const { return tape_ && tape_->nodes_[id_].requires_grad; }

Var Tape::constant(Tensor value) {
    nodes_.push_back(Node{std::move(value), {}, {}, false, {}});
    return Var(this, nodes_.size() - 1);
}

Var Tape::parameter(std::string name, Tensor value) {
    nodes_.push_back(Node{std::move(value), {}, {}, true, std::move(name)});
    return Var(this, nodes_.size() - 1);
}

Var Tape::record(Tensor value, std::vector<Var> parents, BackwardFn backward) {
    Node node;
    node.value = std::move(value);
    for (const Var& p : parents) {
        if (&p.tape() != this) throw ContractError("parent recorded on a different tape");
        node.parents.push_back(p.id());
        node.requires_grad = node.requires_grad || p.requires_grad();
    }
    if (node.requires_grad) node.backward = std::move(backward);
    nodes_.push_back(std::move(node));
    return Var(this, nodes_.size() - 1);
}

Gradients Tape::backward(const Var& loss) {
    if (!loss.valid() || &loss.tape() != this) throw ContractError("loss was not recorded on this tape");
    if (loss.value().size() != 1) {
        throw ContractError("backward() needs a scalar loss, got shape " + shape_string(loss.shape()));
    }

    std::vector<std::optional<Tensor>> grads(nodes_.size());
    grads[loss.id()] = Tensor(loss.shape(), 1.0f);
    last_visits_ = 0;

    std::vector<Tensor*> parent_grads;
    for (std::size_t id = loss.id() + 1; id-- > 0;) {
        Node& node = nodes_[id];
        if (!grads[id] || !node.backward) continue;
        parent_grads.assign(node.parents.size(), nullptr);
        for (std::size_t i = 0; i < node.parents.size(); ++i) {
            const std::size_t p = node.parents[i];
            if (!nodes_[p].requires_grad) continue;
            if (!grads[p]) grads[p] = Tensor(nodes_[p].value.shape(), 0.0f);
            parent_grads[i] = &*grads[p];
        }
        node.backward(*grads[id], parent_grads);
        ++last_visits_;
        // Intermediate gradients are no longer needed once propagated.
        if (node.parameter_name.empty()) grads[id].reset();
    }

    Gradients out;
    for (std::size_t id = 0; id < nodes_.size(); ++id) {
        const Node& node = nodes_[id];
        if (node.parameter_name.empty()) continue;
        Tensor g = grads[id] ? std::move(*grads[id]) : Tensor(node.value.shape(), 0.0f);
        if (auto it = out.find(node.parameter_name); it != out.end()) {
            it->second += g;
        } else {
            out.emplace(node.parameter_name, std::move(g));
        }
    }
    return out;
}

Tensor matmul(const Tensor& a, const Tensor& b) {
    if (a.rank() != 2 || b.rank() != 2 || a.dim(1) != b.dim(0)) {
        throw DimensionError("matmul: incompatible shapes " + shape_string(a.shape()) + " and " +
                             shape_string(b.shape()));
    }
    Tensor out(Shape{a.dim(0), b.dim(1)});
    as_matrix(out).noalias() = as_matrix(a) * as_matrix(b);
    return out;
}

Var matmul(const Var& a, const Var& b) {
    check_same_tape(a, b);
    Tensor value = matmul(a.value(), b.value());
    return a.tape().record(std::move(value), {a, b}, [a, b](const Tensor& g, std::span<Tensor* const> pg) {
        if (pg[0]) as_matrix(*pg[0]).noalias() += as_matrix(g) * as_matrix(b.value()).transpose();
        if (pg[1]) as_matrix(*pg[1]).noalias() += as_matrix(a.value()).transpose() * as_matrix(g);
    });
}

Var add(const Var& a, const Var& b) {
    check_same_shape("add", a, b);
    Tensor value = a.value();
    value += b.value();
    return a.tape().record(std::move(value), {a, b}, [](const Tensor& g, std::span<Tensor* const> pg) {
        if (pg[0]) *pg[0] += g;
        if (pg[1]) *pg[1] += g;
    });
}

Var sub(const Var& a, const Var& b) {
    check_same_shape("sub", a, b);
    Tensor value = a.value();
    for (std::size_t i = 0; i < value.size(); ++i) value[i] -= b.value()[i];
    return a.tape().record(std::move(value), {a, b}, [](const Tensor& g, std::span<Tensor* const> pg) {
        if (pg[0]) *pg[0] += g;
        if (pg[1]) {
            for (std::size_t i = 0; i < g.size(); ++i) (*pg[1])[i] -= g[i];
        }
    });
}

Var mul(const Var& a, const Var& b) {
    check_same_shape("mul", a, b);
    Tensor value = a.value();
    for (std::size_t i = 0; i < value.size(); ++i) value[i] *= b.value()[i];
    return a.tape().record(std::move(value), {a, b}, [a, b](const Tensor& g, std::span<Tensor* const> pg) {
        const Tensor& av = a.value();
        const Tensor& bv = b.value();
        for (std::size_t i = 0; i < g.size(); ++i) {
            if (pg[0]) (*pg[0])[i] += g[i] * bv[i];
            if (pg[1]) (*pg[1])[i] += g[i] * av[i];
        }
    });
}

Var scale(const Var& a, float factor) {
    Tensor value = a.value();
    for (float& v : value.data()) v *= factor;
    return a.tape().record(std::move(value), {a}, [factor](const Tensor& g, std::span<Tensor* const> pg) {
        for (std::size_t i = 0; i < g.size(); ++i) (*pg[0])[i] += factor * g[i];
    });
}

Var square(const Var& a) {
    Tensor value = a.value();
    for (float& v : value.data()) v *= v;
    return a.tape().record(std::move(value), {a}, [a](const Tensor& g, std::span<Tensor* const> pg) {
        const Tensor& av = a.value();
        for (std::size_t i = 0; i < g.size(); ++i) (*pg[0])[i] += 2.0f * av[i] * g[i];
    });
}

Var sum(const Var& a) {
    double total = 0.0;
    for (float v : a.value().data()) total += v;
    return a.tape().record(Tensor::scalar(static_cast<float>(total)), {a},
                           [](const Tensor& g, std::span<Tensor* const> pg) {
                               const float gv = g.item();
                               for (float& v : pg[0]->data()) v += gv;
                           });
}

Var mean(const Var& a) { return scale(sum(a), 1.0f / static_cast<float>(a.value().size())); }

Var max(const Var& a) {
    const auto data = a.value().data();
    std::size_t best = 0;
    for (std::size_t i = 1; i < data.size(); ++i) {
        if (data[i] > data[best]) best = i;
    }
    return a.tape().record(Tensor::scalar(data[best]), {a}, [best](const Tensor& g, std::span<Tensor* const> pg) {
        (*pg[0])[best] += g.item();
    });
}

}  // namespace pjfnn
