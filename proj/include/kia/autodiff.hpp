#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <vector>

#include "kia/tensor.hpp"

namespace kia {

class Tape;

// Handle to a value recorded on a Tape. Cheap to copy; valid while the
// tape lives.
struct Var {
    Tape* tape = nullptr;
    std::size_t id = 0;

    const Tensor& value() const;
    bool requires_grad() const;
};

class Gradients {
public:
    explicit Gradients(std::vector<std::optional<Tensor>> grads) : grads_(std::move(grads)) {}

    // nullptr when the node is not on a path to the loss.
    const Tensor* find(Var v) const;
    // Gradient, or zeros of the value's shape when absent.
    Tensor get(Var v) const;

private:
    std::vector<std::optional<Tensor>> grads_;
};

// Append-only record of operations (define-by-run). Rebuilt for every
// training step; nodes are stored in creation order, which is a valid
// topological order.
class Tape {
public:
    enum class Op {
        Leaf, MatMul, Add, Sub, Scale, Tanh, AddRow, SliceCols, ConcatCols, ConcatRows, Mse, Sum
    };

    Tape() = default;
    Tape(const Tape&) = delete;
    Tape& operator=(const Tape&) = delete;

    Var leaf(Tensor value, bool requires_grad);
    Var constant(Tensor value) { return leaf(std::move(value), false); }
    // Leaf that refers to `value` without copying; `value` must outlive the
    // tape and stay unchanged while it is in use.
    Var borrow(const Tensor& value, bool requires_grad);

    const Tensor& value(std::size_t id) const {
        const Node& n = nodes_[id];
        return n.borrowed ? *n.borrowed : n.value;
    }
    bool requires_grad(std::size_t id) const { return nodes_[id].requires_grad; }
    std::size_t size() const noexcept { return nodes_.size(); }

    // Reverse accumulation from a scalar loss in reverse creation order.
    Gradients backward(Var loss) const;

private:
    struct Node {
        Op op = Op::Leaf;
        std::vector<std::size_t> inputs;
        double scalar = 0.0;
        std::size_t offset = 0;
        Tensor value;
        const Tensor* borrowed = nullptr;
        bool requires_grad = false;
    };

    Var record(Op op, std::vector<std::size_t> inputs, Tensor value, double scalar = 0.0,
               std::size_t offset = 0);

    std::vector<Node> nodes_;

    friend Var matmul(Var, Var);
    friend Var add(Var, Var);
    friend Var sub(Var, Var);
    friend Var scale(Var, double);
    friend Var tanh(Var);
    friend Var add_row(Var, Var);
    friend Var slice_cols(Var, std::size_t, std::size_t);
    friend Var concat_cols(Var, Var);
    friend Var concat_rows(std::span<const Var>);
    friend Var mse(Var, Var);
    friend Var sum(Var);
};

Var matmul(Var a, Var b);
Var add(Var a, Var b);
Var sub(Var a, Var b);
Var scale(Var a, double c);
Var tanh(Var a);
// Adds a 1 x n row (bias) to every row of an r x n matrix.
Var add_row(Var a, Var row);
Var slice_cols(Var a, std::size_t begin, std::size_t end);
Var concat_cols(Var a, Var b);
Var concat_rows(std::span<const Var> parts);
// Mean of squared differences over all elements.
Var mse(Var pred, Var target);
Var sum(Var a);

}  // namespace kia
