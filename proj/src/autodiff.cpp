#include "kia/autodiff.hpp"

#include <algorithm>
#include <cmath>

#include "kia/errors.hpp"

namespace kia {

namespace {

Tape& common_tape(Var a, Var b) {
    if (a.tape == nullptr || a.tape != b.tape) throw ContractError("operands recorded on different tapes");
    return *a.tape;
}

void accumulate(std::optional<Tensor>& slot, const Tensor& g) {
    if (!slot) {
        slot = g;
        return;
    }
    auto& dst = slot->storage();
    const auto& src = g.storage();
    for (std::size_t i = 0; i < dst.size(); ++i) dst[i] += src[i];
}

std::optional<Tensor>& zeros_if_empty(std::optional<Tensor>& slot, const Shape& shape) {
    if (!slot) slot = Tensor(shape, 0.0);
    return slot;
}

}  // namespace

const Tensor& Var::value() const { return tape->value(id); }
bool Var::requires_grad() const { return tape->requires_grad(id); }

const Tensor* Gradients::find(Var v) const {
    if (v.id >= grads_.size() || !grads_[v.id]) return nullptr;
    return &*grads_[v.id];
}

Tensor Gradients::get(Var v) const {
    if (const Tensor* g = find(v)) return *g;
    return Tensor(v.value().shape(), 0.0);
}

Var Tape::leaf(Tensor value, bool requires_grad) {
    Node n;
    n.value = std::move(value);
    n.requires_grad = requires_grad;
    nodes_.push_back(std::move(n));
    return Var{this, nodes_.size() - 1};
}

Var Tape::borrow(const Tensor& value, bool requires_grad) {
    Node n;
    n.borrowed = &value;
    n.requires_grad = requires_grad;
    nodes_.push_back(std::move(n));
    return Var{this, nodes_.size() - 1};
}

Var Tape::record(Op op, std::vector<std::size_t> inputs, Tensor value, double scalar, std::size_t offset) {
#ifndef NDEBUG
    if (!value.all_finite()) throw NumericError("non-finite value produced on tape");
#endif
    Node n;
    n.op = op;
    n.requires_grad = std::any_of(inputs.begin(), inputs.end(),
                                  [this](std::size_t i) { return nodes_[i].requires_grad; });
    n.inputs = std::move(inputs);
    n.value = std::move(value);
    n.scalar = scalar;
    n.offset = offset;
    nodes_.push_back(std::move(n));
    return Var{this, nodes_.size() - 1};
}

Var matmul(Var a, Var b) {
    Tape& t = common_tape(a, b);
    return t.record(Tape::Op::MatMul, {a.id, b.id}, kernels::matmul(a.value(), b.value()));
}

Var add(Var a, Var b) {
    Tape& t = common_tape(a, b);
    return t.record(Tape::Op::Add, {a.id, b.id}, kernels::add(a.value(), b.value()));
}

Var sub(Var a, Var b) {
    Tape& t = common_tape(a, b);
    return t.record(Tape::Op::Sub, {a.id, b.id}, kernels::sub(a.value(), b.value()));
}

Var scale(Var a, double c) {
    return a.tape->record(Tape::Op::Scale, {a.id}, kernels::scale(a.value(), c), c);
}

Var tanh(Var a) { return a.tape->record(Tape::Op::Tanh, {a.id}, kernels::tanh(a.value())); }

Var add_row(Var a, Var row) {
    Tape& t = common_tape(a, row);
    return t.record(Tape::Op::AddRow, {a.id, row.id}, kernels::add_row(a.value(), row.value()));
}

Var slice_cols(Var a, std::size_t begin, std::size_t end) {
    return a.tape->record(Tape::Op::SliceCols, {a.id}, kernels::slice_cols(a.value(), begin, end), 0.0,
                          begin);
}

Var concat_cols(Var a, Var b) {
    Tape& t = common_tape(a, b);
    return t.record(Tape::Op::ConcatCols, {a.id, b.id}, kernels::concat_cols(a.value(), b.value()));
}

Var concat_rows(std::span<const Var> parts) {
    if (parts.empty()) throw ContractError("concat_rows: no inputs");
    Tape& t = *parts.front().tape;
    std::vector<Tensor> values;
    std::vector<std::size_t> ids;
    values.reserve(parts.size());
    for (const auto& p : parts) {
        common_tape(parts.front(), p);
        values.push_back(p.value());
        ids.push_back(p.id);
    }
    return t.record(Tape::Op::ConcatRows, std::move(ids), kernels::concat_rows(values));
}

Var mse(Var pred, Var target) {
    Tape& t = common_tape(pred, target);
    const Tensor& p = pred.value();
    const Tensor& y = target.value();
    if (p.shape() != y.shape()) {
        throw DimensionError("mse: shape mismatch " + shape_string(p.shape()) + " vs " +
                             shape_string(y.shape()));
    }
    double s = 0.0;
    for (std::size_t i = 0; i < p.size(); ++i) {
        const double d = p[i] - y[i];
        s += d * d;
    }
    return t.record(Tape::Op::Mse, {pred.id, target.id}, Tensor::scalar(s / static_cast<double>(p.size())));
}

Var sum(Var a) {
    double s = 0.0;
    for (double v : a.value().storage()) s += v;
    return a.tape->record(Tape::Op::Sum, {a.id}, Tensor::scalar(s));
}

Gradients Tape::backward(Var loss) const {
    if (loss.tape != this) throw ContractError("backward: loss is not recorded on this tape");
    if (value(loss.id).size() != 1) {
        throw ContractError("backward: loss must be a scalar, got shape " +
                            shape_string(value(loss.id).shape()));
    }
    std::vector<std::optional<Tensor>> grads(nodes_.size());
    if (!nodes_[loss.id].requires_grad) return Gradients(std::move(grads));
    grads[loss.id] = Tensor(value(loss.id).shape(), 1.0);

    for (std::size_t idx = loss.id + 1; idx-- > 0;) {
        const Node& n = nodes_[idx];
        if (!grads[idx] || !n.requires_grad || n.op == Op::Leaf) continue;
        const Tensor& g = *grads[idx];
        auto wants = [&](std::size_t k) { return nodes_[n.inputs[k]].requires_grad; };
        auto slot = [&](std::size_t k) -> std::optional<Tensor>& { return grads[n.inputs[k]]; };
        auto in = [&](std::size_t k) -> const Tensor& { return value(n.inputs[k]); };

        switch (n.op) {
        case Op::Leaf:
            break;
        case Op::MatMul:
            if (wants(0)) kernels::matmul_nt_acc(g, in(1), *zeros_if_empty(slot(0), in(0).shape()));
            if (wants(1)) kernels::matmul_tn_acc(in(0), g, *zeros_if_empty(slot(1), in(1).shape()));
            break;
        case Op::Add:
            if (wants(0)) accumulate(slot(0), g);
            if (wants(1)) accumulate(slot(1), g);
            break;
        case Op::Sub:
            if (wants(0)) accumulate(slot(0), g);
            if (wants(1)) accumulate(slot(1), kernels::scale(g, -1.0));
            break;
        case Op::Scale:
            accumulate(slot(0), kernels::scale(g, n.scalar));
            break;
        case Op::Tanh: {
            Tensor d = g;
            const auto& y = n.value.storage();
            auto& dv = d.storage();
            for (std::size_t i = 0; i < dv.size(); ++i) dv[i] *= 1.0 - y[i] * y[i];
            accumulate(slot(0), d);
            break;
        }
        case Op::AddRow:
            if (wants(0)) accumulate(slot(0), g);
            if (wants(1)) {
                Tensor& dst = *zeros_if_empty(slot(1), in(1).shape());
                const std::size_t c = g.cols();
                for (std::size_t r = 0; r < g.rows(); ++r)
                    for (std::size_t j = 0; j < c; ++j) dst[j] += g(r, j);
            }
            break;
        case Op::SliceCols: {
            Tensor& dst = *zeros_if_empty(slot(0), in(0).shape());
            const std::size_t w = g.cols();
            for (std::size_t r = 0; r < g.rows(); ++r)
                for (std::size_t j = 0; j < w; ++j) dst(r, n.offset + j) += g(r, j);
            break;
        }
        case Op::ConcatCols: {
            const std::size_t wa = in(0).cols();
            if (wants(0)) accumulate(slot(0), kernels::slice_cols(g, 0, wa));
            if (wants(1)) accumulate(slot(1), kernels::slice_cols(g, wa, g.cols()));
            break;
        }
        case Op::ConcatRows: {
            std::size_t row = 0;
            for (std::size_t k = 0; k < n.inputs.size(); ++k) {
                const Tensor& part = in(k);
                if (wants(k)) {
                    Tensor& dst = *zeros_if_empty(slot(k), part.shape());
                    const std::size_t len = part.size();
                    const double* src = g.storage().data() + row * g.cols();
                    for (std::size_t i = 0; i < len; ++i) dst[i] += src[i];
                }
                row += part.rows();
            }
            break;
        }
        case Op::Mse: {
            const Tensor& p = in(0);
            const Tensor& y = in(1);
            const double c = 2.0 * g.item() / static_cast<double>(p.size());
            Tensor d(p.shape(), 0.0);
            for (std::size_t i = 0; i < p.size(); ++i) d[i] = c * (p[i] - y[i]);
            if (wants(0)) accumulate(slot(0), d);
            if (wants(1)) accumulate(slot(1), kernels::scale(d, -1.0));
            break;
        }
        case Op::Sum:
            accumulate(slot(0), Tensor(in(0).shape(), g.item()));
            break;
        }
    }
    return Gradients(std::move(grads));
}

}  // namespace kia
