#pragma once

#include "mocos/tensor.hpp"

#include <cstddef>
#include <deque>
#include <functional>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

namespace mocos::ad {

/// A named learnable tensor. Gradients are keyed by the Parameter's address,
/// so a Parameter must outlive any tape that references it.
struct Parameter {
    Parameter() = default;
    Parameter(std::string n, Tensor v) : name(std::move(n)), value(std::move(v)) {
        value.set_requires_grad(true);
    }

    std::string name;
    Tensor value;
};

class Tape;

/// Handle to a node on a Tape. Cheap to copy; valid while the tape lives.
class Var {
public:
    Var() = default;

    const Tensor& value() const;
    Tape& tape() const { return *tape_; }
    std::size_t id() const noexcept { return id_; }
    bool valid() const noexcept { return tape_ != nullptr; }

private:
    friend class Tape;
    Var(Tape* tape, std::size_t id) : tape_(tape), id_(id) {}

    Tape* tape_ = nullptr;
    std::size_t id_ = 0;
};

/// Parameter-keyed gradients produced by Tape::backward.
class GradTable {
public:
    const Tensor* find(const Parameter& p) const;
    const Tensor& at(const Parameter& p) const;
    std::size_t size() const noexcept { return grads_.size(); }
    bool contains(const Parameter& p) const { return find(p) != nullptr; }

private:
    friend class Tape;
    std::unordered_map<const Parameter*, Tensor> grads_;
};

/// Append-only record of a forward computation.
///
/// Nodes are stored in creation order, which is a topological order, so
/// backward is a single reverse sweep. Every recorded value is checked for
/// NaN/Inf and a NumericError is raised naming the op.
class Tape {
public:
    // Receives the output gradient; adds contributions into input slots.
    using BackwardFn = std::function<void(const Tensor& grad_out, Tape& tape)>;

    Tape() = default;
    /// With track_gradients false, parameter leaves need no gradient, so no
    /// backward closures are kept. Used for forward-only evaluation.
    explicit Tape(bool track_gradients) : track_gradients_(track_gradients) {}
    Tape(const Tape&) = delete;
    Tape& operator=(const Tape&) = delete;

    Var constant(Tensor value);
    /// Leaf bound to a parameter. Binding the same parameter twice returns the
    /// same node, so fan-out accumulates into one gradient.
    Var parameter(const Parameter& p);
    /// transpose(parameter(p)), recorded once per tape.
    Var parameter_transposed(const Parameter& p);

    /// Records a new node. `inputs` are the node ids this op reads. The
    /// backward closure is stored only if some input needs a gradient.
    template <class F>
    Var record(const char* op, Tensor value, std::span<const std::size_t> inputs, F&& backward) {
        const bool needs = any_needs_grad(op, value, inputs);
        return push(op, std::move(value), inputs, needs ? BackwardFn(std::forward<F>(backward)) : BackwardFn{},
                    needs);
    }

    const Tensor& value(std::size_t id) const { return nodes_[id].value; }
    bool needs_grad(std::size_t id) const { return nodes_[id].needs_grad; }
    const char* op_name(std::size_t id) const { return nodes_[id].op; }
    std::span<const std::size_t> inputs(std::size_t id) const {
        return {input_ids_.data() + nodes_[id].first_input, nodes_[id].input_count};
    }

    /// Gradient accumulator for node `id`, zero-initialized on first use.
    Tensor& grad_slot(std::size_t id);

    GradTable backward(Var loss);

    std::size_t size() const noexcept { return nodes_.size(); }

private:
    struct Node {
        const char* op;
        Tensor value;
        std::size_t first_input = 0;
        std::size_t input_count = 0;
        BackwardFn backward;
        const Parameter* param = nullptr;
        bool needs_grad = false;
    };

    bool any_needs_grad(const char* op, const Tensor& value, std::span<const std::size_t> inputs) const;
    Var push(const char* op, Tensor value, std::span<const std::size_t> inputs, BackwardFn backward, bool needs);

    std::deque<Node> nodes_;   // stable references for Var::value()
    std::vector<std::size_t> input_ids_;
    bool track_gradients_ = true;
    std::vector<Tensor> grads_;
    std::unordered_map<const Parameter*, std::size_t> param_nodes_;
    std::unordered_map<const Parameter*, std::size_t> transposed_nodes_;
};

// Op catalog. All ops read and produce matrices (see Tensor).

Var matmul(Var a, Var b);
/// Elementwise; `b` may also be a 1xN row broadcast over the rows of `a`.
Var add(Var a, Var b);
Var sub(Var a, Var b);
Var mul(Var a, Var b);
Var scale(Var a, double factor);
Var concat(std::span<const Var> parts, std::size_t axis);
/// Softmax along each row after subtracting the row max.
Var row_softmax(Var a);
/// Softmax restricted to entries where `support` is nonzero; others are 0.
/// A row with empty support raises ValidationError.
Var masked_row_softmax(Var a, const Tensor& support);
Var row_log_softmax(Var a);
/// Per-row standardization (x - mean) / sqrt(var + eps), no affine part.
Var layer_normalize(Var a, double eps);
Var relu(Var a);
/// axis 0 reduces over rows (result 1xC); axis 1 over columns (result Rx1).
Var mean(Var a, std::size_t axis);
Var sum(Var a, std::size_t axis);
Var sum_all(Var a);
/// x / max(||x||, eps) per row.
Var l2_normalize_rows(Var a, double eps);
Var log(Var a);
Var exp(Var a);
Var transpose(Var a);
Var gather_rows(Var a, std::span<const std::size_t> rows);

/// x W^T + b for a map W stored as out x in and a 1 x out bias row.
Var affine(Var x, const Parameter& weight, const Parameter& bias);

} // namespace mocos::ad
