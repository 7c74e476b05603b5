#include "mocos/autodiff.hpp"

#include "mocos/errors.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>

namespace mocos::ad {

// ---------------------------------------------------------------------------
// Var / GradTable / Tape

const Tensor& Var::value() const { return tape_->value(id_); }

const Tensor* GradTable::find(const Parameter& p) const {
    auto it = grads_.find(&p);
    return it == grads_.end() ? nullptr : &it->second;
}

const Tensor& GradTable::at(const Parameter& p) const {
    const Tensor* g = find(p);
    if (!g) throw ValidationError("no gradient recorded for parameter '" + p.name + "'");
    return *g;
}

Var Tape::constant(Tensor value) {
    if (!value.all_finite()) throw NumericError("non-finite value in constant");
    nodes_.push_back(Node{"constant", std::move(value), 0, 0, {}, nullptr, false});
    return Var(this, nodes_.size() - 1);
}

Var Tape::parameter(const Parameter& p) {
    if (auto it = param_nodes_.find(&p); it != param_nodes_.end()) return Var(this, it->second);
    if (!p.value.all_finite())
        throw NumericError("non-finite value in parameter '" + p.name + "'");
    nodes_.push_back(Node{"parameter", p.value, 0, 0, {}, &p, track_gradients_});
    param_nodes_.emplace(&p, nodes_.size() - 1);
    return Var(this, nodes_.size() - 1);
}

Var Tape::parameter_transposed(const Parameter& p) {
    if (auto it = transposed_nodes_.find(&p); it != transposed_nodes_.end()) return Var(this, it->second);
    const Var t = transpose(parameter(p));
    transposed_nodes_.emplace(&p, t.id());
    return t;
}

bool Tape::any_needs_grad(const char* op, const Tensor& value, std::span<const std::size_t> inputs) const {
    if (!value.all_finite()) throw NumericError(std::string("non-finite result in op ") + op);
    return std::any_of(inputs.begin(), inputs.end(), [this](std::size_t in) { return nodes_[in].needs_grad; });
}

Var Tape::push(const char* op, Tensor value, std::span<const std::size_t> inputs, BackwardFn backward,
               bool needs) {
    const std::size_t first = input_ids_.size();
    input_ids_.insert(input_ids_.end(), inputs.begin(), inputs.end());
    nodes_.push_back(Node{op, std::move(value), first, inputs.size(), std::move(backward), nullptr, needs});
    return Var(this, nodes_.size() - 1);
}

Tensor& Tape::grad_slot(std::size_t id) {
    Tensor& g = grads_[id];
    if (g.empty() && !nodes_[id].value.empty()) g = Tensor(nodes_[id].value.shape(), 0.0);
    return g;
}

GradTable Tape::backward(Var loss) {
    if (loss.tape_ != this) throw ValidationError("backward: loss belongs to a different tape");
    const Tensor& lv = nodes_[loss.id_].value;
    if (lv.size() != 1)
        throw ValidationError("backward: loss must be scalar, got shape " + lv.shape_str());

    grads_.assign(nodes_.size(), Tensor{});
    grad_slot(loss.id_)[0] = 1.0;

    GradTable table;
    for (std::size_t id = loss.id_ + 1; id-- > 0;) {
        Node& node = nodes_[id];
        if (grads_[id].empty() || !node.needs_grad) continue;
        if (node.param) {
            auto [it, inserted] = table.grads_.emplace(node.param, grads_[id]);
            if (!inserted)
                for (std::size_t i = 0; i < it->second.size(); ++i) it->second[i] += grads_[id][i];
        } else if (node.backward) {
            node.backward(grads_[id], *this);
        }
    }
    return table;
}

// ---------------------------------------------------------------------------
// kernels

namespace {

[[noreturn]] void shape_error(const char* op, const Tensor& a, const Tensor& b) {
    throw ValidationError(std::string(op) + ": incompatible shapes " + a.shape_str() + " and " +
                          b.shape_str());
}

void require_same_tape(const char* op, Var a, Var b) {
    if (&a.tape() != &b.tape()) throw ValidationError(std::string(op) + ": operands on different tapes");
}

// C = A B
Tensor mm(const Tensor& a, const Tensor& b) {
    const std::size_t m = a.rows(), k = a.cols(), n = b.cols();
    Tensor c = Tensor::matrix(m, n);
    const double* ad = a.data().data();
    const double* bd = b.data().data();
    double* cd = c.data().data();
    if (n <= 4) {
        // Narrow outputs such as per-head projections: accumulate in a register.
        for (std::size_t i = 0; i < m; ++i)
            for (std::size_t j = 0; j < n; ++j) {
                double s = 0.0;
                for (std::size_t p = 0; p < k; ++p) s += ad[i * k + p] * bd[p * n + j];
                cd[i * n + j] = s;
            }
        return c;
    }
    for (std::size_t i = 0; i < m; ++i) {
        double* crow = cd + i * n;
        for (std::size_t p = 0; p < k; ++p) {
            const double av = ad[i * k + p];
            const double* brow = bd + p * n;
            for (std::size_t j = 0; j < n; ++j) crow[j] += av * brow[j];
        }
    }
    return c;
}

// acc += G B^T
void mm_nt_acc(const Tensor& g, const Tensor& b, Tensor& acc) {
    const std::size_t m = g.rows(), n = g.cols(), k = b.rows();
    const double* gd = g.data().data();
    const double* bd = b.data().data();
    double* out = acc.data().data();
    for (std::size_t i = 0; i < m; ++i)
        for (std::size_t p = 0; p < k; ++p) {
            const double* grow = gd + i * n;
            const double* brow = bd + p * n;
            double s = 0.0;
            for (std::size_t j = 0; j < n; ++j) s += grow[j] * brow[j];
            out[i * k + p] += s;
        }
}

// acc += A^T G
void mm_tn_acc(const Tensor& a, const Tensor& g, Tensor& acc) {
    const std::size_t m = a.rows(), k = a.cols(), n = g.cols();
    const double* ad = a.data().data();
    const double* gd = g.data().data();
    double* out = acc.data().data();
    for (std::size_t i = 0; i < m; ++i)
        for (std::size_t p = 0; p < k; ++p) {
            const double av = ad[i * k + p];
            const double* grow = gd + i * n;
            double* orow = out + p * n;
            for (std::size_t j = 0; j < n; ++j) orow[j] += av * grow[j];
        }
}

enum class Broadcast { None, Row };

Broadcast broadcast_kind(const char* op, const Tensor& a, const Tensor& b) {
    if (a.rows() == b.rows() && a.cols() == b.cols()) return Broadcast::None;
    if (b.rows() == 1 && a.cols() == b.cols()) return Broadcast::Row;
    shape_error(op, a, b);
}

// Reduce a gradient of a's shape onto b's shape.
void accumulate_broadcast(const Tensor& g, Broadcast kind, Tensor& acc, double sign) {
    if (kind == Broadcast::None) {
        for (std::size_t i = 0; i < g.size(); ++i) acc[i] += sign * g[i];
        return;
    }
    for (std::size_t r = 0; r < g.rows(); ++r)
        for (std::size_t c = 0; c < g.cols(); ++c) acc[c] += sign * g(r, c);
}

Tensor softmax_rows(const Tensor& x, const Tensor* support) {
    Tensor y(x.shape(), 0.0);
    const std::size_t n = x.cols();
    for (std::size_t r = 0; r < x.rows(); ++r) {
        double mx = -std::numeric_limits<double>::infinity();
        bool any = false;
        for (std::size_t c = 0; c < n; ++c) {
            if (support && (*support)(r, c) == 0.0) continue;
            mx = std::max(mx, x(r, c));
            any = true;
        }
        if (!any)
            throw ValidationError("masked_row_softmax: row " + std::to_string(r) +
                                  " has an empty support");
        double total = 0.0;
        for (std::size_t c = 0; c < n; ++c) {
            if (support && (*support)(r, c) == 0.0) continue;
            const double e = std::exp(x(r, c) - mx);
            y(r, c) = e;
            total += e;
        }
        for (std::size_t c = 0; c < n; ++c) y(r, c) /= total;
    }
    return y;
}

Var softmax_impl(const char* op, Var a, const Tensor* support) {
    Tape& t = a.tape();
    const std::size_t ia = a.id();
    Tensor y = softmax_rows(a.value(), support);
    const std::size_t out = t.size();
    return t.record(op, std::move(y), std::array{ia}, [ia, out](const Tensor& g, Tape& tape) {
        const Tensor& y = tape.value(out);
        Tensor& acc = tape.grad_slot(ia);
        for (std::size_t r = 0; r < y.rows(); ++r) {
            double dot = 0.0;
            for (std::size_t c = 0; c < y.cols(); ++c) dot += g(r, c) * y(r, c);
            for (std::size_t c = 0; c < y.cols(); ++c) acc(r, c) += y(r, c) * (g(r, c) - dot);
        }
    });
}

// rule(g, x, y, acc) adds the input gradient into acc.
template <class Rule>
Var unary(const char* op, Var a, Tensor value, Rule rule) {
    Tape& t = a.tape();
    const std::size_t ia = a.id();
    const std::size_t out = t.size();
    return t.record(op, std::move(value), std::array{ia},
                    [ia, out, rule = std::move(rule)](const Tensor& g, Tape& tape) {
                        rule(g, tape.value(ia), tape.value(out), tape.grad_slot(ia));
                    });
}

} // namespace

// ---------------------------------------------------------------------------
// op catalog

Var matmul(Var a, Var b) {
    require_same_tape("matmul", a, b);
    const Tensor& av = a.value();
    const Tensor& bv = b.value();
    if (av.cols() != bv.rows()) shape_error("matmul", av, bv);
    const std::size_t ia = a.id(), ib = b.id();
    return a.tape().record("matmul", mm(av, bv), std::array{ia, ib}, [ia, ib](const Tensor& g, Tape& tape) {
        if (tape.needs_grad(ia)) mm_nt_acc(g, tape.value(ib), tape.grad_slot(ia));
        if (tape.needs_grad(ib)) mm_tn_acc(tape.value(ia), g, tape.grad_slot(ib));
    });
}

namespace {

Var binary_elementwise(const char* op, Var a, Var b, int kind) {
    require_same_tape(op, a, b);
    const Tensor& av = a.value();
    const Tensor& bv = b.value();
    const Broadcast bc = broadcast_kind(op, av, bv);
    Tensor y(av.shape(), 0.0);
    const std::size_t n = av.cols();
    for (std::size_t i = 0; i < av.size(); ++i) {
        const double rhs = bc == Broadcast::None ? bv[i] : bv[i % n];
        switch (kind) {
        case 0: y[i] = av[i] + rhs; break;
        case 1: y[i] = av[i] - rhs; break;
        default: y[i] = av[i] * rhs; break;
        }
    }
    const std::size_t ia = a.id(), ib = b.id();
    return a.tape().record(op, std::move(y), std::array{ia, ib}, [ia, ib, bc, kind, n](const Tensor& g, Tape& tape) {
        if (kind != 2) {
            if (tape.needs_grad(ia)) accumulate_broadcast(g, Broadcast::None, tape.grad_slot(ia), 1.0);
            if (tape.needs_grad(ib))
                accumulate_broadcast(g, bc, tape.grad_slot(ib), kind == 0 ? 1.0 : -1.0);
            return;
        }
        const Tensor& av = tape.value(ia);
        const Tensor& bv = tape.value(ib);
        if (tape.needs_grad(ia)) {
            Tensor& acc = tape.grad_slot(ia);
            for (std::size_t i = 0; i < g.size(); ++i)
                acc[i] += g[i] * (bc == Broadcast::None ? bv[i] : bv[i % n]);
        }
        if (tape.needs_grad(ib)) {
            Tensor& acc = tape.grad_slot(ib);
            for (std::size_t i = 0; i < g.size(); ++i)
                acc[bc == Broadcast::None ? i : i % n] += g[i] * av[i];
        }
    });
}

} // namespace

Var add(Var a, Var b) { return binary_elementwise("add", a, b, 0); }
Var sub(Var a, Var b) { return binary_elementwise("sub", a, b, 1); }
Var mul(Var a, Var b) { return binary_elementwise("mul", a, b, 2); }

Var scale(Var a, double factor) {
    Tensor y = a.value();
    for (double& v : y.data()) v *= factor;
    y.set_requires_grad(false);
    return unary("scale", a, std::move(y),
                 [factor](const Tensor& g, const Tensor&, const Tensor&, Tensor& acc) {
                     for (std::size_t i = 0; i < g.size(); ++i) acc[i] += factor * g[i];
                 });
}

Var concat(std::span<const Var> parts, std::size_t axis) {
    if (parts.empty()) throw ValidationError("concat: no inputs");
    if (axis > 1) throw ValidationError("concat: axis must be 0 or 1");
    Tape& t = parts.front().tape();
    const Tensor& first = parts.front().value();
    std::size_t rows = 0, cols = 0;
    for (const Var& p : parts) {
        if (&p.tape() != &t) throw ValidationError("concat: operands on different tapes");
        const Tensor& v = p.value();
        if (axis == 0) {
            if (v.cols() != first.cols()) shape_error("concat", first, v);
            rows += v.rows();
            cols = v.cols();
        } else {
            if (v.rows() != first.rows()) shape_error("concat", first, v);
            cols += v.cols();
            rows = v.rows();
        }
    }
    Tensor y = Tensor::matrix(rows, cols);
    std::vector<std::size_t> ids;
    std::size_t offset = 0;
    for (const Var& p : parts) {
        const Tensor& v = p.value();
        for (std::size_t r = 0; r < v.rows(); ++r)
            for (std::size_t c = 0; c < v.cols(); ++c) {
                if (axis == 0) y(offset + r, c) = v(r, c);
                else y(r, offset + c) = v(r, c);
            }
        offset += axis == 0 ? v.rows() : v.cols();
        ids.push_back(p.id());
    }
    return t.record("concat", std::move(y), ids, [ids, axis](const Tensor& g, Tape& tape) {
        std::size_t offset = 0;
        for (std::size_t id : ids) {
            const Tensor& v = tape.value(id);
            if (tape.needs_grad(id)) {
                Tensor& acc = tape.grad_slot(id);
                for (std::size_t r = 0; r < v.rows(); ++r)
                    for (std::size_t c = 0; c < v.cols(); ++c)
                        acc(r, c) += axis == 0 ? g(offset + r, c) : g(r, offset + c);
            }
            offset += axis == 0 ? v.rows() : v.cols();
        }
    });
}

Var row_softmax(Var a) { return softmax_impl("row_softmax", a, nullptr); }

Var masked_row_softmax(Var a, const Tensor& support) {
    const Tensor& av = a.value();
    if (support.rows() != av.rows() || support.cols() != av.cols())
        shape_error("masked_row_softmax", av, support);
    return softmax_impl("masked_row_softmax", a, &support);
}

Var row_log_softmax(Var a) {
    const Tensor& x = a.value();
    Tensor y(x.shape(), 0.0);
    for (std::size_t r = 0; r < x.rows(); ++r) {
        double mx = -std::numeric_limits<double>::infinity();
        for (std::size_t c = 0; c < x.cols(); ++c) mx = std::max(mx, x(r, c));
        double total = 0.0;
        for (std::size_t c = 0; c < x.cols(); ++c) total += std::exp(x(r, c) - mx);
        const double lse = mx + std::log(total);
        for (std::size_t c = 0; c < x.cols(); ++c) y(r, c) = x(r, c) - lse;
    }
    return unary("row_log_softmax", a, std::move(y),
                 [](const Tensor& g, const Tensor&, const Tensor& y, Tensor& acc) {
                     for (std::size_t r = 0; r < y.rows(); ++r) {
                         double gs = 0.0;
                         for (std::size_t c = 0; c < y.cols(); ++c) gs += g(r, c);
                         for (std::size_t c = 0; c < y.cols(); ++c)
                             acc(r, c) += g(r, c) - std::exp(y(r, c)) * gs;
                     }
                 });
}

Var layer_normalize(Var a, double eps) {
    const Tensor& x = a.value();
    const std::size_t n = x.cols();
    Tensor y(x.shape(), 0.0);
    std::vector<double> inv_std(x.rows());
    for (std::size_t r = 0; r < x.rows(); ++r) {
        double mu = 0.0;
        for (std::size_t c = 0; c < n; ++c) mu += x(r, c);
        mu /= static_cast<double>(n);
        double var = 0.0;
        for (std::size_t c = 0; c < n; ++c) var += (x(r, c) - mu) * (x(r, c) - mu);
        var /= static_cast<double>(n);
        inv_std[r] = 1.0 / std::sqrt(var + eps);
        for (std::size_t c = 0; c < n; ++c) y(r, c) = (x(r, c) - mu) * inv_std[r];
    }
    return unary("layer_normalize", a, std::move(y),
                 [inv_std = std::move(inv_std), n](const Tensor& g, const Tensor&, const Tensor& y,
                                                   Tensor& acc) {
                     const double nd = static_cast<double>(n);
                     for (std::size_t r = 0; r < y.rows(); ++r) {
                         double gs = 0.0, gy = 0.0;
                         for (std::size_t c = 0; c < n; ++c) {
                             gs += g(r, c);
                             gy += g(r, c) * y(r, c);
                         }
                         for (std::size_t c = 0; c < n; ++c)
                             acc(r, c) += inv_std[r] / nd * (nd * g(r, c) - gs - y(r, c) * gy);
                     }
                 });
}

Var relu(Var a) {
    Tensor y = a.value();
    for (double& v : y.data()) v = v > 0.0 ? v : 0.0;
    y.set_requires_grad(false);
    return unary("relu", a, std::move(y), [](const Tensor& g, const Tensor& x, const Tensor&, Tensor& acc) {
        for (std::size_t i = 0; i < g.size(); ++i)
            if (x[i] > 0.0) acc[i] += g[i];
    });
}

namespace {

Var reduce(const char* op, Var a, std::size_t axis, bool average) {
    if (axis > 1) throw ValidationError(std::string(op) + ": axis must be 0 or 1");
    const Tensor& x = a.value();
    const std::size_t rows = x.rows(), cols = x.cols();
    const double factor = average ? 1.0 / static_cast<double>(axis == 0 ? rows : cols) : 1.0;
    Tensor y = axis == 0 ? Tensor::matrix(1, cols) : Tensor::matrix(rows, 1);
    for (std::size_t r = 0; r < rows; ++r)
        for (std::size_t c = 0; c < cols; ++c) y[axis == 0 ? c : r] += x(r, c);
    for (double& v : y.data()) v *= factor;
    return unary(op, a, std::move(y), [axis, factor](const Tensor& g, const Tensor& x, const Tensor&, Tensor& acc) {
        for (std::size_t r = 0; r < x.rows(); ++r)
            for (std::size_t c = 0; c < x.cols(); ++c) acc(r, c) += factor * g[axis == 0 ? c : r];
    });
}

} // namespace

Var mean(Var a, std::size_t axis) { return reduce("mean", a, axis, true); }
Var sum(Var a, std::size_t axis) { return reduce("sum", a, axis, false); }
Var sum_all(Var a) { return sum(sum(a, 0), 1); }

Var l2_normalize_rows(Var a, double eps) {
    const Tensor& x = a.value();
    Tensor y(x.shape(), 0.0);
    std::vector<double> norms(x.rows());
    for (std::size_t r = 0; r < x.rows(); ++r) {
        double ss = 0.0;
        for (double v : x.row_span(r)) ss += v * v;
        norms[r] = std::sqrt(ss);
        const double d = std::max(norms[r], eps);
        for (std::size_t c = 0; c < x.cols(); ++c) y(r, c) = x(r, c) / d;
    }
    return unary("l2_normalize_rows", a, std::move(y),
                 [norms = std::move(norms), eps](const Tensor& g, const Tensor&, const Tensor& y, Tensor& acc) {
                     for (std::size_t r = 0; r < y.rows(); ++r) {
                         if (norms[r] <= eps) {
                             for (std::size_t c = 0; c < y.cols(); ++c) acc(r, c) += g(r, c) / eps;
                             continue;
                         }
                         double gy = 0.0;
                         for (std::size_t c = 0; c < y.cols(); ++c) gy += g(r, c) * y(r, c);
                         for (std::size_t c = 0; c < y.cols(); ++c)
                             acc(r, c) += (g(r, c) - y(r, c) * gy) / norms[r];
                     }
                 });
}

Var log(Var a) {
    Tensor y = a.value();
    for (double& v : y.data()) v = std::log(v);
    y.set_requires_grad(false);
    return unary("log", a, std::move(y), [](const Tensor& g, const Tensor& x, const Tensor&, Tensor& acc) {
        for (std::size_t i = 0; i < g.size(); ++i) acc[i] += g[i] / x[i];
    });
}

Var exp(Var a) {
    Tensor y = a.value();
    for (double& v : y.data()) v = std::exp(v);
    y.set_requires_grad(false);
    return unary("exp", a, std::move(y), [](const Tensor& g, const Tensor&, const Tensor& y, Tensor& acc) {
        for (std::size_t i = 0; i < g.size(); ++i) acc[i] += g[i] * y[i];
    });
}

Var transpose(Var a) {
    return unary("transpose", a, transposed(a.value()),
                 [](const Tensor& g, const Tensor& x, const Tensor&, Tensor& acc) {
                     for (std::size_t r = 0; r < x.rows(); ++r)
                         for (std::size_t c = 0; c < x.cols(); ++c) acc(r, c) += g(c, r);
                 });
}

Var gather_rows(Var a, std::span<const std::size_t> rows) {
    const Tensor& x = a.value();
    if (rows.empty()) throw ValidationError("gather_rows: empty index list");
    std::vector<std::size_t> idx(rows.begin(), rows.end());
    Tensor y = Tensor::matrix(idx.size(), x.cols());
    for (std::size_t i = 0; i < idx.size(); ++i) {
        if (idx[i] >= x.rows())
            throw ValidationError("gather_rows: row " + std::to_string(idx[i]) + " out of range for " +
                                  x.shape_str());
        std::copy(x.row_span(idx[i]).begin(), x.row_span(idx[i]).end(), y.row_span(i).begin());
    }
    return unary("gather_rows", a, std::move(y),
                 [idx = std::move(idx)](const Tensor& g, const Tensor&, const Tensor&, Tensor& acc) {
                     for (std::size_t i = 0; i < idx.size(); ++i)
                         for (std::size_t c = 0; c < g.cols(); ++c) acc(idx[i], c) += g(i, c);
                 });
}

Var affine(Var x, const Parameter& weight, const Parameter& bias) {
    Tape& t = x.tape();
    return add(matmul(x, t.parameter_transposed(weight)), t.parameter(bias));
}

} // namespace mocos::ad
