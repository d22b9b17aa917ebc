#include "efbench/autodiff.hpp"

#include <algorithm>
#include <cmath>
#include <memory>
#include <stdexcept>

namespace efbench::ad {

namespace {

using RowMat = Tensor::RowMatrix;
using MapM = Eigen::Map<RowMat>;
using CMapM = Eigen::Map<const RowMat>;
using Index = Eigen::Index;

[[noreturn]] void mismatch(const char* op, const Shape& a, const Shape& b) {
    throw ShapeError(std::string(op) + ": incompatible shapes " + shape_str(a) + " and " + shape_str(b));
}

[[noreturn]] void bad_shape(const char* op, const Shape& a, const std::string& expect) {
    throw ShapeError(std::string(op) + ": got shape " + shape_str(a) + ", expected " + expect);
}

void same_tape(Var a, Var b, const char* op) {
    if (a.tape != b.tape) throw std::invalid_argument(std::string(op) + ": operands live on different tapes");
}

bool is_suffix(const Shape& whole, const Shape& part) {
    if (part.size() > whole.size()) return false;
    return std::equal(part.rbegin(), part.rend(), whole.rbegin());
}

}  // namespace

// ---------------------------------------------------------------------------
// Tape

Var Tape::push(Node node) {
    if (backward_done_)
        throw std::logic_error("tape: cannot record after backward(); call zero_grad() or use a new tape");
    nodes_.push_back(std::move(node));
    grads_.emplace_back();
    return Var{this, nodes_.size() - 1};
}

Var Tape::constant(Tensor value) {
    Node n;
    n.owned = std::move(value);
    return push(std::move(n));
}

Var Tape::variable(Tensor value) {
    Node n;
    n.owned = std::move(value);
    n.requires_grad = true;
    return push(std::move(n));
}

Var Tape::parameter(const Tensor& external) {
    Node n;
    n.external = &external;
    n.requires_grad = true;
    return push(std::move(n));
}

Var Tape::record(Tensor value, const std::vector<std::size_t>& inputs, BackwardFn backward) {
    Node n;
    n.owned = std::move(value);
    n.inputs = inputs;
    for (auto i : inputs) {
        if (i >= nodes_.size()) throw std::out_of_range("tape: input node does not exist");
        n.requires_grad = n.requires_grad || nodes_[i].requires_grad;
    }
    if (n.requires_grad) n.backward = std::move(backward);
    return push(std::move(n));
}

Var Tape::record(Tensor value, std::initializer_list<std::size_t> inputs, BackwardFn backward) {
    return record(std::move(value), std::vector<std::size_t>(inputs), std::move(backward));
}

const Tensor& Tape::value(std::size_t id) const {
    const Node& n = nodes_.at(id);
    return n.external ? *n.external : n.owned;
}

Tensor& Tape::grad_buffer(std::size_t id) {
    Tensor& g = grads_.at(id);
    if (g.shape() != value(id).shape() || (g.empty() && !value(id).empty())) g = Tensor(value(id).shape());
    return g;
}

Tensor Tape::grad(Var v) const {
    const Tensor& g = grads_.at(v.id);
    if (g.shape() == value(v.id).shape() && g.size() == value(v.id).size() && !g.empty()) return g;
    return Tensor(value(v.id).shape());
}

void Tape::backward(Var loss) {
    if (loss.tape != this) throw std::invalid_argument("backward: loss belongs to another tape");
    if (backward_done_) throw std::logic_error("backward: already run on this tape; call zero_grad() first");
    if (value(loss.id).size() != 1)
        throw ShapeError("backward: loss must be scalar, got shape " + shape_str(value(loss.id).shape()));
    backward_done_ = true;
    if (!nodes_[loss.id].requires_grad) return;
    grad_buffer(loss.id)[0] = 1.0;
    for (std::size_t i = loss.id + 1; i-- > 0;) {
        Node& n = nodes_[i];
        if (!n.requires_grad || !n.backward || grads_[i].empty()) continue;
        n.backward(*this, grads_[i]);
    }
}

void Tape::zero_grad() {
    for (auto& g : grads_) g = Tensor();
    backward_done_ = false;
}

// ---------------------------------------------------------------------------
// Arithmetic

Var add(Var a, Var b) {
    same_tape(a, b, "add");
    const Tensor& x = a.value();
    const Tensor& y = b.value();
    if (x.shape() == y.shape()) {
        Tensor out(x.shape());
        out.vec() = x.vec() + y.vec();
        return a.tape->record(std::move(out), {a.id, b.id}, [a = a.id, b = b.id](Tape& t, const Tensor& g) {
            if (t.requires_grad(a)) t.grad_buffer(a).vec() += g.vec();
            if (t.requires_grad(b)) t.grad_buffer(b).vec() += g.vec();
        });
    }
    if (!is_suffix(x.shape(), y.shape()) || y.size() == 0) mismatch("add", x.shape(), y.shape());
    const Index inner = y.size();
    const Index outer = x.size() / inner;
    Tensor out(x.shape());
    MapM(out.data(), outer, inner) = CMapM(x.data(), outer, inner).rowwise() + y.vec().transpose();
    return a.tape->record(std::move(out), {a.id, b.id}, [a = a.id, b = b.id, outer, inner](Tape& t, const Tensor& g) {
        if (t.requires_grad(a)) t.grad_buffer(a).vec() += g.vec();
        if (t.requires_grad(b))
            t.grad_buffer(b).vec() += CMapM(g.data(), outer, inner).colwise().sum().transpose();
    });
}

Var sub(Var a, Var b) {
    same_tape(a, b, "sub");
    const Tensor& x = a.value();
    const Tensor& y = b.value();
    if (x.shape() != y.shape()) mismatch("sub", x.shape(), y.shape());
    Tensor out(x.shape());
    out.vec() = x.vec() - y.vec();
    return a.tape->record(std::move(out), {a.id, b.id}, [a = a.id, b = b.id](Tape& t, const Tensor& g) {
        if (t.requires_grad(a)) t.grad_buffer(a).vec() += g.vec();
        if (t.requires_grad(b)) t.grad_buffer(b).vec() -= g.vec();
    });
}

Var mul(Var a, Var b) {
    same_tape(a, b, "mul");
    const Tensor& x = a.value();
    const Tensor& y = b.value();
    if (x.shape() != y.shape()) mismatch("mul", x.shape(), y.shape());
    Tensor out(x.shape());
    out.vec() = x.vec().cwiseProduct(y.vec());
    return a.tape->record(std::move(out), {a.id, b.id}, [a = a.id, b = b.id](Tape& t, const Tensor& g) {
        if (t.requires_grad(a)) t.grad_buffer(a).vec() += g.vec().cwiseProduct(t.value(b).vec());
        if (t.requires_grad(b)) t.grad_buffer(b).vec() += g.vec().cwiseProduct(t.value(a).vec());
    });
}

Var scale(Var a, double s) {
    Tensor out(a.shape());
    out.vec() = a.value().vec() * s;
    return a.tape->record(std::move(out), {a.id}, [a = a.id, s](Tape& t, const Tensor& g) {
        t.grad_buffer(a).vec() += s * g.vec();
    });
}

Var matmul(Var a, Var b) {
    same_tape(a, b, "matmul");
    const Tensor& x = a.value();
    const Tensor& w = b.value();
    if (w.rank() != 2 || x.rank() < 1 || x.cols() != w.dim(0)) mismatch("matmul", x.shape(), w.shape());
    Shape out_shape = x.shape();
    out_shape.back() = w.dim(1);
    Tensor out(out_shape);
    out.matrix().noalias() = x.matrix() * w.matrix();
    return a.tape->record(std::move(out), {a.id, b.id}, [a = a.id, b = b.id](Tape& t, const Tensor& g) {
        const auto gm = g.matrix();
        if (t.requires_grad(a)) t.grad_buffer(a).matrix().noalias() += gm * t.value(b).matrix().transpose();
        if (t.requires_grad(b)) t.grad_buffer(b).matrix().noalias() += t.value(a).matrix().transpose() * gm;
    });
}

Var linear(Var x, Var w, Var bias) {
    same_tape(x, w, "linear");
    same_tape(x, bias, "linear");
    const Tensor& xv = x.value();
    const Tensor& wv = w.value();
    const Tensor& bv = bias.value();
    if (wv.rank() != 2 || xv.rank() < 1 || xv.cols() != wv.dim(0)) mismatch("linear", xv.shape(), wv.shape());
    if (bv.size() != wv.dim(1)) mismatch("linear(bias)", wv.shape(), bv.shape());
    Shape out_shape = xv.shape();
    out_shape.back() = wv.dim(1);
    Tensor out(out_shape);
    out.matrix().noalias() = xv.matrix() * wv.matrix();
    out.matrix().rowwise() += bv.vec().transpose();
    return x.tape->record(std::move(out), {x.id, w.id, bias.id},
                          [x = x.id, w = w.id, b = bias.id](Tape& t, const Tensor& g) {
                              const auto gm = g.matrix();
                              if (t.requires_grad(x))
                                  t.grad_buffer(x).matrix().noalias() += gm * t.value(w).matrix().transpose();
                              if (t.requires_grad(w))
                                  t.grad_buffer(w).matrix().noalias() += t.value(x).matrix().transpose() * gm;
                              if (t.requires_grad(b)) t.grad_buffer(b).vec() += gm.colwise().sum().transpose();
                          });
}

Var bmm(Var a, Var b, bool transpose_b) {
    same_tape(a, b, "bmm");
    const Tensor& x = a.value();
    const Tensor& y = b.value();
    if (x.rank() != 3 || y.rank() != 3 || x.dim(0) != y.dim(0)) mismatch("bmm", x.shape(), y.shape());
    const Index batch = x.dim(0), m = x.dim(1), k = x.dim(2);
    const Index yk = transpose_b ? y.dim(2) : y.dim(1);
    const Index n = transpose_b ? y.dim(1) : y.dim(2);
    if (yk != k) mismatch("bmm", x.shape(), y.shape());
    Tensor out({batch, m, n});
    for (Index i = 0; i < batch; ++i) {
        CMapM xa(x.data() + i * m * k, m, k);
        MapM o(out.data() + i * m * n, m, n);
        if (transpose_b)
            o.noalias() = xa * CMapM(y.data() + i * n * k, n, k).transpose();
        else
            o.noalias() = xa * CMapM(y.data() + i * k * n, k, n);
    }
    return a.tape->record(std::move(out), {a.id, b.id},
                          [a = a.id, b = b.id, batch, m, k, n, transpose_b](Tape& t, const Tensor& g) {
                              const bool ga = t.requires_grad(a), gb = t.requires_grad(b);
                              const Tensor& x = t.value(a);
                              const Tensor& y = t.value(b);
                              double* dx = ga ? t.grad_buffer(a).data() : nullptr;
                              double* dy = gb ? t.grad_buffer(b).data() : nullptr;
                              for (Index i = 0; i < batch; ++i) {
                                  CMapM go(g.data() + i * m * n, m, n);
                                  CMapM xa(x.data() + i * m * k, m, k);
                                  if (transpose_b) {
                                      CMapM yb(y.data() + i * n * k, n, k);
                                      if (ga) MapM(dx + i * m * k, m, k).noalias() += go * yb;
                                      if (gb) MapM(dy + i * n * k, n, k).noalias() += go.transpose() * xa;
                                  } else {
                                      CMapM yb(y.data() + i * k * n, k, n);
                                      if (ga) MapM(dx + i * m * k, m, k).noalias() += go * yb.transpose();
                                      if (gb) MapM(dy + i * k * n, k, n).noalias() += xa.transpose() * go;
                                  }
                              }
                          });
}

// ---------------------------------------------------------------------------
// Structure

Var reshape(Var a, Shape shape) {
    Tensor out = a.value().reshaped(std::move(shape));
    return a.tape->record(std::move(out), {a.id}, [a = a.id](Tape& t, const Tensor& g) {
        t.grad_buffer(a).vec() += g.vec();
    });
}

Var transpose(Var a) {
    const Tensor& x = a.value();
    if (x.rank() != 2 && x.rank() != 3) bad_shape("transpose", x.shape(), "rank 2 or 3");
    const Index batch = x.rank() == 3 ? x.dim(0) : 1;
    const Index r = x.dim(-2), c = x.dim(-1);
    Shape out_shape = x.shape();
    std::swap(out_shape[out_shape.size() - 1], out_shape[out_shape.size() - 2]);
    Tensor out(out_shape);
    for (Index i = 0; i < batch; ++i)
        MapM(out.data() + i * r * c, c, r) = CMapM(x.data() + i * r * c, r, c).transpose();
    return a.tape->record(std::move(out), {a.id}, [a = a.id, batch, r, c](Tape& t, const Tensor& g) {
        Tensor& d = t.grad_buffer(a);
        for (Index i = 0; i < batch; ++i)
            MapM(d.data() + i * r * c, r, c) += CMapM(g.data() + i * r * c, c, r).transpose();
    });
}

Var concat(std::span<const Var> parts) {
    if (parts.empty()) throw std::invalid_argument("concat: no inputs");
    const Tensor& first = parts[0].value();
    Shape out_shape = first.shape();
    Index total = 0;
    std::vector<Index> widths;
    std::vector<std::size_t> ids;
    for (const Var& p : parts) {
        same_tape(parts[0], p, "concat");
        const Tensor& v = p.value();
        if (v.rank() != first.rank() || v.rows() != first.rows()) mismatch("concat", first.shape(), v.shape());
        for (Index ax = 0; ax + 1 < v.rank(); ++ax)
            if (v.dim(ax) != first.dim(ax)) mismatch("concat", first.shape(), v.shape());
        widths.push_back(v.cols());
        ids.push_back(p.id);
        total += v.cols();
    }
    out_shape.back() = total;
    Tensor out(out_shape);
    Index offset = 0;
    for (const Var& p : parts) {
        const Tensor& v = p.value();
        out.matrix().middleCols(offset, v.cols()) = v.matrix();
        offset += v.cols();
    }
    return parts[0].tape->record(std::move(out), ids, [ids, widths](Tape& t, const Tensor& g) {
        Index offset = 0;
        for (std::size_t i = 0; i < ids.size(); ++i) {
            if (t.requires_grad(ids[i])) t.grad_buffer(ids[i]).matrix() += g.matrix().middleCols(offset, widths[i]);
            offset += widths[i];
        }
    });
}

Var slice(Var a, Index start, Index length) {
    const Tensor& x = a.value();
    if (x.rank() < 1 || start < 0 || length < 1 || start + length > x.cols())
        bad_shape("slice", x.shape(), "last axis covering [" + std::to_string(start) + ", " +
                                          std::to_string(start + length) + ")");
    Shape out_shape = x.shape();
    out_shape.back() = length;
    Tensor out(out_shape);
    out.matrix() = x.matrix().middleCols(start, length);
    return a.tape->record(std::move(out), {a.id}, [a = a.id, start, length](Tape& t, const Tensor& g) {
        t.grad_buffer(a).matrix().middleCols(start, length) += g.matrix();
    });
}

Var select_step(Var a, Index step) {
    const Tensor& x = a.value();
    if (x.rank() != 3 || step < 0 || step >= x.dim(1)) bad_shape("select_step", x.shape(), "(B, T, F) with t < T");
    const Index batch = x.dim(0), steps = x.dim(1), f = x.dim(2);
    Tensor out({batch, f});
    for (Index b = 0; b < batch; ++b)
        out.matrix().row(b) = Eigen::Map<const Eigen::RowVectorXd>(x.data() + (b * steps + step) * f, f);
    return a.tape->record(std::move(out), {a.id}, [a = a.id, batch, steps, f, step](Tape& t, const Tensor& g) {
        Tensor& d = t.grad_buffer(a);
        for (Index b = 0; b < batch; ++b)
            Eigen::Map<Eigen::RowVectorXd>(d.data() + (b * steps + step) * f, f) += g.matrix().row(b);
    });
}

Var stack_steps(std::span<const Var> steps) {
    if (steps.empty()) throw std::invalid_argument("stack_steps: no inputs");
    const Tensor& first = steps[0].value();
    if (first.rank() != 2) bad_shape("stack_steps", first.shape(), "(B, F)");
    const Index batch = first.dim(0), f = first.dim(1), n = static_cast<Index>(steps.size());
    std::vector<std::size_t> ids;
    Tensor out({batch, n, f});
    for (Index s = 0; s < n; ++s) {
        same_tape(steps[0], steps[s], "stack_steps");
        const Tensor& v = steps[s].value();
        if (v.shape() != first.shape()) mismatch("stack_steps", first.shape(), v.shape());
        ids.push_back(steps[s].id);
        for (Index b = 0; b < batch; ++b)
            Eigen::Map<Eigen::RowVectorXd>(out.data() + (b * n + s) * f, f) = v.matrix().row(b);
    }
    return steps[0].tape->record(std::move(out), ids, [ids, batch, n, f](Tape& t, const Tensor& g) {
        for (Index s = 0; s < n; ++s) {
            if (!t.requires_grad(ids[s])) continue;
            Tensor& d = t.grad_buffer(ids[s]);
            for (Index b = 0; b < batch; ++b)
                d.matrix().row(b) += Eigen::Map<const Eigen::RowVectorXd>(g.data() + (b * n + s) * f, f);
        }
    });
}

// ---------------------------------------------------------------------------
// Nonlinearities

Var relu(Var a) {
    Tensor out(a.shape());
    out.vec() = a.value().vec().cwiseMax(0.0);
    return a.tape->record(std::move(out), {a.id}, [a = a.id](Tape& t, const Tensor& g) {
        const auto& x = t.value(a).vec();
        t.grad_buffer(a).vec() += (x.array() > 0.0).select(g.vec(), 0.0);
    });
}

Var tanh(Var a) {
    Tensor out(a.shape());
    out.vec() = a.value().vec().array().tanh().matrix();
    const std::size_t self = a.tape->size();
    return a.tape->record(std::move(out), {a.id}, [a = a.id, self](Tape& t, const Tensor& g) {
        const auto y = t.value(self).vec().array();
        t.grad_buffer(a).vec().array() += g.vec().array() * (1.0 - y.square());
    });
}

Var sigmoid(Var a) {
    Tensor out(a.shape());
    out.vec() = (1.0 / (1.0 + (-a.value().vec().array()).exp())).matrix();
    const std::size_t self = a.tape->size();
    return a.tape->record(std::move(out), {a.id}, [a = a.id, self](Tape& t, const Tensor& g) {
        const auto y = t.value(self).vec().array();
        t.grad_buffer(a).vec().array() += g.vec().array() * y * (1.0 - y);
    });
}

Var softmax(Var a) {
    const Tensor& x = a.value();
    Tensor out(x.shape());
    auto o = out.matrix();
    o = x.matrix();
    o.colwise() -= o.rowwise().maxCoeff();
    o = o.array().exp().matrix();
    o.array().colwise() /= o.rowwise().sum().array();
    const std::size_t self = a.tape->size();
    return a.tape->record(std::move(out), {a.id}, [a = a.id, self](Tape& t, const Tensor& g) {
        const auto y = t.value(self).matrix();
        const auto gm = g.matrix();
        const Eigen::VectorXd dots = (gm.array() * y.array()).rowwise().sum();
        t.grad_buffer(a).matrix().array() += y.array() * (gm.array().colwise() - dots.array());
    });
}

Var sum(Var a) {
    Tensor out(Shape{}, a.value().vec().sum());
    return a.tape->record(std::move(out), {a.id}, [a = a.id](Tape& t, const Tensor& g) {
        t.grad_buffer(a).vec().array() += g[0];
    });
}

Var mean(Var a) {
    const double n = static_cast<double>(a.value().size());
    Tensor out(Shape{}, a.value().vec().sum() / n);
    return a.tape->record(std::move(out), {a.id}, [a = a.id, n](Tape& t, const Tensor& g) {
        t.grad_buffer(a).vec().array() += g[0] / n;
    });
}

Var mean_over_steps(Var a) {
    const Tensor& x = a.value();
    if (x.rank() != 3) bad_shape("mean_over_steps", x.shape(), "(B, T, D)");
    const Index batch = x.dim(0), steps = x.dim(1), d = x.dim(2);
    Tensor out({batch, d});
    for (Index b = 0; b < batch; ++b)
        out.matrix().row(b) = CMapM(x.data() + b * steps * d, steps, d).colwise().mean();
    return a.tape->record(std::move(out), {a.id}, [a = a.id, batch, steps, d](Tape& t, const Tensor& g) {
        Tensor& dx = t.grad_buffer(a);
        for (Index b = 0; b < batch; ++b)
            MapM(dx.data() + b * steps * d, steps, d).rowwise() += g.matrix().row(b) / static_cast<double>(steps);
    });
}

Var dropout(Var a, double rate, Rng& rng, bool training) {
    if (rate < 0.0 || rate >= 1.0) throw std::invalid_argument("dropout: rate must lie in [0, 1)");
    if (!training || rate == 0.0) return a;
    const Tensor& x = a.value();
    auto mask = std::make_shared<Tensor>(x.shape());
    const double keep_scale = 1.0 / (1.0 - rate);
    for (Index i = 0; i < mask->size(); ++i) (*mask)[i] = rng.uniform() < rate ? 0.0 : keep_scale;
    Tensor out(x.shape());
    out.vec() = x.vec().cwiseProduct(mask->vec());
    return a.tape->record(std::move(out), {a.id}, [a = a.id, mask](Tape& t, const Tensor& g) {
        t.grad_buffer(a).vec() += g.vec().cwiseProduct(mask->vec());
    });
}

// ---------------------------------------------------------------------------
// Convolution family

namespace {

// Row t of the result holds x[c, t + k - padding] at column c * K + k.
void im2col(const double* x, Index channels, Index length, Index kernel, Index padding, Index out_len,
            RowMat& col) {
    col.setZero(out_len, channels * kernel);
    for (Index c = 0; c < channels; ++c)
        for (Index k = 0; k < kernel; ++k)
            for (Index t = 0; t < out_len; ++t) {
                const Index src = t + k - padding;
                if (src >= 0 && src < length) col(t, c * kernel + k) = x[c * length + src];
            }
}

}  // namespace

Var conv1d(Var x, Var w, Var bias, Index padding) {
    same_tape(x, w, "conv1d");
    same_tape(x, bias, "conv1d");
    const Tensor& xv = x.value();
    const Tensor& wv = w.value();
    if (xv.rank() != 3 || wv.rank() != 3 || xv.dim(1) != wv.dim(1)) mismatch("conv1d", xv.shape(), wv.shape());
    const Index batch = xv.dim(0), cin = xv.dim(1), len = xv.dim(2);
    const Index cout = wv.dim(0), kernel = wv.dim(2);
    if (bias.value().size() != cout) mismatch("conv1d(bias)", wv.shape(), bias.value().shape());
    const Index out_len = len + 2 * padding - kernel + 1;
    if (padding < 0 || out_len < 1) mismatch("conv1d(length)", xv.shape(), wv.shape());

    Tensor out({batch, cout, out_len});
    CMapM wm(wv.data(), cout, cin * kernel);
    RowMat col;
    for (Index b = 0; b < batch; ++b) {
        im2col(xv.data() + b * cin * len, cin, len, kernel, padding, out_len, col);
        MapM o(out.data() + b * cout * out_len, cout, out_len);
        o.noalias() = wm * col.transpose();
        o.colwise() += bias.value().vec();
    }
    return x.tape->record(
        std::move(out), {x.id, w.id, bias.id},
        [x = x.id, w = w.id, bs = bias.id, batch, cin, len, cout, kernel, padding, out_len](Tape& t, const Tensor& g) {
            const bool gx = t.requires_grad(x), gw = t.requires_grad(w), gb = t.requires_grad(bs);
            const Tensor& xv = t.value(x);
            CMapM wm(t.value(w).data(), cout, cin * kernel);
            double* dw = gw ? t.grad_buffer(w).data() : nullptr;
            double* dx = gx ? t.grad_buffer(x).data() : nullptr;
            double* db = gb ? t.grad_buffer(bs).data() : nullptr;
            RowMat col, dcol;
            for (Index b = 0; b < batch; ++b) {
                CMapM go(g.data() + b * cout * out_len, cout, out_len);
                if (gb) Eigen::Map<Eigen::VectorXd>(db, cout) += go.rowwise().sum();
                if (gw) {
                    im2col(xv.data() + b * cin * len, cin, len, kernel, padding, out_len, col);
                    MapM(dw, cout, cin * kernel).noalias() += go * col;
                }
                if (gx) {
                    dcol.noalias() = go.transpose() * wm;
                    double* dxb = dx + b * cin * len;
                    for (Index c = 0; c < cin; ++c)
                        for (Index k = 0; k < kernel; ++k)
                            for (Index s = 0; s < out_len; ++s) {
                                const Index src = s + k - padding;
                                if (src >= 0 && src < len) dxb[c * len + src] += dcol(s, c * kernel + k);
                            }
                }
            }
        });
}

Var maxpool1d(Var x, Index size, Index stride) {
    const Tensor& xv = x.value();
    if (xv.rank() != 3) bad_shape("maxpool1d", xv.shape(), "(B, C, L)");
    if (size < 1 || stride < 1 || xv.dim(2) < size)
        bad_shape("maxpool1d", xv.shape(), "length >= pool size " + std::to_string(size));
    const Index rows = xv.dim(0) * xv.dim(1), len = xv.dim(2);
    const Index out_len = (len - size) / stride + 1;
    Tensor out({xv.dim(0), xv.dim(1), out_len});
    auto argmax = std::make_shared<std::vector<Index>>(static_cast<std::size_t>(rows * out_len));
    for (Index r = 0; r < rows; ++r)
        for (Index j = 0; j < out_len; ++j) {
            const double* src = xv.data() + r * len + j * stride;
            Index best = 0;
            for (Index i = 1; i < size; ++i)
                if (src[i] > src[best]) best = i;
            out[r * out_len + j] = src[best];
            (*argmax)[static_cast<std::size_t>(r * out_len + j)] = r * len + j * stride + best;
        }
    return x.tape->record(std::move(out), {x.id}, [x = x.id, argmax](Tape& t, const Tensor& g) {
        Tensor& d = t.grad_buffer(x);
        for (std::size_t i = 0; i < argmax->size(); ++i) d[(*argmax)[i]] += g[static_cast<Index>(i)];
    });
}

Var conv_transpose1d(Var x, Var w, Var bias) {
    same_tape(x, w, "conv_transpose1d");
    same_tape(x, bias, "conv_transpose1d");
    const Tensor& xv = x.value();
    const Tensor& wv = w.value();
    if (xv.rank() != 3 || wv.rank() != 3 || xv.dim(1) != wv.dim(0))
        mismatch("conv_transpose1d", xv.shape(), wv.shape());
    const Index batch = xv.dim(0), cin = xv.dim(1), len = xv.dim(2);
    const Index cout = wv.dim(1), kernel = wv.dim(2);
    if (bias.value().size() != cout) mismatch("conv_transpose1d(bias)", wv.shape(), bias.value().shape());
    const Index out_len = len + kernel - 1;

    Tensor out({batch, cout, out_len});
    CMapM wm(wv.data(), cin, cout * kernel);
    RowMat z;
    for (Index b = 0; b < batch; ++b) {
        z.noalias() = wm.transpose() * CMapM(xv.data() + b * cin * len, cin, len);
        double* o = out.data() + b * cout * out_len;
        for (Index oc = 0; oc < cout; ++oc) {
            for (Index s = 0; s < out_len; ++s) o[oc * out_len + s] = bias.value()[oc];
            for (Index k = 0; k < kernel; ++k)
                for (Index s = 0; s < len; ++s) o[oc * out_len + s + k] += z(oc * kernel + k, s);
        }
    }
    return x.tape->record(
        std::move(out), {x.id, w.id, bias.id},
        [x = x.id, w = w.id, bs = bias.id, batch, cin, len, cout, kernel, out_len](Tape& t, const Tensor& g) {
            const bool gx = t.requires_grad(x), gw = t.requires_grad(w), gb = t.requires_grad(bs);
            CMapM wm(t.value(w).data(), cin, cout * kernel);
            RowMat dz(cout * kernel, len);
            for (Index b = 0; b < batch; ++b) {
                const double* go = g.data() + b * cout * out_len;
                for (Index oc = 0; oc < cout; ++oc)
                    for (Index k = 0; k < kernel; ++k)
                        for (Index s = 0; s < len; ++s) dz(oc * kernel + k, s) = go[oc * out_len + s + k];
                if (gb) {
                    Tensor& db = t.grad_buffer(bs);
                    for (Index oc = 0; oc < cout; ++oc)
                        db[oc] += Eigen::Map<const Eigen::VectorXd>(go + oc * out_len, out_len).sum();
                }
                if (gx) MapM(t.grad_buffer(x).data() + b * cin * len, cin, len).noalias() += wm * dz;
                if (gw)
                    MapM(t.grad_buffer(w).data(), cin, cout * kernel).noalias() +=
                        CMapM(t.value(x).data() + b * cin * len, cin, len) * dz.transpose();
            }
        });
}

Var upsample1d(Var x, Index factor) {
    const Tensor& xv = x.value();
    if (xv.rank() != 3 || factor < 1) bad_shape("upsample1d", xv.shape(), "(B, C, L) and factor >= 1");
    const Index rows = xv.dim(0) * xv.dim(1), len = xv.dim(2);
    Tensor out({xv.dim(0), xv.dim(1), len * factor});
    for (Index r = 0; r < rows; ++r)
        for (Index s = 0; s < len * factor; ++s) out[r * len * factor + s] = xv[r * len + s / factor];
    return x.tape->record(std::move(out), {x.id}, [x = x.id, rows, len, factor](Tape& t, const Tensor& g) {
        Tensor& d = t.grad_buffer(x);
        for (Index r = 0; r < rows; ++r)
            for (Index s = 0; s < len * factor; ++s) d[r * len + s / factor] += g[r * len * factor + s];
    });
}

// ---------------------------------------------------------------------------
// Normalization and per-sample maps

Var layer_norm(Var x, Var gamma, Var beta, double eps) {
    same_tape(x, gamma, "layer_norm");
    same_tape(x, beta, "layer_norm");
    const Tensor& xv = x.value();
    const Index d = xv.cols();
    if (gamma.value().size() != d || beta.value().size() != d)
        mismatch("layer_norm", xv.shape(), gamma.value().shape());
    const Index rows = xv.rows();
    auto xhat = std::make_shared<RowMat>(rows, d);
    auto inv_std = std::make_shared<Eigen::VectorXd>(rows);
    Tensor out(xv.shape());
    for (Index r = 0; r < rows; ++r) {
        const auto row = xv.matrix().row(r);
        const double mu = row.mean();
        const double var = (row.array() - mu).square().mean();
        (*inv_std)[r] = 1.0 / std::sqrt(var + eps);
        xhat->row(r) = (row.array() - mu) * (*inv_std)[r];
    }
    out.matrix() = (xhat->array().rowwise() * gamma.value().vec().transpose().array()).rowwise() +
                   beta.value().vec().transpose().array();
    return x.tape->record(std::move(out), {x.id, gamma.id, beta.id},
                          [x = x.id, gm = gamma.id, bt = beta.id, xhat, inv_std, d](Tape& t, const Tensor& g) {
                              const auto gmat = g.matrix();
                              if (t.requires_grad(gm))
                                  t.grad_buffer(gm).vec() +=
                                      (gmat.array() * xhat->array()).colwise().sum().transpose().matrix();
                              if (t.requires_grad(bt)) t.grad_buffer(bt).vec() += gmat.colwise().sum().transpose();
                              if (!t.requires_grad(x)) return;
                              const RowMat dxhat =
                                  gmat.array().rowwise() * t.value(gm).vec().transpose().array();
                              const Eigen::VectorXd s1 = dxhat.rowwise().sum();
                              const Eigen::VectorXd s2 = (dxhat.array() * xhat->array()).rowwise().sum();
                              auto dx = t.grad_buffer(x).matrix();
                              const double dd = static_cast<double>(d);
                              for (Index r = 0; r < dxhat.rows(); ++r)
                                  dx.row(r).array() += (*inv_std)[r] / dd *
                                                       (dd * dxhat.row(r).array() - s1[r] -
                                                        xhat->row(r).array() * s2[r]);
                          });
}

Var per_sample_matvec(Var x, Var w) {
    same_tape(x, w, "per_sample_matvec");
    const Tensor& xv = x.value();
    const Tensor& wv = w.value();
    if (xv.rank() != 2 || wv.rank() != 2 || xv.dim(0) != wv.dim(0) || wv.dim(1) % xv.dim(1) != 0)
        mismatch("per_sample_matvec", xv.shape(), wv.shape());
    const Index batch = xv.dim(0), in = xv.dim(1), out_dim = wv.dim(1) / in;
    Tensor out({batch, out_dim});
    for (Index b = 0; b < batch; ++b)
        out.matrix().row(b).noalias() = xv.matrix().row(b) * CMapM(wv.data() + b * in * out_dim, in, out_dim);
    return x.tape->record(std::move(out), {x.id, w.id}, [x = x.id, w = w.id, batch, in, out_dim](Tape& t,
                                                                                                  const Tensor& g) {
        const bool gx = t.requires_grad(x), gw = t.requires_grad(w);
        for (Index b = 0; b < batch; ++b) {
            const auto grow = g.matrix().row(b);
            if (gx)
                t.grad_buffer(x).matrix().row(b).noalias() +=
                    grow * CMapM(t.value(w).data() + b * in * out_dim, in, out_dim).transpose();
            if (gw)
                MapM(t.grad_buffer(w).data() + b * in * out_dim, in, out_dim).noalias() +=
                    t.value(x).matrix().row(b).transpose() * grow;
        }
    });
}

// ---------------------------------------------------------------------------
// Losses

Var mse_loss(Var pred, const Tensor& target) {
    const Tensor& p = pred.value();
    if (p.shape() != target.shape()) mismatch("mse_loss", p.shape(), target.shape());
    const double n = static_cast<double>(p.size());
    auto residual = std::make_shared<Eigen::VectorXd>(p.vec() - target.vec());
    Tensor out(Shape{}, residual->squaredNorm() / n);
    return pred.tape->record(std::move(out), {pred.id}, [pr = pred.id, residual, n](Tape& t, const Tensor& g) {
        t.grad_buffer(pr).vec() += (2.0 * g[0] / n) * *residual;
    });
}

Var mae_loss(Var pred, const Tensor& target) {
    const Tensor& p = pred.value();
    if (p.shape() != target.shape()) mismatch("mae_loss", p.shape(), target.shape());
    const double n = static_cast<double>(p.size());
    auto residual = std::make_shared<Eigen::VectorXd>(p.vec() - target.vec());
    Tensor out(Shape{}, residual->cwiseAbs().sum() / n);
    return pred.tape->record(std::move(out), {pred.id}, [pr = pred.id, residual, n](Tape& t, const Tensor& g) {
        t.grad_buffer(pr).vec().array() += (g[0] / n) * residual->array().sign();
    });
}

Var loss(Var pred, const Tensor& target, LossKind kind) {
    return kind == LossKind::MSE ? mse_loss(pred, target) : mae_loss(pred, target);
}

}  // namespace efbench::ad

namespace efbench {

double mse(const Tensor& pred, const Tensor& target) {
    if (pred.shape() != target.shape()) throw ShapeError("mse: incompatible shapes " + shape_str(pred.shape()) +
                                                         " and " + shape_str(target.shape()));
    return (pred.vec() - target.vec()).squaredNorm() / static_cast<double>(pred.size());
}

double mae(const Tensor& pred, const Tensor& target) {
    if (pred.shape() != target.shape()) throw ShapeError("mae: incompatible shapes " + shape_str(pred.shape()) +
                                                         " and " + shape_str(target.shape()));
    return (pred.vec() - target.vec()).cwiseAbs().sum() / static_cast<double>(pred.size());
}

double loss_value(const Tensor& pred, const Tensor& target, LossKind kind) {
    return kind == LossKind::MSE ? mse(pred, target) : mae(pred, target);
}

const char* to_string(LossKind kind) { return kind == LossKind::MSE ? "MSE" : "MAE"; }

LossKind loss_kind_from_string(const std::string& name) {
    if (name == "MSE" || name == "mse") return LossKind::MSE;
    if (name == "MAE" || name == "mae") return LossKind::MAE;
    throw std::invalid_argument("unknown loss kind '" + name + "' (expected MSE or MAE)");
}

}  // namespace efbench
