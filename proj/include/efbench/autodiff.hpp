#pragma once

#include "efbench/rng.hpp"
#include "efbench/tensor.hpp"

#include <cstddef>
#include <functional>
#include <span>
#include <vector>

namespace efbench::ad {

class Tape;

/// Handle to a node recorded on a Tape.
struct Var {
    Tape* tape = nullptr;
    std::size_t id = 0;

    const Tensor& value() const;
    const Shape& shape() const { return value().shape(); }
};

/// Reverse-mode differentiation record. Nodes are appended in evaluation
/// order, so the node list is always topologically sorted.
class Tape {
  public:
    using BackwardFn = std::function<void(Tape&, const Tensor& grad_out)>;

    Tape() = default;
    Tape(const Tape&) = delete;
    Tape& operator=(const Tape&) = delete;

    /// Owned value that never receives a gradient.
    Var constant(Tensor value);
    /// Owned leaf that receives a gradient.
    Var variable(Tensor value);
    /// Non-owning leaf for a model parameter; `external` must outlive the tape.
    Var parameter(const Tensor& external);

    /// Appends an op node. It requires a gradient when any input does.
    Var record(Tensor value, std::initializer_list<std::size_t> inputs, BackwardFn backward);
    Var record(Tensor value, const std::vector<std::size_t>& inputs, BackwardFn backward);

    const Tensor& value(std::size_t id) const;
    const Tensor& value(Var v) const { return value(v.id); }
    bool requires_grad(std::size_t id) const { return nodes_.at(id).requires_grad; }
    bool requires_grad(Var v) const { return requires_grad(v.id); }

    /// Zero-initialized on first access; used by backward rules.
    Tensor& grad_buffer(std::size_t id);

    /// Adjoint of a node after backward(); a zero tensor when nothing flowed.
    Tensor grad(Var v) const;

    /// Loss must hold a single element. A second call without zero_grad()
    /// is rejected.
    void backward(Var loss);
    void zero_grad();

    std::size_t size() const { return nodes_.size(); }

  private:
    struct Node {
        Tensor owned;
        const Tensor* external = nullptr;
        std::vector<std::size_t> inputs;
        BackwardFn backward;
        bool requires_grad = false;
    };

    Var push(Node node);

    std::vector<Node> nodes_;
    std::vector<Tensor> grads_;
    bool backward_done_ = false;
};

inline const Tensor& Var::value() const { return tape->value(id); }

// Elementwise and broadcasting arithmetic. In add(), `b` may also match a
// trailing suffix of a's shape and is then broadcast over the leading axes.
Var add(Var a, Var b);
Var sub(Var a, Var b);
Var mul(Var a, Var b);
Var scale(Var a, double s);

/// a(..., k) x b(k, n) -> (..., n).
Var matmul(Var a, Var b);
/// matmul(x, w) + bias, fused.
Var linear(Var x, Var w, Var bias);
/// Batched product of (B, m, k) with (B, k, n), or with (B, n, k) when
/// `transpose_b` is set.
Var bmm(Var a, Var b, bool transpose_b = false);

Var reshape(Var a, Shape shape);
/// Rank 2: matrix transpose. Rank 3: swaps the last two axes.
Var transpose(Var a);
/// Concatenation along the last axis.
Var concat(std::span<const Var> parts);
/// Contiguous range [start, start+length) of the last axis.
Var slice(Var a, Eigen::Index start, Eigen::Index length);
/// (B, T, F) -> (B, F) at step t.
Var select_step(Var a, Eigen::Index t);
/// T tensors of (B, F) -> (B, T, F).
Var stack_steps(std::span<const Var> steps);

Var relu(Var a);
Var tanh(Var a);
Var sigmoid(Var a);
/// Softmax over the last axis.
Var softmax(Var a);

Var sum(Var a);
Var mean(Var a);
/// (B, T, D) -> (B, D), averaging over T.
Var mean_over_steps(Var a);

/// Inverted dropout: in training mode each unit survives with probability
/// 1 - rate and is scaled by 1/(1 - rate). Identity otherwise.
Var dropout(Var a, double rate, Rng& rng, bool training);

/// x (B, Cin, L), w (Cout, Cin, K), bias (Cout) -> (B, Cout, L + 2p - K + 1).
Var conv1d(Var x, Var w, Var bias, Eigen::Index padding = 0);
/// (B, C, L) -> (B, C, floor((L - size) / stride) + 1).
Var maxpool1d(Var x, Eigen::Index size, Eigen::Index stride);
/// x (B, Cin, L), w (Cin, Cout, K), bias (Cout) -> (B, Cout, L + K - 1). Stride 1.
Var conv_transpose1d(Var x, Var w, Var bias);
/// Nearest-neighbour repeat along the last axis.
Var upsample1d(Var x, Eigen::Index factor);

/// Normalizes the last axis, then applies gamma and beta.
Var layer_norm(Var x, Var gamma, Var beta, double eps = 1e-5);

/// Per-row linear map: x (B, in), w (B, in*out) holding one row-major
/// (in, out) matrix per row of x -> (B, out).
Var per_sample_matvec(Var x, Var w);

enum class LossKind { MSE, MAE };

Var mse_loss(Var pred, const Tensor& target);
Var mae_loss(Var pred, const Tensor& target);
Var loss(Var pred, const Tensor& target, LossKind kind);

}  // namespace efbench::ad

namespace efbench {

using ad::LossKind;

/// Mean of squared residuals.
double mse(const Tensor& pred, const Tensor& target);
/// Mean of absolute residuals.
double mae(const Tensor& pred, const Tensor& target);
double loss_value(const Tensor& pred, const Tensor& target, LossKind kind);

const char* to_string(LossKind kind);
LossKind loss_kind_from_string(const std::string& name);

}  // namespace efbench
