#pragma once

#include "efbench/autodiff.hpp"
#include "efbench/model_config.hpp"

#include <map>
#include <memory>
#include <span>
#include <string>
#include <vector>

namespace efbench {

inline constexpr Eigen::Index kInputSteps = 24;
inline constexpr Eigen::Index kInputFeatures = 6;
inline constexpr Eigen::Index kOutputSteps = 24;

struct Param {
    std::string name;
    Tensor value;
};

/// Intermediate tensors recorded during a forward pass, keyed by name
/// (e.g. "block0.forecast", "layer1.head0.attention", "theta").
using Trace = std::map<std::string, Tensor>;

struct ForwardContext {
    explicit ForwardContext(ad::Tape& t) : tape(t) {}

    ad::Tape& tape;
    bool training = false;
    /// Dropout masks are drawn from here; required when training.
    Rng* rng = nullptr;
    Trace* trace = nullptr;
    /// Parameter leaves bound by NeuralNet::forward, in declaration order.
    std::vector<ad::Var> bound;
};

/// A network mapping (batch, 24, 6) windows to (batch, 24) forecasts.
/// Parameters live in a flat, named list in declaration order; forward_with()
/// takes them as tape variables so callers can differentiate with respect to
/// any copy of them.
class NeuralNet {
  public:
    explicit NeuralNet(ModelConfig cfg) : cfg_(std::move(cfg)) {}
    virtual ~NeuralNet() = default;

    const ModelConfig& config() const { return cfg_; }
    std::vector<Param>& parameters() { return params_; }
    const std::vector<Param>& parameters() const { return params_; }
    Eigen::Index parameter_count() const;

    /// Binds this model's parameters onto ctx.tape (see ctx.bound) and runs.
    ad::Var forward(ForwardContext& ctx, ad::Var x) const;
    /// Runs with caller-supplied parameter variables in declaration order.
    ad::Var forward_with(ForwardContext& ctx, ad::Var x, std::span<const ad::Var> p) const;

    /// Evaluation-mode inference in chunks: (S, 24, 6) -> (S, 24).
    Tensor predict(const Tensor& x, Eigen::Index chunk = 256) const;

  protected:
    std::size_t declare(std::string name, Tensor init);
    virtual ad::Var run(ForwardContext& ctx, ad::Var x, std::span<const ad::Var> p) const = 0;

    ModelConfig cfg_;
    std::vector<Param> params_;
};

/// Builds a freshly initialized network. Weights are Xavier-uniform from a
/// generator derived from cfg.seed, biases zero unless noted per model.
std::unique_ptr<NeuralNet> make_network(const ModelConfig& cfg);

/// Sinusoidal position table (steps, d): sin at even columns, cos at odd.
Tensor positional_encoding(Eigen::Index steps, Eigen::Index d);

/// Parameter count of one LSTM layer: 4 * (in*units + units*units + units).
inline Eigen::Index lstm_parameter_count(Eigen::Index in, Eigen::Index units) {
    return 4 * (in * units + units * units + units);
}

}  // namespace efbench
