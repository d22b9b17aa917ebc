#pragma once

#include "efbench/rng.hpp"
#include "efbench/tensor.hpp"

#include <string>
#include <vector>

namespace efbench {

enum class OptimizerKind { SGD, Adam, AdamW };

const char* to_string(OptimizerKind kind);
OptimizerKind optimizer_kind_from_string(const std::string& name);

struct OptimizerConfig {
    OptimizerKind kind = OptimizerKind::SGD;
    double learning_rate = 1e-3;
    double weight_decay = 1e-4;
    double adam_beta1 = 0.9;
    double adam_beta2 = 0.999;
    double adam_epsilon = 1e-8;

    void validate() const;
};

/// Moment buffers for Adam/AdamW, one per parameter tensor.
struct OptimizerState {
    std::vector<Tensor> first_moment;
    std::vector<Tensor> second_moment;
    long long steps = 0;
};

/// One update of every parameter tensor.
///   SGD:   p <- p - lr * (g + wd * p)
///   Adam:  L2 penalty folded into the gradient before the moment recursions
///   AdamW: p <- p - lr * wd * p applied separately from the Adam step
void optimizer_step(std::vector<Tensor*>& params, const std::vector<Tensor>& grads, OptimizerState& state,
                    const OptimizerConfig& cfg);

/// Glorot/Xavier uniform samples in [-sqrt(6/(fan_in+fan_out)), +sqrt(6/(fan_in+fan_out))].
Tensor xavier_uniform(Shape shape, Eigen::Index fan_in, Eigen::Index fan_out, Rng& rng);
/// (fan_in, fan_out) matrix drawn from a generator seeded with `seed`.
Tensor xavier_init(Eigen::Index fan_in, Eigen::Index fan_out, std::uint64_t seed);

}  // namespace efbench
