#pragma once

#include "efbench/gbt.hpp"

#include <Eigen/Core>

#include <cstdint>
#include <vector>

namespace efbench {

/// Linear least squares fitted by shuffled mini-batch gradient descent on
/// 0.5 * mean squared residual + 0.5 * weight_decay * |w|^2. Weights start
/// at zero; the bias is not penalized.
struct SgdConfig {
    double learning_rate = 0.01;
    int epochs = 50;
    double weight_decay = 1e-4;
    int batch_size = 64;
    std::uint64_t seed = 0;

    void validate() const;
};

struct LinearModel {
    Eigen::VectorXd weights;
    double bias = 0.0;

    Eigen::VectorXd predict(const RowMajorMatrix& features) const;
};

/// Throws std::runtime_error naming the epoch when the iterates diverge.
LinearModel sgd_linear_fit(const RowMajorMatrix& features, const Eigen::VectorXd& target, const SgdConfig& cfg);

enum class RegressorKind { SGD, GBT };

/// One independent regressor per output column.
struct MultiOutputModel {
    RegressorKind kind = RegressorKind::GBT;
    std::vector<LinearModel> linear;
    std::vector<GBTModel> trees;

    Eigen::Index outputs() const;
    Eigen::Index num_features() const;
    /// (samples, outputs); column h is the h-th model's prediction.
    Eigen::MatrixXd predict(const RowMajorMatrix& features) const;
};

struct MultiOutputConfig {
    RegressorKind kind = RegressorKind::GBT;
    GBTConfig gbt;
    SgdConfig sgd;
    /// Master seed; the model for column h gets a seed split from it.
    std::uint64_t seed = 0;
    std::size_t threads = 0;
};

/// Seed handed to the regressor of output column h.
std::uint64_t output_seed(std::uint64_t master, std::size_t h);

/// `validation_*` may be null; when given they drive GBT early stopping.
MultiOutputModel multi_output_fit(const RowMajorMatrix& features, const Eigen::MatrixXd& targets,
                                  const MultiOutputConfig& cfg, const RowMajorMatrix* validation_features = nullptr,
                                  const Eigen::MatrixXd* validation_targets = nullptr);

}  // namespace efbench
