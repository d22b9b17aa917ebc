#pragma once

#include "efbench/tensor.hpp"

#include <Eigen/Core>

#include <cstdint>
#include <optional>
#include <vector>

namespace efbench {

/// Second-order boosted regression trees with squared-error loss.
struct GBTConfig {
    double learning_rate = 0.05;
    double colsample_bytree = 0.5;
    double reg_lambda = 1.2;
    double subsample = 0.8;
    int max_depth = 6;
    int n_rounds = 300;
    double min_child_weight = 1.0;
    /// Rounds without validation improvement before stopping; 0 disables.
    int early_stopping_rounds = 50;
    std::uint64_t seed = 0;
    /// Starting prediction; the training-target mean when unset.
    std::optional<double> base_score;

    void validate() const;
};

/// Pre-order node list. Internal nodes send x[feature] < threshold left.
struct RegressionTree {
    struct Node {
        int feature = -1;  // -1 marks a leaf
        double threshold = 0.0;
        double value = 0.0;  // leaf weight, already multiplied by the learning rate
        int left = -1, right = -1;
    };
    std::vector<Node> nodes;

    double predict(const double* row) const;
    int depth() const;
    int leaves() const;
};

struct GBTModel {
    double base_score = 0.0;
    std::vector<RegressionTree> trees;
    Eigen::Index num_features = 0;
    /// Training MSE after each round (diagnostics).
    std::vector<double> train_curve;
    /// Validation MSE after each round, when a validation set was given.
    std::vector<double> validation_curve;
};

using RowMajorMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

struct EvalSet {
    const RowMajorMatrix* features = nullptr;
    const Eigen::VectorXd* targets = nullptr;
};

/// Exact greedy split search over pre-sorted columns. When `validation` is
/// given and early stopping is enabled, trees past the best validation round
/// are dropped.
GBTModel gbt_fit(const RowMajorMatrix& features, const Eigen::VectorXd& targets, const GBTConfig& cfg,
                 EvalSet validation = {});
Eigen::VectorXd gbt_predict(const GBTModel& model, const RowMajorMatrix& features);

/// Split gain for the squared-error objective with hessian 1 per sample.
inline double split_gain(double gl, double hl, double gr, double hr, double lambda) {
    auto score = [lambda](double g, double h) { return g * g / (h + lambda); };
    return 0.5 * (score(gl, hl) + score(gr, hr) - score(gl + gr, hl + hr));
}

/// Leaf weight -G / (H + lambda).
inline double leaf_weight(double g, double h, double lambda) { return -g / (h + lambda); }

}  // namespace efbench
