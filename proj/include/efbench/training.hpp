#pragma once

#include "efbench/networks.hpp"

#include <limits>
#include <stdexcept>
#include <vector>

namespace efbench {

/// Raised when a loss turns NaN or infinite.
class TrainingDiverged : public std::runtime_error {
  public:
    using std::runtime_error::runtime_error;
};

struct StoppingRule {
    int epoch_cap = 200;
    /// Consecutive epochs without improvement before stopping.
    int patience = 5;
    /// A validation loss counts as an improvement only when it is below
    /// best - tolerance.
    double tolerance = 1e-9;
};

/// Anything trained epoch by epoch under early stopping.
class Trainable {
  public:
    virtual ~Trainable() = default;
    /// One pass over the training data (1-based epoch); returns the mean
    /// training loss.
    virtual double train_epoch(int epoch) = 0;
    /// Loss on held-out data with dropout off.
    virtual double validation_loss() = 0;
    /// Remember the current parameters as the best so far.
    virtual void keep_best() = 0;
    /// Reinstate the parameters saved by the last keep_best().
    virtual void restore_best() = 0;
};

struct TrainingHistory {
    std::vector<double> train_loss;
    std::vector<double> validation_loss;
    int epochs_run = 0;
    /// 1-based epoch whose parameters were restored; 0 if none.
    int best_epoch = 0;
    double best_validation = std::numeric_limits<double>::infinity();
    bool stopped_early = false;
};

/// Trains until `patience` consecutive epochs fail to improve the validation
/// loss or the epoch cap is reached, then restores the best epoch. Throws
/// TrainingDiverged on a non-finite loss.
TrainingHistory run_training(Trainable& model, const StoppingRule& rule);

/// Supervised windows: inputs (S, 24, 6), targets (S, 24).
struct TrainData {
    Tensor train_inputs, train_targets;
    Tensor validation_inputs, validation_targets;
};

struct TrainRunResult {
    ModelConfig config;
    TrainingHistory history;
    double wall_seconds = 0.0;
    Eigen::Index parameters = 0;
    bool failed = false;
    std::string error;
};

/// Mini-batch training of `net` with the optimizer, loss, batch size, epoch
/// cap, patience and seed in its config. The returned history reports the
/// best epoch, whose parameters are left in `net`.
TrainRunResult train_network(NeuralNet& net, const TrainData& data);

/// Evenly strided subset of [0, n) of size min(n, cap); all of it when cap is 0.
std::vector<Eigen::Index> strided_subset(Eigen::Index n, Eigen::Index cap);

}  // namespace efbench
