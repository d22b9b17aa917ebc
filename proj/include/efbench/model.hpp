#pragma once

#include "efbench/autoencoder.hpp"
#include "efbench/dataset.hpp"
#include "efbench/minirocket.hpp"
#include "efbench/networks.hpp"
#include "efbench/regressors.hpp"
#include "efbench/training.hpp"

#include <memory>
#include <optional>

namespace efbench {

/// What training produced besides the parameters.
struct TrainingSummary {
    int epochs_run = 0;
    int best_epoch = 0;
    double best_validation = 0.0;
    bool stopped_early = false;
    std::vector<double> train_loss;
    std::vector<double> validation_loss;
    /// Ensembles: autoencoder reconstruction MSE before and after training.
    std::optional<double> autoencoder_initial_loss;
    std::vector<double> autoencoder_loss;
    /// Ensembles: boosting rounds kept per output hour.
    std::vector<int> rounds_kept;
};

/// A fitted forecaster of any architecture. Neural models hold a network;
/// ensembles hold MiniRocket parameters, an optional autoencoder and a
/// 24-output regressor.
struct TrainedModel {
    ModelConfig config;
    ScalerParams scaler;
    TrainingSummary summary;

    std::unique_ptr<NeuralNet> network;
    std::optional<MiniRocketParams> minirocket;
    std::optional<Autoencoder> autoencoder;
    std::optional<MultiOutputModel> regressor;

    /// Regressor input for ensembles: [autoencoder latent (32)] ++ MiniRocket
    /// features (512), from (S, 24, 6) windows.
    RowMajorMatrix ensemble_features(const Tensor& windows, std::size_t threads = 0) const;
    /// Scaled forecasts (S, 24) for scaled (S, 24, 6) windows.
    Tensor predict(const Tensor& windows, std::size_t threads = 0) const;
    /// Forecasts in kWh.
    Tensor predict_kwh(const Tensor& windows, std::size_t threads = 0) const;
};

/// Fits a model of cfg.architecture on the dataset's training split, with the
/// validation split driving early stopping. Throws TrainingDiverged on NaN.
TrainedModel fit_model(const ModelConfig& cfg, const WindowedDataset& data, std::size_t threads = 0);

/// Learned scalars: network weights, or autoencoder weights plus regressor
/// coefficients or tree nodes for ensembles. MiniRocket biases are fitted
/// quantiles and are not counted.
Eigen::Index parameter_count(const TrainedModel& m);

/// Feature width the ensemble regressor consumes.
Eigen::Index ensemble_feature_width(const ModelConfig& cfg);

}  // namespace efbench
