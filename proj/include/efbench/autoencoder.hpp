#pragma once

#include "efbench/autodiff.hpp"
#include "efbench/gbt.hpp"
#include "efbench/networks.hpp"
#include "efbench/optim.hpp"
#include "efbench/training.hpp"

#include <vector>

namespace efbench {

inline constexpr Eigen::Index kLatentDim = 32;

/// 1-D convolutional autoencoder over channel-major (6, 24) windows.
///   encoder: conv(6->16, k2) ReLU pool2 -> conv(16->8, k3) ReLU pool2 -> flatten 32
///   decoder: upsample2 -> convT(8->16, k3) ReLU -> upsample2 -> convT(16->6, k5)
class Autoencoder {
  public:
    explicit Autoencoder(std::uint64_t seed = 0);

    std::vector<Param>& parameters() { return params_; }
    const std::vector<Param>& parameters() const { return params_; }

    /// x (B, 6, 24) -> (B, 32). Parameter variables in declaration order.
    ad::Var encode(ad::Var x, std::span<const ad::Var> p) const;
    /// z (B, 32) -> (B, 6, 24).
    ad::Var decode(ad::Var z, std::span<const ad::Var> p) const;

    /// Evaluation-mode latent codes: (S, 6, 24) -> (S, 32).
    RowMajorMatrix encode(const Tensor& x) const;
    /// Evaluation-mode reconstruction: (S, 6, 24) -> (S, 6, 24).
    Tensor reconstruct(const Tensor& x) const;
    /// Mean squared reconstruction error over all of x.
    double reconstruction_mse(const Tensor& x) const;

  private:
    std::vector<Param> params_;
};

struct AutoencoderTraining {
    OptimizerConfig optimizer{OptimizerKind::AdamW, 1e-4};
    int batch_size = 64;
    StoppingRule stopping{200, 5, 1e-9};
    /// Caps training samples per epoch (evenly strided); 0 uses all.
    Eigen::Index max_train_samples = 0;
    std::uint64_t seed = 0;
};

struct AutoencoderHistory {
    /// Reconstruction MSE on the training inputs before any update.
    double initial_loss = 0.0;
    TrainingHistory history;
};

/// Minimizes MSE(decode(encode(x)), x). Early stopping watches the validation
/// reconstruction error, or the training error when `validation` is empty.
AutoencoderHistory train_autoencoder(Autoencoder& model, const Tensor& train, const Tensor& validation,
                                     const AutoencoderTraining& cfg);

}  // namespace efbench
