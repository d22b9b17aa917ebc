#pragma once

#include "efbench/autodiff.hpp"
#include "efbench/gbt.hpp"
#include "efbench/optim.hpp"

#include <json.hpp>

#include <cstdint>
#include <string>
#include <vector>

namespace efbench {

enum class Architecture {
    MLP,
    TCN,
    RNN,
    LSTM,
    GRU,
    AttentionLSTM,
    Transformer,
    NBeats,
    ARNet,
    HyperNetLSTM,
    MiniWSGD,
    MiniWXGBoost,
    MiniAutoEncXGBoost,
};

inline constexpr Architecture kAllArchitectures[] = {
    Architecture::MLP,           Architecture::TCN,          Architecture::RNN,
    Architecture::LSTM,          Architecture::GRU,          Architecture::AttentionLSTM,
    Architecture::Transformer,   Architecture::NBeats,       Architecture::ARNet,
    Architecture::HyperNetLSTM,  Architecture::MiniWSGD,     Architecture::MiniWXGBoost,
    Architecture::MiniAutoEncXGBoost,
};

/// Command-line id, e.g. "hypernet_lstm".
const char* architecture_id(Architecture a);
/// Name used in reports, e.g. "HyperNetLSTM".
const char* display_name(Architecture a);
/// Accepts either the id or the display name.
Architecture architecture_from_string(const std::string& s);
bool is_neural(Architecture a);

/// Architecture plus every hyperparameter any model reads. Fields a given
/// architecture does not use are ignored.
struct ModelConfig {
    Architecture architecture = Architecture::LSTM;

    int units = 64;        // hidden width / kernels / d_model
    int layers = 1;        // encoder layers, hidden layers per N-BEATS block, AR-Net hidden layers
    int blocks = 1;        // N-BEATS blocks
    int heads = 2;         // attention heads
    int ffn_dim = 128;     // transformer feed-forward width
    int kernel_size = 3;   // TCN kernel
    double dropout = 0.0;
    int hyper_units1 = 128;
    int hyper_units2 = 64;

    OptimizerConfig optimizer;
    LossKind loss = LossKind::MSE;
    int batch_size = 64;
    int epoch_cap = 200;
    int patience = 5;
    /// Caps training samples per epoch (evenly strided); 0 uses all.
    int max_train_samples = 0;

    int num_features = 512;          // MiniRocket features
    int autoencoder_epoch_cap = 200;
    double autoencoder_learning_rate = 1e-4;
    GBTConfig gbt;
    double sgd_learning_rate = 0.01;
    int sgd_epochs = 50;
    double sgd_weight_decay = 1e-4;

    std::uint64_t seed = 0;

    void validate() const;
};

/// Tuned defaults for one architecture.
ModelConfig default_config(Architecture a);

nlohmann::ordered_json to_json(const ModelConfig& c);
/// Starts from default_config(architecture) and applies every key present.
/// Unknown keys are rejected.
ModelConfig config_from_json(const nlohmann::json& j);
/// Overrides fields of an existing config; "architecture" may not change.
void apply_overrides(ModelConfig& c, const nlohmann::json& overrides);

}  // namespace efbench
