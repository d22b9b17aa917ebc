#include "efbench/model_config.hpp"

#include <functional>
#include <stdexcept>

namespace efbench {

namespace {

struct ArchName {
    Architecture arch;
    const char* id;
    const char* display;
};

constexpr ArchName kNames[] = {
    {Architecture::MLP, "mlp", "MLP"},
    {Architecture::TCN, "tcn", "TempConv"},
    {Architecture::RNN, "rnn", "RNN"},
    {Architecture::LSTM, "lstm", "LSTM"},
    {Architecture::GRU, "gru", "GRU"},
    {Architecture::AttentionLSTM, "attention_lstm", "AttentionLSTM"},
    {Architecture::Transformer, "transformer", "Transformer"},
    {Architecture::NBeats, "nbeats", "Nbeats"},
    {Architecture::ARNet, "arnet", "ARFFNN"},
    {Architecture::HyperNetLSTM, "hypernet_lstm", "HyperNetLSTM"},
    {Architecture::MiniWSGD, "miniwsgd", "MiniWSGD"},
    {Architecture::MiniWXGBoost, "miniwxgboost", "MiniWXGBoost"},
    {Architecture::MiniAutoEncXGBoost, "miniautoencxgboost", "MiniAutoEncXGBoost"},
};

using Json = nlohmann::json;

// Key -> (reader, writer) over ModelConfig. "architecture" is handled apart.
struct Field {
    const char* key;
    std::function<Json(const ModelConfig&)> get;
    std::function<void(ModelConfig&, const Json&)> set;
};

template <typename T>
Field plain(const char* key, T ModelConfig::*member) {
    return {key, [member](const ModelConfig& c) { return Json(c.*member); },
            [member](ModelConfig& c, const Json& j) { c.*member = j.get<T>(); }};
}

template <typename T>
Field optimizer_field(const char* key, T OptimizerConfig::*member) {
    return {key, [member](const ModelConfig& c) { return Json(c.optimizer.*member); },
            [member](ModelConfig& c, const Json& j) { c.optimizer.*member = j.get<T>(); }};
}

template <typename T>
Field gbt_field(const char* key, T GBTConfig::*member) {
    return {key, [member](const ModelConfig& c) { return Json(c.gbt.*member); },
            [member](ModelConfig& c, const Json& j) { c.gbt.*member = j.get<T>(); }};
}

const std::vector<Field>& fields() {
    static const std::vector<Field> all = {
        plain("units", &ModelConfig::units),
        plain("layers", &ModelConfig::layers),
        plain("blocks", &ModelConfig::blocks),
        plain("heads", &ModelConfig::heads),
        plain("ffn_dim", &ModelConfig::ffn_dim),
        plain("kernel_size", &ModelConfig::kernel_size),
        plain("dropout", &ModelConfig::dropout),
        plain("hyper_units1", &ModelConfig::hyper_units1),
        plain("hyper_units2", &ModelConfig::hyper_units2),
        {"optimizer", [](const ModelConfig& c) { return Json(to_string(c.optimizer.kind)); },
         [](ModelConfig& c, const Json& j) { c.optimizer.kind = optimizer_kind_from_string(j.get<std::string>()); }},
        optimizer_field("learning_rate", &OptimizerConfig::learning_rate),
        optimizer_field("weight_decay", &OptimizerConfig::weight_decay),
        optimizer_field("adam_beta1", &OptimizerConfig::adam_beta1),
        optimizer_field("adam_beta2", &OptimizerConfig::adam_beta2),
        optimizer_field("adam_epsilon", &OptimizerConfig::adam_epsilon),
        {"loss", [](const ModelConfig& c) { return Json(to_string(c.loss)); },
         [](ModelConfig& c, const Json& j) { c.loss = loss_kind_from_string(j.get<std::string>()); }},
        plain("batch_size", &ModelConfig::batch_size),
        plain("epoch_cap", &ModelConfig::epoch_cap),
        plain("patience", &ModelConfig::patience),
        plain("max_train_samples", &ModelConfig::max_train_samples),
        plain("num_features", &ModelConfig::num_features),
        plain("autoencoder_epoch_cap", &ModelConfig::autoencoder_epoch_cap),
        plain("autoencoder_learning_rate", &ModelConfig::autoencoder_learning_rate),
        gbt_field("gbt_learning_rate", &GBTConfig::learning_rate),
        gbt_field("gbt_colsample_bytree", &GBTConfig::colsample_bytree),
        gbt_field("gbt_reg_lambda", &GBTConfig::reg_lambda),
        gbt_field("gbt_subsample", &GBTConfig::subsample),
        gbt_field("gbt_max_depth", &GBTConfig::max_depth),
        gbt_field("gbt_rounds", &GBTConfig::n_rounds),
        gbt_field("gbt_min_child_weight", &GBTConfig::min_child_weight),
        gbt_field("gbt_early_stopping_rounds", &GBTConfig::early_stopping_rounds),
        plain("sgd_learning_rate", &ModelConfig::sgd_learning_rate),
        plain("sgd_epochs", &ModelConfig::sgd_epochs),
        plain("sgd_weight_decay", &ModelConfig::sgd_weight_decay),
        plain("seed", &ModelConfig::seed),
    };
    return all;
}

void apply_fields(ModelConfig& c, const Json& j) {
    if (!j.is_object()) throw std::invalid_argument("model config must be a JSON object");
    for (auto it = j.begin(); it != j.end(); ++it) {
        if (it.key() == "architecture") continue;
        bool found = false;
        for (const auto& f : fields())
            if (it.key() == f.key) {
                try {
                    f.set(c, it.value());
                } catch (const nlohmann::json::exception& e) {
                    throw std::invalid_argument("model config: bad value for '" + it.key() + "': " + e.what());
                }
                found = true;
                break;
            }
        if (!found) throw std::invalid_argument("model config: unknown key '" + it.key() + "'");
    }
}

}  // namespace

const char* architecture_id(Architecture a) {
    for (const auto& n : kNames)
        if (n.arch == a) return n.id;
    return "?";
}

const char* display_name(Architecture a) {
    for (const auto& n : kNames)
        if (n.arch == a) return n.display;
    return "?";
}

Architecture architecture_from_string(const std::string& s) {
    for (const auto& n : kNames)
        if (s == n.id || s == n.display) return n.arch;
    std::string known;
    for (const auto& n : kNames) known += std::string(known.empty() ? "" : ", ") + n.id;
    throw std::invalid_argument("unknown model '" + s + "' (known: " + known + ")");
}

bool is_neural(Architecture a) {
    return a != Architecture::MiniWSGD && a != Architecture::MiniWXGBoost && a != Architecture::MiniAutoEncXGBoost;
}

void ModelConfig::validate() const {
    auto positive = [](int v, const char* name) {
        if (v < 1) throw std::invalid_argument(std::string("model config: ") + name + " must be >= 1");
    };
    positive(units, "units");
    positive(layers, "layers");
    positive(blocks, "blocks");
    positive(heads, "heads");
    positive(ffn_dim, "ffn_dim");
    positive(kernel_size, "kernel_size");
    positive(hyper_units1, "hyper_units1");
    positive(hyper_units2, "hyper_units2");
    positive(batch_size, "batch_size");
    positive(epoch_cap, "epoch_cap");
    positive(patience, "patience");
    positive(num_features, "num_features");
    positive(autoencoder_epoch_cap, "autoencoder_epoch_cap");
    if (max_train_samples < 0) throw std::invalid_argument("model config: max_train_samples must be >= 0");
    if (sgd_epochs < 0) throw std::invalid_argument("model config: sgd_epochs must be >= 0");
    if (!(dropout >= 0.0 && dropout < 1.0)) throw std::invalid_argument("model config: dropout must lie in [0, 1)");
    if (architecture == Architecture::Transformer && units % heads != 0)
        throw std::invalid_argument("model config: d_model " + std::to_string(units) +
                                    " is not divisible by heads " + std::to_string(heads));
    if (!(autoencoder_learning_rate > 0.0) || !(sgd_learning_rate > 0.0))
        throw std::invalid_argument("model config: learning rates must be > 0");
    optimizer.validate();
    gbt.validate();
}

ModelConfig default_config(Architecture a) {
    ModelConfig c;
    c.architecture = a;
    c.optimizer.kind = OptimizerKind::SGD;
    switch (a) {
        case Architecture::MLP:
            c.units = 32;
            c.dropout = 0.1;
            c.optimizer.learning_rate = 0.004;
            break;
        case Architecture::TCN:
            c.units = 128;
            c.layers = 3;
            c.dropout = 0.5;
            c.optimizer.learning_rate = 0.01;
            c.loss = LossKind::MAE;
            break;
        case Architecture::RNN:
            c.dropout = 0.5;
            c.optimizer.learning_rate = 0.01;
            break;
        case Architecture::LSTM:
            c.dropout = 0.5;
            c.optimizer.learning_rate = 0.001;
            break;
        case Architecture::GRU:
            c.dropout = 0.1;
            c.optimizer.learning_rate = 0.004;
            break;
        case Architecture::AttentionLSTM:
            c.dropout = 0.5;
            c.optimizer.kind = OptimizerKind::Adam;
            c.optimizer.learning_rate = 0.01;
            break;
        case Architecture::Transformer:
            c.units = 64;
            c.layers = 2;
            c.heads = 2;
            c.ffn_dim = 128;
            c.dropout = 0.1;
            c.optimizer.learning_rate = 0.001;
            break;
        case Architecture::NBeats:
            c.units = 512;
            c.layers = 4;
            c.blocks = 6;
            c.optimizer.learning_rate = 0.001;
            break;
        case Architecture::ARNet:
            c.layers = 2;
            c.optimizer.learning_rate = 0.001;
            break;
        case Architecture::HyperNetLSTM:
            c.dropout = 0.1;
            c.optimizer.learning_rate = 0.01;
            break;
        case Architecture::MiniWSGD:
        case Architecture::MiniWXGBoost:
            break;
        case Architecture::MiniAutoEncXGBoost:
            c.optimizer.kind = OptimizerKind::AdamW;
            c.optimizer.learning_rate = 1e-4;
            break;
    }
    return c;
}

nlohmann::ordered_json to_json(const ModelConfig& c) {
    nlohmann::ordered_json j;
    j["architecture"] = architecture_id(c.architecture);
    for (const auto& f : fields()) j[f.key] = f.get(c);
    return j;
}

ModelConfig config_from_json(const nlohmann::json& j) {
    if (!j.is_object() || !j.contains("architecture"))
        throw std::invalid_argument("model config: missing 'architecture'");
    ModelConfig c = default_config(architecture_from_string(j.at("architecture").get<std::string>()));
    apply_fields(c, j);
    c.validate();
    return c;
}

void apply_overrides(ModelConfig& c, const nlohmann::json& overrides) {
    if (overrides.contains("architecture") &&
        architecture_from_string(overrides.at("architecture").get<std::string>()) != c.architecture)
        throw std::invalid_argument("model config: overrides may not change the architecture");
    apply_fields(c, overrides);
    c.validate();
}

}  // namespace efbench
