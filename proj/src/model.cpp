#include "efbench/model.hpp"

#include <stdexcept>

namespace efbench {

using Index = Eigen::Index;

Index ensemble_feature_width(const ModelConfig& cfg) {
    return cfg.num_features + (cfg.architecture == Architecture::MiniAutoEncXGBoost ? kLatentDim : 0);
}

RowMajorMatrix TrainedModel::ensemble_features(const Tensor& windows, std::size_t threads) const {
    if (!minirocket) throw std::logic_error(std::string(display_name(config.architecture)) + ": MiniRocket is not fitted");
    const Tensor series = to_channel_major(windows);
    const RowMajorMatrix rocket = minirocket_transform(*minirocket, series, threads);
    if (config.architecture != Architecture::MiniAutoEncXGBoost) return rocket;
    if (!autoencoder) throw std::logic_error("MiniAutoEncXGBoost: autoencoder is not fitted");
    RowMajorMatrix out(rocket.rows(), kLatentDim + rocket.cols());
    out.leftCols(kLatentDim) = autoencoder->encode(series);
    out.rightCols(rocket.cols()) = rocket;
    return out;
}

Tensor TrainedModel::predict(const Tensor& windows, std::size_t threads) const {
    if (windows.rank() != 3 || windows.dim(1) != kInputSteps || windows.dim(2) != kInputFeatures)
        throw ShapeError("predict: expected windows (samples,24,6), got " + shape_str(windows.shape()));
    if (is_neural(config.architecture)) {
        if (!network) throw std::logic_error(std::string(display_name(config.architecture)) + ": network is not fitted");
        return network->predict(windows);
    }
    if (!regressor) throw std::logic_error(std::string(display_name(config.architecture)) + ": regressor is not fitted");
    const Eigen::MatrixXd y = regressor->predict(ensemble_features(windows, threads));
    Tensor out({y.rows(), y.cols()});
    out.matrix() = y;
    return out;
}

Tensor TrainedModel::predict_kwh(const Tensor& windows, std::size_t threads) const {
    Tensor y = predict(windows, threads);
    for (Index i = 0; i < y.size(); ++i) y[i] = scaler.inverse(y[i], kEnergy);
    return y;
}

Index parameter_count(const TrainedModel& m) {
    if (m.network) return m.network->parameter_count();
    Index n = 0;
    if (m.autoencoder)
        for (const auto& p : m.autoencoder->parameters()) n += p.value.size();
    if (m.regressor) {
        for (const auto& l : m.regressor->linear) n += l.weights.size() + 1;
        for (const auto& g : m.regressor->trees) {
            n += 1;  // base score
            for (const auto& t : g.trees) n += static_cast<Index>(t.nodes.size());
        }
    }
    return n;
}

namespace {

void copy_history(TrainingSummary& s, const TrainingHistory& h) {
    s.epochs_run = h.epochs_run;
    s.best_epoch = h.best_epoch;
    s.best_validation = h.best_validation;
    s.stopped_early = h.stopped_early;
    s.train_loss = h.train_loss;
    s.validation_loss = h.validation_loss;
}

RowMajorMatrix as_rows(const Tensor& t) { return t.matrix(); }

void fit_ensemble(TrainedModel& m, const WindowedDataset& data, std::size_t threads) {
    const ModelConfig& cfg = m.config;
    const auto train_rows = [&] {
        const auto all = data.indices(Split::Train);
        const auto pick = strided_subset(static_cast<Index>(all.size()), cfg.max_train_samples);
        std::vector<Index> rows;
        for (Index i : pick) rows.push_back(all[static_cast<std::size_t>(i)]);
        return rows;
    }();
    const auto val_rows = data.indices(Split::Validation);
    const Tensor train_x = data.gather_inputs(train_rows);
    const Tensor train_y = data.gather_targets(train_rows);
    const Tensor val_x = data.gather_inputs(val_rows);
    const Tensor val_y = data.gather_targets(val_rows);

    MiniRocketConfig mr;
    mr.num_features = cfg.num_features;
    mr.seed = Rng(cfg.seed).split("minirocket").seed();
    m.minirocket = minirocket_fit(to_channel_major(train_x), mr);

    if (cfg.architecture == Architecture::MiniAutoEncXGBoost) {
        m.autoencoder.emplace(Rng(cfg.seed).split("autoencoder").seed());
        AutoencoderTraining at;
        at.optimizer = cfg.optimizer;
        at.optimizer.learning_rate = cfg.autoencoder_learning_rate;
        at.batch_size = cfg.batch_size;
        at.stopping = {cfg.autoencoder_epoch_cap, cfg.patience, 1e-9};
        at.seed = Rng(cfg.seed).split("autoencoder-train").seed();
        const auto h = train_autoencoder(*m.autoencoder, to_channel_major(train_x), to_channel_major(val_x), at);
        m.summary.autoencoder_initial_loss = h.initial_loss;
        m.summary.autoencoder_loss = h.history.validation_loss;
    }

    const RowMajorMatrix f_train = m.ensemble_features(train_x, threads);
    const RowMajorMatrix f_val = m.ensemble_features(val_x, threads);
    MultiOutputConfig mo;
    mo.seed = Rng(cfg.seed).split("regressor").seed();
    mo.threads = threads;
    mo.gbt = cfg.gbt;
    mo.sgd = {cfg.sgd_learning_rate, cfg.sgd_epochs, cfg.sgd_weight_decay, cfg.batch_size, 0};
    const Eigen::MatrixXd ty = as_rows(train_y), vy = as_rows(val_y);
    if (cfg.architecture == Architecture::MiniWSGD) {
        mo.kind = RegressorKind::SGD;
        m.regressor = multi_output_fit(f_train, ty, mo);
    } else {
        mo.kind = RegressorKind::GBT;
        m.regressor = multi_output_fit(f_train, ty, mo, &f_val, &vy);
        for (const auto& t : m.regressor->trees) m.summary.rounds_kept.push_back(static_cast<int>(t.trees.size()));
    }
    const Tensor train_pred = m.predict(train_x, threads);
    const Tensor val_pred = m.predict(val_x, threads);
    m.summary.train_loss = {mse(train_pred, train_y)};
    m.summary.validation_loss = {mse(val_pred, val_y)};
    m.summary.best_validation = m.summary.validation_loss.front();
    m.summary.epochs_run = m.summary.best_epoch = 1;
}

}  // namespace

TrainedModel fit_model(const ModelConfig& cfg, const WindowedDataset& data, std::size_t threads) {
    cfg.validate();
    TrainedModel m;
    m.config = cfg;
    m.scaler = data.scaler;
    if (data.indices(Split::Train).empty() || data.indices(Split::Validation).empty())
        throw std::invalid_argument("dataset needs non-empty training and validation splits");
    if (is_neural(cfg.architecture)) {
        m.network = make_network(cfg);
        const auto train = data.indices(Split::Train), val = data.indices(Split::Validation);
        const TrainData d{data.gather_inputs(train), data.gather_targets(train), data.gather_inputs(val),
                          data.gather_targets(val)};
        copy_history(m.summary, train_network(*m.network, d).history);
    } else {
        fit_ensemble(m, data, threads);
    }
    return m;
}

}  // namespace efbench
