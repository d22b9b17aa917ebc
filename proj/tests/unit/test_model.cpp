#include "doctest.h"

#include "efbench/persistence.hpp"
#include "fixtures.hpp"

#include <filesystem>

using namespace efbench;

namespace {

const WindowedDataset& data() {
    static const WindowedDataset d = efbench::testing::synthetic_dataset(24 * 50, 4);
    return d;
}

/// Defaults shrunk so every architecture fits in well under a second.
ModelConfig quick(Architecture a) {
    auto cfg = default_config(a);
    cfg.epoch_cap = 2;
    cfg.max_train_samples = 128;
    cfg.seed = 21;
    cfg.gbt.n_rounds = 5;
    cfg.gbt.max_depth = 3;
    cfg.sgd_epochs = 2;
    cfg.autoencoder_epoch_cap = 2;
    if (a == Architecture::NBeats) cfg.units = 32;
    return cfg;
}

Tensor test_windows() { return data().gather_inputs(data().indices(Split::Test)); }

}  // namespace

TEST_CASE("every architecture survives save and load bit-exactly") {
    const Tensor x = test_windows();
    for (auto a : kAllArchitectures) {
        CAPTURE(display_name(a));
        const TrainedModel m = fit_model(quick(a), data(), 1);
        const Tensor y = m.predict(x, 1);
        CHECK(y.shape() == Shape{x.dim(0), 24});
        CHECK(y.all_finite());
        const std::string bytes = serialize_model(m);
        CHECK(bytes.substr(0, 8) == "EFBENCH1");
        const TrainedModel back = deserialize_model(bytes);
        CHECK(back.config.architecture == a);
        CHECK(to_json(back.config) == to_json(m.config));
        CHECK(back.scaler == m.scaler);
        CHECK(back.predict(x, 1) == y);
        CHECK(back.predict_kwh(x, 1) == m.predict_kwh(x, 1));
        CHECK(serialize_model(back) == bytes);
    }
}

TEST_CASE("ensemble feature widths") {
    CHECK(ensemble_feature_width(default_config(Architecture::MiniAutoEncXGBoost)) == 544);
    CHECK(ensemble_feature_width(default_config(Architecture::MiniWXGBoost)) == 512);
    const TrainedModel m = fit_model(quick(Architecture::MiniAutoEncXGBoost), data(), 1);
    const Tensor x = test_windows();
    const auto f = m.ensemble_features(x, 1);
    CHECK(f.cols() == 544);
    CHECK(f == m.ensemble_features(x, 1));
    CHECK(m.regressor->outputs() == 24);
    CHECK(m.summary.autoencoder_initial_loss.has_value());
}

TEST_CASE("corrupt model files are rejected") {
    const TrainedModel m = fit_model(quick(Architecture::MLP), data(), 1);
    const std::string bytes = serialize_model(m);
    for (std::size_t cut : {std::size_t{3}, std::size_t{8}, std::size_t{20}, bytes.size() / 2, bytes.size() - 1})
        CHECK_THROWS_AS(deserialize_model(std::string_view(bytes).substr(0, cut)), ModelFileError);

    std::string bad = bytes;
    bad[0] = 'X';
    CHECK_THROWS_AS(deserialize_model(bad), ModelVersionError);
    bad = bytes;
    bad[8] = 2;
    CHECK_THROWS_AS(deserialize_model(bad), ModelVersionError);
    CHECK_THROWS_AS(deserialize_model(bytes + "x"), ModelFileError);

    // A header whose config implies different parameter shapes.
    std::string tampered = bytes;
    const auto at = tampered.find("\"units\":32");
    REQUIRE(at != std::string::npos);
    tampered.replace(at, 10, "\"units\":31");
    CHECK_THROWS_AS(deserialize_model(tampered), ModelFileError);
}

TEST_CASE("model files on disk") {
    const auto path = std::filesystem::temp_directory_path() / "efbench_test_model.bin";
    const TrainedModel m = fit_model(quick(Architecture::GRU), data(), 1);
    save_model(m, path);
    const TrainedModel back = load_model(path);
    CHECK(back.predict(test_windows()) == m.predict(test_windows()));
    std::filesystem::remove(path);
    CHECK_THROWS(load_model(path));
}
