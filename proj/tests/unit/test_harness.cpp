#include "doctest.h"

#include "efbench/csv.hpp"
#include "efbench/experiment.hpp"
#include "efbench/persistence.hpp"
#include "fixtures.hpp"

#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>

using namespace efbench;
namespace fs = std::filesystem;

namespace {

const WindowedDataset& data() {
    static const WindowedDataset d = efbench::testing::synthetic_dataset(24 * 40, 5);
    return d;
}

ModelConfig quick_mlp() {
    auto cfg = default_config(Architecture::MLP);
    cfg.epoch_cap = 3;
    cfg.max_train_samples = 128;
    cfg.units = 8;
    cfg.seed = 4;
    return cfg;
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

fs::path scratch(const std::string& name) {
    const auto dir = fs::temp_directory_path() / ("efbench_harness_" + name);
    fs::remove_all(dir);
    return dir;
}

}  // namespace

TEST_CASE("search space enumeration") {
    const auto space = transformer_search_space();
    CHECK(space.size() == 4 * 3 * 3 * 3 * 3 * 2);
    CHECK(space.size() == 648);
    CHECK(space.point(0) == nlohmann::json{{"layers", 1}, {"ffn_dim", 128}, {"heads", 2}, {"learning_rate", 0.1},
                                           {"optimizer", "Adam"}, {"loss", "MSE"}});
    CHECK(space.point(1).at("loss") == "MAE");
    CHECK(space.point(2).at("optimizer") == "SGD");
    CHECK(space.point(647) == nlohmann::json{{"layers", 6}, {"ffn_dim", 512}, {"heads", 6}, {"learning_rate", 0.004},
                                             {"optimizer", "AdamW"}, {"loss", "MAE"}});
    CHECK_THROWS_AS(space.point(648), std::out_of_range);

    // Every point is distinct.
    std::set<std::string> seen;
    for (std::size_t i = 0; i < space.size(); ++i) seen.insert(space.point(i).dump());
    CHECK(seen.size() == 648);

    // Round trip keeps axis order.
    const auto back = SearchSpace::from_json(space.to_json());
    CHECK(back.size() == 648);
    CHECK(back.point(100) == space.point(100));

    CHECK(SearchSpace{}.size() == 1);
    CHECK_THROWS_AS(SearchSpace::from_json(nlohmann::ordered_json{{"units", nlohmann::json::array()}}),
                    std::invalid_argument);
    CHECK_THROWS_AS(SearchSpace::from_json(nlohmann::ordered_json{{"units", 3}}), std::invalid_argument);
    CHECK_THROWS_AS(SearchSpace::from_json(nlohmann::ordered_json{{"architecture", {"lstm"}}}),
                    std::invalid_argument);
    CHECK_THROWS_AS(load_search_space("/nonexistent/space.json"), std::invalid_argument);
}

TEST_CASE("property: point(i) decodes the mixed-radix index") {
    Rng rng(12);
    for (int trial = 0; trial < 20; ++trial) {
        SearchSpace s;
        const int axes = 1 + static_cast<int>(rng.below(4));
        for (int a = 0; a < axes; ++a) {
            std::vector<nlohmann::json> values;
            const int n = 1 + static_cast<int>(rng.below(4));
            for (int v = 0; v < n; ++v) values.push_back(v);
            s.axes.emplace_back("k" + std::to_string(a), values);
        }
        for (std::size_t i = 0; i < s.size(); ++i) {
            std::size_t rebuilt = 0;
            for (const auto& [key, values] : s.axes) rebuilt = rebuilt * values.size() + s.point(i).at(key).get<std::size_t>();
            CHECK(rebuilt == i);
        }
    }
}

TEST_CASE("grid search ranks runs and is independent of the worker count") {
    SearchSpace space;
    space.axes = {{"units", {8, 16}}, {"learning_rate", {0.001, 0.004}}};
    const auto serial = grid_search(space, quick_mlp(), data(), 1);
    const auto parallel = grid_search(space, quick_mlp(), data(), 3);
    REQUIRE(serial.ranked.size() == 4);
    CHECK(serial.failed.empty());
    CHECK(serial.space_size == 4);
    for (std::size_t i = 0; i < 4; ++i) {
        const auto& a = serial.ranked[i];
        const auto& b = parallel.ranked[i];
        CHECK(a.index == b.index);
        CHECK(a.selection_loss == b.selection_loss);
        CHECK(a.result.history.validation_loss == b.result.history.validation_loss);
        CHECK(a.result.config.units == a.point.at("units").get<int>());
        CHECK(a.result.history.epochs_run <= 3);
        if (i > 0) CHECK(serial.ranked[i - 1].selection_loss <= a.selection_loss);
    }
}

TEST_CASE("singleton and duplicate points") {
    SearchSpace one;
    one.axes = {{"units", {8}}};
    CHECK(grid_search(one, quick_mlp(), data(), 1).ranked.size() == 1);

    // Identical configs with the same seed give identical runs; the tie goes
    // to the earlier point.
    SearchSpace twice;
    twice.axes = {{"units", {8, 8}}};
    const auto r = grid_search(twice, quick_mlp(), data(), 2);
    REQUIRE(r.ranked.size() == 2);
    CHECK(r.ranked[0].index == 0);
    CHECK(r.ranked[1].index == 1);
    CHECK(r.ranked[0].selection_loss == r.ranked[1].selection_loss);
    CHECK(r.ranked[0].result.history.train_loss == r.ranked[1].result.history.train_loss);

    CHECK(grid_search(SearchSpace{}, quick_mlp(), data(), 1).ranked.size() == 1);
}

TEST_CASE("failed runs are recorded and skipped") {
    SearchSpace space;
    space.axes = {{"learning_rate", {1e6, 0.004}}, {"optimizer", {"SGD"}}};
    auto base = quick_mlp();
    base.epoch_cap = 20;
    const auto r = grid_search(space, base, data(), 1);
    CHECK(r.ranked.size() + r.failed.size() == 2);
    REQUIRE(r.failed.size() == 1);
    CHECK(r.failed[0].index == 0);
    CHECK_FALSE(r.failed[0].result.error.empty());

    // Invalid points (heads not dividing the model width) fail the same way.
    SearchSpace heads;
    heads.axes = {{"heads", {6, 2}}};
    auto t = default_config(Architecture::Transformer);
    t.epoch_cap = 1;
    t.max_train_samples = 64;
    t.units = 16;
    t.ffn_dim = 16;
    const auto h = grid_search(heads, t, data(), 1);
    CHECK(h.ranked.size() == 1);
    CHECK(h.failed.size() == 1);

    SearchSpace bad;
    bad.axes = {{"learning_rate", {1e6, 1e7}}, {"optimizer", {"SGD"}}};
    CHECK_THROWS_AS(grid_search(bad, base, data(), 1), GridSearchError);
    try {
        grid_search(bad, base, data(), 1);
    } catch (const GridSearchError& e) {
        CHECK(std::string(e.what()).find("#1") != std::string::npos);
    }

    const auto dir = scratch("grid");
    write_grid_results(r, space, dir);
    const auto ranked = parse_csv(slurp(dir / "grid_results.csv"));
    CHECK(ranked.header.front() == "rank");
    CHECK(ranked.rows.size() == 1);
    const auto failed = parse_csv(slurp(dir / "grid_failures.csv"));
    CHECK(failed.rows.size() == 1);
    const auto j = nlohmann::json::parse(slurp(dir / "grid_results.json"));
    CHECK(j.at("runs").size() == 2);
    CHECK(j.at("failed") == 1);
    fs::remove_all(dir);
}

TEST_CASE("experiment: two models, determinism, failures") {
    const auto dir = scratch("experiment");
    nlohmann::ordered_json j = {
        {"dataset", {{"synthetic", {{"profile", "residence"}, {"hours", 24 * 40}, {"seed", 3}}}}},
        {"seed", 9},
        {"output_dir", dir.string()},
        {"threads", 1},
        {"defaults", {{"epoch_cap", 2}, {"max_train_samples", 128}, {"sgd_epochs", 2}}},
        {"models", {{{"architecture", "mlp"}, {"config", {{"units", 8}}}}, "miniwsgd"}},
    };
    const auto manifest = parse_manifest(j);
    CHECK(manifest.models.size() == 2);
    CHECK(manifest.models[0].name == "MLP");
    CHECK(manifest.models[1].config.architecture == Architecture::MiniWSGD);

    const auto first = run_experiment(manifest);
    CHECK_FALSE(first.any_failed());
    CHECK(fs::exists(dir / "models" / "MLP.efb"));
    CHECK(fs::exists(dir / "models" / "MiniWSGD.efb"));
    CHECK(fs::exists(dir / "predictions" / "MiniWSGD.csv"));
    CHECK(fs::exists(dir / "forecast.svg"));
    const auto metrics = slurp(dir / "metrics.csv");
    const auto seasons = score(persistence_baseline(prepare_dataset(load_dataset(manifest.dataset, 9)))).size();
    CHECK(parse_csv(metrics).rows.size() == 3 * seasons);
    const auto summary = nlohmann::json::parse(slurp(dir / "summary.json"));
    CHECK(summary.at("models").size() == 2);
    CHECK(summary.at("models")[0].at("status") == "ok");

    // The saved model reproduces the reported predictions.
    const TrainedModel back = load_model(dir / "models" / "MLP.efb");
    CHECK(back.config.seed == model_seed(9, "MLP"));

    const auto preds = slurp(dir / "predictions" / "MLP.csv");
    run_experiment(manifest);
    CHECK(slurp(dir / "metrics.csv") == metrics);
    CHECK(slurp(dir / "predictions" / "MLP.csv") == preds);

    // A failing model is reported without stopping the rest.
    j["models"] = {{{"architecture", "mlp"}, {"config", {{"learning_rate", 1e6}, {"optimizer", "SGD"}, {"epoch_cap", 20}}}},
                   {{"architecture", "mlp"}, {"name", "SmallMLP"}, {"config", {{"units", 8}}}}};
    const auto mixed = run_experiment(parse_manifest(j));
    CHECK(mixed.any_failed());
    CHECK(mixed.models[0].failed);
    CHECK_FALSE(mixed.models[1].failed);
    CHECK(parse_csv(slurp(dir / "metrics.csv")).rows.size() == 2 * seasons);
    fs::remove_all(dir);
}

TEST_CASE("manifest validation") {
    const nlohmann::ordered_json good = {
        {"dataset", {{"synthetic", {{"hours", 100}}}}},
        {"models", {"lstm"}},
    };
    CHECK_NOTHROW(parse_manifest(good));

    auto j = good;
    j["dataset"] = {{"csv", "/definitely/not/here.csv"}};
    CHECK_THROWS_AS(parse_manifest(j), std::invalid_argument);
    j = good;
    j["dataset"]["synthetic"]["hours"] = 47;
    CHECK_THROWS_AS(parse_manifest(j), std::invalid_argument);
    j = good;
    j["colour"] = "blue";
    CHECK_THROWS_AS(parse_manifest(j), std::invalid_argument);
    j = good;
    j["models"] = {"lstm", "lstm"};
    CHECK_THROWS_AS(parse_manifest(j), std::invalid_argument);
    j = good;
    j["models"] = {"lstmm"};
    CHECK_THROWS_AS(parse_manifest(j), std::invalid_argument);
    j = good;
    j["models"] = {{{"architecture", "lstm"}, {"config", {{"units", -1}}}}};
    CHECK_THROWS_AS(parse_manifest(j), std::invalid_argument);
    j = good;
    j["models"] = nlohmann::json::array();
    CHECK_THROWS_AS(parse_manifest(j), std::invalid_argument);
    CHECK_THROWS_AS(load_manifest("/no/such/manifest.json"), std::invalid_argument);
}
