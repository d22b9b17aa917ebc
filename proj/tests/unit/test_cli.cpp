#include "doctest.h"

#include "cli.hpp"
#include "efbench/csv.hpp"

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>

namespace fs = std::filesystem;
using efbench::cli::run;

namespace {

struct Outcome {
    int code;
    std::string out, err;
};

Outcome invoke(std::vector<std::string> args) {
    std::ostringstream out, err;
    const int code = run(args, out, err);
    return {code, out.str(), err.str()};
}

fs::path scratch(const std::string& name) {
    const auto dir = fs::temp_directory_path() / ("efbench_cli_" + name);
    fs::remove_all(dir);
    fs::create_directories(dir);
    return dir;
}

void write_text(const fs::path& p, const std::string& text) { std::ofstream(p) << text; }

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

}  // namespace

TEST_CASE("help documents every flag of every subcommand") {
    efbench::cli::Options opts;
    auto app = efbench::cli::make_app(opts);
    std::set<std::string> names;
    std::vector<CLI::App*> apps{app.get()};
    for (auto* sub : app->get_subcommands({})) {
        names.insert(sub->get_name());
        apps.push_back(sub);
    }
    CHECK(names == std::set<std::string>{"synth", "ingest", "train", "grid-search", "evaluate", "report", "run"});
    for (auto* a : apps) {
        CAPTURE(a->get_name());
        const std::string help = a->help();
        CHECK_FALSE(a->get_description().empty());
        for (const auto* opt : a->get_options()) {
            CAPTURE(opt->get_name());
            CHECK_FALSE(opt->get_description().empty());
            for (const auto& l : opt->get_lnames()) CHECK(help.find("--" + l) != std::string::npos);
            CHECK(opt->get_snames().size() <= 1);  // only -h
        }
        if (a != app.get())
            for (const char* global : {"--seed", "--output-dir", "--threads"}) CHECK(help.find(global) != std::string::npos);
    }

    for (const char* sub : {"synth", "ingest", "train", "grid-search", "evaluate", "report", "run"}) {
        const auto r = invoke({sub, "--help"});
        CHECK(r.code == 0);
        CHECK(r.out.find("Usage") != std::string::npos);
    }
}

TEST_CASE("validation errors exit 1 with a one-line diagnostic") {
    const auto dir = scratch("validation");
    auto r = invoke({"synth", "--hours", "47", "--out", (dir / "x.csv").string(), "--seed", "1"});
    CHECK(r.code == 1);
    CHECK(r.err.find("need ≥ 48 hours") != std::string::npos);
    CHECK(std::count(r.err.begin(), r.err.end(), '\n') == 1);
    CHECK(r.out.empty());

    CHECK(invoke({"synth", "--hours", "100", "--out", (dir / "x.csv").string(), "--frobnicate"}).code == 1);
    CHECK(invoke({}).code == 1);
    CHECK(invoke({"explode"}).code == 1);
    CHECK(invoke({"train", "--model", "lstm"}).code == 1);  // --data missing
    CHECK(invoke({"run", "--manifest", (dir / "absent.json").string()}).code == 1);

    write_text(dir / "not_a_model.efb", "hello");
    write_text(dir / "data.csv", "timestamp,temperature,energy\n");
    r = invoke({"evaluate", "--model-file", (dir / "not_a_model.efb").string(), "--data", (dir / "data.csv").string()});
    CHECK(r.code == 1);
    CHECK(r.err.find("efbench: error:") != std::string::npos);

    write_text(dir / "bad.json", R"({"dataset": {"csv": "missing.csv"}, "models": ["lstm"]})");
    r = invoke({"run", "--manifest", (dir / "bad.json").string(), "--seed", "1"});
    CHECK(r.code == 1);
    CHECK(r.err.find("missing.csv") != std::string::npos);
    fs::remove_all(dir);
}

TEST_CASE("global flags, seeds and the thread fallback") {
    {
        efbench::cli::Options opts;
        auto app = efbench::cli::make_app(opts);
        setenv("EFBENCH_THREADS", "3", 1);
        app->parse(std::string("synth --hours 48 --out x.csv"), false);
        CHECK(opts.threads == 3);
        unsetenv("EFBENCH_THREADS");
    }
    {
        efbench::cli::Options opts;
        auto app = efbench::cli::make_app(opts);
        setenv("EFBENCH_THREADS", "3", 1);
        app->parse(std::string("--seed 7 synth --threads 2 --hours 48 --out x.csv"), false);
        CHECK(opts.threads == 2);
        CHECK(opts.seed == std::optional<std::uint64_t>(7));
        unsetenv("EFBENCH_THREADS");
    }

    const auto dir = scratch("seed");
    const auto a = dir / "a.csv", b = dir / "b.csv", c = dir / "c.csv";
    auto r = invoke({"synth", "--hours", "72", "--out", a.string()});
    CHECK(r.code == 0);
    CHECK(r.err.find("(random)") != std::string::npos);
    CHECK(r.err.find("resolved config:") != std::string::npos);
    CHECK(invoke({"--seed", "4", "synth", "--hours", "72", "--out", b.string()}).code == 0);
    CHECK(invoke({"synth", "--hours", "72", "--out", c.string(), "--seed", "4"}).code == 0);
    CHECK(slurp(b) == slurp(c));
    CHECK(efbench::parse_csv(slurp(b)).rows.size() == 72);
    fs::remove_all(dir);
}

TEST_CASE("train, evaluate, grid-search and run") {
    const auto dir = scratch("pipeline");
    const auto data = (dir / "data.csv").string();
    REQUIRE(invoke({"synth", "--hours", "1000", "--out", data, "--seed", "2"}).code == 0);
    REQUIRE(invoke({"ingest", "--csv", data, "--impute-gap", "3", "--output-dir", (dir / "ing").string()}).code == 0);
    CHECK(fs::exists(dir / "ing" / "frame.csv"));

    write_text(dir / "quick.json", R"({"epoch_cap": 2, "max_train_samples": 128})");
    auto r = invoke({"train", "--model", "hypernet_lstm", "--config", (dir / "quick.json").string(), "--data", data,
                     "--output-dir", (dir / "train").string(), "--seed", "3"});
    CHECK(r.code == 0);
    CHECK(r.out.empty());
    const auto model = dir / "train" / "models" / "HyperNetLSTM.efb";
    CHECK(fs::exists(model));
    CHECK(fs::exists(dir / "train" / "metrics.csv"));
    CHECK(fs::exists(dir / "train" / "forecast.svg"));

    r = invoke({"evaluate", "--model-file", model.string(), "--data", data, "--output-dir", (dir / "eval").string()});
    CHECK(r.code == 0);
    // Re-scoring the saved model reproduces the training run's report rows.
    CHECK(slurp(dir / "eval" / "metrics.csv") == slurp(dir / "train" / "metrics.csv"));
    CHECK(invoke({"report", "--model-files", model.string(), "--data", data, "--output-dir", (dir / "rep").string()}).code == 0);

    write_text(dir / "space.json", R"({"units": [4, 8]})");
    r = invoke({"grid-search", "--space", (dir / "space.json").string(), "--model", "mlp", "--config",
                (dir / "quick.json").string(), "--data", data, "--output-dir", (dir / "grid").string(), "--seed", "3"});
    CHECK(r.code == 0);
    CHECK(efbench::parse_csv(slurp(dir / "grid" / "grid" / "MLP" / "grid_results.csv")).rows.size() == 2);

    write_text(dir / "manifest.json", R"({
        "dataset": {"csv": "data.csv"},
        "defaults": {"epoch_cap": 2, "max_train_samples": 128, "gbt_rounds": 3, "gbt_max_depth": 2},
        "models": ["gru", "miniwxgboost"],
        "output_dir": "run"
    })");
    const auto manifest = (dir / "manifest.json").string();
    REQUIRE(invoke({"run", "--manifest", manifest, "--seed", "8"}).code == 0);
    const auto first = slurp(dir / "run" / "metrics.csv");
    const auto preds = slurp(dir / "run" / "predictions" / "MiniWXGBoost.csv");
    REQUIRE(invoke({"run", "--manifest", manifest, "--seed", "8", "--threads", "2"}).code == 0);
    CHECK(slurp(dir / "run" / "metrics.csv") == first);
    CHECK(slurp(dir / "run" / "predictions" / "MiniWXGBoost.csv") == preds);

    // A model that diverges is a runtime failure: exit 2, other artifacts kept.
    write_text(dir / "diverge.json", R"({
        "dataset": {"csv": "data.csv"},
        "models": [{"architecture": "mlp", "config": {"optimizer": "SGD", "learning_rate": 1e6, "epoch_cap": 20}}, "arnet"],
        "defaults": {"epoch_cap": 2},
        "output_dir": "diverge"
    })");
    r = invoke({"run", "--manifest", (dir / "diverge.json").string(), "--seed", "1"});
    CHECK(r.code == 2);
    CHECK(r.err.find("MLP failed") != std::string::npos);
    CHECK(fs::exists(dir / "diverge" / "models" / "ARFFNN.efb"));
    fs::remove_all(dir);
}
