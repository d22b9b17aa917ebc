#include "efbench/grid_search.hpp"

#include "efbench/evaluation.hpp"
#include "efbench/model.hpp"
#include "efbench/parallel.hpp"

#include <algorithm>
#include <chrono>
#include <fstream>
#include <sstream>

namespace efbench {

std::size_t SearchSpace::size() const {
    std::size_t n = 1;
    for (const auto& [key, values] : axes) n *= values.size();
    return n;
}

nlohmann::json SearchSpace::point(std::size_t index) const {
    if (index >= size()) throw std::out_of_range("search space point " + std::to_string(index) + " out of range");
    nlohmann::json p = nlohmann::json::object();
    for (auto a = axes.rbegin(); a != axes.rend(); ++a) {
        p[a->first] = a->second[index % a->second.size()];
        index /= a->second.size();
    }
    return p;
}

SearchSpace SearchSpace::from_json(const nlohmann::ordered_json& j) {
    if (!j.is_object()) throw std::invalid_argument("search space: document must be an object of value lists");
    SearchSpace s;
    for (auto it = j.begin(); it != j.end(); ++it) {
        if (it.key() == "architecture") throw std::invalid_argument("search space: 'architecture' cannot be searched");
        if (!it.value().is_array() || it.value().empty())
            throw std::invalid_argument("search space: '" + it.key() + "' needs a non-empty list of values");
        std::vector<nlohmann::json> values;
        for (const auto& v : it.value()) values.push_back(nlohmann::json::parse(v.dump()));
        s.axes.emplace_back(it.key(), std::move(values));
    }
    return s;
}

nlohmann::ordered_json SearchSpace::to_json() const {
    nlohmann::ordered_json j = nlohmann::ordered_json::object();
    for (const auto& [key, values] : axes) {
        auto& list = j[key] = nlohmann::ordered_json::array();
        for (const auto& v : values) list.push_back(nlohmann::ordered_json::parse(v.dump()));
    }
    return j;
}

SearchSpace transformer_search_space() {
    SearchSpace s;
    s.axes = {
        {"layers", {1, 2, 4, 6}},
        {"ffn_dim", {128, 256, 512}},
        {"heads", {2, 4, 6}},
        {"learning_rate", {0.1, 0.001, 0.004}},
        {"optimizer", {"Adam", "SGD", "AdamW"}},
        {"loss", {"MSE", "MAE"}},
    };
    return s;
}

SearchSpace load_search_space(const std::string& source) {
    if (source == "transformer") return transformer_search_space();
    std::ifstream in(source);
    if (!in) throw std::invalid_argument("search space: cannot open " + source);
    nlohmann::ordered_json j;
    try {
        j = nlohmann::ordered_json::parse(in);
    } catch (const nlohmann::json::exception& e) {
        throw std::invalid_argument("search space: " + source + ": " + e.what());
    }
    return SearchSpace::from_json(j);
}

namespace {

double seconds_since(std::chrono::steady_clock::time_point t0) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

GridRun run_point(const SearchSpace& space, std::size_t index, const ModelConfig& base, const WindowedDataset& data,
                  const std::vector<Eigen::Index>& val_rows, const Tensor& val_inputs, const Tensor& val_targets) {
    GridRun run;
    run.index = index;
    run.point = space.point(index);
    run.result.config = base;
    const auto t0 = std::chrono::steady_clock::now();
    try {
        apply_overrides(run.result.config, run.point);
        const TrainedModel m = fit_model(run.result.config, data, 1);
        const auto& s = m.summary;
        run.result.history.train_loss = s.train_loss;
        run.result.history.validation_loss = s.validation_loss;
        run.result.history.epochs_run = s.epochs_run;
        run.result.history.best_epoch = s.best_epoch;
        run.result.history.best_validation = s.best_validation;
        run.result.history.stopped_early = s.stopped_early;
        run.result.parameters = parameter_count(m);
        run.selection_loss = val_rows.empty() ? s.best_validation : mse(m.predict(val_inputs, 1), val_targets);
        if (!std::isfinite(run.selection_loss)) throw TrainingDiverged("validation loss is not finite");
    } catch (const std::exception& e) {
        run.result.failed = true;
        run.result.error = e.what();
    }
    run.result.wall_seconds = seconds_since(t0);
    return run;
}

std::string point_label(const nlohmann::json& p) { return p.dump(); }

}  // namespace

GridSearchResult grid_search(const SearchSpace& space, const ModelConfig& base, const WindowedDataset& data,
                             std::size_t threads) {
    const std::size_t n = space.size();
    if (n == 0) throw std::invalid_argument("grid search: empty search space");
    base.validate();
    const auto val_rows = data.indices(Split::Validation);
    const Tensor val_inputs = data.gather_inputs(val_rows), val_targets = data.gather_targets(val_rows);

    std::vector<GridRun> runs(n);
    parallel_for(n, threads == 0 ? default_threads() : threads, [&](std::size_t i) {
        runs[i] = run_point(space, i, base, data, val_rows, val_inputs, val_targets);
    });

    GridSearchResult out;
    out.space_size = n;
    for (auto& r : runs) (r.result.failed ? out.failed : out.ranked).push_back(std::move(r));
    if (out.ranked.empty()) {
        std::ostringstream msg;
        msg << "grid search: all " << n << " runs failed";
        for (const auto& r : out.failed) msg << "; #" << r.index << ' ' << point_label(r.point) << ": " << r.result.error;
        throw GridSearchError(msg.str());
    }
    std::stable_sort(out.ranked.begin(), out.ranked.end(), [](const GridRun& a, const GridRun& b) {
        if (a.selection_loss != b.selection_loss) return a.selection_loss < b.selection_loss;
        if (a.result.parameters != b.result.parameters) return a.result.parameters < b.result.parameters;
        return a.index < b.index;
    });
    return out;
}

namespace {

std::string csv_value(const nlohmann::json& v) {
    if (v.is_string()) return v.get<std::string>();
    if (v.is_number_float()) return format_number(v.get<double>());
    return v.dump();
}

std::string csv_quote(const std::string& s) {
    if (s.find_first_of(",\"\n") == std::string::npos) return s;
    std::string q = "\"";
    for (char c : s) {
        if (c == '"') q += '"';
        q += c == '\n' ? ' ' : c;
    }
    return q + '"';
}

std::ofstream open_for_write(const std::filesystem::path& p) {
    std::ofstream f(p, std::ios::binary);
    if (!f) throw std::runtime_error("cannot write " + p.string());
    return f;
}

}  // namespace

void write_grid_results(const GridSearchResult& result, const SearchSpace& space, const std::filesystem::path& dir) {
    std::error_code ec;
    std::filesystem::create_directories(dir, ec);
    if (ec) throw std::runtime_error("cannot create " + dir.string() + ": " + ec.message());

    {
        auto f = open_for_write(dir / "grid_results.csv");
        f << "rank,index";
        for (const auto& [key, values] : space.axes) f << ',' << key;
        f << ",selection_mse,best_validation,best_epoch,epochs_run,parameters\n";
        for (std::size_t r = 0; r < result.ranked.size(); ++r) {
            const auto& run = result.ranked[r];
            f << r + 1 << ',' << run.index;
            for (const auto& [key, values] : space.axes) f << ',' << csv_quote(csv_value(run.point.at(key)));
            f << ',' << format_number(run.selection_loss) << ',' << format_number(run.result.history.best_validation)
              << ',' << run.result.history.best_epoch << ',' << run.result.history.epochs_run << ','
              << run.result.parameters << '\n';
        }
        if (!f) throw std::runtime_error("failed writing grid_results.csv");
    }
    {
        auto f = open_for_write(dir / "grid_failures.csv");
        f << "index";
        for (const auto& [key, values] : space.axes) f << ',' << key;
        f << ",error\n";
        for (const auto& run : result.failed) {
            f << run.index;
            for (const auto& [key, values] : space.axes) f << ',' << csv_quote(csv_value(run.point.at(key)));
            f << ',' << csv_quote(run.result.error) << '\n';
        }
        if (!f) throw std::runtime_error("failed writing grid_failures.csv");
    }

    nlohmann::ordered_json j;
    j["space"] = space.to_json();
    j["space_size"] = result.space_size;
    j["succeeded"] = result.ranked.size();
    j["failed"] = result.failed.size();
    auto& runs = j["runs"] = nlohmann::ordered_json::array();
    auto add = [&](const GridRun& run, std::size_t rank) {
        nlohmann::ordered_json r;
        r["rank"] = rank;
        r["index"] = run.index;
        r["point"] = nlohmann::ordered_json::parse(run.point.dump());
        r["config"] = to_json(run.result.config);
        r["failed"] = run.result.failed;
        if (run.result.failed) {
            r["error"] = run.result.error;
        } else {
            r["selection_mse"] = run.selection_loss;
            r["best_validation"] = run.result.history.best_validation;
            r["best_epoch"] = run.result.history.best_epoch;
            r["epochs_run"] = run.result.history.epochs_run;
            r["stopped_early"] = run.result.history.stopped_early;
            r["parameters"] = run.result.parameters;
            r["train_loss"] = run.result.history.train_loss;
            r["validation_loss"] = run.result.history.validation_loss;
        }
        r["seed"] = run.result.config.seed;
        r["wall_seconds"] = run.result.wall_seconds;
        runs.push_back(std::move(r));
    };
    for (std::size_t r = 0; r < result.ranked.size(); ++r) add(result.ranked[r], r + 1);
    for (const auto& run : result.failed) add(run, 0);
    auto f = open_for_write(dir / "grid_results.json");
    f << j.dump(2) << '\n';
}

}  // namespace efbench
