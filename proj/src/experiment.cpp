#include "efbench/experiment.hpp"

#include "efbench/persistence.hpp"

#include <chrono>
#include <fstream>
#include <ostream>
#include <set>

namespace efbench {

namespace fs = std::filesystem;
using ojson = nlohmann::ordered_json;

std::string DatasetSource::id() const {
    if (kind == Kind::Csv) return csv.filename().string();
    return "synthetic-" + profile_name + "-" + std::to_string(hours) + "h";
}

std::uint64_t model_seed(std::uint64_t master, const std::string& name) { return Rng(master).split(name).seed(); }

bool ExperimentResult::any_failed() const {
    for (const auto& m : models)
        if (m.failed) return true;
    return false;
}

namespace {

void reject_unknown(const ojson& j, std::initializer_list<const char*> allowed, const std::string& where) {
    if (!j.is_object()) throw std::invalid_argument(where + ": expected an object");
    for (auto it = j.begin(); it != j.end(); ++it) {
        bool ok = false;
        for (const char* a : allowed) ok = ok || it.key() == a;
        if (!ok) throw std::invalid_argument(where + ": unknown key '" + it.key() + "'");
    }
}

fs::path resolve(const fs::path& base, const std::string& p) {
    const fs::path path(p);
    return path.is_absolute() || base.empty() ? path : base / path;
}

template <typename T>
T get(const ojson& j, const char* key, const std::string& where) {
    try {
        return j.at(key).get<T>();
    } catch (const nlohmann::json::exception&) {
        throw std::invalid_argument(where + ": '" + key + "' is missing or has the wrong type");
    }
}

DatasetSource parse_dataset(const ojson& j, const fs::path& base) {
    reject_unknown(j, {"synthetic", "csv", "impute_gap"}, "manifest dataset");
    DatasetSource d;
    if (j.contains("synthetic") == j.contains("csv"))
        throw std::invalid_argument("manifest dataset: give exactly one of 'synthetic' or 'csv'");
    if (j.contains("csv")) {
        d.kind = DatasetSource::Kind::Csv;
        d.csv = resolve(base, get<std::string>(j, "csv", "manifest dataset"));
        if (!fs::is_regular_file(d.csv)) throw std::invalid_argument("manifest dataset: no such file " + d.csv.string());
        if (j.contains("impute_gap")) d.impute_gap = get<int>(j, "impute_gap", "manifest dataset");
        if (d.impute_gap < 0) throw std::invalid_argument("manifest dataset: impute_gap must be >= 0");
        return d;
    }
    const ojson& s = j.at("synthetic");
    reject_unknown(s, {"profile", "hours", "seed"}, "manifest dataset.synthetic");
    if (s.contains("profile")) {
        const ojson& p = s.at("profile");
        if (p.is_object()) {
            d.profile = parse_profile(p.dump());
            d.profile_name = "custom";
        } else if (p.is_string() && p.get<std::string>() == "residence") {
            d.profile = residence_profile();
        } else if (p.is_string()) {
            const fs::path file = resolve(base, p.get<std::string>());
            if (!fs::is_regular_file(file)) throw std::invalid_argument("manifest dataset: no such profile " + file.string());
            d.profile = load_profile(file);
            d.profile_name = file.stem().string();
        } else {
            throw std::invalid_argument("manifest dataset.synthetic: 'profile' must be a name, a path or an object");
        }
    }
    const auto hours = get<long long>(s, "hours", "manifest dataset.synthetic");
    if (hours < 48) throw std::invalid_argument("manifest dataset: need ≥ 48 hours, got " + std::to_string(hours));
    d.hours = static_cast<std::size_t>(hours);
    if (s.contains("seed")) d.seed = get<std::uint64_t>(s, "seed", "manifest dataset.synthetic");
    return d;
}

ModelEntry parse_model(const ojson& j, const ojson& defaults, const fs::path& base) {
    ModelEntry e;
    ojson spec = j.is_string() ? ojson{{"architecture", j}} : j;
    reject_unknown(spec, {"architecture", "name", "config", "space"}, "manifest model");
    const Architecture a = architecture_from_string(get<std::string>(spec, "architecture", "manifest model"));
    e.name = spec.contains("name") ? get<std::string>(spec, "name", "manifest model") : display_name(a);
    if (e.name.empty() || e.name.find_first_of("/\\,\"") != std::string::npos || e.name == kPersistenceName)
        throw std::invalid_argument("manifest model: invalid name '" + e.name + "'");
    e.config = default_config(a);
    if (!defaults.is_null()) apply_overrides(e.config, nlohmann::json::parse(defaults.dump()));
    if (spec.contains("config")) {
        apply_overrides(e.config, nlohmann::json::parse(spec.at("config").dump()));
        e.seed_given = spec.at("config").contains("seed");
    }
    if (spec.contains("space")) {
        const ojson& s = spec.at("space");
        e.space = s.is_string() ? load_search_space(s.get<std::string>() == "transformer"
                                                        ? s.get<std::string>()
                                                        : resolve(base, s.get<std::string>()).string())
                                : SearchSpace::from_json(s);
    }
    return e;
}

}  // namespace

Manifest parse_manifest(const ojson& j, const fs::path& base_dir) {
    reject_unknown(j, {"dataset", "models", "defaults", "seed", "output_dir", "threads"}, "manifest");
    Manifest m;
    if (!j.contains("dataset")) throw std::invalid_argument("manifest: missing 'dataset'");
    m.dataset = parse_dataset(j.at("dataset"), base_dir);
    if (j.contains("seed")) {
        m.seed = get<std::uint64_t>(j, "seed", "manifest");
        m.seed_given = true;
    }
    if (j.contains("output_dir")) m.output_dir = resolve(base_dir, get<std::string>(j, "output_dir", "manifest"));
    if (j.contains("threads")) m.threads = get<std::size_t>(j, "threads", "manifest");
    const ojson defaults = j.contains("defaults") ? j.at("defaults") : ojson();
    if (!defaults.is_null() && !defaults.is_object()) throw std::invalid_argument("manifest: 'defaults' must be an object");
    if (!j.contains("models") || !j.at("models").is_array() || j.at("models").empty())
        throw std::invalid_argument("manifest: 'models' must be a non-empty list");
    std::set<std::string> names;
    for (const auto& entry : j.at("models")) {
        m.models.push_back(parse_model(entry, defaults, base_dir));
        if (!names.insert(m.models.back().name).second)
            throw std::invalid_argument("manifest: duplicate model name '" + m.models.back().name + "'");
    }
    return m;
}

Manifest load_manifest(const fs::path& path) {
    std::ifstream in(path);
    if (!in) throw std::invalid_argument("manifest: cannot open " + path.string());
    ojson j;
    try {
        j = ojson::parse(in);
    } catch (const nlohmann::json::exception& e) {
        throw std::invalid_argument("manifest: " + path.string() + ": " + e.what());
    }
    return parse_manifest(j, path.parent_path());
}

TimeSeriesFrame load_dataset(const DatasetSource& source, std::uint64_t manifest_seed) {
    if (source.kind == DatasetSource::Kind::Csv) return ingest_csv(source.csv, source.impute_gap).frame;
    const std::uint64_t seed = source.seed ? *source.seed : Rng(manifest_seed).split("dataset").seed();
    return generate_synthetic(source.profile, parse_timestamp(source.profile.start), source.hours, seed);
}

namespace {

double seconds_since(std::chrono::steady_clock::time_point t0) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

ojson metric_json(const MetricRow& r) {
    return ojson{{"season", r.season}, {"mae", r.mae}, {"rmse", r.rmse}, {"smape", r.smape}, {"n", r.n}};
}

void write_summary(const Manifest& manifest, const WindowedDataset& data, const ExperimentResult& result) {
    ojson j;
    j["dataset"] = result.report.dataset_id;
    j["seed"] = manifest.seed;
    j["frame_hours"] = data.size() + static_cast<std::size_t>(data.window + data.horizon - 1);
    j["windows"] = {{"train", data.indices(Split::Train).size()},
                    {"validation", data.indices(Split::Validation).size()},
                    {"test", data.indices(Split::Test).size()}};
    j["first_test_target"] = result.report.timestamp;
    auto rows_of = [&](const std::string& model) {
        ojson rows = ojson::array();
        for (const auto& r : result.report.rows)
            if (r.model == model) rows.push_back(metric_json(r));
        return rows;
    };
    j["baseline"] = {{"name", kPersistenceName}, {"metrics", rows_of(kPersistenceName)}};
    auto& models = j["models"] = ojson::array();
    for (const auto& m : result.models) {
        ojson o;
        o["name"] = m.name;
        o["architecture"] = architecture_id(m.config.architecture);
        o["status"] = m.failed ? "failed" : "ok";
        if (m.failed) o["error"] = m.error;
        o["config"] = to_json(m.config);
        if (!m.failed) {
            o["model_file"] = fs::relative(m.model_file, result.output_dir).generic_string();
            o["parameters"] = m.parameters;
            o["epochs_run"] = m.summary.epochs_run;
            o["best_epoch"] = m.summary.best_epoch;
            o["best_validation"] = m.summary.best_validation;
            o["stopped_early"] = m.summary.stopped_early;
            o["validation_loss"] = m.summary.validation_loss;
            if (m.summary.autoencoder_initial_loss) {
                o["autoencoder_initial_loss"] = *m.summary.autoencoder_initial_loss;
                o["autoencoder_loss"] = m.summary.autoencoder_loss;
            }
            if (!m.summary.rounds_kept.empty()) o["rounds_kept"] = m.summary.rounds_kept;
            o["metrics"] = rows_of(m.name);
        }
        o["wall_seconds"] = m.wall_seconds;
        models.push_back(std::move(o));
    }
    std::ofstream f(result.output_dir / "summary.json", std::ios::binary);
    f << j.dump(2) << '\n';
    if (!f) throw std::runtime_error("cannot write " + (result.output_dir / "summary.json").string());
}

}  // namespace

ExperimentResult run_experiment(const Manifest& manifest, std::ostream* log) {
    auto say = [&](const std::string& line) {
        if (log) *log << line << std::endl;
    };
    ExperimentResult result;
    result.output_dir = manifest.output_dir;
    std::error_code ec;
    fs::create_directories(manifest.output_dir / "models", ec);
    if (ec) throw std::runtime_error("cannot create " + manifest.output_dir.string() + ": " + ec.message());

    const TimeSeriesFrame frame = load_dataset(manifest.dataset, manifest.seed);
    const WindowedDataset data = prepare_dataset(frame);
    say("dataset " + manifest.dataset.id() + ": " + std::to_string(frame.size()) + " hours, " +
        std::to_string(data.size()) + " windows");

    std::vector<Forecasts> forecasts{persistence_baseline(data)};
    for (const auto& entry : manifest.models) {
        ModelOutcome out;
        out.name = entry.name;
        out.config = entry.config;
        if (!entry.seed_given) out.config.seed = model_seed(manifest.seed, entry.name);
        const auto t0 = std::chrono::steady_clock::now();
        try {
            if (entry.space) {
                say(entry.name + ": grid search over " + std::to_string(entry.space->size()) + " points");
                const auto grid = grid_search(*entry.space, out.config, data, manifest.threads);
                write_grid_results(grid, *entry.space, manifest.output_dir / "grid" / entry.name);
                out.config = grid.ranked.front().result.config;
                say(entry.name + ": best point " + grid.ranked.front().point.dump() + ", " +
                    std::to_string(grid.failed.size()) + " failed");
            }
            say(entry.name + ": training");
            const TrainedModel model = fit_model(out.config, data, manifest.threads);
            out.summary = model.summary;
            out.parameters = parameter_count(model);
            out.model_file = manifest.output_dir / "models" / (entry.name + ".efb");
            save_model(model, out.model_file);
            Forecasts f = forecast(model, data, Split::Test, manifest.threads);
            f.model = entry.name;
            forecasts.push_back(std::move(f));
        } catch (const std::exception& e) {
            out.failed = true;
            out.error = e.what();
            say(entry.name + ": FAILED: " + out.error);
        }
        out.wall_seconds = seconds_since(t0);
        say(entry.name + ": done in " + format_number(out.wall_seconds) + " s");
        result.models.push_back(std::move(out));
    }

    result.report = build_report(forecasts, manifest.dataset.id(), manifest.seed);
    emit_report(result.report, forecasts, manifest.output_dir);
    write_summary(manifest, data, result);
    return result;
}

EvaluationReport evaluate_model_files(const std::vector<fs::path>& files, const TimeSeriesFrame& frame,
                                      const std::string& dataset_id, std::uint64_t seed, const fs::path& dir,
                                      std::size_t threads) {
    if (files.empty()) throw std::invalid_argument("evaluate: no model files given");
    std::vector<Forecasts> forecasts{persistence_baseline(prepare_dataset(frame))};
    std::set<std::string> names{kPersistenceName};
    for (const auto& file : files) {
        const TrainedModel model = load_model(file);
        Forecasts f = forecast(model, sliding_window(frame, model.scaler), Split::Test, threads);
        f.model = file.stem().string();
        if (!names.insert(f.model).second) throw std::invalid_argument("evaluate: duplicate model name '" + f.model + "'");
        forecasts.push_back(std::move(f));
    }
    const EvaluationReport report = build_report(forecasts, dataset_id, seed);
    emit_report(report, forecasts, dir);
    return report;
}

}  // namespace efbench
