#include "cli.hpp"

#include "efbench/experiment.hpp"
#include "efbench/parallel.hpp"
#include "efbench/persistence.hpp"

#include <fstream>
#include <ostream>
#include <random>

namespace efbench::cli {

namespace fs = std::filesystem;
using ojson = nlohmann::ordered_json;

std::unique_ptr<CLI::App> make_app(Options& o) {
    auto app = std::make_unique<CLI::App>("Day-ahead energy-load forecasting benchmark", "efbench");
    app->require_subcommand(1);
    app->option_defaults()->always_capture_default();
    // Global flags are accepted before or after the subcommand name.
    const auto add_globals = [&o](CLI::App* a) {
        a->add_option("--seed", o.seed, "Master seed for every random choice; a random seed is drawn and printed if omitted");
        a->add_option("--output-dir", o.output_dir,
                      std::string("Directory for models, reports and other artifacts (default ") + kDefaultOutputDir + ")");
        a->add_option("--threads", o.threads, "Worker threads for grid search and ensemble fitting (0 = all cores)")
            ->envname("EFBENCH_THREADS");
    };
    add_globals(app.get());

    auto* synth = app->add_subcommand("synth", "Generate a synthetic hourly consumption CSV");
    add_globals(synth);
    synth->add_option("--profile", o.profile, "Profile name ('residence') or a JSON profile file");
    synth->add_option("--hours", o.hours, "Number of hours to generate (at least 48)")->required();
    synth->add_option("--start", o.start, "First timestamp, e.g. 2019-01-01T00:00; defaults to the profile's start");
    synth->add_option("--out", o.out, "Output CSV path")->required();

    auto* ingest = app->add_subcommand("ingest", "Validate a consumption CSV and write the cleaned hourly frame");
    add_globals(ingest);
    ingest->add_option("--csv", o.csv, "Input CSV with timestamp,temperature,energy columns")
        ->required()
        ->check(CLI::ExistingFile);
    ingest->add_option("--impute-gap", o.impute_gap, "Longest gap, in hours, filled by linear interpolation")
        ->check(CLI::NonNegativeNumber);
    ingest->add_option("--out", o.out, "Cleaned CSV path (default: <output-dir>/frame.csv)");

    auto* train = app->add_subcommand("train", "Train one model and report it against the persistence baseline");
    add_globals(train);
    train->add_option("--model", o.model, "Architecture id, e.g. lstm or hypernet_lstm")->required();
    train->add_option("--config", o.config, "JSON file of config overrides")->check(CLI::ExistingFile);
    train->add_option("--data", o.data, "Hourly CSV to train and evaluate on")->required()->check(CLI::ExistingFile);
    train->add_option("--impute-gap", o.impute_gap, "Longest gap, in hours, filled when reading --data")
        ->check(CLI::NonNegativeNumber);

    auto* grid = app->add_subcommand("grid-search", "Grid-search one architecture, then train and report the best point");
    add_globals(grid);
    grid->add_option("--space", o.space, "JSON file mapping config keys to value lists, or 'transformer'")->required();
    grid->add_option("--model", o.model, "Architecture id")->required();
    grid->add_option("--config", o.config, "JSON file of base config overrides")->check(CLI::ExistingFile);
    grid->add_option("--data", o.data, "Hourly CSV to search on")->required()->check(CLI::ExistingFile);
    grid->add_option("--impute-gap", o.impute_gap, "Longest gap, in hours, filled when reading --data")
        ->check(CLI::NonNegativeNumber);

    auto* evaluate = app->add_subcommand("evaluate", "Score a saved model on the test split of a dataset");
    add_globals(evaluate);
    evaluate->add_option("--model-file", o.model_file, "Saved model (.efb)")->required()->check(CLI::ExistingFile);
    evaluate->add_option("--data", o.data, "Hourly CSV to evaluate on")->required()->check(CLI::ExistingFile);
    evaluate->add_option("--impute-gap", o.impute_gap, "Longest gap, in hours, filled when reading --data")
        ->check(CLI::NonNegativeNumber);

    auto* report = app->add_subcommand("report", "Combined report, CSVs and chart for several saved models");
    add_globals(report);
    report->add_option("--model-files", o.model_files, "Saved models (.efb); each is named after its file stem")
        ->required()
        ->check(CLI::ExistingFile);
    report->add_option("--data", o.data, "Hourly CSV to evaluate on")->required()->check(CLI::ExistingFile);
    report->add_option("--impute-gap", o.impute_gap, "Longest gap, in hours, filled when reading --data")
        ->check(CLI::NonNegativeNumber);

    auto* run = app->add_subcommand("run", "Run a full experiment from a JSON manifest");
    add_globals(run);
    run->add_option("--manifest", o.manifest, "Experiment manifest (JSON)")->required()->check(CLI::ExistingFile);
    return app;
}


namespace {

std::string output_dir(const Options& o) { return o.output_dir.empty() ? kDefaultOutputDir : o.output_dir; }

std::uint64_t resolve_seed(const Options& o, std::ostream& err) {
    if (o.seed) return *o.seed;
    std::random_device rd;
    const std::uint64_t seed = (std::uint64_t{rd()} << 32) ^ rd();
    err << "seed: " << seed << " (random)" << std::endl;
    return seed;
}

void print_config(std::ostream& err, const ojson& j) { err << "resolved config: " << j.dump() << std::endl; }

ojson read_json_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::invalid_argument("cannot open " + path);
    try {
        return ojson::parse(in);
    } catch (const nlohmann::json::exception& e) {
        throw std::invalid_argument(path + ": " + e.what());
    }
}

int finish_experiment(const Manifest& m, std::ostream& err) {
    ojson models = ojson::array();
    for (const auto& e : m.models) {
        ojson c = to_json(e.config);
        if (!e.seed_given) c["seed"] = model_seed(m.seed, e.name);
        ojson entry{{"name", e.name}, {"config", c}};
        if (e.space) entry["space"] = e.space->to_json();
        models.push_back(entry);
    }
    print_config(err, ojson{{"dataset", m.dataset.id()},
                            {"seed", m.seed},
                            {"output_dir", m.output_dir.string()},
                            {"threads", m.threads},
                            {"models", models}});
    const auto result = run_experiment(m, &err);
    for (const auto& r : result.report.rows)
        if (r.season == kAllSeasons)
            err << "  " << r.model << ": SMAPE " << format_number(r.smape) << "%, MAE " << format_number(r.mae)
                << ", RMSE " << format_number(r.rmse) << std::endl;
    err << "artifacts in " << result.output_dir.string() << std::endl;
    if (result.any_failed()) {
        for (const auto& mo : result.models)
            if (mo.failed) err << "efbench: error: " << mo.name << " failed: " << mo.error << std::endl;
        return 2;
    }
    return 0;
}

Manifest single_model_manifest(const Options& o, std::uint64_t seed) {
    Manifest m;
    m.dataset.kind = DatasetSource::Kind::Csv;
    m.dataset.csv = o.data;
    m.dataset.impute_gap = o.impute_gap;
    m.seed = seed;
    m.seed_given = true;
    m.output_dir = output_dir(o);
    m.threads = o.threads;
    ModelEntry e;
    e.config = default_config(architecture_from_string(o.model));
    e.name = display_name(e.config.architecture);
    if (!o.config.empty()) {
        const ojson c = read_json_file(o.config);
        if (!c.is_object()) throw std::invalid_argument(o.config + ": config must be a JSON object");
        apply_overrides(e.config, nlohmann::json::parse(c.dump()));
        e.seed_given = c.contains("seed");
    }
    if (!o.space.empty()) e.space = load_search_space(o.space);
    m.models.push_back(std::move(e));
    return m;
}

int cmd_synth(const Options& o, std::ostream& err) {
    SyntheticProfile profile = o.profile == "residence" ? residence_profile() : load_profile(o.profile);
    if (!o.start.empty()) profile.start = o.start;
    if (o.hours < 48) throw std::invalid_argument("synth: need ≥ 48 hours, got " + std::to_string(o.hours));
    const std::uint64_t seed = resolve_seed(o, err);
    print_config(err, ojson{{"profile", ojson::parse(profile_to_json(profile))},
                            {"hours", o.hours},
                            {"seed", seed},
                            {"out", o.out}});
    const auto frame =
        generate_synthetic(profile, parse_timestamp(profile.start), static_cast<std::size_t>(o.hours), seed);
    if (const auto parent = fs::path(o.out).parent_path(); !parent.empty()) fs::create_directories(parent);
    write_frame_csv(frame, o.out);
    err << "wrote " << frame.size() << " hours to " << o.out << std::endl;
    return 0;
}

int cmd_ingest(const Options& o, std::ostream& err) {
    const fs::path out = o.out.empty() ? fs::path(output_dir(o)) / "frame.csv" : fs::path(o.out);
    print_config(err, ojson{{"csv", o.csv}, {"impute_gap", o.impute_gap}, {"out", out.string()}});
    const auto r = ingest_csv(o.csv, o.impute_gap);
    if (!out.parent_path().empty()) fs::create_directories(out.parent_path());
    write_frame_csv(r.frame, out);
    err << "read " << r.source_rows << " rows, imputed " << r.imputed_rows.size() << ", wrote " << r.frame.size()
        << " hours (" << (r.frame.size() >= 48 ? r.frame.size() - 47 : 0) << " windows) to " << out.string()
        << std::endl;
    return 0;
}

int cmd_evaluate(const Options& o, const std::vector<std::string>& files, std::ostream& err) {
    print_config(err, ojson{{"model_files", files},
                            {"data", o.data},
                            {"impute_gap", o.impute_gap},
                            {"output_dir", output_dir(o)},
                            {"threads", o.threads}});
    const auto frame = ingest_csv(o.data, o.impute_gap).frame;
    std::vector<fs::path> paths(files.begin(), files.end());
    const auto report =
        evaluate_model_files(paths, frame, fs::path(o.data).filename().string(), o.seed.value_or(0), output_dir(o), o.threads);
    for (const auto& r : report.rows)
        if (r.season == kAllSeasons)
            err << "  " << r.model << ": SMAPE " << format_number(r.smape) << "%, MAE " << format_number(r.mae)
                << ", RMSE " << format_number(r.rmse) << std::endl;
    err << "report in " << output_dir(o) << std::endl;
    return 0;
}

int dispatch(const CLI::App& app, Options& o, std::ostream& err) {
    if (o.threads > 0) set_default_threads(o.threads);
    if (app.got_subcommand("synth")) return cmd_synth(o, err);
    if (app.got_subcommand("ingest")) return cmd_ingest(o, err);
    if (app.got_subcommand("train") || app.got_subcommand("grid-search")) {
        if (app.got_subcommand("train")) o.space.clear();
        return finish_experiment(single_model_manifest(o, resolve_seed(o, err)), err);
    }
    if (app.got_subcommand("evaluate")) return cmd_evaluate(o, {o.model_file}, err);
    if (app.got_subcommand("report")) return cmd_evaluate(o, o.model_files, err);
    Manifest m = load_manifest(o.manifest);
    if (o.seed) {
        m.seed = *o.seed;
    } else if (!m.seed_given) {
        m.seed = resolve_seed(o, err);
    }
    if (!o.output_dir.empty()) m.output_dir = o.output_dir;
    if (o.threads > 0) m.threads = o.threads;
    return finish_experiment(m, err);
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    Options o;
    auto app = make_app(o);
    try {
        std::vector<std::string> reversed(args.rbegin(), args.rend());
        app->parse(reversed);
    } catch (const CLI::ParseError& e) {
        const int code = app->exit(e, out, err);
        return code == 0 ? 0 : 1;
    }
    try {
        return dispatch(*app, o, err);
    } catch (const std::invalid_argument& e) {
        err << "efbench: error: " << e.what() << std::endl;
        return 1;
    } catch (const std::out_of_range& e) {
        err << "efbench: error: " << e.what() << std::endl;
        return 1;
    } catch (const ModelFileError& e) {
        err << "efbench: error: " << e.what() << std::endl;
        return 1;
    } catch (const std::exception& e) {
        err << "efbench: error: " << e.what() << std::endl;
        return 2;
    }
}

}  // namespace efbench::cli
