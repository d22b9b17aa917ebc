#pragma once

#include "efbench/evaluation.hpp"
#include "efbench/grid_search.hpp"
#include "efbench/synthetic.hpp"

#include <json.hpp>

#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

namespace efbench {

/// Where the hourly frame comes from: a synthetic profile or a CSV file.
struct DatasetSource {
    enum class Kind { Synthetic, Csv };
    Kind kind = Kind::Synthetic;

    SyntheticProfile profile = residence_profile();
    std::string profile_name = "residence";
    std::size_t hours = 0;
    std::optional<std::uint64_t> seed;  // falls back to a split of the manifest seed

    std::filesystem::path csv;
    int impute_gap = 0;

    std::string id() const;
};

struct ModelEntry {
    std::string name;  // report name; defaults to the display name
    ModelConfig config;
    bool seed_given = false;
    std::optional<SearchSpace> space;
};

struct Manifest {
    DatasetSource dataset;
    std::vector<ModelEntry> models;
    std::uint64_t seed = 0;
    bool seed_given = false;
    std::filesystem::path output_dir = "efbench-out";
    std::size_t threads = 0;
};

/// Relative paths are resolved against `base_dir`. Unknown keys, unknown
/// architectures, invalid configs and missing input files are rejected with
/// std::invalid_argument before any training starts.
Manifest parse_manifest(const nlohmann::ordered_json& j, const std::filesystem::path& base_dir = {});
Manifest load_manifest(const std::filesystem::path& path);

TimeSeriesFrame load_dataset(const DatasetSource& source, std::uint64_t manifest_seed);

/// Seed used for a model whose config does not set one.
std::uint64_t model_seed(std::uint64_t master, const std::string& name);

struct ModelOutcome {
    std::string name;
    ModelConfig config;
    bool failed = false;
    std::string error;
    TrainingSummary summary;
    Eigen::Index parameters = 0;
    double wall_seconds = 0.0;
    std::filesystem::path model_file;
};

struct ExperimentResult {
    EvaluationReport report;
    std::vector<ModelOutcome> models;
    std::filesystem::path output_dir;

    bool any_failed() const;
};

/// Trains every listed model (after a grid search when it has a space),
/// evaluates it and the persistence baseline on the test split, and writes
/// models/<name>.efb, metrics.csv, predictions/, forecast.svg, grid/<name>/
/// and summary.json under the output directory. A model that fails is
/// recorded in the summary and left out of the report. Progress lines go to
/// `log` when given.
ExperimentResult run_experiment(const Manifest& manifest, std::ostream* log = nullptr);

/// Scores saved models and the persistence baseline on the test split of
/// `frame`, each model windowing the frame with its own stored scaler, and
/// emits the report into `dir`. Models are named after their file stems.
EvaluationReport evaluate_model_files(const std::vector<std::filesystem::path>& files, const TimeSeriesFrame& frame,
                                      const std::string& dataset_id, std::uint64_t seed,
                                      const std::filesystem::path& dir, std::size_t threads = 0);

}  // namespace efbench
