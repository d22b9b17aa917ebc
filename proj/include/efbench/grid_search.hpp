#pragma once

#include "efbench/dataset.hpp"
#include "efbench/model_config.hpp"
#include "efbench/training.hpp"

#include <json.hpp>

#include <filesystem>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace efbench {

/// Candidate values per config key. Points are enumerated in row-major order:
/// the last axis varies fastest.
struct SearchSpace {
    std::vector<std::pair<std::string, std::vector<nlohmann::json>>> axes;

    /// Product of the axis lengths; 1 for a space without axes.
    std::size_t size() const;
    /// Overrides object for point `index`.
    nlohmann::json point(std::size_t index) const;

    /// {"key": [v1, v2, ...], ...}; keys keep document order.
    static SearchSpace from_json(const nlohmann::ordered_json& j);
    nlohmann::ordered_json to_json() const;
};

/// Encoder layers x FFN width x heads x learning rate x optimizer x loss.
SearchSpace transformer_search_space();

/// A JSON file, or "transformer" for the built-in space.
SearchSpace load_search_space(const std::string& source);

struct GridRun {
    std::size_t index = 0;
    nlohmann::json point;
    TrainRunResult result;
    /// Validation MSE of the returned model, comparable across loss kinds.
    double selection_loss = 0.0;
};

struct GridSearchResult {
    std::size_t space_size = 0;
    /// Successful runs, best first.
    std::vector<GridRun> ranked;
    /// Failed runs in enumeration order, each with its error.
    std::vector<GridRun> failed;
};

class GridSearchError : public std::runtime_error {
  public:
    using std::runtime_error::runtime_error;
};

/// One run per point of `space` applied on top of `base`, `threads` runs at a
/// time. Runs are ranked by selection loss, then parameter count, then
/// enumeration index, so the result does not depend on `threads`. Throws
/// GridSearchError listing every diagnostic when all runs fail.
GridSearchResult grid_search(const SearchSpace& space, const ModelConfig& base, const WindowedDataset& data,
                             std::size_t threads = 0);

/// grid_results.csv (ranked), grid_failures.csv and grid_results.json (with
/// loss curves and wall times).
void write_grid_results(const GridSearchResult& result, const SearchSpace& space, const std::filesystem::path& dir);

}  // namespace efbench
