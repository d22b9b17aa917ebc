#pragma once

#include <CLI11.hpp>

#include <cstdint>
#include <iosfwd>
#include <memory>
#include <optional>
#include <string>
#include <vector>

namespace efbench::cli {

/// Parsed flag values for every subcommand.
inline constexpr const char* kDefaultOutputDir = "efbench-out";

struct Options {
    std::optional<std::uint64_t> seed;
    /// Empty means the default, or the manifest's own directory for `run`.
    std::string output_dir;
    std::size_t threads = 0;

    std::string profile = "residence";
    long long hours = 0;
    std::string start;
    std::string out;

    std::string csv;
    int impute_gap = 0;

    std::string model;
    std::string config;
    std::string data;
    std::string space;
    std::string model_file;
    std::vector<std::string> model_files;
    std::string manifest;
};

/// The full command tree, bound to `opts`.
std::unique_ptr<CLI::App> make_app(Options& opts);

/// Parses and runs one invocation. Diagnostics and progress go to `err`.
/// Returns 0 on success, 1 on a validation error and 2 on a runtime failure.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace efbench::cli
