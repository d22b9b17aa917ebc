#pragma once

#include <filesystem>
#include <string>
#include <vector>

namespace efbench {

struct CsvRow {
    std::size_t line = 0;  // 1-based line number in the source file
    std::vector<std::string> fields;
};

struct CsvTable {
    std::vector<std::string> header;
    std::vector<CsvRow> rows;

    /// Index of a header column; throws when absent.
    std::size_t column(const std::string& name) const;
};

/// Comma-separated, no quoting, surrounding whitespace and CR stripped.
/// Blank lines are skipped.
CsvTable read_csv(const std::filesystem::path& path);
CsvTable parse_csv(const std::string& text);

std::vector<std::string> split_fields(const std::string& line);

}  // namespace efbench
