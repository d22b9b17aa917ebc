#include "efbench/csv.hpp"

#include <fstream>
#include <sstream>
#include <stdexcept>

namespace efbench {

namespace {
std::string trim(const std::string& s) {
    const auto first = s.find_first_not_of(" \t\r\n");
    if (first == std::string::npos) return {};
    const auto last = s.find_last_not_of(" \t\r\n");
    return s.substr(first, last - first + 1);
}
}  // namespace

std::vector<std::string> split_fields(const std::string& line) {
    std::vector<std::string> out;
    std::string field;
    std::istringstream is(line);
    while (std::getline(is, field, ',')) out.push_back(trim(field));
    if (!line.empty() && line.back() == ',') out.emplace_back();
    return out;
}

std::size_t CsvTable::column(const std::string& name) const {
    for (std::size_t i = 0; i < header.size(); ++i)
        if (header[i] == name) return i;
    throw std::invalid_argument("csv: missing column '" + name + "'");
}

CsvTable parse_csv(const std::string& text) {
    CsvTable table;
    std::istringstream is(text);
    std::string line;
    std::size_t number = 0;
    bool have_header = false;
    while (std::getline(is, line)) {
        ++number;
        if (number == 1 && line.rfind("\xEF\xBB\xBF", 0) == 0) line.erase(0, 3);
        if (trim(line).empty()) continue;
        if (!have_header) {
            table.header = split_fields(line);
            have_header = true;
            continue;
        }
        table.rows.push_back(CsvRow{number, split_fields(line)});
    }
    if (!have_header) throw std::invalid_argument("csv: input is empty");
    return table;
}

CsvTable read_csv(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("csv: cannot open " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return parse_csv(ss.str());
}

}  // namespace efbench
