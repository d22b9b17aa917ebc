#include "efbench/frame.hpp"

#include "efbench/csv.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <stdexcept>

namespace efbench {

namespace {

int parse_int(const std::string& s, std::size_t pos, std::size_t len) {
    if (pos + len > s.size()) throw std::invalid_argument("timestamp too short");
    int v = 0;
    for (std::size_t i = pos; i < pos + len; ++i) {
        if (s[i] < '0' || s[i] > '9') throw std::invalid_argument("non-digit in timestamp");
        v = v * 10 + (s[i] - '0');
    }
    return v;
}

double parse_double(const std::string& s) {
    std::size_t used = 0;
    const double v = std::stod(s, &used);
    if (used != s.size()) throw std::invalid_argument("trailing characters");
    return v;
}

}  // namespace

HourStamp parse_timestamp(const std::string& text) {
    using namespace std::chrono;
    // YYYY-MM-DDTHH:MM[:SS]
    if (text.size() < 16 || text[4] != '-' || text[7] != '-' || (text[10] != 'T' && text[10] != ' ') ||
        text[13] != ':')
        throw std::invalid_argument("malformed timestamp '" + text + "'");
    const int y = parse_int(text, 0, 4), mo = parse_int(text, 5, 2), d = parse_int(text, 8, 2);
    const int h = parse_int(text, 11, 2), mi = parse_int(text, 14, 2);
    int sec = 0;
    if (text.size() > 16) {
        if (text.size() != 19 || text[16] != ':') throw std::invalid_argument("malformed timestamp '" + text + "'");
        sec = parse_int(text, 17, 2);
    }
    const year_month_day ymd{year{y}, month{static_cast<unsigned>(mo)}, day{static_cast<unsigned>(d)}};
    if (!ymd.ok() || h > 23) throw std::invalid_argument("invalid calendar date in '" + text + "'");
    if (mi != 0 || sec != 0) throw std::invalid_argument("timestamp '" + text + "' is not on the hour");
    return HourStamp{sys_days{ymd}} + hours{h};
}

std::string format_timestamp(HourStamp t) {
    using namespace std::chrono;
    const auto day_point = floor<days>(t);
    const year_month_day ymd{day_point};
    const auto h = (t - day_point).count();
    char buf[32];
    std::snprintf(buf, sizeof buf, "%04d-%02u-%02uT%02d:00:00", static_cast<int>(ymd.year()),
                  static_cast<unsigned>(ymd.month()), static_cast<unsigned>(ymd.day()), static_cast<int>(h));
    return buf;
}

Calendar calendar_of(HourStamp t) {
    using namespace std::chrono;
    const auto day_point = floor<days>(t);
    const year_month_day ymd{day_point};
    const sys_days jan1{ymd.year() / January / 1};
    const weekday wd{day_point};
    Calendar c;
    c.day_of_year = static_cast<int>((day_point - jan1).count()) + 1;
    c.day_of_month = static_cast<int>(static_cast<unsigned>(ymd.day()));
    c.day_of_week = static_cast<int>((wd.c_encoding() + 6) % 7);
    c.hour = static_cast<int>((t - day_point).count());
    c.month = static_cast<int>(static_cast<unsigned>(ymd.month()));
    return c;
}

TimeSeriesFrame TimeSeriesFrame::build(std::vector<HourStamp> timestamps, std::vector<double> temperature,
                                       std::vector<double> energy) {
    if (timestamps.size() != temperature.size() || timestamps.size() != energy.size())
        throw std::invalid_argument("frame: column lengths differ");
    for (std::size_t i = 0; i < timestamps.size(); ++i) {
        if (i > 0 && timestamps[i] - timestamps[i - 1] != std::chrono::hours{1})
            throw std::invalid_argument("frame: rows " + std::to_string(i - 1) + " and " + std::to_string(i) +
                                        " are not one hour apart");
        if (!std::isfinite(energy[i]) || energy[i] < 0.0)
            throw std::invalid_argument("frame: energy must be finite and non-negative at row " + std::to_string(i));
        if (!std::isfinite(temperature[i]) || temperature[i] < -60.0 || temperature[i] > 60.0)
            throw std::invalid_argument("frame: temperature outside [-60, 60] C at row " + std::to_string(i));
    }
    TimeSeriesFrame f;
    f.calendar_.reserve(timestamps.size());
    for (auto t : timestamps) f.calendar_.push_back(calendar_of(t));
    f.timestamps_ = std::move(timestamps);
    f.temperature_ = std::move(temperature);
    f.energy_ = std::move(energy);
    return f;
}

Eigen::MatrixXd TimeSeriesFrame::features() const {
    Eigen::MatrixXd m(static_cast<Eigen::Index>(size()), kNumFeatures);
    for (std::size_t i = 0; i < size(); ++i) {
        const auto r = static_cast<Eigen::Index>(i);
        m(r, kDayOfYear) = calendar_[i].day_of_year;
        m(r, kDayOfMonth) = calendar_[i].day_of_month;
        m(r, kDayOfWeek) = calendar_[i].day_of_week;
        m(r, kHour) = calendar_[i].hour;
        m(r, kTemperature) = temperature_[i];
        m(r, kEnergy) = energy_[i];
    }
    return m;
}

IngestResult ingest_csv_text(const std::string& text, int impute_max_gap_hours) {
    if (impute_max_gap_hours < 0) throw std::invalid_argument("ingest: impute gap must be >= 0");
    const CsvTable table = parse_csv(text);
    if (table.header != std::vector<std::string>{"timestamp", "temperature", "energy"})
        throw std::invalid_argument("ingest: header must be 'timestamp,temperature,energy'");

    IngestResult result;
    result.source_rows = table.rows.size();
    std::vector<HourStamp> ts;
    std::vector<double> temp, energy;
    for (const auto& row : table.rows) {
        const std::string where = "ingest: line " + std::to_string(row.line);
        if (row.fields.size() != 3) throw std::invalid_argument(where + ": expected 3 fields");
        HourStamp t;
        double tv, ev;
        try {
            t = parse_timestamp(row.fields[0]);
            tv = parse_double(row.fields[1]);
            ev = parse_double(row.fields[2]);
        } catch (const std::exception& e) {
            throw std::invalid_argument(where + ": unparseable row (" + e.what() + ")");
        }
        if (!std::isfinite(tv) || !std::isfinite(ev)) throw std::invalid_argument(where + ": non-finite value");
        if (ev < 0.0) throw std::invalid_argument(where + ": negative energy");
        if (!ts.empty()) {
            const auto step = (t - ts.back()).count();
            if (step <= 0) throw std::invalid_argument(where + ": timestamps not strictly increasing");
            const auto missing = step - 1;
            if (missing > impute_max_gap_hours)
                throw std::invalid_argument(where + ": gap of " + std::to_string(missing) +
                                            " missing hours exceeds limit " + std::to_string(impute_max_gap_hours));
            const double t0 = temp.back(), e0 = energy.back();
            for (long k = 1; k <= missing; ++k) {
                const double w = static_cast<double>(k) / static_cast<double>(step);
                result.imputed_rows.push_back(ts.size());
                ts.push_back(ts.back() + std::chrono::hours{1});
                temp.push_back(t0 + w * (tv - t0));
                energy.push_back(e0 + w * (ev - e0));
            }
        }
        ts.push_back(t);
        temp.push_back(tv);
        energy.push_back(ev);
    }
    result.frame = TimeSeriesFrame::build(std::move(ts), std::move(temp), std::move(energy));
    return result;
}

IngestResult ingest_csv(const std::filesystem::path& path, int impute_max_gap_hours) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::invalid_argument("ingest: cannot open " + path.string());
    std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    return ingest_csv_text(text, impute_max_gap_hours);
}

void write_frame_csv(const TimeSeriesFrame& frame, const std::filesystem::path& path) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write " + path.string());
    out << "timestamp,temperature,energy\n";
    char buf[96];
    for (std::size_t i = 0; i < frame.size(); ++i) {
        std::snprintf(buf, sizeof buf, ",%.17g,%.17g\n", frame.temperature()[i], frame.energy()[i]);
        out << format_timestamp(frame.timestamps()[i]) << buf;
    }
    if (!out) throw std::runtime_error("write failed for " + path.string());
}

}  // namespace efbench
