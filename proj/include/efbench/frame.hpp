#pragma once

#include <Eigen/Core>

#include <chrono>
#include <filesystem>
#include <string>
#include <vector>

namespace efbench {

/// Naive local wall-clock hour; no time-zone or DST arithmetic.
using HourStamp = std::chrono::sys_time<std::chrono::hours>;

/// Accepts "YYYY-MM-DDTHH:MM[:SS]" (a space may replace the T); minutes and
/// seconds must be zero.
HourStamp parse_timestamp(const std::string& text);
std::string format_timestamp(HourStamp t);

struct Calendar {
    int day_of_year;   // 1..366
    int day_of_month;  // 1..31
    int day_of_week;   // 0 = Monday .. 6 = Sunday
    int hour;          // 0..23
    int month;         // 1..12
};

Calendar calendar_of(HourStamp t);

/// Model input features, in their fixed column order.
enum Feature : int { kDayOfYear = 0, kDayOfMonth, kDayOfWeek, kHour, kTemperature, kEnergy };
inline constexpr int kNumFeatures = 6;
inline constexpr const char* kFeatureNames[kNumFeatures] = {"day_of_year", "day_of_month", "day_of_week",
                                                            "hour",        "temperature",  "energy"};

/// Validated, gap-free hourly table with derived calendar columns.
class TimeSeriesFrame {
  public:
    TimeSeriesFrame() = default;

    /// Validates spacing and value ranges and derives the calendar columns.
    static TimeSeriesFrame build(std::vector<HourStamp> timestamps, std::vector<double> temperature,
                                 std::vector<double> energy);

    std::size_t size() const { return timestamps_.size(); }
    const std::vector<HourStamp>& timestamps() const { return timestamps_; }
    const std::vector<double>& temperature() const { return temperature_; }
    const std::vector<double>& energy() const { return energy_; }
    const std::vector<Calendar>& calendar() const { return calendar_; }

    /// (N, 6) matrix in Feature order.
    Eigen::MatrixXd features() const;

  private:
    std::vector<HourStamp> timestamps_;
    std::vector<double> temperature_;
    std::vector<double> energy_;
    std::vector<Calendar> calendar_;
};

struct IngestResult {
    TimeSeriesFrame frame;
    std::size_t source_rows = 0;
    /// Frame row indices filled by linear interpolation.
    std::vector<std::size_t> imputed_rows;
};

/// Reads `timestamp,temperature,energy`. Gaps of up to `impute_max_gap_hours`
/// missing hours are linearly interpolated; longer gaps are rejected.
IngestResult ingest_csv(const std::filesystem::path& path, int impute_max_gap_hours);
IngestResult ingest_csv_text(const std::string& text, int impute_max_gap_hours);

void write_frame_csv(const TimeSeriesFrame& frame, const std::filesystem::path& path);

}  // namespace efbench
