#pragma once

#include "efbench/dataset.hpp"
#include "efbench/metrics.hpp"
#include "efbench/model.hpp"

#include <filesystem>
#include <string>
#include <vector>

namespace efbench {

inline constexpr const char* kAllSeasons = "ALL";
inline constexpr const char* kPersistenceName = "Persistence";

/// Forecasts of one model over one split, in kWh.
struct Forecasts {
    std::string model;
    Tensor actual_kwh;     // (S, 24)
    Tensor predicted_kwh;  // (S, 24)
    std::vector<HourStamp> target_start;
    std::vector<Season> season;
};

struct MetricRow {
    std::string model;
    std::string season;  // "ALL" or a season name
    double mae = 0.0, rmse = 0.0, smape = 0.0;
    std::size_t n = 0;   // windows
};

struct EvaluationReport {
    std::vector<MetricRow> rows;
    std::string dataset_id;
    std::uint64_t seed = 0;
    /// Target start of the first evaluated window.
    std::string timestamp;
};

Forecasts forecast(const TrainedModel& model, const WindowedDataset& data, Split split = Split::Test,
                   std::size_t threads = 0);
/// Repeats each input window's 24 energy values as the next day's forecast.
Forecasts persistence_baseline(const WindowedDataset& data, Split split = Split::Test);

/// ALL row first, then one row per season present, metrics pooled over every
/// (window, hour) pair. Throws on an empty forecast set.
std::vector<MetricRow> score(const Forecasts& f);

/// Rows of every model grouped ALL, Winter, Spring, Summer, Fall; each group
/// ascending by SMAPE with ties in model-name order.
EvaluationReport build_report(const std::vector<Forecasts>& forecasts, std::string dataset_id, std::uint64_t seed);

/// Writes metrics.csv, predictions/<model>.csv and forecast.svg (actual plus
/// the four best models by ALL-season SMAPE, the baseline excluded).
void emit_report(const EvaluationReport& report, const std::vector<Forecasts>& forecasts,
                 const std::filesystem::path& dir);

/// Fixed "%.6g" formatting used by every emitted number.
std::string format_number(double v);

}  // namespace efbench
