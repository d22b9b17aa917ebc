#pragma once

#include "efbench/frame.hpp"

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

namespace efbench {

/// Inclusive month/day range during which load is multiplied by `factor`.
/// A range whose end precedes its start wraps over the new year.
struct DipWindow {
    int start_month = 7, start_day = 1;
    int end_month = 7, end_day = 31;
    double factor = 0.5;

    bool contains(int month, int day) const;
};

struct SyntheticProfile {
    double base_load = 100.0;            // kWh per hour
    double daily_amplitude = 20.0;       // evening peak
    double weekly_amplitude = 10.0;      // weekend lift
    double annual_amplitude = 15.0;      // winter peak
    double temperature_coupling = 1.5;   // kWh per C away from comfort
    double comfort_temperature = 18.0;
    double noise_sigma = 5.0;
    double temperature_mean = 8.0;
    double temperature_annual_amplitude = 13.0;
    double temperature_daily_amplitude = 4.0;
    double temperature_noise_sigma = 1.0;
    std::vector<DipWindow> dips;
    std::string start = "2019-01-01T00:00:00";
    std::uint64_t seed = 0;

    void validate() const;
};

/// Reads a JSON key-value document; absent keys keep their defaults.
SyntheticProfile load_profile(const std::filesystem::path& path);
SyntheticProfile parse_profile(const std::string& json_text);
std::string profile_to_json(const SyntheticProfile& profile);

/// Profile used by the benchmark: student residence with summer and
/// winter-break vacation dips.
SyntheticProfile residence_profile();

/// energy = base + daily + weekly + annual + temperature-coupled terms, scaled
/// by any active dip factor, plus Gaussian noise, clipped at 0.
TimeSeriesFrame generate_synthetic(const SyntheticProfile& profile, HourStamp start, std::size_t hours,
                                   std::uint64_t seed);

}  // namespace efbench
