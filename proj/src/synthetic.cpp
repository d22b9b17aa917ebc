#include "efbench/synthetic.hpp"

#include "efbench/rng.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numbers>
#include <sstream>
#include <stdexcept>

namespace efbench {

namespace {

void parse_month_day(const std::string& s, int& month, int& day) {
    if (s.size() != 5 || s[2] != '-') throw std::invalid_argument("dip date must be 'MM-DD', got '" + s + "'");
    month = std::stoi(s.substr(0, 2));
    day = std::stoi(s.substr(3, 2));
    if (month < 1 || month > 12 || day < 1 || day > 31) throw std::invalid_argument("invalid dip date '" + s + "'");
}

std::string month_day(int month, int day) {
    char buf[8];
    std::snprintf(buf, sizeof buf, "%02d-%02d", month, day);
    return buf;
}

}  // namespace

bool DipWindow::contains(int month, int day) const {
    const int key = month * 100 + day;
    const int lo = start_month * 100 + start_day;
    const int hi = end_month * 100 + end_day;
    return lo <= hi ? (key >= lo && key <= hi) : (key >= lo || key <= hi);
}

void SyntheticProfile::validate() const {
    auto non_negative = [](double v, const char* name) {
        if (!(v >= 0.0) || !std::isfinite(v))
            throw std::invalid_argument(std::string("profile: ") + name + " must be a non-negative number");
    };
    non_negative(base_load, "base_load");
    non_negative(daily_amplitude, "daily_amplitude");
    non_negative(weekly_amplitude, "weekly_amplitude");
    non_negative(annual_amplitude, "annual_amplitude");
    non_negative(temperature_coupling, "temperature_coupling");
    non_negative(noise_sigma, "noise_sigma");
    non_negative(temperature_annual_amplitude, "temperature_annual_amplitude");
    non_negative(temperature_daily_amplitude, "temperature_daily_amplitude");
    non_negative(temperature_noise_sigma, "temperature_noise_sigma");
    if (!std::isfinite(temperature_mean) || std::abs(temperature_mean) > 60.0)
        throw std::invalid_argument("profile: temperature_mean outside [-60, 60]");
    for (const auto& d : dips) {
        non_negative(d.factor, "dip factor");
        if (d.start_month < 1 || d.start_month > 12 || d.end_month < 1 || d.end_month > 12)
            throw std::invalid_argument("profile: dip month out of range");
    }
    (void)parse_timestamp(start);
}

SyntheticProfile parse_profile(const std::string& json_text) {
    const auto j = nlohmann::json::parse(json_text);
    if (!j.is_object()) throw std::invalid_argument("profile: document must be an object");
    SyntheticProfile p;
    static const char* known[] = {"base_load",
                                  "daily_amplitude",
                                  "weekly_amplitude",
                                  "annual_amplitude",
                                  "temperature_coupling",
                                  "comfort_temperature",
                                  "noise_sigma",
                                  "temperature_mean",
                                  "temperature_annual_amplitude",
                                  "temperature_daily_amplitude",
                                  "temperature_noise_sigma",
                                  "dips",
                                  "start",
                                  "seed"};
    for (auto it = j.begin(); it != j.end(); ++it)
        if (std::find_if(std::begin(known), std::end(known), [&](const char* k) { return it.key() == k; }) ==
            std::end(known))
            throw std::invalid_argument("profile: unknown key '" + it.key() + "'");
    auto num = [&](const char* key, double& dst) {
        if (j.contains(key)) dst = j.at(key).get<double>();
    };
    num("base_load", p.base_load);
    num("daily_amplitude", p.daily_amplitude);
    num("weekly_amplitude", p.weekly_amplitude);
    num("annual_amplitude", p.annual_amplitude);
    num("temperature_coupling", p.temperature_coupling);
    num("comfort_temperature", p.comfort_temperature);
    num("noise_sigma", p.noise_sigma);
    num("temperature_mean", p.temperature_mean);
    num("temperature_annual_amplitude", p.temperature_annual_amplitude);
    num("temperature_daily_amplitude", p.temperature_daily_amplitude);
    num("temperature_noise_sigma", p.temperature_noise_sigma);
    if (j.contains("start")) p.start = j.at("start").get<std::string>();
    if (j.contains("seed")) p.seed = j.at("seed").get<std::uint64_t>();
    if (j.contains("dips")) {
        for (const auto& d : j.at("dips")) {
            DipWindow w;
            parse_month_day(d.at("start").get<std::string>(), w.start_month, w.start_day);
            parse_month_day(d.at("end").get<std::string>(), w.end_month, w.end_day);
            w.factor = d.at("factor").get<double>();
            p.dips.push_back(w);
        }
    }
    p.validate();
    return p;
}

SyntheticProfile load_profile(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw std::invalid_argument("profile: cannot open " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return parse_profile(ss.str());
}

std::string profile_to_json(const SyntheticProfile& p) {
    nlohmann::ordered_json j;
    j["base_load"] = p.base_load;
    j["daily_amplitude"] = p.daily_amplitude;
    j["weekly_amplitude"] = p.weekly_amplitude;
    j["annual_amplitude"] = p.annual_amplitude;
    j["temperature_coupling"] = p.temperature_coupling;
    j["comfort_temperature"] = p.comfort_temperature;
    j["noise_sigma"] = p.noise_sigma;
    j["temperature_mean"] = p.temperature_mean;
    j["temperature_annual_amplitude"] = p.temperature_annual_amplitude;
    j["temperature_daily_amplitude"] = p.temperature_daily_amplitude;
    j["temperature_noise_sigma"] = p.temperature_noise_sigma;
    j["dips"] = nlohmann::ordered_json::array();
    for (const auto& d : p.dips)
        j["dips"].push_back({{"start", month_day(d.start_month, d.start_day)},
                             {"end", month_day(d.end_month, d.end_day)},
                             {"factor", d.factor}});
    j["start"] = p.start;
    j["seed"] = p.seed;
    return j.dump(2);
}

SyntheticProfile residence_profile() {
    SyntheticProfile p;
    p.base_load = 120.0;
    p.daily_amplitude = 35.0;
    p.weekly_amplitude = 12.0;
    p.annual_amplitude = 20.0;
    p.temperature_coupling = 2.0;
    p.noise_sigma = 6.0;
    p.dips = {DipWindow{5, 1, 8, 20, 0.55}, DipWindow{12, 20, 1, 3, 0.45}};
    return p;
}

TimeSeriesFrame generate_synthetic(const SyntheticProfile& profile, HourStamp start, std::size_t hours,
                                   std::uint64_t seed) {
    profile.validate();
    if (hours < 48) throw std::invalid_argument("synthetic: need ≥ 48 hours, got " + std::to_string(hours));
    constexpr double two_pi = 2.0 * std::numbers::pi;
    Rng energy_rng = Rng(seed).split("synthetic/energy");
    Rng temp_rng = Rng(seed).split("synthetic/temperature");

    std::vector<HourStamp> ts(hours);
    std::vector<double> temp(hours), energy(hours);
    for (std::size_t i = 0; i < hours; ++i) {
        const HourStamp t = start + std::chrono::hours{static_cast<long>(i)};
        const Calendar c = calendar_of(t);
        const double doy = c.day_of_year - 1 + c.hour / 24.0;
        double temperature = profile.temperature_mean +
                             profile.temperature_annual_amplitude * std::cos(two_pi * (doy - 200.0) / 365.25) +
                             profile.temperature_daily_amplitude * std::cos(two_pi * (c.hour - 15.0) / 24.0);
        if (profile.temperature_noise_sigma > 0.0) temperature += profile.temperature_noise_sigma * temp_rng.normal();
        temperature = std::clamp(temperature, -60.0, 60.0);

        double load = profile.base_load + profile.daily_amplitude * std::cos(two_pi * (c.hour - 19.0) / 24.0) +
                      (c.day_of_week >= 5 ? profile.weekly_amplitude : 0.0) +
                      profile.annual_amplitude * std::cos(two_pi * (doy - 15.0) / 365.25) +
                      profile.temperature_coupling * std::abs(temperature - profile.comfort_temperature);
        for (const auto& d : profile.dips)
            if (d.contains(c.month, c.day_of_month)) load *= d.factor;
        if (profile.noise_sigma > 0.0) load += profile.noise_sigma * energy_rng.normal();

        ts[i] = t;
        temp[i] = temperature;
        energy[i] = std::max(0.0, load);
    }
    return TimeSeriesFrame::build(std::move(ts), std::move(temp), std::move(energy));
}

}  // namespace efbench
