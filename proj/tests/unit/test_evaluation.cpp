#include "doctest.h"

#include "efbench/csv.hpp"
#include "efbench/evaluation.hpp"
#include "fixtures.hpp"
#include "metric_oracle.hpp"

#include <filesystem>
#include <fstream>
#include <sstream>

using namespace efbench;

namespace {

Eigen::VectorXd vec(std::initializer_list<double> v) {
    Eigen::VectorXd out(static_cast<Eigen::Index>(v.size()));
    Eigen::Index i = 0;
    for (double d : v) out[i++] = d;
    return out;
}

std::vector<double> stdvec(const Eigen::VectorXd& v) { return {v.data(), v.data() + v.size()}; }

TimeSeriesFrame frame_from(const std::vector<double>& energy) {
    std::vector<HourStamp> ts;
    const HourStamp start = parse_timestamp("2021-01-01T00:00:00");
    for (std::size_t i = 0; i < energy.size(); ++i) ts.push_back(start + std::chrono::hours(i));
    return TimeSeriesFrame::build(ts, std::vector<double>(energy.size(), 10.0), energy);
}

std::string slurp(const std::filesystem::path& p) {
    std::ifstream in(p);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

}  // namespace

TEST_CASE("metric worked examples") {
    CHECK(smape(vec({3, 4}), vec({3, 4})) == 0.0);
    CHECK(smape(vec({100}), vec({50})) == 100.0 * (2.0 * 50.0 / 150.0));
    CHECK(smape(vec({0}), vec({0})) == 0.0);
    CHECK(mae(vec({1, 2}), vec({1, 2})) == 0.0);
    CHECK(rmse(vec({1, 2}), vec({1, 2})) == 0.0);
    CHECK(mae(vec({1, 5, -2}), vec({4, 8, 1})) == 3.0);
    CHECK(rmse(vec({1, 5, -2}), vec({4, 8, 1})) == 3.0);
    CHECK(mae(vec({0, 0}), vec({0, 4})) == 2.0);
    CHECK(rmse(vec({0, 0}), vec({0, 4})) == std::sqrt(8.0));
    CHECK_THROWS_AS(smape(vec({1, 2}), vec({1})), std::invalid_argument);
    CHECK_THROWS_AS(mae(Eigen::VectorXd(), Eigen::VectorXd()), std::invalid_argument);
}

TEST_CASE("metrics agree with naive loops on random fixtures") {
    Rng rng(31);
    for (int trial = 0; trial < 100; ++trial) {
        const auto n = static_cast<Eigen::Index>(1 + rng.below(200));
        Eigen::VectorXd y(n), p(n);
        for (Eigen::Index i = 0; i < n; ++i) {
            y[i] = rng.below(10) == 0 ? 0.0 : rng.uniform(0, 500);
            p[i] = rng.below(10) == 0 ? 0.0 : rng.uniform(-50, 500);
        }
        const auto ys = stdvec(y), ps = stdvec(p);
        CHECK(oracle::relative_gap(smape(y, p), oracle::naive_smape(ys, ps)) < 1e-12);
        CHECK(oracle::relative_gap(mae(y, p), oracle::naive_mae(ys, ps)) < 1e-12);
        CHECK(oracle::relative_gap(rmse(y, p), oracle::naive_rmse(ys, ps)) < 1e-12);
        CHECK(smape(y, p) >= 0.0);
        CHECK(smape(y, p) <= 200.0);
        CHECK(mae(y, p) <= rmse(y, p) * (1 + 1e-15));
    }
}

TEST_CASE("persistence baseline") {
    const auto constant = prepare_dataset(frame_from(std::vector<double>(24 * 20, 42.0)));
    const auto f = persistence_baseline(constant);
    CHECK(score(f).front().smape == 0.0);

    std::vector<double> periodic, shifted;
    for (int i = 0; i < 24 * 20; ++i) {
        periodic.push_back(50.0 + 10.0 * std::sin(2 * 3.141592653589793 * (i % 24) / 24.0));
        shifted.push_back(periodic.back() + 3.5 * double(i / 24));
    }
    CHECK(score(persistence_baseline(prepare_dataset(frame_from(periodic)))).front().smape < 1e-12);
    const auto rows = score(persistence_baseline(prepare_dataset(frame_from(shifted))));
    CHECK(rows.front().mae == doctest::Approx(3.5).epsilon(1e-12));
}

TEST_CASE("season rows recombine into the ALL row") {
    const auto data = efbench::testing::synthetic_dataset(24 * 400, 8);
    const auto test = data.indices(Split::Test);
    Forecasts f = persistence_baseline(data, Split::Test);
    const auto rows = score(f);
    REQUIRE(rows.size() >= 3);
    std::size_t n = 0;
    double m = 0, r2 = 0, s = 0;
    for (std::size_t i = 1; i < rows.size(); ++i) {
        n += rows[i].n;
        m += double(rows[i].n) * rows[i].mae;
        r2 += double(rows[i].n) * rows[i].rmse * rows[i].rmse;
        s += double(rows[i].n) * rows[i].smape;
    }
    CHECK(n == rows[0].n);
    CHECK(n == test.size());
    CHECK(oracle::relative_gap(m / double(n), rows[0].mae) < 1e-12);
    CHECK(oracle::relative_gap(r2 / double(n), rows[0].rmse * rows[0].rmse) < 1e-12);
    CHECK(oracle::relative_gap(s / double(n), rows[0].smape) < 1e-12);

    // A perfect predictor scores zero everywhere.
    f.predicted_kwh = f.actual_kwh;
    for (const auto& row : score(f)) CHECK((row.mae == 0.0 && row.rmse == 0.0 && row.smape == 0.0));
}

TEST_CASE("single-season data: ALL row equals the season row") {
    const auto data = efbench::testing::synthetic_dataset(24 * 45, 3);  // January and February only
    const auto rows = score(persistence_baseline(data, Split::Test));
    REQUIRE(rows.size() == 2);
    CHECK(rows[1].season == std::string("Winter"));
    CHECK(rows[0].mae == rows[1].mae);
    CHECK(rows[0].smape == rows[1].smape);
    CHECK(rows[0].n == rows[1].n);
}

TEST_CASE("report ordering and emitted files") {
    const auto data = efbench::testing::synthetic_dataset(24 * 400, 8);
    std::vector<Forecasts> all;
    const Forecasts base = persistence_baseline(data);
    all.push_back(base);
    const char* names[] = {"Zeta", "Alpha", "Mid", "Beta", "Gamma", "Tie"};
    for (int k = 0; k < 6; ++k) {
        Forecasts f = base;
        f.model = names[k];
        // Scale errors so the order is known; "Tie" duplicates "Mid".
        const double factor = k == 5 ? 0.3 : 0.1 * double(k + 1);
        f.predicted_kwh.vec() = f.actual_kwh.vec() + factor * (base.predicted_kwh.vec() - base.actual_kwh.vec());
        all.push_back(f);
    }
    const auto report = build_report(all, "synthetic", 8);
    const std::size_t seasons = score(base).size();
    CHECK(report.rows.size() == all.size() * seasons);
    for (std::size_t i = 1; i < all.size(); ++i) {
        const auto& a = report.rows[i - 1];
        const auto& b = report.rows[i];
        CHECK(a.season == std::string("ALL"));
        CHECK((a.smape < b.smape || (a.smape == b.smape && a.model < b.model)));
    }
    CHECK(report.rows[0].model == "Zeta");
    CHECK(report.rows[2].model == "Mid");
    CHECK(report.rows[3].model == "Tie");

    const auto dir = std::filesystem::temp_directory_path() / "efbench_report_test";
    std::filesystem::remove_all(dir);
    emit_report(report, all, dir);
    const auto metrics = parse_csv(slurp(dir / "metrics.csv"));
    CHECK(metrics.header == std::vector<std::string>{"model", "season", "mae", "rmse", "smape", "n"});
    CHECK(metrics.rows.size() == report.rows.size());
    CHECK(metrics.rows[0].fields[4] == format_number(report.rows[0].smape));

    const auto preds = parse_csv(slurp(dir / "predictions" / "Alpha.csv"));
    CHECK(preds.header == std::vector<std::string>{"timestamp", "actual_kwh", "predicted_kwh", "horizon_hour"});
    CHECK(preds.rows.size() == 24 * base.target_start.size());
    CHECK(parse_timestamp(preds.rows[1].fields[0]) == base.target_start[0] + std::chrono::hours(1));
    CHECK(preds.rows[23].fields[3] == "24");

    const std::string svg = slurp(dir / "forecast.svg");
    std::size_t polylines = 0;
    for (auto at = svg.find("<polyline"); at != std::string::npos; at = svg.find("<polyline", at + 1)) ++polylines;
    CHECK(polylines == 5);
    CHECK(svg.find("Persistence") == std::string::npos);
    std::filesystem::remove_all(dir);

    CHECK_THROWS(emit_report(report, all, "/proc/efbench-not-writable"));
}
