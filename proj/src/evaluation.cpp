#include "efbench/evaluation.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <map>
#include <sstream>

namespace efbench {

using Index = Eigen::Index;

std::string format_number(double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.6g", v);
    return buf;
}

namespace {

Forecasts frame_of(const WindowedDataset& data, Split split, std::string name) {
    const auto rows = data.indices(split);
    if (rows.empty()) throw std::invalid_argument(std::string("the ") + to_string(split) + " split is empty");
    Forecasts f;
    f.model = std::move(name);
    f.actual_kwh = data.gather_target_kwh(rows);
    for (Index r : rows) {
        f.target_start.push_back(data.target_start[static_cast<std::size_t>(r)]);
        f.season.push_back(data.season[static_cast<std::size_t>(r)]);
    }
    return f;
}

MetricRow metrics_over(const std::string& model, const std::string& season, const Eigen::MatrixXd& y,
                       const Eigen::MatrixXd& p) {
    return {model, season, mae(y, p), rmse(y, p), smape(y, p), static_cast<std::size_t>(y.rows())};
}

int group_of(const std::string& season) {
    if (season == kAllSeasons) return 0;
    for (std::size_t i = 0; i < std::size(kSeasons); ++i)
        if (season == to_string(kSeasons[i])) return static_cast<int>(i) + 1;
    return 99;
}

void write_file(const std::filesystem::path& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write " + path.string());
    out << text;
    if (!out) throw std::runtime_error("failed writing " + path.string());
}

std::string svg_chart(const std::vector<const Forecasts*>& models, const Forecasts& reference) {
    constexpr double kWidth = 960, kHeight = 420, kLeft = 60, kRight = 180, kTop = 30, kBottom = 40;
    constexpr Index kDays = 7;
    std::vector<Index> windows;
    for (Index s = 0; s < reference.actual_kwh.dim(0) && static_cast<Index>(windows.size()) < kDays; s += 24)
        windows.push_back(s);
    auto series = [&](const Tensor& t) {
        std::vector<double> v;
        for (Index s : windows)
            for (Index h = 0; h < 24; ++h) v.push_back(t.matrix()(s, h));
        return v;
    };
    std::vector<std::pair<std::string, std::vector<double>>> lines{{"Actual", series(reference.actual_kwh)}};
    for (const auto* m : models) lines.emplace_back(m->model, series(m->predicted_kwh));
    double lo = lines[0].second.front(), hi = lo;
    for (const auto& [name, v] : lines)
        for (double x : v) {
            lo = std::min(lo, x);
            hi = std::max(hi, x);
        }
    if (hi == lo) hi = lo + 1.0;
    const double n = double(lines[0].second.size());
    const double plot_w = kWidth - kLeft - kRight, plot_h = kHeight - kTop - kBottom;
    static const char* kColors[] = {"#000000", "#1f77b4", "#d62728", "#2ca02c", "#ff7f0e"};

    std::ostringstream os;
    os << "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n"
       << "<svg xmlns=\"http://www.w3.org/2000/svg\" version=\"1.1\" width=\"" << kWidth << "\" height=\"" << kHeight
       << "\" viewBox=\"0 0 " << kWidth << ' ' << kHeight << "\">\n"
       << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n"
       << "<text x=\"" << kLeft << "\" y=\"20\" font-family=\"sans-serif\" font-size=\"14\">Day-ahead forecasts, first "
       << windows.size() << " test days (kWh)</text>\n"
       << "<line x1=\"" << kLeft << "\" y1=\"" << kTop + plot_h << "\" x2=\"" << kLeft + plot_w << "\" y2=\""
       << kTop + plot_h << "\" stroke=\"#888\"/>\n"
       << "<line x1=\"" << kLeft << "\" y1=\"" << kTop << "\" x2=\"" << kLeft << "\" y2=\"" << kTop + plot_h
       << "\" stroke=\"#888\"/>\n"
       << "<text x=\"5\" y=\"" << kTop + 10 << "\" font-family=\"sans-serif\" font-size=\"11\">" << format_number(hi)
       << "</text>\n"
       << "<text x=\"5\" y=\"" << kTop + plot_h << "\" font-family=\"sans-serif\" font-size=\"11\">"
       << format_number(lo) << "</text>\n";
    char buf[64];
    for (std::size_t l = 0; l < lines.size(); ++l) {
        os << "<polyline fill=\"none\" stroke=\"" << kColors[l % 5] << "\" stroke-width=\"" << (l == 0 ? 2 : 1.2)
           << "\" points=\"";
        const auto& v = lines[l].second;
        for (std::size_t i = 0; i < v.size(); ++i) {
            const double x = kLeft + plot_w * (n > 1 ? double(i) / (n - 1) : 0.0);
            const double y = kTop + plot_h * (1.0 - (v[i] - lo) / (hi - lo));
            std::snprintf(buf, sizeof buf, "%s%.2f,%.2f", i ? " " : "", x, y);
            os << buf;
        }
        os << "\"/>\n";
        const double ly = kTop + 20.0 * double(l);
        os << "<rect x=\"" << kWidth - kRight + 15 << "\" y=\"" << ly << "\" width=\"12\" height=\"3\" fill=\""
           << kColors[l % 5] << "\"/>\n"
           << "<text x=\"" << kWidth - kRight + 32 << "\" y=\"" << ly + 5 << "\" font-family=\"sans-serif\" "
           << "font-size=\"12\">" << lines[l].first << "</text>\n";
    }
    os << "</svg>\n";
    return os.str();
}

}  // namespace

Forecasts forecast(const TrainedModel& model, const WindowedDataset& data, Split split, std::size_t threads) {
    Forecasts f = frame_of(data, split, display_name(model.config.architecture));
    f.predicted_kwh = model.predict_kwh(data.gather_inputs(data.indices(split)), threads);
    return f;
}

Forecasts persistence_baseline(const WindowedDataset& data, Split split) {
    Forecasts f = frame_of(data, split, kPersistenceName);
    f.predicted_kwh = gather_rows(data.input_kwh, data.indices(split));
    return f;
}

std::vector<MetricRow> score(const Forecasts& f) {
    const Index s = f.actual_kwh.rank() == 2 ? f.actual_kwh.dim(0) : 0;
    if (s == 0) throw std::invalid_argument(f.model + ": nothing to score");
    if (f.predicted_kwh.shape() != f.actual_kwh.shape() || f.season.size() != static_cast<std::size_t>(s))
        throw std::invalid_argument(f.model + ": forecast and actual shapes differ");
    const Eigen::MatrixXd y = f.actual_kwh.matrix(), p = f.predicted_kwh.matrix();
    std::vector<MetricRow> rows{metrics_over(f.model, kAllSeasons, y, p)};
    for (Season season : kSeasons) {
        std::vector<Index> idx;
        for (Index i = 0; i < s; ++i)
            if (f.season[static_cast<std::size_t>(i)] == season) idx.push_back(i);
        if (idx.empty()) continue;
        rows.push_back(metrics_over(f.model, to_string(season), y(idx, Eigen::all),
                                    p(idx, Eigen::all)));
    }
    return rows;
}

EvaluationReport build_report(const std::vector<Forecasts>& forecasts, std::string dataset_id, std::uint64_t seed) {
    if (forecasts.empty()) throw std::invalid_argument("report needs at least one model");
    EvaluationReport r;
    r.dataset_id = std::move(dataset_id);
    r.seed = seed;
    r.timestamp = format_timestamp(forecasts.front().target_start.front());
    for (const auto& f : forecasts) {
        auto rows = score(f);
        r.rows.insert(r.rows.end(), rows.begin(), rows.end());
    }
    std::stable_sort(r.rows.begin(), r.rows.end(), [](const MetricRow& a, const MetricRow& b) {
        const int ga = group_of(a.season), gb = group_of(b.season);
        if (ga != gb) return ga < gb;
        if (a.smape != b.smape) return a.smape < b.smape;
        return a.model < b.model;
    });
    return r;
}

void emit_report(const EvaluationReport& report, const std::vector<Forecasts>& forecasts,
                 const std::filesystem::path& dir) {
    if (report.rows.empty()) throw std::invalid_argument("empty report");
    std::error_code ec;
    std::filesystem::create_directories(dir / "predictions", ec);
    if (ec) throw std::runtime_error("cannot create " + (dir / "predictions").string() + ": " + ec.message());

    std::ostringstream metrics;
    metrics << "model,season,mae,rmse,smape,n\n";
    for (const auto& row : report.rows)
        metrics << row.model << ',' << row.season << ',' << format_number(row.mae) << ',' << format_number(row.rmse)
                << ',' << format_number(row.smape) << ',' << row.n << '\n';
    write_file(dir / "metrics.csv", metrics.str());

    for (const auto& f : forecasts) {
        std::ostringstream os;
        os << "timestamp,actual_kwh,predicted_kwh,horizon_hour\n";
        for (Index s = 0; s < f.actual_kwh.dim(0); ++s)
            for (Index h = 0; h < f.actual_kwh.dim(1); ++h)
                os << format_timestamp(f.target_start[static_cast<std::size_t>(s)] + std::chrono::hours(h)) << ','
                   << format_number(f.actual_kwh.matrix()(s, h)) << ',' << format_number(f.predicted_kwh.matrix()(s, h))
                   << ',' << h + 1 << '\n';
        write_file(dir / "predictions" / (f.model + ".csv"), os.str());
    }

    std::vector<const Forecasts*> ranked;
    for (const auto& row : report.rows) {
        if (row.season != kAllSeasons || row.model == kPersistenceName || ranked.size() == 4) continue;
        for (const auto& f : forecasts)
            if (f.model == row.model) ranked.push_back(&f);
    }
    write_file(dir / "forecast.svg", svg_chart(ranked, forecasts.front()));
}

}  // namespace efbench
