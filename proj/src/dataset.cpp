#include "efbench/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace efbench {

ScalerParams fit_scaler_on_rows(const TimeSeriesFrame& frame, std::size_t rows) {
    if (frame.size() == 0 || rows == 0) throw std::invalid_argument("fit_scaler: empty training region");
    rows = std::min(rows, frame.size());
    const Eigen::MatrixXd f = frame.features().topRows(static_cast<Eigen::Index>(rows));
    ScalerParams p;
    for (int c = 0; c < kNumFeatures; ++c) {
        p.min[c] = f.col(c).minCoeff();
        p.max[c] = f.col(c).maxCoeff();
    }
    return p;
}

ScalerParams fit_scaler(const TimeSeriesFrame& frame, double train_fraction) {
    if (!(train_fraction > 0.0 && train_fraction <= 1.0))
        throw std::invalid_argument("fit_scaler: train_fraction must lie in (0, 1]");
    const auto rows = static_cast<std::size_t>(std::floor(train_fraction * static_cast<double>(frame.size())));
    return fit_scaler_on_rows(frame, std::max<std::size_t>(rows, 1));
}

const char* to_string(Season s) {
    switch (s) {
        case Season::Winter: return "Winter";
        case Season::Spring: return "Spring";
        case Season::Summer: return "Summer";
        case Season::Fall: return "Fall";
    }
    return "?";
}

const char* to_string(Split s) {
    switch (s) {
        case Split::Train: return "train";
        case Split::Validation: return "val";
        case Split::Test: return "test";
    }
    return "?";
}

Season season_of_month(int month) {
    if (month < 1 || month > 12) throw std::invalid_argument("season: month out of range");
    if (month == 12 || month <= 2) return Season::Winter;
    if (month <= 5) return Season::Spring;
    if (month <= 8) return Season::Summer;
    return Season::Fall;
}

Season assign_season(HourStamp target_start) { return season_of_month(calendar_of(target_start).month); }

SplitCounts chronological_split_counts(std::size_t samples, double train_fraction, double validation_fraction) {
    if (samples < 10) throw std::invalid_argument("split: need at least 10 samples, got " + std::to_string(samples));
    SplitCounts c;
    c.train = static_cast<std::size_t>(std::floor(train_fraction * static_cast<double>(samples)));
    c.validation = static_cast<std::size_t>(std::floor(validation_fraction * static_cast<double>(samples)));
    c.test = samples - c.train - c.validation;
    return c;
}

std::vector<Split> chronological_split(std::size_t samples, double train_fraction, double validation_fraction) {
    const auto c = chronological_split_counts(samples, train_fraction, validation_fraction);
    std::vector<Split> out(samples, Split::Test);
    std::fill_n(out.begin(), c.train, Split::Train);
    std::fill_n(out.begin() + static_cast<std::ptrdiff_t>(c.train), c.validation, Split::Validation);
    return out;
}

std::vector<Eigen::Index> WindowedDataset::indices(Split s) const {
    std::vector<Eigen::Index> out;
    for (std::size_t i = 0; i < split.size(); ++i)
        if (split[i] == s) out.push_back(static_cast<Eigen::Index>(i));
    return out;
}

Tensor gather_rows(const Tensor& t, const std::vector<Eigen::Index>& rows) {
    if (t.rank() < 1) throw ShapeError("gather_rows: scalar tensor");
    Shape shape = t.shape();
    const Eigen::Index stride = t.size() / std::max<Eigen::Index>(shape[0], 1);
    shape[0] = static_cast<Eigen::Index>(rows.size());
    Tensor out(shape);
    for (std::size_t i = 0; i < rows.size(); ++i) {
        if (rows[i] < 0 || rows[i] >= t.dim(0)) throw std::out_of_range("gather_rows: row out of range");
        std::copy_n(t.data() + rows[i] * stride, stride, out.data() + static_cast<Eigen::Index>(i) * stride);
    }
    return out;
}

Tensor WindowedDataset::gather_inputs(const std::vector<Eigen::Index>& rows) const { return gather_rows(inputs, rows); }
Tensor WindowedDataset::gather_targets(const std::vector<Eigen::Index>& rows) const {
    return gather_rows(targets, rows);
}
Tensor WindowedDataset::gather_target_kwh(const std::vector<Eigen::Index>& rows) const {
    return gather_rows(target_kwh, rows);
}

WindowedDataset sliding_window(const TimeSeriesFrame& frame, const ScalerParams& scaler, Eigen::Index window,
                               Eigen::Index horizon) {
    if (window < 1 || horizon < 1) throw std::invalid_argument("sliding_window: window and horizon must be >= 1");
    const auto n = static_cast<Eigen::Index>(frame.size());
    if (n < window + horizon)
        throw std::invalid_argument("sliding_window: frame has " + std::to_string(n) + " hours, need at least " +
                                    std::to_string(window + horizon));
    const Eigen::Index samples = n - window - horizon + 1;
    const Eigen::MatrixXd scaled = scale(frame.features(), scaler);

    WindowedDataset ds;
    ds.window = window;
    ds.horizon = horizon;
    ds.scaler = scaler;
    ds.inputs = Tensor({samples, window, kNumFeatures});
    ds.targets = Tensor({samples, horizon});
    ds.target_kwh = Tensor({samples, horizon});
    ds.input_kwh = Tensor({samples, window});
    ds.target_start.reserve(static_cast<std::size_t>(samples));
    ds.season.reserve(static_cast<std::size_t>(samples));
    const auto& energy = frame.energy();
    for (Eigen::Index s = 0; s < samples; ++s) {
        for (Eigen::Index t = 0; t < window; ++t) {
            for (int f = 0; f < kNumFeatures; ++f) ds.inputs[(s * window + t) * kNumFeatures + f] = scaled(s + t, f);
            ds.input_kwh[s * window + t] = energy[static_cast<std::size_t>(s + t)];
        }
        for (Eigen::Index h = 0; h < horizon; ++h) {
            ds.targets[s * horizon + h] = scaled(s + window + h, kEnergy);
            ds.target_kwh[s * horizon + h] = energy[static_cast<std::size_t>(s + window + h)];
        }
        const HourStamp start = frame.timestamps()[static_cast<std::size_t>(s + window)];
        ds.target_start.push_back(start);
        ds.season.push_back(assign_season(start));
    }
    ds.split = samples >= 10 ? chronological_split(static_cast<std::size_t>(samples))
                             : std::vector<Split>(static_cast<std::size_t>(samples), Split::Train);
    return ds;
}

std::size_t training_rows(std::size_t frame_rows, double train_fraction, Eigen::Index window, Eigen::Index horizon) {
    const auto span = static_cast<std::size_t>(window + horizon);
    if (frame_rows < span) return frame_rows;
    const std::size_t samples = frame_rows - span + 1;
    const auto train = static_cast<std::size_t>(std::floor(train_fraction * static_cast<double>(samples)));
    return std::min(frame_rows, std::max<std::size_t>(train, 1) + span - 1);
}

WindowedDataset prepare_dataset(const TimeSeriesFrame& frame) {
    const ScalerParams scaler = fit_scaler_on_rows(frame, training_rows(frame.size()));
    return sliding_window(frame, scaler);
}

}  // namespace efbench
