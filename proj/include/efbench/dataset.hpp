#pragma once

#include "efbench/frame.hpp"
#include "efbench/scaler.hpp"
#include "efbench/tensor.hpp"

#include <string>
#include <vector>

namespace efbench {

enum class Season { Winter, Spring, Summer, Fall };
enum class Split { Train, Validation, Test };

inline constexpr Season kSeasons[] = {Season::Winter, Season::Spring, Season::Summer, Season::Fall};

const char* to_string(Season s);
const char* to_string(Split s);

/// Meteorological seasons: Dec-Feb Winter, Mar-May Spring, Jun-Aug Summer,
/// Sep-Nov Fall.
Season season_of_month(int month);
Season assign_season(HourStamp target_start);

struct SplitCounts {
    std::size_t train = 0, validation = 0, test = 0;
};

/// floor(0.7 n) / floor(0.1 n) / remainder, in source order.
SplitCounts chronological_split_counts(std::size_t samples, double train_fraction = 0.70,
                                       double validation_fraction = 0.10);
std::vector<Split> chronological_split(std::size_t samples, double train_fraction = 0.70,
                                       double validation_fraction = 0.10);

inline constexpr Eigen::Index kWindow = 24;
inline constexpr Eigen::Index kHorizon = 24;

/// Sliding-window samples. Sample k pairs frame hours k..k+window-1 (inputs)
/// with hours k+window..k+window+horizon-1 (targets).
struct WindowedDataset {
    Tensor inputs;      // (S, window, 6), scaled
    Tensor targets;     // (S, horizon), scaled energy
    Tensor target_kwh;  // (S, horizon)
    Tensor input_kwh;   // (S, window), unscaled input-window energy
    std::vector<HourStamp> target_start;
    std::vector<Season> season;
    std::vector<Split> split;
    ScalerParams scaler;
    Eigen::Index window = kWindow;
    Eigen::Index horizon = kHorizon;

    std::size_t size() const { return target_start.size(); }
    std::vector<Eigen::Index> indices(Split s) const;

    Tensor gather_inputs(const std::vector<Eigen::Index>& rows) const;
    Tensor gather_targets(const std::vector<Eigen::Index>& rows) const;
    Tensor gather_target_kwh(const std::vector<Eigen::Index>& rows) const;
};

/// Windows the frame with stride 1, scales every feature with `scaler`,
/// labels seasons by target start and assigns the chronological split.
/// Fewer than 10 windows are too few to split and are all labelled Train.
WindowedDataset sliding_window(const TimeSeriesFrame& frame, const ScalerParams& scaler,
                               Eigen::Index window = kWindow, Eigen::Index horizon = kHorizon);

/// Number of leading frame rows touched by training windows.
std::size_t training_rows(std::size_t frame_rows, double train_fraction = 0.70, Eigen::Index window = kWindow,
                          Eigen::Index horizon = kHorizon);

/// Scaler fitted on the training-window rows, then sliding_window().
WindowedDataset prepare_dataset(const TimeSeriesFrame& frame);

/// Row gather for any tensor whose first axis indexes samples.
Tensor gather_rows(const Tensor& t, const std::vector<Eigen::Index>& rows);

}  // namespace efbench
