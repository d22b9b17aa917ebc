#pragma once

#include "efbench/frame.hpp"

#include <Eigen/Core>

#include <array>

namespace efbench {

/// Per-feature MinMax bounds in Feature order.
struct ScalerParams {
    std::array<double, kNumFeatures> min{};
    std::array<double, kNumFeatures> max{};

    bool degenerate(int feature) const { return max[feature] == min[feature]; }

    /// (X - min) / (max - min); degenerate features map to 0. Values outside
    /// the fitted range land outside [0, 1].
    double scale(double x, int feature) const {
        return degenerate(feature) ? 0.0 : (x - min[feature]) / (max[feature] - min[feature]);
    }
    double inverse(double s, int feature) const {
        return degenerate(feature) ? min[feature] : min[feature] + s * (max[feature] - min[feature]);
    }

    bool operator==(const ScalerParams&) const = default;
};

/// Bounds over the first `rows` rows of the frame.
ScalerParams fit_scaler_on_rows(const TimeSeriesFrame& frame, std::size_t rows);
/// Bounds over the leading floor(train_fraction * N) rows (at least one).
ScalerParams fit_scaler(const TimeSeriesFrame& frame, double train_fraction);

/// Scales every column of an (N, 6) feature matrix.
template <typename Derived>
Eigen::Matrix<typename Derived::Scalar, Eigen::Dynamic, Eigen::Dynamic> scale(const Eigen::MatrixBase<Derived>& x,
                                                                               const ScalerParams& p) {
    Eigen::Matrix<typename Derived::Scalar, Eigen::Dynamic, Eigen::Dynamic> out(x.rows(), x.cols());
    for (Eigen::Index c = 0; c < x.cols(); ++c) {
        const int f = static_cast<int>(c);
        if (p.degenerate(f))
            out.col(c).setZero();
        else
            out.col(c) = (x.col(c).array() - p.min[f]) / (p.max[f] - p.min[f]);
    }
    return out;
}

template <typename Derived>
Eigen::Matrix<typename Derived::Scalar, Eigen::Dynamic, Eigen::Dynamic> inverse_scale(
    const Eigen::MatrixBase<Derived>& s, const ScalerParams& p) {
    Eigen::Matrix<typename Derived::Scalar, Eigen::Dynamic, Eigen::Dynamic> out(s.rows(), s.cols());
    for (Eigen::Index c = 0; c < s.cols(); ++c) {
        const int f = static_cast<int>(c);
        if (p.degenerate(f))
            out.col(c).setConstant(p.min[f]);
        else
            out.col(c) = s.col(c).array() * (p.max[f] - p.min[f]) + p.min[f];
    }
    return out;
}

/// Maps a block of scaled energy values (any shape) back to kWh.
template <typename Derived>
auto energy_to_kwh(const Eigen::DenseBase<Derived>& scaled, const ScalerParams& p) {
    const double span = p.degenerate(kEnergy) ? 0.0 : p.max[kEnergy] - p.min[kEnergy];
    return (scaled.derived().array() * span + p.min[kEnergy]).eval();
}

}  // namespace efbench
