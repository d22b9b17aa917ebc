#pragma once

#include <Eigen/Core>

#include <cmath>
#include <stdexcept>
#include <string>

namespace efbench {

namespace detail {
template <typename A, typename B>
void check_same_size(const Eigen::DenseBase<A>& y, const Eigen::DenseBase<B>& p, const char* metric) {
    if (y.rows() != p.rows() || y.cols() != p.cols())
        throw std::invalid_argument(std::string(metric) + ": actual " + std::to_string(y.rows()) + "x" +
                                    std::to_string(y.cols()) + " vs predicted " + std::to_string(p.rows()) + "x" +
                                    std::to_string(p.cols()));
    if (y.size() == 0) throw std::invalid_argument(std::string(metric) + ": no values");
}
}  // namespace detail

/// Symmetric MAPE in percent over all elements. A term whose |y| + |p| is
/// zero contributes 0.
template <typename A, typename B>
double smape(const Eigen::DenseBase<A>& actual, const Eigen::DenseBase<B>& predicted) {
    detail::check_same_size(actual, predicted, "smape");
    const auto y = actual.derived().array();
    const auto p = predicted.derived().array();
    const auto denom = (y.abs() + p.abs()).eval();
    return 100.0 * (denom > 0.0).select(2.0 * (y - p).abs() / denom, 0.0).mean();
}

template <typename A, typename B>
double mae(const Eigen::DenseBase<A>& actual, const Eigen::DenseBase<B>& predicted) {
    detail::check_same_size(actual, predicted, "mae");
    return (actual.derived().array() - predicted.derived().array()).abs().mean();
}

template <typename A, typename B>
double rmse(const Eigen::DenseBase<A>& actual, const Eigen::DenseBase<B>& predicted) {
    detail::check_same_size(actual, predicted, "rmse");
    return std::sqrt((actual.derived().array() - predicted.derived().array()).square().mean());
}

}  // namespace efbench
