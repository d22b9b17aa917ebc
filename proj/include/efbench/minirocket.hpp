#pragma once

#include "efbench/gbt.hpp"
#include "efbench/tensor.hpp"

#include <array>
#include <cstdint>
#include <vector>

namespace efbench {

inline constexpr int kMiniRocketKernels = 84;
inline constexpr int kMiniRocketKernelLength = 9;

/// Weights of kernel k: -1 everywhere except 2 at the k-th (in lexicographic
/// order) choice of three positions out of nine.
std::array<double, kMiniRocketKernelLength> minirocket_kernel(int k);

/// One (kernel, dilation) pairing with its summed channel subset and the
/// bias thresholds of the features it emits.
struct MiniRocketCombo {
    int kernel = 0;
    Eigen::Index dilation = 1;
    /// When false only outputs whose receptive field lies inside the series
    /// are pooled.
    bool padded = true;
    std::vector<int> channels;
    std::vector<double> biases;

    bool operator==(const MiniRocketCombo&) const = default;
};

struct MiniRocketParams {
    Eigen::Index channels = 0;
    Eigen::Index length = 0;
    std::vector<MiniRocketCombo> combos;

    Eigen::Index num_features() const;
    bool operator==(const MiniRocketParams&) const = default;
};

struct MiniRocketConfig {
    int num_features = 512;
    /// Training samples whose convolution outputs set the bias quantiles.
    int quantile_samples = 1024;
    std::uint64_t seed = 0;
};

/// Dilations for series length `length` and their feature counts per kernel.
/// For length 24 and 512 features: dilations {1, 2} with counts {4, 2}, plus
/// one extra dilation-1 feature for each of the first 512 - 504 = 8 kernels.
struct DilationPlan {
    std::vector<Eigen::Index> dilations;
    std::vector<int> features_per_kernel;
    int extra_kernels = 0;
};
DilationPlan minirocket_dilations(Eigen::Index length, int num_features);

/// `inputs` is (samples, channels, length).
MiniRocketParams minirocket_fit(const Tensor& inputs, const MiniRocketConfig& cfg);
/// PPV features (samples, num_features), each in [0, 1].
RowMajorMatrix minirocket_transform(const MiniRocketParams& params, const Tensor& inputs, std::size_t threads = 0);

/// (samples, 24, 6) windows to (samples, 6, 24) channel-major series.
Tensor to_channel_major(const Tensor& windows);

}  // namespace efbench
