#include "efbench/minirocket.hpp"

#include "efbench/parallel.hpp"
#include "efbench/rng.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>
#include <stdexcept>
#include <string>

namespace efbench {

using Index = Eigen::Index;

namespace {

constexpr int kTaps = kMiniRocketKernelLength;

std::array<std::array<int, 3>, kMiniRocketKernels> kernel_positions() {
    std::array<std::array<int, 3>, kMiniRocketKernels> out{};
    int k = 0;
    for (int a = 0; a < kTaps; ++a)
        for (int b = a + 1; b < kTaps; ++b)
            for (int c = b + 1; c < kTaps; ++c) out[k++] = {a, b, c};
    return out;
}

const auto kPositions = kernel_positions();

/// Sum of the combo's channels for one sample.
void summed_series(const double* sample, Index length, const std::vector<int>& channels, std::vector<double>& out) {
    out.assign(static_cast<std::size_t>(length), 0.0);
    for (int c : channels)
        for (Index t = 0; t < length; ++t) out[t] += sample[c * length + t];
}

/// Zero-padded "same" convolution of a summed series. The kernel is -1 at
/// every tap plus 3 at its three marked taps, which is how the -1/2 weights
/// are applied without multiplications.
void convolve(const std::vector<double>& x, int kernel, Index dilation, std::vector<double>& out) {
    const Index n = static_cast<Index>(x.size()), half = (kTaps / 2) * dilation;
    const auto& pos = kPositions[kernel];
    out.assign(x.size(), 0.0);
    for (Index t = 0; t < n; ++t) {
        double s = 0.0, marked = 0.0;
        for (int k = 0; k < kTaps; ++k) {
            const Index src = t + k * dilation - half;
            if (src < 0 || src >= n) continue;
            s += x[src];
            if (k == pos[0] || k == pos[1] || k == pos[2]) marked += x[src];
        }
        out[t] = 3.0 * marked - s;
    }
}

/// Linear-interpolation quantile of sorted data.
double quantile(const std::vector<double>& sorted, double q) {
    const double pos = q * double(sorted.size() - 1);
    const auto lo = static_cast<std::size_t>(std::floor(pos));
    const auto hi = std::min(lo + 1, sorted.size() - 1);
    return sorted[lo] + (pos - double(lo)) * (sorted[hi] - sorted[lo]);
}

}  // namespace

std::array<double, kMiniRocketKernelLength> minirocket_kernel(int k) {
    if (k < 0 || k >= kMiniRocketKernels) throw std::out_of_range("minirocket kernel index " + std::to_string(k));
    std::array<double, kTaps> w;
    w.fill(-1.0);
    for (int p : kPositions[k]) w[p] = 2.0;
    return w;
}

Index MiniRocketParams::num_features() const {
    Index n = 0;
    for (const auto& c : combos) n += static_cast<Index>(c.biases.size());
    return n;
}

DilationPlan minirocket_dilations(Index length, int num_features) {
    if (num_features < kMiniRocketKernels)
        throw std::invalid_argument("minirocket: need at least " + std::to_string(kMiniRocketKernels) + " features");
    if (length < kTaps) throw std::invalid_argument("minirocket: series shorter than the kernel length 9");
    const int per_kernel = num_features / kMiniRocketKernels;
    const int steps = std::min(per_kernel, 32);
    const double max_exponent = std::log2(double(length - 1) / double(kTaps - 1));
    DilationPlan plan;
    for (int i = 0; i < steps; ++i) {
        const double e = steps == 1 ? 0.0 : max_exponent * double(i) / double(steps - 1);
        const auto d = static_cast<Index>(std::floor(std::pow(2.0, e)));
        if (plan.dilations.empty() || plan.dilations.back() != d) {
            plan.dilations.push_back(d);
            plan.features_per_kernel.push_back(0);
        }
        ++plan.features_per_kernel.back();
    }
    const int multiplier = per_kernel / steps;
    for (auto& c : plan.features_per_kernel) c *= multiplier;
    plan.features_per_kernel.front() += per_kernel - steps * multiplier;
    plan.extra_kernels = num_features - per_kernel * kMiniRocketKernels;
    return plan;
}

MiniRocketParams minirocket_fit(const Tensor& inputs, const MiniRocketConfig& cfg) {
    if (inputs.rank() != 3) throw ShapeError("minirocket: expected (samples,channels,length), got " + shape_str(inputs.shape()));
    const Index samples = inputs.dim(0), channels = inputs.dim(1), length = inputs.dim(2);
    if (samples < 1) throw std::invalid_argument("minirocket: empty training input");
    if (channels < 1) throw std::invalid_argument("minirocket: no channels");
    if (!inputs.all_finite()) throw std::invalid_argument("minirocket: non-finite training input");
    if (cfg.quantile_samples < 1) throw std::invalid_argument("minirocket: quantile_samples must be >= 1");
    const DilationPlan plan = minirocket_dilations(length, cfg.num_features);

    Rng rng = Rng(cfg.seed).split("minirocket");
    // Deterministic training subsample for the bias quantiles.
    std::vector<Index> rows(static_cast<std::size_t>(samples));
    std::iota(rows.begin(), rows.end(), Index{0});
    if (samples > cfg.quantile_samples) {
        Rng pick = rng.split("subsample");
        pick.shuffle(rows);
        rows.resize(static_cast<std::size_t>(cfg.quantile_samples));
        std::sort(rows.begin(), rows.end());
    }

    MiniRocketParams params;
    params.channels = channels;
    params.length = length;
    Rng channel_rng = rng.split("channels");
    const double golden = (1.0 + std::sqrt(5.0)) / 2.0;
    Index feature = 0;
    const Index sample_size = channels * length;
    std::vector<double> series, conv;
    for (std::size_t di = 0; di < plan.dilations.size(); ++di) {
        for (int k = 0; k < kMiniRocketKernels; ++k) {
            MiniRocketCombo combo;
            combo.kernel = k;
            combo.dilation = plan.dilations[di];
            combo.padded = (di + static_cast<std::size_t>(k)) % 2 == 0;
            // Channel count 2^u for u uniform in [0, log2(min(C, 9) + 1)).
            const double top = std::log2(double(std::min<Index>(channels, kTaps)) + 1.0);
            const auto count = std::clamp<Index>(static_cast<Index>(std::pow(2.0, channel_rng.uniform(0.0, top))), 1,
                                                 channels);
            std::vector<int> all(static_cast<std::size_t>(channels));
            std::iota(all.begin(), all.end(), 0);
            channel_rng.shuffle(all);
            combo.channels.assign(all.begin(), all.begin() + count);
            std::sort(combo.channels.begin(), combo.channels.end());

            const int n = plan.features_per_kernel[di] + (di == 0 && k < plan.extra_kernels ? 1 : 0);
            std::vector<double> pooled;
            pooled.reserve(rows.size() * static_cast<std::size_t>(length));
            for (Index r : rows) {
                summed_series(inputs.data() + r * sample_size, length, combo.channels, series);
                convolve(series, k, combo.dilation, conv);
                pooled.insert(pooled.end(), conv.begin(), conv.end());
            }
            std::sort(pooled.begin(), pooled.end());
            for (int f = 0; f < n; ++f) {
                ++feature;
                const double q = std::fmod(double(feature) * golden, 1.0);
                combo.biases.push_back(quantile(pooled, q));
            }
            params.combos.push_back(std::move(combo));
        }
    }
    return params;
}

RowMajorMatrix minirocket_transform(const MiniRocketParams& params, const Tensor& inputs, std::size_t threads) {
    if (inputs.rank() != 3 || inputs.dim(1) != params.channels || inputs.dim(2) != params.length)
        throw ShapeError("minirocket: fitted on (samples," + std::to_string(params.channels) + "," +
                         std::to_string(params.length) + "), got " + shape_str(inputs.shape()));
    const Index samples = inputs.dim(0), length = params.length, sample_size = params.channels * length;
    RowMajorMatrix out(samples, params.num_features());
    constexpr Index kChunk = 256;
    const auto chunks = static_cast<std::size_t>((samples + kChunk - 1) / kChunk);
    parallel_for(chunks, threads, [&](std::size_t chunk) {
        std::vector<double> series, conv;
        const Index end = std::min(samples, Index(chunk + 1) * kChunk);
        for (Index s = Index(chunk) * kChunk; s < end; ++s) {
            const double* sample = inputs.data() + s * sample_size;
            Index f = 0;
            for (const auto& combo : params.combos) {
                summed_series(sample, length, combo.channels, series);
                convolve(series, combo.kernel, combo.dilation, conv);
                const Index margin = combo.padded ? 0 : (kTaps / 2) * combo.dilation;
                const Index first = std::min(margin, length / 2), last = length - first;
                for (double bias : combo.biases) {
                    Index positive = 0;
                    for (Index t = first; t < last; ++t) positive += conv[t] > bias;
                    out(s, f++) = double(positive) / double(last - first);
                }
            }
        }
    });
    return out;
}

Tensor to_channel_major(const Tensor& windows) {
    if (windows.rank() != 3) throw ShapeError("expected (samples,steps,features), got " + shape_str(windows.shape()));
    const Index s = windows.dim(0), t = windows.dim(1), f = windows.dim(2);
    Tensor out({s, f, t});
    for (Index i = 0; i < s; ++i)
        for (Index a = 0; a < t; ++a)
            for (Index b = 0; b < f; ++b) out[(i * f + b) * t + a] = windows[(i * t + a) * f + b];
    return out;
}

}  // namespace efbench
