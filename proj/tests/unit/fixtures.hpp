#pragma once

#include "efbench/dataset.hpp"
#include "efbench/synthetic.hpp"

namespace efbench::testing {

/// Windowed synthetic residence data starting 2019-01-01.
inline WindowedDataset synthetic_dataset(std::size_t hours, std::uint64_t seed) {
    const auto frame = generate_synthetic(residence_profile(), parse_timestamp("2019-01-01T00:00:00"), hours, seed);
    return prepare_dataset(frame);
}

}  // namespace efbench::testing
