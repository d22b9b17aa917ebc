#pragma once

#include "efbench/model.hpp"

#include <filesystem>
#include <stdexcept>
#include <string>
#include <string_view>

namespace efbench {

/// Truncated or internally inconsistent model file.
class ModelFileError : public std::runtime_error {
  public:
    using std::runtime_error::runtime_error;
};

/// Not a model file, or one written by an incompatible format version.
class ModelVersionError : public ModelFileError {
  public:
    using ModelFileError::ModelFileError;
};

inline constexpr char kModelMagic[8] = {'E', 'F', 'B', 'E', 'N', 'C', 'H', '1'};
inline constexpr unsigned char kModelFormatVersion = 1;

/// Layout: magic "EFBENCH1", version byte, u64 length + JSON header (config,
/// training summary), u64 tensor count, then per tensor: u32 name length,
/// name, u32 rank, rank x u64 dims, float64 values. Integers and floats are
/// little-endian.
std::string serialize_model(const TrainedModel& model);
TrainedModel deserialize_model(std::string_view bytes);

void save_model(const TrainedModel& model, const std::filesystem::path& path);
TrainedModel load_model(const std::filesystem::path& path);

}  // namespace efbench
