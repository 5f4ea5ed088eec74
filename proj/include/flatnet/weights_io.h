#pragma once

// FLW1 binary weight container and its JSON metadata sidecar.
//
// Layout, all integers little-endian:
//   "FLW1" | u32 version (1) | u32 tensor_count
//   per tensor: u16 name_len | name bytes | u8 ndims | ndims x u32 dims |
//               product(dims) x binary32 values
// Records are written in lexicographic name order and nothing follows the
// last record.

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "flatnet/model.h"

namespace flatnet {

inline constexpr std::uint32_t kWeightFileVersion = 1;

std::vector<std::uint8_t> encode_weights(const WeightSet& weights);
/// Throws FormatError (naming the field or tensor at fault) or
/// UnsupportedVersionError.
WeightSet decode_weights(std::span<const std::uint8_t> bytes);

/// Returns the number of bytes written.
std::size_t write_weights(const WeightSet& weights, std::ostream& out);
std::size_t write_weights(const WeightSet& weights, const std::filesystem::path& path);
WeightSet read_weights(std::istream& in);
WeightSet read_weights(const std::filesystem::path& path);

struct PreprocessConfig {
  float scale_min = 0.0f;
  float scale_max = 1.0f;
};

struct TrainingConfig {
  std::int64_t batch_size = 32;
  double learning_rate = 0.001;
  std::int64_t epochs = 10;
  std::int64_t seed = 42;
};

struct ModelMetadata {
  std::string arch = "lenet5";
  std::size_t num_classes = 10;
  PreprocessConfig preprocess;
  TrainingConfig training;
  /// The document as read, including keys this library does not interpret.
  /// Known fields above take precedence when writing.
  nlohmann::json document = nlohmann::json::object();
};

/// Throws FormatError naming the first missing or mistyped key, and
/// ValidationError if scale_min >= scale_max.
ModelMetadata parse_metadata(std::string_view json_text);
std::string format_metadata(const ModelMetadata& meta);
ModelMetadata read_metadata(const std::filesystem::path& path);
void write_metadata(const ModelMetadata& meta, const std::filesystem::path& path);

/// Throws ValidationError if the metadata is internally inconsistent.
void validate_metadata(const ModelMetadata& meta);
/// Throws ValidationError unless num_classes agrees with fc3.weight/fc3.bias.
void check_metadata_matches(const ModelMetadata& meta, const WeightSet& weights);

/// "model.flw" -> "model.flw.json".
std::filesystem::path metadata_path_for(const std::filesystem::path& weights_path);

}  // namespace flatnet
