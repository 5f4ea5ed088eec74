#pragma once

// Test-only reference implementations. These index through nested 2D/3D
// containers rather than flat arrays so they share no addressing code with
// the engine under test.

#include <cstdint>
#include <filesystem>
#include <random>
#include <string>
#include <vector>

#include "flatnet/eval.h"
#include "flatnet/model.h"
#include "flatnet/preprocess.h"

namespace flatnet::testing {

using Grid = std::vector<std::vector<float>>;
using Volume = std::vector<Grid>;  // [channel][row][col]

Grid to_grid(const std::vector<float>& flat, std::size_t width, std::size_t height);

/// Cross-correlation of a volume with out x in kernels; double accumulation
/// over (channel, kernel row, kernel col), bias added last.
Volume naive_conv(const Volume& input, const std::vector<Volume>& kernels,
                  const std::vector<float>& bias, bool relu);
Volume naive_maxpool(const Volume& input);
std::vector<float> naive_dense(const std::vector<float>& input, const std::vector<std::vector<float>>& w,
                               const std::vector<float>& bias, bool relu);

/// LeNet-5 forward pass built from the nested-container primitives above.
std::vector<float> naive_lenet5(const WeightSet& weights, const std::vector<float>& input,
                                std::size_t num_classes);

/// Four-layer network small enough to evaluate by hand: 1x4x4 input,
/// 2x2 pool, conv 1->2 k2 relu, flatten, fc 2->2. With golden_weights() and
/// golden_input() the logits are exactly {9.25, 1.5}.
NetworkSpec golden_spec();
WeightSet golden_weights();
std::vector<float> golden_input();

/// Uniform values scaled by 1/sqrt(fan_in) for every tensor of `spec`.
WeightSet random_weights(const NetworkSpec& spec, std::mt19937& rng);
WeightSet zero_weights(const NetworkSpec& spec);

/// Arbitrary names/dims/values, including NaN payloads when `allow_nan`.
WeightSet fuzz_weights(std::mt19937& rng, bool allow_nan);

/// Pairwise-concordance AUC: P(score_pos > score_neg) + 0.5 P(tie).
double concordance_auc(const std::vector<double>& scores, const std::vector<bool>& positives);

/// Blocky 28x28 white-on-black rendering of a digit, with a seeded jitter
/// of position and stroke brightness.
GrayImage draw_digit(int digit, std::mt19937& rng);

/// Encodes images/labels into IDX byte streams.
std::vector<std::uint8_t> idx_images(const std::vector<GrayImage>& images);
std::vector<std::uint8_t> idx_labels(const std::vector<std::uint8_t>& labels);

/// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
 public:
  TempDir();
  ~TempDir();
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

 private:
  std::filesystem::path path_;
};

std::vector<std::uint8_t> read_bytes(const std::filesystem::path& path);
std::string read_text(const std::filesystem::path& path);
void write_bytes(const std::filesystem::path& path, const std::vector<std::uint8_t>& bytes);

/// |a - b| / max(|a|, |b|), zero when both are zero.
double relative_error(double a, double b);

}  // namespace flatnet::testing
