#pragma once

// Primitive inference operations over one-dimensional, row-major arrays.
//
// Every tensor is a flat float buffer; element (i, j) of a W-wide channel
// lives at index i * W + j, and channel c of a C x H x W stack starts at
// c * H * W. Nothing here allocates except the convenience overloads that
// return a new FlatChannel or vector.

#include <cstddef>
#include <span>
#include <vector>

namespace flatnet {

struct FlatChannel {
  std::vector<float> data;
  std::size_t width = 0;
  std::size_t height = 0;

  FlatChannel() = default;
  FlatChannel(std::size_t width, std::size_t height, float fill = 0.0f);
  /// Throws std::invalid_argument unless values.size() == width * height.
  FlatChannel(std::size_t width, std::size_t height, std::vector<float> values);

  float& at(std::size_t row, std::size_t col) { return data[row * width + col]; }
  float at(std::size_t row, std::size_t col) const { return data[row * width + col]; }
  std::size_t size() const { return data.size(); }

  bool operator==(const FlatChannel&) const = default;
};

/// Min-max rescales `data` onto [out_min, out_max]. A constant input maps
/// every element to out_min.
std::vector<float> normalize_scale(std::span<const float> data, float out_min, float out_max);
void normalize_scale_into(std::span<const float> data, float out_min, float out_max,
                          std::span<float> out);

/// Sum of a[a_start + k] * b[b_start + k] for k in [0, count). Accumulates in
/// double. Throws std::invalid_argument if either window runs past its array.
double sum_product(std::span<const float> a, std::span<const float> b, std::size_t a_start,
                   std::size_t b_start, std::size_t count);

inline float relu(float x) { return x > 0.0f ? x : 0.0f; }

/// Valid (unpadded, stride 1) cross-correlation of one channel with a k x k
/// kernel. The output is (W - k + 1) x (H - k + 1).
FlatChannel conv_valid(const FlatChannel& input, std::span<const float> kernel, std::size_t k,
                       float bias, bool apply_relu);

/// Multi-channel form of conv_valid. `input` holds in_channels planes of
/// width x height; `weights` is laid out (out, in, k, k); output plane o is
/// the sum over input channels plus bias[o].
void conv_layer_into(std::span<const float> input, std::size_t in_channels, std::size_t width,
                     std::size_t height, std::span<const float> weights,
                     std::span<const float> bias, std::size_t out_channels, std::size_t k,
                     bool apply_relu, std::span<float> output);

/// 2x2 max pooling with stride 2. Both dimensions must be even.
FlatChannel maxpool_2x2(const FlatChannel& input);
void maxpool_2x2_into(std::span<const float> input, std::size_t channels, std::size_t width,
                      std::size_t height, std::span<float> output);

/// output[m] = sum_n weights[m * N + n] * input[n] + bias[m], M = bias.size().
std::vector<float> fully_connected(std::span<const float> input, std::span<const float> weights,
                                   std::span<const float> bias, bool apply_relu);
void fully_connected_into(std::span<const float> input, std::span<const float> weights,
                          std::span<const float> bias, bool apply_relu, std::span<float> output);

/// Index of the largest score; ties go to the lowest index.
std::size_t argmax(std::span<const float> scores);

/// Max-subtracted softmax.
std::vector<float> softmax(std::span<const float> logits);

}  // namespace flatnet
