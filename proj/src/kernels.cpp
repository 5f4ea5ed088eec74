#include "flatnet/kernels.h"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

namespace flatnet {

FlatChannel::FlatChannel(std::size_t width, std::size_t height, float fill)
    : data(width * height, fill), width(width), height(height) {}

FlatChannel::FlatChannel(std::size_t width, std::size_t height, std::vector<float> values)
    : data(std::move(values)), width(width), height(height) {
  if (data.size() != width * height) {
    throw std::invalid_argument("FlatChannel: " + std::to_string(data.size()) +
                                " values do not fill " + std::to_string(width) + "x" +
                                std::to_string(height));
  }
}

void normalize_scale_into(std::span<const float> data, float out_min, float out_max,
                          std::span<float> out) {
  if (data.empty()) throw std::invalid_argument("normalize_scale: empty input");
  if (!(out_min <= out_max)) throw std::invalid_argument("normalize_scale: out_min > out_max");
  if (out.size() != data.size()) throw std::invalid_argument("normalize_scale: output size mismatch");

  const auto [lo_it, hi_it] = std::minmax_element(data.begin(), data.end());
  const double lo = *lo_it;
  const double range = static_cast<double>(*hi_it) - lo;
  if (range == 0.0) {
    std::fill(out.begin(), out.end(), out_min);
    return;
  }
  for (std::size_t i = 0; i < data.size(); ++i) {
    const double n = (data[i] - lo) / range;
    const double v = (1.0 - n) * out_min + n * out_max;
    out[i] = std::clamp(static_cast<float>(v), out_min, out_max);
  }
}

std::vector<float> normalize_scale(std::span<const float> data, float out_min, float out_max) {
  std::vector<float> out(data.size());
  normalize_scale_into(data, out_min, out_max, out);
  return out;
}

double sum_product(std::span<const float> a, std::span<const float> b, std::size_t a_start,
                   std::size_t b_start, std::size_t count) {
  if (a_start > a.size() || count > a.size() - a_start || b_start > b.size() ||
      count > b.size() - b_start) {
    throw std::invalid_argument("sum_product: window [" + std::to_string(a_start) + ", +" +
                                std::to_string(count) + ") / [" + std::to_string(b_start) +
                                ", +" + std::to_string(count) + ") exceeds arrays of length " +
                                std::to_string(a.size()) + " / " + std::to_string(b.size()));
  }
  double sum = 0.0;
  for (std::size_t k = 0; k < count; ++k) {
    sum += static_cast<double>(a[a_start + k]) * b[b_start + k];
  }
  return sum;
}

void conv_layer_into(std::span<const float> input, std::size_t in_channels, std::size_t width,
                     std::size_t height, std::span<const float> weights,
                     std::span<const float> bias, std::size_t out_channels, std::size_t k,
                     bool apply_relu, std::span<float> output) {
  if (k == 0 || k > width || k > height) {
    throw std::invalid_argument("conv: kernel " + std::to_string(k) + " does not fit input " +
                                std::to_string(width) + "x" + std::to_string(height));
  }
  if (input.size() != in_channels * width * height) {
    throw std::invalid_argument("conv: input length does not match channels x height x width");
  }
  if (weights.size() != out_channels * in_channels * k * k) {
    throw std::invalid_argument("conv: weight length " + std::to_string(weights.size()) +
                                " != out x in x k x k");
  }
  if (bias.size() != out_channels) throw std::invalid_argument("conv: one bias per output channel");

  const std::size_t out_w = width - k + 1;
  const std::size_t out_h = height - k + 1;
  const std::size_t plane = width * height;
  if (output.size() != out_channels * out_w * out_h) {
    throw std::invalid_argument("conv: output buffer has the wrong length");
  }

  for (std::size_t o = 0; o < out_channels; ++o) {
    for (std::size_t i = 0; i < out_h; ++i) {
      for (std::size_t j = 0; j < out_w; ++j) {
        double acc = 0.0;
        for (std::size_t c = 0; c < in_channels; ++c) {
          const auto channel = input.subspan(c * plane, plane);
          const auto kernel = weights.subspan((o * in_channels + c) * k * k, k * k);
          for (std::size_t r = 0; r < k; ++r) {
            acc += sum_product(channel, kernel, (i + r) * width + j, r * k, k);
          }
        }
        const float v = static_cast<float>(acc + bias[o]);
        output[(o * out_h + i) * out_w + j] = apply_relu ? relu(v) : v;
      }
    }
  }
}

FlatChannel conv_valid(const FlatChannel& input, std::span<const float> kernel, std::size_t k,
                       float bias, bool apply_relu) {
  if (k == 0 || kernel.size() != k * k) {
    throw std::invalid_argument("conv_valid: kernel length must be k*k");
  }
  if (k > input.width || k > input.height) {
    throw std::invalid_argument("conv_valid: kernel larger than input");
  }
  FlatChannel out(input.width - k + 1, input.height - k + 1);
  conv_layer_into(input.data, 1, input.width, input.height, kernel, std::span<const float>(&bias, 1),
                  1, k, apply_relu, out.data);
  return out;
}

void maxpool_2x2_into(std::span<const float> input, std::size_t channels, std::size_t width,
                      std::size_t height, std::span<float> output) {
  if (width % 2 != 0 || height % 2 != 0) {
    throw std::invalid_argument("maxpool_2x2: dimensions " + std::to_string(width) + "x" +
                                std::to_string(height) + " are not both even");
  }
  if (input.size() != channels * width * height) {
    throw std::invalid_argument("maxpool_2x2: input length mismatch");
  }
  const std::size_t out_w = width / 2;
  const std::size_t out_h = height / 2;
  if (output.size() != channels * out_w * out_h) {
    throw std::invalid_argument("maxpool_2x2: output buffer has the wrong length");
  }
  for (std::size_t c = 0; c < channels; ++c) {
    const float* in = input.data() + c * width * height;
    float* out = output.data() + c * out_w * out_h;
    for (std::size_t i = 0; i < height; i += 2) {
      for (std::size_t j = 0; j < width; j += 2) {
        out[(i / 2) * out_w + j / 2] =
            std::max(std::max(in[i * width + j], in[i * width + j + 1]),
                     std::max(in[(i + 1) * width + j], in[(i + 1) * width + j + 1]));
      }
    }
  }
}

FlatChannel maxpool_2x2(const FlatChannel& input) {
  if (input.width % 2 != 0 || input.height % 2 != 0) {
    throw std::invalid_argument("maxpool_2x2: odd dimension");
  }
  FlatChannel out(input.width / 2, input.height / 2);
  maxpool_2x2_into(input.data, 1, input.width, input.height, out.data);
  return out;
}

void fully_connected_into(std::span<const float> input, std::span<const float> weights,
                          std::span<const float> bias, bool apply_relu, std::span<float> output) {
  const std::size_t n = input.size();
  const std::size_t m = bias.size();
  if (weights.size() != m * n) {
    throw std::invalid_argument("fully_connected: weights length " +
                                std::to_string(weights.size()) + " != " + std::to_string(m) +
                                " x " + std::to_string(n));
  }
  if (output.size() != m) throw std::invalid_argument("fully_connected: output length mismatch");
  for (std::size_t row = 0; row < m; ++row) {
    const float v = static_cast<float>(sum_product(weights, input, row * n, 0, n) + bias[row]);
    output[row] = apply_relu ? relu(v) : v;
  }
}

std::vector<float> fully_connected(std::span<const float> input, std::span<const float> weights,
                                   std::span<const float> bias, bool apply_relu) {
  std::vector<float> out(bias.size());
  fully_connected_into(input, weights, bias, apply_relu, out);
  return out;
}

std::size_t argmax(std::span<const float> scores) {
  if (scores.empty()) throw std::invalid_argument("argmax: empty input");
  std::size_t best = 0;
  for (std::size_t i = 1; i < scores.size(); ++i) {
    if (scores[i] > scores[best]) best = i;
  }
  return best;
}

std::vector<float> softmax(std::span<const float> logits) {
  if (logits.empty()) throw std::invalid_argument("softmax: empty input");
  const double peak = *std::max_element(logits.begin(), logits.end());
  std::vector<double> e(logits.size());
  double total = 0.0;
  for (std::size_t i = 0; i < logits.size(); ++i) {
    e[i] = std::exp(logits[i] - peak);
    total += e[i];
  }
  std::vector<float> out(logits.size());
  for (std::size_t i = 0; i < logits.size(); ++i) out[i] = static_cast<float>(e[i] / total);
  return out;
}

}  // namespace flatnet
