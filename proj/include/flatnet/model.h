#pragma once

// Declarative network description and the flattened forward pass.

#include <cstddef>
#include <cstdint>
#include <functional>
#include <map>
#include <span>
#include <string>
#include <vector>

namespace flatnet {

enum class LayerKind { conv, maxpool, flatten, fully_connected };
enum class Activation { none, relu };

const char* to_string(LayerKind kind);

struct LayerSpec {
  std::string name;
  LayerKind kind = LayerKind::conv;
  std::size_t in_channels = 1;
  std::size_t out_channels = 1;
  std::size_t kernel = 1;
  std::size_t stride = 1;
  Activation activation = Activation::none;
};

/// Channels x height x width. Fully connected activations use 1 x 1 x N
/// reported as channels == N.
struct Shape {
  std::size_t channels = 1;
  std::size_t height = 1;
  std::size_t width = 1;

  std::size_t size() const { return channels * height * width; }
  bool operator==(const Shape&) const = default;
};

struct NetworkSpec {
  std::vector<LayerSpec> layers;
  std::size_t input_channels = 1;
  std::size_t input_width = 32;
  std::size_t input_height = 32;
  std::size_t num_classes = 10;

  Shape input_shape() const { return {input_channels, input_height, input_width}; }
};

/// C1 conv 1->6 k5, S2 pool, C3 conv 6->16 k5 (full connectivity), S4 pool,
/// flatten, C5 fc 400->120 relu, F6 fc 120->84 relu, F7 fc 84->num_classes.
/// Layer names are conv1, pool1, conv2, pool2, flatten, fc1, fc2, fc3.
NetworkSpec lenet5_spec(std::size_t num_classes = 10);

/// Activation shapes: the input followed by the output of every layer.
/// Throws std::invalid_argument if consecutive layers disagree.
std::vector<Shape> shape_chain(const NetworkSpec& spec);

struct Tensor {
  std::vector<std::uint32_t> dims;
  std::vector<float> values;

  std::size_t element_count() const;
  /// Bitwise comparison of values, so NaN payloads compare equal to themselves.
  bool operator==(const Tensor& other) const;
};

/// Named flattened tensors, iterated in lexicographic name order.
struct WeightSet {
  std::map<std::string, Tensor> tensors;

  bool empty() const { return tensors.empty(); }
  std::size_t total_values() const;
  /// Throws std::invalid_argument naming the tensor if absent.
  const Tensor& at(const std::string& name) const;

  bool operator==(const WeightSet&) const = default;
};

struct TensorShape {
  std::string name;
  std::vector<std::uint32_t> dims;
};

/// Canonical tensor names and dims implied by `spec`, in layer order.
std::vector<TensorShape> expected_tensors(const NetworkSpec& spec);
std::size_t parameter_count(const NetworkSpec& spec);

struct ValidationResult {
  std::vector<std::string> problems;

  bool ok() const { return problems.empty(); }
  std::string message() const;
};

/// Reports every canonical tensor that is missing or mis-shaped.
ValidationResult validate(const WeightSet& weights, const NetworkSpec& spec);

/// Scratch buffers for forward(), sized once from the shape chain so repeated
/// calls do not allocate. One workspace must not serve two concurrent calls.
struct Workspace {
  explicit Workspace(const NetworkSpec& spec);

  std::vector<float> ping;
  std::vector<float> pong;
};

/// Called after each layer with that layer's output activations.
using LayerObserver = std::function<void(const LayerSpec&, std::span<const float>)>;

/// Raw logits for one preprocessed input image. Validates weights against
/// `spec` and throws std::invalid_argument on any mismatch or on an input
/// whose length differs from the input shape of `spec`.
std::vector<float> forward(const NetworkSpec& spec, const WeightSet& weights,
                           std::span<const float> input, Workspace* workspace = nullptr,
                           const LayerObserver& observer = {});

struct Prediction {
  std::size_t label = 0;
  std::vector<float> probabilities;
  std::vector<float> logits;
};

Prediction predict(const NetworkSpec& spec, const WeightSet& weights,
                   std::span<const float> input, Workspace* workspace = nullptr);

}  // namespace flatnet
