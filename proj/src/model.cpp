#include "flatnet/model.h"

#include <algorithm>
#include <cstring>
#include <optional>
#include <sstream>
#include <stdexcept>

#include "flatnet/kernels.h"

namespace flatnet {

namespace {

std::string dims_to_string(const std::vector<std::uint32_t>& dims) {
  std::ostringstream out;
  out << '(';
  for (std::size_t i = 0; i < dims.size(); ++i) out << (i ? "," : "") << dims[i];
  out << ')';
  return out.str();
}

std::uint32_t narrow_dim(std::size_t v) { return static_cast<std::uint32_t>(v); }

[[noreturn]] void bad_layer(const LayerSpec& layer, const std::string& what) {
  throw std::invalid_argument("layer '" + layer.name + "': " + what);
}

}  // namespace

const char* to_string(LayerKind kind) {
  switch (kind) {
    case LayerKind::conv: return "conv";
    case LayerKind::maxpool: return "maxpool";
    case LayerKind::flatten: return "flatten";
    case LayerKind::fully_connected: return "fully_connected";
  }
  return "unknown";
}

NetworkSpec lenet5_spec(std::size_t num_classes) {
  if (num_classes < 2) {
    throw std::invalid_argument("lenet5_spec: num_classes must be at least 2, got " +
                                std::to_string(num_classes));
  }
  NetworkSpec spec;
  spec.input_channels = 1;
  spec.input_width = 32;
  spec.input_height = 32;
  spec.num_classes = num_classes;
  spec.layers = {
      {"conv1", LayerKind::conv, 1, 6, 5, 1, Activation::relu},
      {"pool1", LayerKind::maxpool, 6, 6, 2, 2, Activation::none},
      {"conv2", LayerKind::conv, 6, 16, 5, 1, Activation::relu},
      {"pool2", LayerKind::maxpool, 16, 16, 2, 2, Activation::none},
      {"flatten", LayerKind::flatten, 16, 400, 1, 1, Activation::none},
      {"fc1", LayerKind::fully_connected, 400, 120, 1, 1, Activation::relu},
      {"fc2", LayerKind::fully_connected, 120, 84, 1, 1, Activation::relu},
      {"fc3", LayerKind::fully_connected, 84, num_classes, 1, 1, Activation::none},
  };
  return spec;
}

std::vector<Shape> shape_chain(const NetworkSpec& spec) {
  std::vector<Shape> chain{spec.input_shape()};
  if (spec.input_shape().size() == 0) throw std::invalid_argument("network input is empty");
  for (const auto& layer : spec.layers) {
    const Shape cur = chain.back();
    if (layer.in_channels != cur.channels) {
      bad_layer(layer, "expects " + std::to_string(layer.in_channels) + " input channels, got " +
                           std::to_string(cur.channels));
    }
    switch (layer.kind) {
      case LayerKind::conv:
        if (layer.stride != 1) bad_layer(layer, "only stride 1 convolutions are supported");
        if (layer.kernel == 0 || layer.kernel > cur.height || layer.kernel > cur.width) {
          bad_layer(layer, "kernel does not fit the input");
        }
        if (layer.out_channels == 0) bad_layer(layer, "no output channels");
        chain.push_back({layer.out_channels, cur.height - layer.kernel + 1,
                         cur.width - layer.kernel + 1});
        break;
      case LayerKind::maxpool:
        if (layer.kernel != 2 || layer.stride != 2) bad_layer(layer, "only 2x2/stride-2 pooling");
        if (layer.out_channels != cur.channels) bad_layer(layer, "pooling changes channel count");
        if (cur.height % 2 || cur.width % 2) bad_layer(layer, "pooling input has an odd side");
        chain.push_back({cur.channels, cur.height / 2, cur.width / 2});
        break;
      case LayerKind::flatten:
        if (layer.out_channels != cur.size()) {
          bad_layer(layer, "flattens to " + std::to_string(cur.size()) + " values, declared " +
                               std::to_string(layer.out_channels));
        }
        chain.push_back({cur.size(), 1, 1});
        break;
      case LayerKind::fully_connected:
        if (cur.height != 1 || cur.width != 1) bad_layer(layer, "input must be flattened first");
        if (layer.out_channels == 0) bad_layer(layer, "no output units");
        chain.push_back({layer.out_channels, 1, 1});
        break;
    }
  }
  return chain;
}

std::size_t Tensor::element_count() const {
  std::size_t n = 1;
  for (auto d : dims) n *= d;
  return n;
}

bool Tensor::operator==(const Tensor& other) const {
  return dims == other.dims && values.size() == other.values.size() &&
         (values.empty() ||
          std::memcmp(values.data(), other.values.data(), values.size() * sizeof(float)) == 0);
}

std::size_t WeightSet::total_values() const {
  std::size_t n = 0;
  for (const auto& [name, t] : tensors) n += t.values.size();
  return n;
}

const Tensor& WeightSet::at(const std::string& name) const {
  auto it = tensors.find(name);
  if (it == tensors.end()) throw std::invalid_argument("missing tensor " + name);
  return it->second;
}

std::vector<TensorShape> expected_tensors(const NetworkSpec& spec) {
  const auto chain = shape_chain(spec);
  std::vector<TensorShape> out;
  for (std::size_t i = 0; i < spec.layers.size(); ++i) {
    const auto& layer = spec.layers[i];
    const Shape in = chain[i];
    if (layer.kind == LayerKind::conv) {
      out.push_back({layer.name + ".weight",
                     {narrow_dim(layer.out_channels), narrow_dim(in.channels),
                      narrow_dim(layer.kernel), narrow_dim(layer.kernel)}});
      out.push_back({layer.name + ".bias", {narrow_dim(layer.out_channels)}});
    } else if (layer.kind == LayerKind::fully_connected) {
      out.push_back({layer.name + ".weight",
                     {narrow_dim(layer.out_channels), narrow_dim(in.size())}});
      out.push_back({layer.name + ".bias", {narrow_dim(layer.out_channels)}});
    }
  }
  return out;
}

std::size_t parameter_count(const NetworkSpec& spec) {
  std::size_t total = 0;
  for (const auto& t : expected_tensors(spec)) {
    std::size_t n = 1;
    for (auto d : t.dims) n *= d;
    total += n;
  }
  return total;
}

std::string ValidationResult::message() const {
  std::string out;
  for (const auto& p : problems) {
    if (!out.empty()) out += "; ";
    out += p;
  }
  return out;
}

ValidationResult validate(const WeightSet& weights, const NetworkSpec& spec) {
  ValidationResult result;
  std::vector<TensorShape> expected;
  try {
    expected = expected_tensors(spec);
  } catch (const std::invalid_argument& e) {
    result.problems.push_back(std::string("network spec: ") + e.what());
    return result;
  }
  for (const auto& want : expected) {
    auto it = weights.tensors.find(want.name);
    if (it == weights.tensors.end()) {
      result.problems.push_back(want.name + ": missing, expected " + dims_to_string(want.dims));
      continue;
    }
    const Tensor& t = it->second;
    if (t.dims != want.dims) {
      result.problems.push_back(want.name + ": dims " + dims_to_string(t.dims) + ", expected " +
                                dims_to_string(want.dims));
    } else if (t.values.size() != t.element_count()) {
      result.problems.push_back(want.name + ": " + std::to_string(t.values.size()) +
                                " values for dims " + dims_to_string(t.dims));
    }
  }
  return result;
}

Workspace::Workspace(const NetworkSpec& spec) {
  std::size_t largest = 0;
  for (const auto& s : shape_chain(spec)) largest = std::max(largest, s.size());
  ping.resize(largest);
  pong.resize(largest);
}

std::vector<float> forward(const NetworkSpec& spec, const WeightSet& weights,
                           std::span<const float> input, Workspace* workspace,
                           const LayerObserver& observer) {
  const auto chain = shape_chain(spec);
  if (input.size() != chain.front().size()) {
    throw std::invalid_argument("forward: input has " + std::to_string(input.size()) +
                                " values, network expects " +
                                std::to_string(chain.front().size()));
  }
  if (const auto check = validate(weights, spec); !check.ok()) {
    throw std::invalid_argument("forward: weights do not match network: " + check.message());
  }

  std::optional<Workspace> local;
  if (workspace == nullptr) workspace = &local.emplace(spec);
  std::size_t largest = 0;
  for (const auto& s : chain) largest = std::max(largest, s.size());
  if (workspace->ping.size() < largest) workspace->ping.resize(largest);
  if (workspace->pong.size() < largest) workspace->pong.resize(largest);

  std::span<const float> cur = input;
  std::vector<float>* next_buffer = &workspace->ping;
  for (std::size_t i = 0; i < spec.layers.size(); ++i) {
    const auto& layer = spec.layers[i];
    const Shape in = chain[i];
    const Shape out_shape = chain[i + 1];
    const bool relu_on = layer.activation == Activation::relu;
    std::span<float> out(next_buffer->data(), out_shape.size());

    switch (layer.kind) {
      case LayerKind::conv:
        conv_layer_into(cur, in.channels, in.width, in.height,
                        weights.at(layer.name + ".weight").values,
                        weights.at(layer.name + ".bias").values, layer.out_channels, layer.kernel,
                        relu_on, out);
        break;
      case LayerKind::maxpool:
        maxpool_2x2_into(cur, in.channels, in.width, in.height, out);
        break;
      case LayerKind::flatten:
        // Channel-major storage is already the flattened order.
        std::copy(cur.begin(), cur.end(), out.begin());
        break;
      case LayerKind::fully_connected:
        fully_connected_into(cur, weights.at(layer.name + ".weight").values,
                             weights.at(layer.name + ".bias").values, relu_on, out);
        break;
    }
    if (relu_on && layer.kind != LayerKind::conv && layer.kind != LayerKind::fully_connected) {
      for (auto& v : out) v = relu(v);
    }
    if (observer) observer(layer, out);
    cur = out;
    next_buffer = next_buffer == &workspace->ping ? &workspace->pong : &workspace->ping;
  }
  return {cur.begin(), cur.end()};
}

Prediction predict(const NetworkSpec& spec, const WeightSet& weights,
                   std::span<const float> input, Workspace* workspace) {
  Prediction p;
  p.logits = forward(spec, weights, input, workspace);
  p.label = argmax(p.logits);
  p.probabilities = softmax(p.logits);
  return p;
}

}  // namespace flatnet
