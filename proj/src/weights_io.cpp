#include "flatnet/weights_io.h"

#include <bit>
#include <fstream>
#include <iterator>
#include <limits>
#include <sstream>

#include "flatnet/errors.h"

namespace flatnet {

namespace {

constexpr char kMagic[4] = {'F', 'L', 'W', '1'};

void put_u8(std::vector<std::uint8_t>& out, std::uint8_t v) { out.push_back(v); }

void put_u16(std::vector<std::uint8_t>& out, std::uint16_t v) {
  out.push_back(static_cast<std::uint8_t>(v));
  out.push_back(static_cast<std::uint8_t>(v >> 8));
}

void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
  for (int shift = 0; shift < 32; shift += 8) out.push_back(static_cast<std::uint8_t>(v >> shift));
}

class Reader {
 public:
  explicit Reader(std::span<const std::uint8_t> bytes) : bytes_(bytes) {}

  std::size_t remaining() const { return bytes_.size() - pos_; }

  void need(std::size_t n, const std::string& what) const {
    if (remaining() < n) {
      throw FormatError("FLW1: truncated while reading " + what + " (need " + std::to_string(n) +
                        " bytes, " + std::to_string(remaining()) + " left)");
    }
  }

  std::uint8_t u8(const std::string& what) {
    need(1, what);
    return bytes_[pos_++];
  }

  std::uint16_t u16(const std::string& what) {
    need(2, what);
    std::uint16_t v = static_cast<std::uint16_t>(bytes_[pos_] | (bytes_[pos_ + 1] << 8));
    pos_ += 2;
    return v;
  }

  std::uint32_t u32(const std::string& what) {
    need(4, what);
    std::uint32_t v = 0;
    for (int i = 3; i >= 0; --i) v = (v << 8) | bytes_[pos_ + i];
    pos_ += 4;
    return v;
  }

  std::span<const std::uint8_t> take(std::size_t n, const std::string& what) {
    need(n, what);
    auto s = bytes_.subspan(pos_, n);
    pos_ += n;
    return s;
  }

 private:
  std::span<const std::uint8_t> bytes_;
  std::size_t pos_ = 0;
};

std::vector<std::uint8_t> slurp(std::istream& in) {
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

const nlohmann::json& require(const nlohmann::json& obj, const std::string& key,
                              const std::string& path) {
  if (!obj.is_object() || !obj.contains(key)) {
    throw FormatError("metadata: missing required key '" + path + "'");
  }
  return obj.at(key);
}

template <typename T>
T require_number(const nlohmann::json& obj, const std::string& key, const std::string& path) {
  const auto& v = require(obj, key, path);
  if constexpr (std::is_integral_v<T>) {
    if (!v.is_number_integer()) throw FormatError("metadata: key '" + path + "' must be an integer");
  } else {
    if (!v.is_number()) throw FormatError("metadata: key '" + path + "' must be a number");
  }
  return v.get<T>();
}

}  // namespace

std::vector<std::uint8_t> encode_weights(const WeightSet& weights) {
  if (weights.empty()) throw std::invalid_argument("write_weights: empty WeightSet");
  if (weights.tensors.size() > std::numeric_limits<std::uint32_t>::max()) {
    throw std::invalid_argument("write_weights: too many tensors");
  }
  std::vector<std::uint8_t> out(std::begin(kMagic), std::end(kMagic));
  put_u32(out, kWeightFileVersion);
  put_u32(out, static_cast<std::uint32_t>(weights.tensors.size()));
  for (const auto& [name, tensor] : weights.tensors) {
    if (name.size() > std::numeric_limits<std::uint16_t>::max()) {
      throw std::invalid_argument("write_weights: tensor name too long: " + name.substr(0, 32));
    }
    if (tensor.dims.empty() || tensor.dims.size() > 255) {
      throw std::invalid_argument("write_weights: tensor " + name + " needs 1..255 dims");
    }
    if (tensor.values.size() != tensor.element_count()) {
      throw std::invalid_argument("write_weights: tensor " + name + " has " +
                                  std::to_string(tensor.values.size()) +
                                  " values but its dims hold " +
                                  std::to_string(tensor.element_count()));
    }
    put_u16(out, static_cast<std::uint16_t>(name.size()));
    out.insert(out.end(), name.begin(), name.end());
    put_u8(out, static_cast<std::uint8_t>(tensor.dims.size()));
    for (auto d : tensor.dims) {
      if (d == 0) throw std::invalid_argument("write_weights: tensor " + name + " has a zero dim");
      put_u32(out, d);
    }
    out.reserve(out.size() + tensor.values.size() * 4);
    for (float v : tensor.values) put_u32(out, std::bit_cast<std::uint32_t>(v));
  }
  return out;
}

WeightSet decode_weights(std::span<const std::uint8_t> bytes) {
  Reader r(bytes);
  const auto magic = r.take(4, "magic");
  if (!std::equal(magic.begin(), magic.end(), std::begin(kMagic))) {
    throw FormatError("FLW1: bad magic (expected \"FLW1\")");
  }
  const std::uint32_t version = r.u32("version");
  if (version != kWeightFileVersion) {
    throw UnsupportedVersionError("FLW1: unsupported version " + std::to_string(version));
  }
  const std::uint32_t count = r.u32("tensor_count");

  WeightSet ws;
  for (std::uint32_t t = 0; t < count; ++t) {
    const std::string ordinal = "tensor #" + std::to_string(t);
    const std::uint16_t name_len = r.u16(ordinal + " name_len");
    const auto name_bytes = r.take(name_len, ordinal + " name");
    std::string name(name_bytes.begin(), name_bytes.end());
    const std::string label = "tensor '" + name + "'";

    const std::uint8_t ndims = r.u8(label + " ndims");
    if (ndims == 0) throw FormatError("FLW1: " + label + " declares zero dims");
    Tensor tensor;
    std::uint64_t elements = 1;
    for (std::uint8_t d = 0; d < ndims; ++d) {
      const std::uint32_t dim = r.u32(label + " dims");
      if (dim == 0) throw FormatError("FLW1: " + label + " has a zero dim");
      tensor.dims.push_back(dim);
      elements = elements > std::numeric_limits<std::uint64_t>::max() / dim
                     ? std::numeric_limits<std::uint64_t>::max()
                     : elements * dim;
    }
    if (elements > r.remaining() / 4) {
      throw FormatError("FLW1: " + label + " truncated: declares " + std::to_string(elements) +
                        " values, " + std::to_string(r.remaining() / 4) + " remain");
    }
    const auto payload = r.take(static_cast<std::size_t>(elements) * 4, label + " values");
    tensor.values.resize(static_cast<std::size_t>(elements));
    for (std::size_t i = 0; i < tensor.values.size(); ++i) {
      const std::uint32_t bits = static_cast<std::uint32_t>(payload[4 * i]) |
                                 (static_cast<std::uint32_t>(payload[4 * i + 1]) << 8) |
                                 (static_cast<std::uint32_t>(payload[4 * i + 2]) << 16) |
                                 (static_cast<std::uint32_t>(payload[4 * i + 3]) << 24);
      tensor.values[i] = std::bit_cast<float>(bits);
    }
    if (!ws.tensors.emplace(std::move(name), std::move(tensor)).second) {
      throw FormatError("FLW1: duplicate " + label);
    }
  }
  if (r.remaining() != 0) {
    throw FormatError("FLW1: " + std::to_string(r.remaining()) +
                      " trailing bytes after the last tensor");
  }
  return ws;
}

std::size_t write_weights(const WeightSet& weights, std::ostream& out) {
  const auto bytes = encode_weights(weights);
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw IoError("write_weights: stream write failed");
  return bytes.size();
}

std::size_t write_weights(const WeightSet& weights, const std::filesystem::path& path) {
  const auto bytes = encode_weights(weights);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  out.close();
  if (!out) throw IoError("failed writing " + path.string());
  return bytes.size();
}

WeightSet read_weights(std::istream& in) {
  const auto bytes = slurp(in);
  return decode_weights(bytes);
}

WeightSet read_weights(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  try {
    return read_weights(in);
  } catch (const FormatError& e) {
    // Keep the exception type; prefix the path.
    if (dynamic_cast<const UnsupportedVersionError*>(&e)) {
      throw UnsupportedVersionError(path.string() + ": " + e.what());
    }
    throw FormatError(path.string() + ": " + e.what());
  }
}

void validate_metadata(const ModelMetadata& meta) {
  if (!(meta.preprocess.scale_min < meta.preprocess.scale_max)) {
    throw ValidationError("metadata: preprocess.scale_min must be below preprocess.scale_max");
  }
  if (meta.num_classes < 2) throw ValidationError("metadata: num_classes must be at least 2");
}

ModelMetadata parse_metadata(std::string_view json_text) {
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(json_text);
  } catch (const nlohmann::json::parse_error& e) {
    throw FormatError(std::string("metadata: invalid JSON: ") + e.what());
  }
  if (!doc.is_object()) throw FormatError("metadata: top level must be an object");

  ModelMetadata meta;
  const auto& arch = require(doc, "arch", "arch");
  if (!arch.is_string()) throw FormatError("metadata: key 'arch' must be a string");
  meta.arch = arch.get<std::string>();
  const auto classes = require_number<std::int64_t>(doc, "num_classes", "num_classes");
  if (classes < 0) throw FormatError("metadata: key 'num_classes' must be non-negative");
  meta.num_classes = static_cast<std::size_t>(classes);

  const auto& pre = require(doc, "preprocess", "preprocess");
  meta.preprocess.scale_min = require_number<float>(pre, "scale_min", "preprocess.scale_min");
  meta.preprocess.scale_max = require_number<float>(pre, "scale_max", "preprocess.scale_max");

  const auto& train = require(doc, "training", "training");
  meta.training.batch_size = require_number<std::int64_t>(train, "batch_size", "training.batch_size");
  meta.training.learning_rate = require_number<double>(train, "learning_rate", "training.learning_rate");
  meta.training.epochs = require_number<std::int64_t>(train, "epochs", "training.epochs");
  meta.training.seed = require_number<std::int64_t>(train, "seed", "training.seed");

  meta.document = std::move(doc);
  validate_metadata(meta);
  return meta;
}

std::string format_metadata(const ModelMetadata& meta) {
  nlohmann::json doc = meta.document.is_object() ? meta.document : nlohmann::json::object();
  doc["arch"] = meta.arch;
  doc["num_classes"] = meta.num_classes;
  if (!doc["preprocess"].is_object()) doc["preprocess"] = nlohmann::json::object();
  doc["preprocess"]["scale_min"] = meta.preprocess.scale_min;
  doc["preprocess"]["scale_max"] = meta.preprocess.scale_max;
  if (!doc["training"].is_object()) doc["training"] = nlohmann::json::object();
  doc["training"]["batch_size"] = meta.training.batch_size;
  doc["training"]["learning_rate"] = meta.training.learning_rate;
  doc["training"]["epochs"] = meta.training.epochs;
  doc["training"]["seed"] = meta.training.seed;
  return doc.dump(2) + "\n";
}

ModelMetadata read_metadata(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path.string());
  std::ostringstream text;
  text << in.rdbuf();
  try {
    return parse_metadata(text.str());
  } catch (const FormatError& e) {
    throw FormatError(path.string() + ": " + e.what());
  } catch (const ValidationError& e) {
    throw ValidationError(path.string() + ": " + e.what());
  }
}

void write_metadata(const ModelMetadata& meta, const std::filesystem::path& path) {
  validate_metadata(meta);
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  out << format_metadata(meta);
  out.close();
  if (!out) throw IoError("failed writing " + path.string());
}

void check_metadata_matches(const ModelMetadata& meta, const WeightSet& weights) {
  const auto classes = static_cast<std::uint32_t>(meta.num_classes);
  auto w = weights.tensors.find("fc3.weight");
  auto b = weights.tensors.find("fc3.bias");
  if (w == weights.tensors.end() || b == weights.tensors.end()) {
    throw ValidationError("metadata cross-check: weights lack fc3.weight/fc3.bias");
  }
  if (w->second.dims.empty() || w->second.dims.front() != classes ||
      b->second.dims != std::vector<std::uint32_t>{classes}) {
    throw ValidationError("metadata cross-check: num_classes=" + std::to_string(classes) +
                          " disagrees with fc3 dims");
  }
}

std::filesystem::path metadata_path_for(const std::filesystem::path& weights_path) {
  auto p = weights_path;
  p += ".json";
  return p;
}

}  // namespace flatnet
