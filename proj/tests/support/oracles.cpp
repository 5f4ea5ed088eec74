#include "oracles.h"

#include <algorithm>
#include <bit>
#include <cmath>
#include <fstream>
#include <iterator>
#include <sstream>

namespace flatnet::testing {

Grid to_grid(const std::vector<float>& flat, std::size_t width, std::size_t height) {
  Grid g(height, std::vector<float>(width));
  std::size_t n = 0;
  for (auto& row : g) {
    for (auto& v : row) v = flat.at(n++);
  }
  return g;
}

Volume naive_conv(const Volume& input, const std::vector<Volume>& kernels,
                  const std::vector<float>& bias, bool relu) {
  const std::size_t k = kernels.at(0).at(0).size();
  const std::size_t h = input.at(0).size();
  const std::size_t w = input.at(0).at(0).size();
  Volume out(kernels.size(), Grid(h - k + 1, std::vector<float>(w - k + 1)));
  for (std::size_t o = 0; o < kernels.size(); ++o) {
    for (std::size_t i = 0; i + k <= h; ++i) {
      for (std::size_t j = 0; j + k <= w; ++j) {
        double acc = 0.0;
        for (std::size_t c = 0; c < input.size(); ++c) {
          for (std::size_t r = 0; r < k; ++r) {
            for (std::size_t s = 0; s < k; ++s) {
              acc += static_cast<double>(input[c][i + r][j + s]) * kernels[o][c][r][s];
            }
          }
        }
        float v = static_cast<float>(acc + bias[o]);
        if (relu && v < 0.0f) v = 0.0f;
        out[o][i][j] = v;
      }
    }
  }
  return out;
}

Volume naive_maxpool(const Volume& input) {
  Volume out;
  for (const auto& plane : input) {
    Grid g(plane.size() / 2, std::vector<float>(plane.at(0).size() / 2));
    for (std::size_t i = 0; i < g.size(); ++i) {
      for (std::size_t j = 0; j < g[i].size(); ++j) {
        g[i][j] = std::max({plane[2 * i][2 * j], plane[2 * i][2 * j + 1], plane[2 * i + 1][2 * j],
                            plane[2 * i + 1][2 * j + 1]});
      }
    }
    out.push_back(std::move(g));
  }
  return out;
}

std::vector<float> naive_dense(const std::vector<float>& input,
                               const std::vector<std::vector<float>>& w,
                               const std::vector<float>& bias, bool relu) {
  std::vector<float> out(w.size());
  for (std::size_t m = 0; m < w.size(); ++m) {
    double acc = 0.0;
    for (std::size_t n = 0; n < input.size(); ++n) acc += static_cast<double>(w[m][n]) * input[n];
    float v = static_cast<float>(acc + bias[m]);
    if (relu && v < 0.0f) v = 0.0f;
    out[m] = v;
  }
  return out;
}

namespace {

std::vector<Volume> conv_kernels(const Tensor& t) {
  const std::size_t o = t.dims[0], c = t.dims[1], k = t.dims[2];
  std::vector<Volume> out(o, Volume(c, Grid(k, std::vector<float>(k))));
  std::size_t n = 0;
  for (auto& vol : out) {
    for (auto& grid : vol) {
      for (auto& row : grid) {
        for (auto& v : row) v = t.values.at(n++);
      }
    }
  }
  return out;
}

std::vector<std::vector<float>> dense_matrix(const Tensor& t) {
  std::vector<std::vector<float>> m(t.dims[0], std::vector<float>(t.dims[1]));
  std::size_t n = 0;
  for (auto& row : m) {
    for (auto& v : row) v = t.values.at(n++);
  }
  return m;
}

}  // namespace

std::vector<float> naive_lenet5(const WeightSet& weights, const std::vector<float>& input,
                                std::size_t num_classes) {
  Volume x{to_grid(input, 32, 32)};
  x = naive_conv(x, conv_kernels(weights.at("conv1.weight")), weights.at("conv1.bias").values, true);
  x = naive_maxpool(x);
  x = naive_conv(x, conv_kernels(weights.at("conv2.weight")), weights.at("conv2.bias").values, true);
  x = naive_maxpool(x);
  std::vector<float> flat;
  for (const auto& plane : x) {
    for (const auto& row : plane) flat.insert(flat.end(), row.begin(), row.end());
  }
  auto h = naive_dense(flat, dense_matrix(weights.at("fc1.weight")), weights.at("fc1.bias").values, true);
  h = naive_dense(h, dense_matrix(weights.at("fc2.weight")), weights.at("fc2.bias").values, true);
  h = naive_dense(h, dense_matrix(weights.at("fc3.weight")), weights.at("fc3.bias").values, false);
  if (h.size() != num_classes) throw std::logic_error("naive_lenet5: class count mismatch");
  return h;
}

NetworkSpec golden_spec() {
  NetworkSpec spec;
  spec.input_width = 4;
  spec.input_height = 4;
  spec.num_classes = 2;
  spec.layers = {
      {"pool", LayerKind::maxpool, 1, 1, 2, 2, Activation::none},
      {"conv", LayerKind::conv, 1, 2, 2, 1, Activation::relu},
      {"flatten", LayerKind::flatten, 2, 2, 1, 1, Activation::none},
      {"fc", LayerKind::fully_connected, 2, 2, 1, 1, Activation::none},
  };
  return spec;
}

WeightSet golden_weights() {
  WeightSet ws;
  ws.tensors["conv.weight"] = {{2, 1, 2, 2}, {1.0f, 0.5f, -1.0f, 0.25f, -0.5f, 2.0f, 1.0f, -1.0f}};
  ws.tensors["conv.bias"] = {{2}, {0.5f, -1.0f}};
  ws.tensors["fc.weight"] = {{2, 2}, {2.0f, -1.0f, 0.5f, 3.0f}};
  ws.tensors["fc.bias"] = {{2}, {0.25f, -0.75f}};
  return ws;
}

// Pools to [[4, 1], [2, 6]]; conv gives 4 + 0.5 - 2 + 1.5 + 0.5 = 4.5 and
// relu(-2 + 2 + 2 - 6 - 1) = 0; fc gives 9 + 0.25 and 2.25 - 0.75.
std::vector<float> golden_input() {
  return {1, 2, 0, 1, 3, 4, 1, 0, 0, 1, 5, 2, 2, 1, 3, 6};
}

WeightSet random_weights(const NetworkSpec& spec, std::mt19937& rng) {
  WeightSet ws;
  const auto layout = expected_tensors(spec);
  for (std::size_t i = 0; i < layout.size(); i += 2) {
    const auto& w = layout[i];
    const auto& b = layout[i + 1];
    std::size_t fan_in = 1;
    for (std::size_t d = 1; d < w.dims.size(); ++d) fan_in *= w.dims[d];
    std::uniform_real_distribution<float> dist(-1.0f / std::sqrt(float(fan_in)),
                                               1.0f / std::sqrt(float(fan_in)));
    Tensor tw{w.dims, {}};
    tw.values.resize(tw.element_count());
    for (auto& v : tw.values) v = dist(rng);
    Tensor tb{b.dims, {}};
    tb.values.resize(tb.element_count());
    for (auto& v : tb.values) v = dist(rng);
    ws.tensors[w.name] = std::move(tw);
    ws.tensors[b.name] = std::move(tb);
  }
  return ws;
}

WeightSet zero_weights(const NetworkSpec& spec) {
  WeightSet ws;
  for (const auto& t : expected_tensors(spec)) {
    Tensor tensor{t.dims, {}};
    tensor.values.assign(tensor.element_count(), 0.0f);
    ws.tensors[t.name] = std::move(tensor);
  }
  return ws;
}

WeightSet fuzz_weights(std::mt19937& rng, bool allow_nan) {
  static constexpr std::string_view alphabet = "abcdefghijklmnopqrstuvwxyz0123456789._-";
  std::uniform_int_distribution<int> count_dist(1, 6);
  std::uniform_int_distribution<int> ndims_dist(1, 4);
  std::uniform_int_distribution<int> dim_dist(1, 5);
  std::uniform_int_distribution<int> tail_len(0, 10);
  std::uniform_int_distribution<std::size_t> char_dist(0, alphabet.size() - 1);
  std::uniform_int_distribution<std::uint32_t> bits;
  std::normal_distribution<float> normal(0.0f, 1.0f);
  std::bernoulli_distribution use_bits(0.3);

  WeightSet ws;
  const int count = count_dist(rng);
  for (int t = 0; t < count; ++t) {
    // Index prefix keeps sanitized identifiers unique.
    std::string name = "t" + std::to_string(t) + "_";
    for (int i = tail_len(rng); i > 0; --i) name.push_back(alphabet[char_dist(rng)]);
    Tensor tensor;
    for (int d = ndims_dist(rng); d > 0; --d) tensor.dims.push_back(dim_dist(rng));
    tensor.values.resize(tensor.element_count());
    for (auto& v : tensor.values) {
      if (use_bits(rng)) {
        v = std::bit_cast<float>(bits(rng));
        if (!allow_nan && !std::isfinite(v)) v = normal(rng);
      } else {
        v = normal(rng) * std::pow(10.0f, float(dim_dist(rng) - 3));
      }
    }
    ws.tensors[name] = std::move(tensor);
  }
  return ws;
}

double concordance_auc(const std::vector<double>& scores, const std::vector<bool>& positives) {
  double wins = 0.0;
  double pairs = 0.0;
  for (std::size_t i = 0; i < scores.size(); ++i) {
    if (!positives[i]) continue;
    for (std::size_t j = 0; j < scores.size(); ++j) {
      if (positives[j]) continue;
      pairs += 1.0;
      if (scores[i] > scores[j]) wins += 1.0;
      else if (scores[i] == scores[j]) wins += 0.5;
    }
  }
  return wins / pairs;
}

GrayImage draw_digit(int digit, std::mt19937& rng) {
  // Seven segments: top, upper-right, lower-right, bottom, lower-left,
  // upper-left, middle.
  static constexpr unsigned char segments[10] = {0b0111111, 0b0000110, 0b1011011, 0b1001111,
                                                 0b1100110, 0b1101101, 0b1111101, 0b0000111,
                                                 0b1111111, 0b1101111};
  std::uniform_int_distribution<int> jitter(-2, 2);
  std::uniform_int_distribution<int> bright(190, 255);
  const int dx = jitter(rng);
  const int dy = jitter(rng);
  const auto ink = static_cast<std::uint8_t>(bright(rng));
  GrayImage img(28, 28);
  const auto fill = [&](int r0, int c0, int r1, int c1) {
    for (int r = r0; r <= r1; ++r) {
      for (int c = c0; c <= c1; ++c) {
        const int rr = r + dy;
        const int cc = c + dx;
        if (rr >= 0 && rr < 28 && cc >= 0 && cc < 28) img.at(rr, cc) = ink;
      }
    }
  };
  if (digit == 1) {
    fill(4, 13, 23, 15);
    return img;
  }
  const unsigned mask = segments[digit % 10];
  const int left = 8, right = 19, top = 4, mid = 13, bottom = 23, t = 2;
  if (mask & 0b0000001) fill(top, left, top + t, right);
  if (mask & 0b0000010) fill(top, right - t, mid, right);
  if (mask & 0b0000100) fill(mid, right - t, bottom, right);
  if (mask & 0b0001000) fill(bottom - t, left, bottom, right);
  if (mask & 0b0010000) fill(mid, left, bottom, left + t);
  if (mask & 0b0100000) fill(top, left, mid, left + t);
  if (mask & 0b1000000) fill(mid - 1, left, mid + 1, right);
  return img;
}

namespace {

void put_be32(std::vector<std::uint8_t>& out, std::uint32_t v) {
  for (int shift = 24; shift >= 0; shift -= 8) out.push_back(static_cast<std::uint8_t>(v >> shift));
}

}  // namespace

std::vector<std::uint8_t> idx_images(const std::vector<GrayImage>& images) {
  std::vector<std::uint8_t> out;
  put_be32(out, 0x00000803);
  put_be32(out, static_cast<std::uint32_t>(images.size()));
  put_be32(out, 28);
  put_be32(out, 28);
  for (const auto& img : images) out.insert(out.end(), img.pixels.begin(), img.pixels.end());
  return out;
}

std::vector<std::uint8_t> idx_labels(const std::vector<std::uint8_t>& labels) {
  std::vector<std::uint8_t> out;
  put_be32(out, 0x00000801);
  put_be32(out, static_cast<std::uint32_t>(labels.size()));
  out.insert(out.end(), labels.begin(), labels.end());
  return out;
}

TempDir::TempDir() {
  static std::mt19937_64 rng{std::random_device{}()};
  do {
    path_ = std::filesystem::temp_directory_path() /
            ("flatnet-test-" + std::to_string(rng() % 100000000000ULL));
  } while (std::filesystem::exists(path_));
  std::filesystem::create_directories(path_);
}

TempDir::~TempDir() {
  std::error_code ec;
  std::filesystem::remove_all(path_, ec);
}

std::vector<std::uint8_t> read_bytes(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

std::string read_text(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

void write_bytes(const std::filesystem::path& path, const std::vector<std::uint8_t>& bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
}

double relative_error(double a, double b) {
  const double scale = std::max(std::abs(a), std::abs(b));
  return scale == 0.0 ? 0.0 : std::abs(a - b) / scale;
}

}  // namespace flatnet::testing
