#include "flatnet/model.h"

#include <gtest/gtest.h>

#include <cstring>
#include <limits>
#include <random>

#include "flatnet/kernels.h"
#include "support/oracles.h"

namespace flatnet {
namespace {

std::vector<float> random_input(std::mt19937& rng) {
  std::uniform_real_distribution<float> val(0.0f, 1.0f);
  std::vector<float> x(1024);
  for (auto& v : x) v = val(rng);
  return x;
}

TEST(Lenet5Spec, ParameterCounts) {
  EXPECT_EQ(parameter_count(lenet5_spec(10)), 61706u);
  const auto binary = lenet5_spec(2);
  EXPECT_EQ(parameter_count(binary), 61026u);
  const auto layout = expected_tensors(binary);
  EXPECT_EQ(layout.back().name, "fc3.bias");
  EXPECT_EQ(layout[layout.size() - 2].dims, (std::vector<std::uint32_t>{2, 84}));
}

TEST(Lenet5Spec, ShapeChain) {
  const auto chain = shape_chain(lenet5_spec(10));
  const std::vector<std::size_t> sizes{1024, 6 * 784, 6 * 196, 16 * 100, 16 * 25, 400, 120, 84, 10};
  ASSERT_EQ(chain.size(), sizes.size());
  for (std::size_t i = 0; i < sizes.size(); ++i) EXPECT_EQ(chain[i].size(), sizes[i]) << i;
  EXPECT_EQ(chain[1], (Shape{6, 28, 28}));
  EXPECT_EQ(chain[3], (Shape{16, 10, 10}));
}

TEST(Lenet5Spec, RejectsFewerThanTwoClasses) {
  EXPECT_THROW(lenet5_spec(1), std::invalid_argument);
  EXPECT_THROW(lenet5_spec(0), std::invalid_argument);
}

TEST(Lenet5Spec, LayerInvariants) {
  const auto spec = lenet5_spec(10);
  for (const auto& layer : spec.layers) {
    if (layer.kind == LayerKind::conv) {
      EXPECT_EQ(layer.kernel, 5u);
      EXPECT_EQ(layer.stride, 1u);
    }
    if (layer.kind == LayerKind::maxpool) {
      EXPECT_EQ(layer.kernel, 2u);
      EXPECT_EQ(layer.stride, 2u);
    }
  }
  for (std::size_t i = 0; i + 1 < spec.layers.size(); ++i) {
    EXPECT_EQ(spec.layers[i].out_channels, spec.layers[i + 1].in_channels);
  }
}

TEST(ShapeChain, RejectsInconsistentLayers) {
  auto spec = lenet5_spec(10);
  spec.layers[2].in_channels = 5;
  EXPECT_THROW(shape_chain(spec), std::invalid_argument);
  spec = lenet5_spec(10);
  spec.layers[4].out_channels = 399;
  EXPECT_THROW(shape_chain(spec), std::invalid_argument);
  spec = lenet5_spec(10);
  spec.input_width = 30;  // 30 -> 26 -> 13: odd side for pooling
  EXPECT_THROW(shape_chain(spec), std::invalid_argument);
}

TEST(Validate, AcceptsCanonicalWeights) {
  const auto spec = lenet5_spec(10);
  EXPECT_TRUE(validate(testing::zero_weights(spec), spec).ok());
}

TEST(Validate, NamesMissingAndMisshapedTensors) {
  const auto spec = lenet5_spec(10);
  auto w = testing::zero_weights(spec);
  w.tensors.erase("fc3.bias");
  w.tensors["conv1.weight"] = Tensor{{6, 1, 3, 3}, std::vector<float>(54)};
  const auto r = validate(w, spec);
  ASSERT_EQ(r.problems.size(), 2u);
  EXPECT_NE(r.message().find("fc3.bias"), std::string::npos);
  EXPECT_NE(r.message().find("conv1.weight"), std::string::npos);
  EXPECT_NE(r.message().find("(6,1,5,5)"), std::string::npos);
}

TEST(Forward, ZeroWeightsGiveZeroLogits) {
  const auto spec = lenet5_spec(10);
  std::mt19937 rng(1);
  const auto p = predict(spec, testing::zero_weights(spec), random_input(rng));
  EXPECT_EQ(p.logits, std::vector<float>(10, 0.0f));
  EXPECT_EQ(p.label, 0u);
  for (float v : p.probabilities) EXPECT_FLOAT_EQ(v, 0.1f);
}

TEST(Forward, FinalBiasPassesThrough) {
  const auto spec = lenet5_spec(10);
  auto w = testing::zero_weights(spec);
  w.tensors["fc3.bias"].values[9] = 1.0f;
  std::mt19937 rng(2);
  const auto logits = forward(spec, w, random_input(rng));
  std::vector<float> expected(10, 0.0f);
  expected[9] = 1.0f;
  EXPECT_EQ(logits, expected);

  w.tensors["fc3.bias"].values.assign(10, 0.0f);
  w.tensors["fc3.bias"].values[7] = 1.0f;
  EXPECT_EQ(predict(spec, w, random_input(rng)).label, 7u);
}

TEST(Forward, ZeroInputWithZeroBiasesGivesZeroLogits) {
  const auto spec = lenet5_spec(10);
  std::mt19937 rng(3);
  auto w = testing::random_weights(spec, rng);
  for (auto& [name, t] : w.tensors) {
    if (name.ends_with(".bias")) t.values.assign(t.values.size(), 0.0f);
  }
  EXPECT_EQ(forward(spec, w, std::vector<float>(1024, 0.0f)), std::vector<float>(10, 0.0f));
}

TEST(Forward, MatchesNaiveReference) {
  const auto spec = lenet5_spec(10);
  std::mt19937 rng(20240);
  Workspace ws(spec);
  for (int trial = 0; trial < 20; ++trial) {
    const auto w = testing::random_weights(spec, rng);
    const auto x = random_input(rng);
    const auto got = forward(spec, w, x, &ws);
    const auto want = testing::naive_lenet5(w, x, 10);
    for (std::size_t k = 0; k < 10; ++k) {
      EXPECT_LE(testing::relative_error(got[k], want[k]), 1e-5) << "trial " << trial << " logit " << k;
    }
    EXPECT_EQ(argmax(got), argmax(want));
  }
}

TEST(Forward, DeterministicAndWorkspaceIndependent) {
  const auto spec = lenet5_spec(10);
  std::mt19937 rng(4);
  const auto w = testing::random_weights(spec, rng);
  const auto x = random_input(rng);
  Workspace ws(spec);
  const auto a = forward(spec, w, x, &ws);
  const auto b = forward(spec, w, x, &ws);
  const auto c = forward(spec, w, x);
  EXPECT_EQ(std::memcmp(a.data(), b.data(), a.size() * sizeof(float)), 0);
  EXPECT_EQ(std::memcmp(a.data(), c.data(), a.size() * sizeof(float)), 0);
}

TEST(Forward, ObserverSeesEveryLayerSize) {
  const auto spec = lenet5_spec(10);
  std::vector<std::size_t> sizes;
  forward(spec, testing::zero_weights(spec), std::vector<float>(1024, 0.5f), nullptr,
          [&](const LayerSpec&, std::span<const float> out) { sizes.push_back(out.size()); });
  EXPECT_EQ(sizes, (std::vector<std::size_t>{6 * 784, 6 * 196, 16 * 100, 16 * 25, 400, 120, 84, 10}));
}

TEST(Forward, RejectsBadInputLengthAndBadWeights) {
  const auto spec = lenet5_spec(10);
  auto w = testing::zero_weights(spec);
  EXPECT_THROW(forward(spec, w, std::vector<float>(1023)), std::invalid_argument);
  w.tensors.erase("fc2.weight");
  EXPECT_THROW(forward(spec, w, std::vector<float>(1024)), std::invalid_argument);
}

TEST(Forward, GoldenMicroNetwork) {
  std::vector<std::vector<float>> seen;
  const auto logits = forward(testing::golden_spec(), testing::golden_weights(), testing::golden_input(),
                              nullptr, [&](const LayerSpec&, std::span<const float> out) {
                                seen.emplace_back(out.begin(), out.end());
                              });
  ASSERT_EQ(seen.size(), 4u);
  EXPECT_EQ(seen[0], (std::vector<float>{4, 1, 2, 6}));
  EXPECT_EQ(seen[1], (std::vector<float>{4.5f, 0.0f}));
  EXPECT_EQ(logits, (std::vector<float>{9.25f, 1.5f}));
}

TEST(Tensor, BitwiseEqualityTreatsNanPayloads) {
  const float nan = std::numeric_limits<float>::quiet_NaN();
  const Tensor a{{1}, {nan}};
  EXPECT_EQ(a, a);
  EXPECT_NE(a, (Tensor{{1}, {-nan}}));
  EXPECT_NE((Tensor{{1}, {0.0f}}), (Tensor{{1}, {-0.0f}}));
}

}  // namespace
}  // namespace flatnet
