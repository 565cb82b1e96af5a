#include <gtest/gtest.h>

#include <random>

#include "mans/errors.hpp"
#include "mans/ops.hpp"
#include "mans/stcm.hpp"
#include "support.hpp"

namespace mans {
namespace {

struct DepthCase {
  Depth depth;
  std::size_t pairs;
  std::size_t convs;
};

class StcmDepth : public ::testing::TestWithParam<DepthCase> {};

TEST_P(StcmDepth, LayerOutputSizesFollowTheArchitectureTable) {
  const auto c = GetParam();
  StcmConfig config;
  config.depth = c.depth;
  Rng rng(1);
  auto params = StcmParams<float>::init(config, rng);
  EXPECT_EQ(config.pairs(), c.pairs);
  EXPECT_EQ(config.conv_layers(), c.convs);

  Tensor<float> image(Shape{1, 3, 50, 50});
  std::mt19937_64 data(2);
  std::normal_distribution<float> normal;
  for (float& v : image.data()) v = normal(data);
  std::vector<LayerTrace> trace;
  Tape<float> tape(false);
  auto features = stcm_forward(tape, params, image, Mode::kEval, &trace);
  EXPECT_EQ(features.shape(), (Shape{1, 128}));

  std::size_t convs = 0;
  std::size_t stage1 = 0;
  std::size_t stage2 = 0;
  for (const auto& t : trace) {
    if (t.conv) ++convs;
    if (t.name.rfind("s1.", 0) == 0) {
      ++stage1;
      EXPECT_EQ(t.shape, (Shape{1, 64, 25, 25})) << t.name;
    }
    if (t.name.rfind("s2.", 0) == 0) {
      ++stage2;
      EXPECT_EQ(t.shape, (Shape{1, 128, 13, 13})) << t.name;
    }
  }
  EXPECT_EQ(convs, c.convs);
  EXPECT_EQ(stage1, 2 * c.pairs);
  EXPECT_EQ(stage2, 2 * c.pairs);
  EXPECT_EQ(trace.front().name, "input");
  EXPECT_EQ(trace.front().shape, (Shape{1, 3, 50, 50}));
  EXPECT_EQ(trace[1].name, "stem.conv");
  EXPECT_EQ(trace[1].shape, (Shape{1, 64, 25, 25}));
  EXPECT_EQ(trace.back().name, "pool");
  EXPECT_EQ(trace.back().shape, (Shape{1, 128, 1, 1}));
}

INSTANTIATE_TEST_SUITE_P(Depths, StcmDepth,
                         ::testing::Values(DepthCase{Depth::kMans9, 2, 9}, DepthCase{Depth::kMans33, 8, 33},
                                           DepthCase{Depth::kMans61, 15, 61}),
                         [](const auto& info) { return depth_name(info.param.depth); });

TEST(Stcm, DepthNamesRoundTrip) {
  for (Depth d : {Depth::kMans9, Depth::kMans33, Depth::kMans61}) {
    EXPECT_EQ(parse_depth(depth_name(d)), d);
  }
  EXPECT_FALSE(parse_depth("mans10").has_value());
}

TEST(Stcm, OnlyTheFirstWideBlockHasAProjection) {
  StcmConfig config;
  config.depth = Depth::kMans33;
  Rng rng(3);
  auto p = StcmParams<float>::init(config, rng);
  for (const auto& b : p.stage1) EXPECT_FALSE(b.proj.defined());
  ASSERT_TRUE(p.stage2.front().proj.defined());
  EXPECT_EQ(p.stage2.front().proj.shape(), (Shape{128, 64, 1, 1}));
  EXPECT_EQ(p.stage2.front().stride, 2);
  for (std::size_t i = 1; i < p.stage2.size(); ++i) EXPECT_FALSE(p.stage2[i].proj.defined());
}

TEST(Stcm, CheckpointNamesAndBuffers) {
  StcmConfig config;
  config.width1 = 4;
  config.width2 = 8;
  Rng rng(3);
  auto p = StcmParams<float>::init(config, rng);
  NamedTensors<float> named;
  p.collect(named);
  std::vector<std::string> names;
  for (auto& [n, t] : named) names.push_back(n);
  for (const char* expected : {"stcm.stem.bn.gamma", "stcm.stem.conv.w", "stcm.s1.b0.bn1.gamma", "stcm.s1.b1.conv2.w",
                               "stcm.s2.b0.proj.w", "stcm.s2.b1.bn2.beta", "stcm.head.bn.gamma", "stcm.fc.w",
                               "stcm.fc.b"}) {
    EXPECT_NE(std::find(names.begin(), names.end(), expected), names.end()) << expected;
  }
  NamedTensors<float> buffers;
  p.collect_buffers(buffers);
  // stem, 2 BNs in each of 4 blocks, head; mean and var each
  EXPECT_EQ(buffers.size(), 2u * (1 + 8 + 1));
  EXPECT_EQ(buffers.front().first, "stcm.stem.bn.running_mean");
}

TEST(Stcm, ConvolutionsHaveNoBiasAndHeScale) {
  StcmConfig config;
  Rng rng(11);
  auto p = StcmParams<double>::init(config, rng);
  double sq = 0.0;
  for (double v : p.stage2[1].conv2.data()) sq += v * v;
  const double var = sq / static_cast<double>(p.stage2[1].conv2.numel());
  EXPECT_NEAR(var, 2.0 / (128 * 9), 0.1 * 2.0 / (128 * 9));
}

TEST(Stcm, ShortcutsChangeTheOutput) {
  StcmConfig config;
  config.width1 = 4;
  config.width2 = 6;
  Rng rng(5);
  auto with = StcmParams<double>::init(config, rng);
  auto without = with;
  without.config.use_shortcuts = false;
  std::mt19937_64 data(1);
  auto image = testing::randn({2, 3, 12, 12}, data);
  Tape<double> tape(false);
  auto a = stcm_forward(tape, with, image, Mode::kEval);
  auto b = stcm_forward(tape, without, image, Mode::kEval);
  EXPECT_EQ(a.shape(), b.shape());
  EXPECT_GT(testing::max_abs_diff(a.data(), b.data()), 1e-6);
}

TEST(Stcm, ClassifyReturnsArgmaxOfProbabilities) {
  StcmConfig config;
  config.width1 = 4;
  config.width2 = 6;
  config.num_classes = 5;
  Rng rng(2);
  auto p = StcmParams<double>::init(config, rng);
  std::mt19937_64 data(3);
  auto features = testing::randn({3, 6}, data);
  Tape<double> tape(false);
  auto result = classify(tape, p, features);
  EXPECT_EQ(result.logits.shape(), (Shape{3, 5}));
  for (std::size_t r = 0; r < 3; ++r) {
    const double* row = result.probs.raw() + r * 5;
    EXPECT_EQ(result.predicted[r], std::max_element(row, row + 5) - row);
  }
  EXPECT_THROW(classify(tape, p, testing::randn({3, 7}, data)), DimensionError);
}

TEST(Stcm, RejectsWrongInput) {
  StcmConfig config;
  config.width1 = 4;
  config.width2 = 6;
  Rng rng(2);
  auto p = StcmParams<double>::init(config, rng);
  Tape<double> tape(false);
  EXPECT_THROW(stcm_forward(tape, p, Tensor<double>(Shape{1, 2, 10, 10}), Mode::kEval), DimensionError);
  EXPECT_THROW(stcm_forward(tape, p, Tensor<double>(Shape{3, 10, 10}), Mode::kEval), DimensionError);
}

class StcmGradients : public ::testing::TestWithParam<int> {};

TEST_P(StcmGradients, TrainModeMatchesFiniteDifferences) {
  StcmConfig config;
  config.width1 = 2;
  config.width2 = 3;
  config.num_classes = 3;
  config.use_shortcuts = GetParam() % 2 == 0;
  Rng rng(GetParam());
  auto p = StcmParams<double>::init(config, rng);
  std::mt19937_64 data(GetParam() + 31);
  auto image = testing::leaf({2, 3, 6, 6}, data);
  NamedTensors<double> named;
  p.collect(named);
  std::vector<Tensor<double>> inputs{image};
  for (auto& [n, t] : named) inputs.push_back(t);
  const std::vector<int> labels{0, 2};
  const double err = testing::fd_max_rel_error(
      [&](Tape<double>& t) {
        auto logits = classify(t, p, stcm_forward(t, p, image, Mode::kTrain)).logits;
        return ops::softmax_cross_entropy(t, logits, std::span<const int>(labels)).loss;
      },
      inputs);
  EXPECT_LT(err, 1e-4);
}

INSTANTIATE_TEST_SUITE_P(Seeds, StcmGradients, ::testing::Range(0, 20));

}  // namespace
}  // namespace mans
