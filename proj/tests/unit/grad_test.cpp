#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <limits>
#include <numbers>

#include "../support/finite_difference.hpp"
#include "../support/gradient_cases.hpp"
#include "iad/common/error.hpp"
#include "iad/grad/adam.hpp"
#include "iad/grad/categorical.hpp"
#include "iad/grad/checkpoint.hpp"
#include "iad/grad/layers.hpp"
#include "iad/grad/ops.hpp"

using namespace iad;
using namespace iad::grad;

namespace {

using iad::testing::gradient_cases::random_tensor;

std::vector<double> to_vector(std::span<const double> s) { return {s.begin(), s.end()}; }

}  // namespace

TEST(Backward, SumOfParameterHasUnitGradient) {
  Tensor w = Tensor::from_data({3}, {0.5, -1.0, 2.0}, true);
  backward(sum(w));
  EXPECT_EQ(to_vector(w.grad()), (std::vector<double>{1.0, 1.0, 1.0}));
}

TEST(Backward, QuadraticGradient) {
  Tensor w = Tensor::from_data({3}, {1.0, 2.0, 3.0}, true);
  backward(sum(mul(w, w)));
  EXPECT_EQ(to_vector(w.grad()), (std::vector<double>{2.0, 4.0, 6.0}));
}

TEST(Backward, RejectsNonScalarLoss) {
  Tensor w = Tensor::from_data({2}, {1.0, 2.0}, true);
  EXPECT_THROW(backward(scale(w, 2.0)), ContractViolation);
}

TEST(Backward, ReportsDetachedParameters) {
  ParameterSet params;
  Tensor used = params.add("used", Tensor::from_data({2}, {1.0, 2.0}, true));
  params.add("unused", Tensor::from_data({2}, {3.0, 4.0}, true));
  const auto detached = params.accumulate_gradients(sum(used));
  ASSERT_EQ(detached.size(), 1u);
  EXPECT_EQ(detached[0], "unused");
  // the detached parameter still carries an explicit zero gradient
  EXPECT_EQ(to_vector(params[1].grad()), (std::vector<double>{0.0, 0.0}));
}

TEST(Backward, GraphIsReusableAndAccumulates) {
  Tensor w = Tensor::from_data({2}, {1.0, -2.0}, true);
  Tensor loss = sum(square(w));
  backward(loss);
  backward(loss);
  EXPECT_EQ(to_vector(w.grad()), (std::vector<double>{4.0, -8.0}));
}

TEST(Backward, NoGradGuardSkipsRecording) {
  Tensor w = Tensor::from_data({2}, {1.0, 2.0}, true);
  NoGradGuard guard;
  Tensor y = sum(w);
  EXPECT_FALSE(y.requires_grad());
}

TEST(Backward, LinearityOfSumOfLosses) {
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    Rng rng(seed);
    ParameterSet params;
    Dense layer(params, "d", 4, 3, rng);
    const Tensor x = random_tensor({5, 4}, rng);
    auto loss_a = [&] { return sum(square(layer.forward(x))); };
    auto loss_b = [&] { return sum(tanh(layer.forward(x))); };

    params.zero_grad();
    params.accumulate_gradients(add(loss_a(), loss_b()));
    std::vector<std::vector<double>> joint;
    for (std::size_t i = 0; i < params.size(); ++i) joint.push_back(to_vector(params[i].grad()));

    params.zero_grad();
    params.accumulate_gradients(loss_a());
    params.accumulate_gradients(loss_b());
    for (std::size_t i = 0; i < params.size(); ++i) {
      const auto g = params[i].grad();
      for (std::size_t j = 0; j < g.size(); ++j) EXPECT_NEAR(g[j], joint[i][j], 1e-12);
    }
  }
}

TEST(Layers, DenseIdentityIsIdentityMap) {
  Rng rng(1);
  ParameterSet params;
  Dense dense(params, "d", 3, 3, rng);
  auto w = params[0].mutable_data();
  std::fill(w.begin(), w.end(), 0.0);
  for (int i = 0; i < 3; ++i) w[i * 3 + i] = 1.0;
  const Tensor x = Tensor::from_data({2, 3}, {1, 2, 3, -4, 5, -6});
  EXPECT_EQ(to_vector(dense.forward(x).data()), to_vector(x.data()));
}

TEST(Layers, SoftmaxOfEqualLogitsIsUniform) {
  const Tensor p = softmax(Tensor::from_data({1, 2}, {0.0, 0.0}));
  EXPECT_DOUBLE_EQ(p.at(0), 0.5);
  EXPECT_DOUBLE_EQ(p.at(1), 0.5);
}

TEST(Layers, SoftmaxRowsSumToOneAndArePositive) {
  Rng rng(7);
  for (int trial = 0; trial < 200; ++trial) {
    const Tensor logits = random_tensor({4, 6}, rng, 20.0);
    const Tensor p = softmax(logits);
    for (std::size_t r = 0; r < 4; ++r) {
      double total = 0.0;
      for (std::size_t c = 0; c < 6; ++c) {
        EXPECT_GT(p.at(r * 6 + c), 0.0);
        total += p.at(r * 6 + c);
      }
      EXPECT_NEAR(total, 1.0, 1e-12);
    }
  }
}

TEST(Layers, AllOnesKernelOnOneHotGivesNeighborhoodIndicator) {
  std::vector<double> image(25, 0.0);
  image[2 * 5 + 2] = 1.0;  // centre of a 5x5 single-channel image
  const Tensor x = Tensor::from_data({1, 5, 5, 1}, image);
  const Tensor w = Tensor::full({3, 3, 1, 1}, 1.0);
  const Tensor b = Tensor::zeros({1});
  const Tensor y = conv2d_same(x, w, b);
  ASSERT_EQ(y.shape(), (Shape{1, 5, 5, 1}));
  for (int row = 0; row < 5; ++row) {
    for (int col = 0; col < 5; ++col) {
      const bool inside = std::abs(row - 2) <= 1 && std::abs(col - 2) <= 1;
      EXPECT_EQ(y.at(static_cast<std::size_t>(row * 5 + col)), inside ? 1.0 : 0.0)
          << row << "," << col;
    }
  }
}

TEST(Layers, ShapeMismatchNamesBothShapes) {
  Rng rng(3);
  ParameterSet params;
  Dense dense(params, "d", 4, 2, rng);
  try {
    dense.forward(Tensor::zeros({2, 3}));
    FAIL() << "expected ContractViolation";
  } catch (const ContractViolation& e) {
    const std::string what = e.what();
    EXPECT_NE(what.find("(2, 3)"), std::string::npos);
    EXPECT_NE(what.find("(4, 2)"), std::string::npos);
  }
}

class GradientCheckTest
    : public ::testing::TestWithParam<std::tuple<std::size_t, std::uint64_t>> {};

TEST_P(GradientCheckTest, MatchesCentralDifferences) {
  const auto [index, seed] = GetParam();
  const auto& c = iad::testing::gradient_cases::layer_cases()[index];
  const auto result = c.run(seed);
  EXPECT_LT(result.max_relative_error, 1e-4) << c.name << ": " << result.worst_parameter;
  EXPECT_GT(result.checked, 0u);
}

INSTANTIATE_TEST_SUITE_P(
    LayersAndSeeds, GradientCheckTest,
    ::testing::Combine(::testing::Range<std::size_t>(0, iad::testing::gradient_cases::layer_cases().size()),
                       ::testing::Values(11, 12, 13, 14, 15)),
    [](const auto& info) {
      return iad::testing::gradient_cases::layer_cases()[std::get<0>(info.param)].name + "_seed" +
             std::to_string(std::get<1>(info.param));
    });

TEST(Adam, ZeroGradientIsFixedPoint) {
  ParameterSet params;
  params.add("w", Tensor::from_data({3}, {1.0, -2.0, 0.5}, true));
  params[0].mutable_grad();
  AdamState state = AdamState::for_parameters(params);
  for (int i = 0; i < 3; ++i) adam_step(params, state, 0.1);
  EXPECT_EQ(to_vector(params[0].data()), (std::vector<double>{1.0, -2.0, 0.5}));
  EXPECT_EQ(state.t, 3);
}

TEST(Adam, FirstStepMovesByLearningRate) {
  ParameterSet params;
  params.add("w", Tensor::from_data({1}, {0.0}, true));
  params[0].mutable_grad()[0] = 1.0;
  AdamState state = AdamState::for_parameters(params);
  const double lr = 0.01;
  adam_step(params, state, lr);
  EXPECT_EQ(state.t, 1);
  // m_hat = 1, v_hat = 1 -> step = lr / (1 + eps)
  EXPECT_NEAR(params[0].at(0), -lr / (1.0 + state.config.epsilon), 1e-15);
}

TEST(Adam, TwoStepsMatchScalarRecurrence) {
  ParameterSet params;
  params.add("w", Tensor::from_data({1}, {0.3}, true));
  AdamState state = AdamState::for_parameters(params);
  const double lr = 0.05, g = 0.7, b1 = 0.9, b2 = 0.999, eps = 1e-8;
  double theta = 0.3, m = 0.0, v = 0.0;
  for (int t = 1; t <= 2; ++t) {
    params[0].mutable_grad()[0] = g;
    adam_step(params, state, lr);
    m = b1 * m + (1 - b1) * g;
    v = b2 * v + (1 - b2) * g * g;
    theta -= lr * (m / (1 - std::pow(b1, t))) / (std::sqrt(v / (1 - std::pow(b2, t))) + eps);
  }
  EXPECT_NEAR(params[0].at(0), theta, 1e-15);
}

TEST(Adam, NonFiniteGradientAbortsUpdate) {
  ParameterSet params;
  params.add("w", Tensor::from_data({2}, {1.0, 2.0}, true));
  params[0].mutable_grad()[1] = std::numeric_limits<double>::quiet_NaN();
  AdamState state = AdamState::for_parameters(params);
  EXPECT_THROW(adam_step(params, state, 0.1), NumericError);
  EXPECT_EQ(state.t, 0);
  EXPECT_EQ(to_vector(params[0].data()), (std::vector<double>{1.0, 2.0}));
}

TEST(ClipGradNorm, ScalesToMaxNorm) {
  ParameterSet params;
  params.add("w", Tensor::from_data({2}, {0.0, 0.0}, true));
  params[0].mutable_grad()[0] = 30.0;
  params[0].mutable_grad()[1] = 40.0;
  EXPECT_DOUBLE_EQ(params.clip_grad_norm(10.0), 50.0);
  EXPECT_NEAR(params.grad_global_norm(), 10.0, 1e-9);
}

TEST(Categorical, UniformLogits) {
  const std::vector<double> logits = {0, 0, 0, 0};
  Categorical dist(logits);
  for (double p : dist.probabilities()) EXPECT_DOUBLE_EQ(p, 0.25);
  EXPECT_NEAR(dist.entropy(), std::log(4.0), 1e-15);
}

TEST(Categorical, LogNineVersusZero) {
  const std::vector<double> logits = {std::log(9.0), 0.0};
  Categorical dist(logits);
  EXPECT_NEAR(dist.probabilities()[0], 0.9, 1e-15);
  EXPECT_NEAR(dist.probabilities()[1], 0.1, 1e-15);
  EXPECT_NEAR(dist.log_prob(1), std::log(0.1), 1e-14);
}

TEST(Categorical, RejectsNaNLogits) {
  const std::vector<double> logits = {0.0, std::numeric_limits<double>::quiet_NaN()};
  EXPECT_THROW(Categorical{logits}, ContractViolation);
}

TEST(Categorical, EmpiricalFrequenciesWithinThreeSigma) {
  const std::vector<double> logits = {0.3, -1.2, 1.5, 0.0};
  Categorical dist(logits);
  Rng rng(2024);
  const int n = 100000;
  std::vector<int> counts(4, 0);
  for (int i = 0; i < n; ++i) counts[dist.sample(rng)]++;
  for (std::size_t k = 0; k < 4; ++k) {
    const double p = dist.probabilities()[k];
    const double sigma = std::sqrt(p * (1 - p) / n);
    EXPECT_LT(std::abs(counts[k] / static_cast<double>(n) - p), 3 * sigma) << k;
  }
}

TEST(Categorical, SamplingIsDeterministicForSeed) {
  const std::vector<double> logits = {0.1, 0.2, 0.3};
  Categorical dist(logits);
  Rng a(5), b(5);
  for (int i = 0; i < 100; ++i) EXPECT_EQ(dist.sample(a), dist.sample(b));
}

class CheckpointTest : public ::testing::Test {
 protected:
  void SetUp() override {
    dir_ = std::filesystem::temp_directory_path() /
           ("iad_ckpt_" + std::to_string(::testing::UnitTest::GetInstance()->random_seed()) +
            ::testing::UnitTest::GetInstance()->current_test_info()->name());
    std::filesystem::remove_all(dir_);
    std::filesystem::create_directories(dir_);
  }
  void TearDown() override { std::filesystem::remove_all(dir_); }
  std::filesystem::path dir_;
};

TEST_F(CheckpointTest, RoundTripPreservesNamesShapesAndBits) {
  Rng rng(9);
  ParameterSet params;
  Dense a(params, "net.a", 3, 2, rng);
  Conv2d c(params, "net.conv", 2, 2, 3, rng);
  CheckpointContents contents;
  append_parameters(contents, params);
  contents.metadata["note"] = "unit";
  const auto path = dir_ / "p.ckpt";
  const std::string checksum = save_checkpoint(path, contents);
  EXPECT_EQ(checksum, file_checksum(path));

  ParameterSet other;
  Rng rng2(99);
  Dense a2(other, "net.a", 3, 2, rng2);
  Conv2d c2(other, "net.conv", 2, 2, 3, rng2);
  const auto loaded = load_checkpoint(path);
  restore_parameters(other, loaded);
  for (std::size_t i = 0; i < params.size(); ++i) {
    EXPECT_EQ(to_vector(params[i].data()), to_vector(other[i].data()));
  }
  EXPECT_EQ(loaded.metadata["note"], "unit");

  const auto manifest = nlohmann::json::parse(std::ifstream(manifest_path(path)));
  EXPECT_EQ(manifest["entries"].size(), params.size());
  EXPECT_EQ(manifest["entries"][0]["name"], "net.a.weight");
}

TEST_F(CheckpointTest, DetectsCorruption) {
  ParameterSet params;
  params.add("w", Tensor::from_data({2}, {1.0, 2.0}, true));
  CheckpointContents contents;
  append_parameters(contents, params);
  const auto path = dir_ / "p.ckpt";
  save_checkpoint(path, contents);
  {
    std::fstream f(path, std::ios::in | std::ios::out | std::ios::binary);
    f.seekp(-1, std::ios::end);
    f.put('\x7f');
  }
  EXPECT_THROW(load_checkpoint(path), ConfigError);
}

TEST_F(CheckpointTest, ShapeMismatchOnRestoreIsReported) {
  ParameterSet params;
  params.add("w", Tensor::from_data({2}, {1.0, 2.0}, true));
  CheckpointContents contents;
  append_parameters(contents, params);
  ParameterSet wrong;
  wrong.add("w", Tensor::zeros({3}, true));
  EXPECT_THROW(restore_parameters(wrong, contents), ConfigError);
}
