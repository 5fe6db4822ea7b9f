// Copyright 2026 The FedBandit Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "fedbandit/tree_mechanism.h"

#include <bit>
#include <cmath>
#include <random>
#include <vector>

#include "gtest/gtest.h"

namespace fedbandit {
namespace {

// Integer-valued items keep every floating-point sum exact, so prefix sums
// can be compared with ==.
Eigen::VectorXd IntegerItem(int size, Rng& rng) {
  std::uniform_int_distribution<int> dist(-1000, 1000);
  Eigen::VectorXd v(size);
  for (int i = 0; i < size; ++i) v(i) = dist(rng);
  return v;
}

// Brute force: released node k covers items (k - 2^{i_k}, k].
int BruteParticipation(int64_t capacity, int64_t item) {
  int count = 0;
  for (int64_t k = 1; k <= capacity; ++k) {
    const int64_t width = int64_t{1} << FirstOneIndex(k);
    if (item > k - width && item <= k) ++count;
  }
  return count;
}

TEST(TreeIndexTest, FirstOneIndex) {
  EXPECT_EQ(FirstOneIndex(1), 0);
  EXPECT_EQ(FirstOneIndex(6), 1);
  EXPECT_EQ(FirstOneIndex(8), 3);
  EXPECT_EQ(FirstOneIndex(12), 2);
}

TEST(TreeIndexTest, Depth) {
  EXPECT_EQ(TreeDepth(1), 1);
  EXPECT_EQ(TreeDepth(4), 3);
  EXPECT_EQ(TreeDepth(80), 7);
  EXPECT_EQ(TreeDepth(256), 9);
  EXPECT_EQ(TreeDepth(1024), 11);
}

TEST(TreeIndexTest, PrefixLevels) {
  EXPECT_EQ(PrefixLevels(6), (std::vector<int>{1, 2}));
  EXPECT_EQ(PrefixLevels(7), (std::vector<int>{0, 1, 2}));
  EXPECT_EQ(PrefixLevels(8), (std::vector<int>{3}));
}

TEST(TreeIndexTest, ParticipationMatchesBruteForce) {
  for (int64_t capacity : {1, 2, 3, 7, 8, 13, 64, 100}) {
    for (int64_t item = 1; item <= capacity; ++item) {
      EXPECT_EQ(ParticipationCount(capacity, item),
                BruteParticipation(capacity, item))
          << "K=" << capacity << " item=" << item;
    }
  }
}

TEST(TreeIndexTest, ParticipationAndPrefixBounds) {
  for (int64_t capacity : {5, 40, 256, 1000}) {
    const int kappa = TreeDepth(capacity);
    for (int64_t k = 1; k <= capacity; ++k) {
      EXPECT_LE(ParticipationCount(capacity, k), kappa);
      EXPECT_LE(static_cast<int>(PrefixLevels(k).size()),
                1 + static_cast<int>(std::floor(std::log2(double(k)))));
    }
  }
}

TEST(PSumTreeTest, ZeroNoisePrefixEqualsRunningSum) {
  constexpr int kCapacity = 100;
  constexpr int kAgents = 3;
  Rng rng = MakeStream(1, StreamPurpose::kInstance);
  const PayloadShape shape = PayloadShape::Vector(4);
  std::vector<PSumTree> trees(kAgents, PSumTree(kCapacity, shape));
  TreeAnalyzer analyzer(kCapacity, kAgents, shape);
  Eigen::VectorXd running = Eigen::VectorXd::Zero(4);
  for (int k = 1; k <= kCapacity; ++k) {
    std::vector<Eigen::VectorXd> outs;
    for (int i = 0; i < kAgents; ++i) {
      const Eigen::VectorXd item = IntegerItem(4, rng);
      running += item;
      auto out = trees[i].RandomizerStep(k, item, 0.0, rng);
      ASSERT_TRUE(out.ok());
      outs.push_back(*out);
    }
    auto prefix = analyzer.AnalyzerStep(k, outs);
    ASSERT_TRUE(prefix.ok());
    EXPECT_EQ(*prefix, running) << "k=" << k;
    EXPECT_EQ(analyzer.last_levels_used(), std::popcount(uint64_t(k)));
    EXPECT_EQ(trees[0].stored_levels(), std::popcount(uint64_t(k)));
  }
}

TEST(PSumTreeTest, NodeHoldsDyadicIntervalSum) {
  Rng rng = MakeStream(2, StreamPurpose::kInstance);
  PSumTree tree(16, PayloadShape::Vector(1));
  std::vector<double> items;
  for (int k = 1; k <= 16; ++k) {
    items.push_back(IntegerItem(1, rng)(0));
    ASSERT_TRUE(
        tree.RandomizerStep(k, Eigen::VectorXd::Constant(1, items.back()), 0.0,
                            rng)
            .ok());
    const int level = FirstOneIndex(k);
    double expected = 0.0;
    for (int j = k - (1 << level); j < k; ++j) expected += items[j];
    ASSERT_TRUE(tree.node(level).has_value());
    EXPECT_EQ((*tree.node(level))(0), expected);
  }
}

TEST(PSumTreeTest, ReleasedNoiseHasRequestedVariance) {
  constexpr int kTrials = 20000;
  constexpr double kSigma = 1.7;
  Rng rng = MakeStream(3, StreamPurpose::kPrivacyNoise);
  double sum = 0.0;
  double sum_sq = 0.0;
  for (int trial = 0; trial < kTrials; ++trial) {
    PSumTree tree(2, PayloadShape::Vector(1));
    auto out = tree.RandomizerStep(1, Eigen::VectorXd::Constant(1, 5.0),
                                   kSigma, rng);
    ASSERT_TRUE(out.ok());
    const double z = (*out)(0) - 5.0;
    sum += z;
    sum_sq += z * z;
  }
  const double mean = sum / kTrials;
  const double var = sum_sq / kTrials - mean * mean;
  EXPECT_NEAR(mean, 0.0, 4.0 * kSigma / std::sqrt(kTrials));
  // Standard error of the sample variance is sigma^2 sqrt(2 / n).
  EXPECT_NEAR(var, kSigma * kSigma,
              4.0 * kSigma * kSigma * std::sqrt(2.0 / kTrials));
}

TEST(PSumTreeTest, SymmetricNoiseStaysSymmetric) {
  Rng rng = MakeStream(4, StreamPurpose::kPrivacyNoise);
  PSumTree tree(4, PayloadShape::SymmetricMatrix(3));
  auto out = tree.RandomizerStep(1, Eigen::VectorXd::Zero(9), 1.0, rng);
  ASSERT_TRUE(out.ok());
  const Eigen::Map<const Eigen::MatrixXd> m(out->data(), 3, 3);
  EXPECT_EQ(Eigen::MatrixXd(m), Eigen::MatrixXd(m.transpose()));
  EXPECT_NE(m(0, 1), 0.0);
}

TEST(PSumTreeTest, RejectsBadSteps) {
  Rng rng = MakeStream(5, StreamPurpose::kPrivacyNoise);
  PSumTree tree(4, PayloadShape::Vector(2));
  const Eigen::VectorXd item = Eigen::VectorXd::Zero(2);
  EXPECT_EQ(tree.RandomizerStep(0, item, 0, rng).status().code(),
            absl::StatusCode::kOutOfRange);
  EXPECT_EQ(tree.RandomizerStep(2, item, 0, rng).status().code(),
            absl::StatusCode::kFailedPrecondition);
  ASSERT_TRUE(tree.RandomizerStep(1, item, 0, rng).ok());
  EXPECT_EQ(tree.RandomizerStep(1, item, 0, rng).status().code(),
            absl::StatusCode::kFailedPrecondition);
  EXPECT_EQ(tree.RandomizerStep(2, Eigen::VectorXd::Zero(3), 0, rng)
                .status()
                .code(),
            absl::StatusCode::kInvalidArgument);
  ASSERT_TRUE(tree.RandomizerStep(2, item, 0, rng).ok());
  ASSERT_TRUE(tree.RandomizerStep(3, item, 0, rng).ok());
  ASSERT_TRUE(tree.RandomizerStep(4, item, 0, rng).ok());
  EXPECT_EQ(tree.RandomizerStep(5, item, 0, rng).status().code(),
            absl::StatusCode::kOutOfRange);
}

TEST(PrefixAltTest, ZeroNoiseOutputsRunningSum) {
  Rng rng = MakeStream(6, StreamPurpose::kInstance);
  PrefixAltRandomizer randomizer(50, PayloadShape::Vector(2));
  Eigen::VectorXd running = Eigen::VectorXd::Zero(2);
  for (int k = 1; k <= 50; ++k) {
    const Eigen::VectorXd item = IntegerItem(2, rng);
    running += item;
    auto out = randomizer.Step(k, item, 0.0, rng);
    ASSERT_TRUE(out.ok());
    EXPECT_EQ(*out, running);
    EXPECT_EQ(randomizer.last_levels_used(), std::popcount(uint64_t(k)));
  }
}

TEST(PrefixAltTest, NoiseVarianceScalesWithLevelsUsed) {
  // At k = 7 three noisy nodes are summed, so the variance is 3 sigma^2.
  constexpr int kTrials = 20000;
  Rng rng = MakeStream(7, StreamPurpose::kPrivacyNoise);
  double sum_sq = 0.0;
  for (int trial = 0; trial < kTrials; ++trial) {
    PrefixAltRandomizer randomizer(8, PayloadShape::Vector(1));
    Eigen::VectorXd out;
    for (int k = 1; k <= 7; ++k) {
      out = *randomizer.Step(k, Eigen::VectorXd::Zero(1), 1.0, rng);
    }
    sum_sq += out(0) * out(0);
  }
  EXPECT_NEAR(sum_sq / kTrials, 3.0, 4.0 * 3.0 * std::sqrt(2.0 / kTrials));
}

TEST(TreeAnalyzerTest, RequiresOnePSumPerAgent) {
  TreeAnalyzer analyzer(4, 3, PayloadShape::Vector(2));
  std::vector<Eigen::VectorXd> two(2, Eigen::VectorXd::Zero(2));
  EXPECT_EQ(analyzer.AnalyzerStep(1, two).status().code(),
            absl::StatusCode::kInvalidArgument);
}

TEST(TreeAnalyzerTest, RetiresLowerLevels) {
  TreeAnalyzer analyzer(8, 1, PayloadShape::Vector(1));
  for (int k = 1; k <= 8; ++k) {
    ASSERT_TRUE(analyzer.Absorb(k, Eigen::VectorXd::Ones(1)).ok());
    EXPECT_EQ(analyzer.stored_levels(), std::popcount(uint64_t(k)));
  }
}

TEST(PSumMessageTest, RoundTrips) {
  PSumMessage msg{12, StreamTag::kCovariance, Eigen::VectorXd(3)};
  msg.payload << 0.1, -2.5, 1e300;
  const std::string bytes = msg.Serialize();
  EXPECT_EQ(bytes.size(), 16u + 3 * 8u);
  auto parsed = PSumMessage::Parse(bytes, 3);
  ASSERT_TRUE(parsed.ok());
  EXPECT_EQ(parsed->round, 12);
  EXPECT_EQ(parsed->tag, StreamTag::kCovariance);
  EXPECT_EQ(parsed->payload, msg.payload);
}

TEST(PSumMessageTest, RejectsWrongLengthAndTag) {
  PSumMessage msg{1, StreamTag::kBias, Eigen::VectorXd::Zero(2)};
  std::string bytes = msg.Serialize();
  EXPECT_FALSE(PSumMessage::Parse(bytes, 3).ok());
  bytes[8] = 7;
  EXPECT_FALSE(PSumMessage::Parse(bytes, 2).ok());
}

}  // namespace
}  // namespace fedbandit
