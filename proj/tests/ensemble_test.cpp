// Copyright 2026 The VDV Toolkit Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     https://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "vdv/ensemble.hpp"

#include <random>

#include <gtest/gtest.h>

#include "vdv/dataset.hpp"

namespace vdv {
namespace {

std::vector<Label> pattern(unsigned bits, std::size_t k) {
  std::vector<Label> v(k);
  for (std::size_t i = 0; i < k; ++i) v[i] = static_cast<Label>((bits >> i) & 1u);
  return v;
}

Label counting_oracle(const std::vector<Label>& votes) {
  std::size_t ones = 0, zeros = 0;
  for (auto v : votes) (v ? ones : zeros)++;
  if (ones > zeros) return 1;
  if (zeros > ones) return 0;
  return 1;
}

/// Constant-output SVM: no support vectors, decision value = bias.
TrainedSvm constant_svm(double bias, std::size_t dim) {
  TrainedSvm m;
  m.bias = bias;
  m.support_vectors.resize(0, static_cast<Eigen::Index>(dim));
  return m;
}

BlockModel constant_block(const std::vector<Label>& votes, std::size_t dim = 2) {
  BlockModel b;
  b.extractor_tag = "const";
  for (auto v : votes) b.models.push_back(constant_svm(v ? 1.0 : -1.0, dim));
  return b;
}

TEST(MajorityVote, Examples) {
  EXPECT_EQ(majority_vote(std::vector<Label>{1, 1, 0}), 1);
  EXPECT_EQ(majority_vote(std::vector<Label>{0, 0, 0}), 0);
  EXPECT_EQ(majority_vote(std::vector<Label>{1, 0}), 1);
  EXPECT_THROW(majority_vote(std::vector<Label>{}), InvalidArgument);
}

TEST(MajorityVote, ExhaustiveAndComplement) {
  for (std::size_t k = 1; k <= 5; ++k)
    for (unsigned bits = 0; bits < (1u << k); ++bits) {
      const auto v = pattern(bits, k);
      EXPECT_EQ(majority_vote(v), counting_oracle(v));
      if (k % 2 == 1) {
        const auto flipped = pattern(~bits, k);
        EXPECT_EQ(majority_vote(flipped), 1 - majority_vote(v));
      }
    }
}

TEST(BlockPredict, VotesAndScores) {
  const Eigen::Vector2d x(0.3, -0.2);
  const auto b = constant_block({1, 1, 0});
  EXPECT_EQ(block_predict(b, x), 1);
  EXPECT_DOUBLE_EQ(block_score(b, x), 2.0 / 3.0);
  EXPECT_DOUBLE_EQ(block_score(constant_block({0, 0, 0}), x), 0.0);
  EXPECT_DOUBLE_EQ(block_score(b, x, ScoreRule::kMeanDecision), 1.0 / 3.0);
  const auto unanimous = constant_block(std::vector<Label>(11, 0));
  EXPECT_EQ(block_predict(unanimous, x), 0);
  EXPECT_THROW(block_predict(b, Eigen::Vector3d(1, 2, 3)), DimensionMismatch);
}

TEST(BlockPredict, ScoreConsistentWithTieRule) {
  const Eigen::Vector2d x(1, 1);
  for (std::size_t k = 1; k <= 5; ++k)
    for (unsigned bits = 0; bits < (1u << k); ++bits) {
      const auto b = constant_block(pattern(bits, k));
      const double s = block_score(b, x);
      EXPECT_EQ(block_predict(b, x), s >= 0.5 ? 1 : 0);
    }
}

TEST(VdvScore, BruteForceOverVotePatterns) {
  const Vector x = Eigen::Vector2d(0.5, 0.5);
  std::mt19937_64 rng(3);
  for (int trial = 0; trial < 300; ++trial) {
    VdvModel model;
    std::vector<Vector> inputs;
    double expected = 0.0;
    std::vector<Label> block_labels;
    for (int b = 0; b < 3; ++b) {
      const std::size_t k = 1 + rng() % 5;
      const auto votes = pattern(static_cast<unsigned>(rng()), k);
      model.blocks.push_back(constant_block(votes));
      inputs.push_back(x);
      std::size_t ones = 0;
      for (auto v : votes) ones += v;
      expected += static_cast<double>(ones) / static_cast<double>(k) / 3.0;
      block_labels.push_back(counting_oracle(votes));
    }
    EXPECT_NEAR(vdv_score(model, inputs), expected, 1e-15);
    EXPECT_EQ(vdv_predict(model, inputs), counting_oracle(block_labels));
  }
}

TEST(VdvPredict, Examples) {
  const Vector x = Eigen::Vector2d(0, 0);
  VdvModel m;
  m.blocks = {constant_block({1}), constant_block({0}), constant_block({1})};
  const std::vector<Vector> in{x, x, x};
  EXPECT_EQ(vdv_predict(m, in), 1);
  m.blocks = {constant_block({1, 1, 1}), constant_block({1, 1, 1}), constant_block({1, 0, 0})};
  EXPECT_NEAR(vdv_score(m, in), 7.0 / 9.0, 1e-15);
  m.blocks = {constant_block({0}), constant_block({0}), constant_block({0})};
  EXPECT_EQ(vdv_predict(m, in), 0);
  EXPECT_EQ(vdv_score(m, in), 0.0);
  EXPECT_THROW(vdv_predict(m, std::vector<Vector>{x}), DimensionMismatch);
  VdvModel single;
  single.blocks = {constant_block({1, 0, 0})};
  EXPECT_EQ(vdv_predict(single, std::vector<Vector>{x}), 0);
}

TEST(TrainBlock, SubsetCountFollowsImbalance) {
  const auto set = synth_imbalanced(95, 10, 3, 3.0, 4);
  TrainConfig cfg;
  cfg.seed = 9;
  const auto block = train_block(set, "vgg16", KernelSpec::linear(), cfg);
  EXPECT_EQ(block.k(), 9u);
  EXPECT_FALSE(block.uses_pca());
  EXPECT_EQ(block.extractor_tag, "vgg16");
  EXPECT_EQ(block.input_dim(), 3u);
}

TEST(TrainBlock, BalancedInputIsSingleSvm) {
  const auto set = synth_imbalanced(12, 12, 2, 2.0, 5);
  const auto block = train_block(set, "t", KernelSpec::linear(), TrainConfig{});
  ASSERT_EQ(block.k(), 1u);
  const auto svm = train_svm(set, KernelSpec::linear(), TrainConfig{});
  const Matrix x = set.features_as_double();
  const auto out = block_outputs(block, x);
  for (Eigen::Index i = 0; i < x.rows(); ++i) {
    EXPECT_EQ(out.predictions[static_cast<std::size_t>(i)], predict(svm, x.row(i)));
    EXPECT_EQ(block_predict(block, x.row(i)), predict(svm, x.row(i)));
  }
}

TEST(TrainBlock, PcaPerSubset) {
  const auto set = synth_imbalanced(40, 8, 30, 3.0, 6);
  const auto block = train_block(set, "densenet121", KernelSpec::polynomial(), TrainConfig{},
                                 {.use_pca = true});
  ASSERT_EQ(block.k(), 5u);
  ASSERT_EQ(block.pca.size(), 5u);
  for (std::size_t m = 0; m < block.k(); ++m) {
    EXPECT_EQ(block.pca[m].n_components(), 16u);  // min(2 * n_min, dim)
    EXPECT_EQ(block.pca[m].dim(), 30u);
    EXPECT_EQ(block.models[m].dim(), 16u);
  }
  EXPECT_EQ(block.input_dim(), 30u);
  const auto out = block_outputs(block, set.features_as_double());
  for (std::size_t i = 0; i < set.size(); i += 7) {
    const auto votes = block_votes(block, set.row(i));
    EXPECT_EQ(out.predictions[i], majority_vote(votes));
  }
}

TEST(TrainBlock, DeterministicBytesAndThreads) {
  const auto set = synth_imbalanced(60, 12, 4, 1.0, 8);
  TrainConfig cfg;
  cfg.seed = 21;
  const auto a = serialize_block(train_block(set, "x", KernelSpec::polynomial(), cfg));
  const auto b = serialize_block(train_block(set, "x", KernelSpec::polynomial(), cfg));
  const auto c = serialize_block(train_block(set, "x", KernelSpec::polynomial(), cfg, {.threads = 3}));
  EXPECT_EQ(a, b);
  EXPECT_EQ(a, c);
}

TEST(Containers, RoundTripAndMagic) {
  const auto set = synth_imbalanced(30, 10, 5, 2.0, 2);
  VdvModel model;
  model.blocks.push_back(train_block(set, "vgg16", KernelSpec::linear(), TrainConfig{}));
  model.blocks.push_back(train_block(set, "densenet121", KernelSpec::polynomial(), TrainConfig{}, {.use_pca = true}));
  const auto bytes = serialize_vdv(model);
  EXPECT_EQ(std::string(bytes.begin(), bytes.begin() + 4), "VDV1");
  EXPECT_EQ(std::string(bytes.begin() + 16, bytes.begin() + 20), "BLK1");
  const auto back = deserialize_vdv(bytes);
  ASSERT_EQ(back.blocks.size(), 2u);
  EXPECT_EQ(back.blocks[1].extractor_tag, "densenet121");
  EXPECT_TRUE(back.blocks[1].uses_pca());
  EXPECT_EQ(serialize_vdv(back), bytes);

  const Matrix x = set.features_as_double();
  const std::vector<Matrix> inputs{x, x};
  const auto a = vdv_outputs(model, inputs), b = vdv_outputs(back, inputs);
  EXPECT_EQ(a.combined.predictions, b.combined.predictions);
  EXPECT_EQ(a.combined.scores, b.combined.scores);

  auto bad = bytes;
  bad[2] = 'X';
  EXPECT_THROW(deserialize_vdv(bad), HeaderError);
  bad = bytes;
  bad.resize(bytes.size() - 3);
  EXPECT_THROW(deserialize_vdv(bad), TruncatedError);
}

TEST(VdvOutputs, MatchesPerSampleCalls) {
  const auto set = synth_imbalanced(50, 10, 3, 1.0, 13);
  VdvModel model;
  for (int b = 0; b < 3; ++b) {
    TrainConfig cfg;
    cfg.seed = static_cast<std::uint64_t>(b);
    model.blocks.push_back(train_block(set, "b" + std::to_string(b), KernelSpec::polynomial(2, 0.5, 1.0), cfg));
  }
  const Matrix x = set.features_as_double();
  const std::vector<Matrix> inputs{x, x, x};
  const auto out = vdv_outputs(model, inputs);
  for (Eigen::Index i = 0; i < x.rows(); i += 5) {
    const std::vector<Vector> per{x.row(i).transpose(), x.row(i).transpose(), x.row(i).transpose()};
    EXPECT_EQ(out.combined.predictions[static_cast<std::size_t>(i)], vdv_predict(model, per));
    EXPECT_NEAR(out.combined.scores[static_cast<std::size_t>(i)], vdv_score(model, per), 1e-15);
  }
}

}  // namespace
}  // namespace vdv
