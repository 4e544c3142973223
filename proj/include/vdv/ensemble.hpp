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

#pragma once

#include <array>
#include <cstdint>
#include <future>
#include <span>
#include <string>
#include <vector>

#include "vdv/binary_io.hpp"
#include "vdv/dataset.hpp"
#include "vdv/error.hpp"
#include "vdv/metrics.hpp"
#include "vdv/pca.hpp"
#include "vdv/svm.hpp"

namespace vdv {

/// The label with strictly more votes; an exact tie goes to the positive class.
inline Label majority_vote(std::span<const Label> votes) {
  if (votes.empty()) throw InvalidArgument("majority_vote: no votes");
  std::size_t positive = 0;
  for (auto v : votes) {
    if (v > 1) throw InvalidArgument("majority_vote: non-binary vote");
    positive += v;
  }
  return 2 * positive >= votes.size() ? kPositive : kNegative;
}

/// One data-level ensemble: an SVM per balanced mini-training-set, each with
/// an optional PCA fitted on its own mini-set.
struct BlockModel {
  std::string extractor_tag;
  std::vector<TrainedSvm> models;
  std::vector<PcaModel> pca;  // empty, or parallel to `models`

  std::size_t k() const noexcept { return models.size(); }
  bool uses_pca() const noexcept { return !pca.empty(); }
  /// Feature dimension consumed by the block, before any PCA.
  std::size_t input_dim() const {
    if (models.empty()) throw InvalidArgument("block has no models");
    return uses_pca() ? pca.front().dim() : models.front().dim();
  }

  void validate() const {
    if (models.empty()) throw InvalidArgument("block '" + extractor_tag + "' has no models");
    if (uses_pca() && pca.size() != models.size())
      throw InvalidArgument("block '" + extractor_tag + "': PCA list does not match models");
    for (const auto& m : models)
      if (!(m.kernel == models.front().kernel))
        throw InvalidArgument("block '" + extractor_tag + "': models use different kernels");
  }
};

struct VdvModel {
  std::vector<BlockModel> blocks;
};

struct BlockTrainOptions {
  bool use_pca = false;
  /// Mini-sets trained concurrently; 1 trains them in sequence.
  unsigned threads = 1;
};

/// Splits `train` into floor(n_maj / n_min) balanced mini-sets (seeded by
/// cfg.seed) and trains one SVM per mini-set.
inline BlockModel train_block(const FeatureSet& train, const std::string& tag,
                              const KernelSpec& spec, const TrainConfig& cfg,
                              const BlockTrainOptions& opts = {}) {
  spec.validate();
  cfg.validate();
  const auto subsets = build_balanced_subsets(train, cfg.seed);

  struct Fitted {
    TrainedSvm svm;
    std::optional<PcaModel> pca;
  };
  auto fit_one = [&](const MiniTrainingSet& mini) {
    Fitted out;
    Matrix x = mini.data.features_as_double();
    if (opts.use_pca) {
      out.pca = fit_pca(x, kFullRank);
      x = pca_transform(*out.pca, x);
    }
    try {
      out.svm = train_svm(x, mini.data.labels(), spec, cfg);
    } catch (const ConvergenceError& e) {
      throw ConvergenceError("block '" + tag + "', subset " + std::to_string(mini.subset_index) +
                                 ": " + e.what(),
                             e.diagnostics());
    }
    return out;
  };

  std::vector<Fitted> fitted(subsets.size());
  if (opts.threads <= 1) {
    for (std::size_t s = 0; s < subsets.size(); ++s) fitted[s] = fit_one(subsets[s]);
  } else {
    for (std::size_t start = 0; start < subsets.size(); start += opts.threads) {
      std::vector<std::future<Fitted>> jobs;
      for (std::size_t s = start; s < std::min(subsets.size(), start + opts.threads); ++s)
        jobs.push_back(std::async(std::launch::async, fit_one, std::cref(subsets[s])));
      for (std::size_t j = 0; j < jobs.size(); ++j) fitted[start + j] = jobs[j].get();
    }
  }

  BlockModel block;
  block.extractor_tag = tag;
  for (auto& f : fitted) {
    block.models.push_back(std::move(f.svm));
    if (f.pca) block.pca.push_back(std::move(*f.pca));
  }
  return block;
}

/// Decision values of every block member for every row of `x`
/// (n_samples x k), PCA applied per member.
inline Matrix block_decisions(const BlockModel& block, const Matrix& x) {
  block.validate();
  if (static_cast<std::size_t>(x.cols()) != block.input_dim())
    throw DimensionMismatch("block '" + block.extractor_tag + "' input", block.input_dim(),
                            static_cast<std::size_t>(x.cols()));
  Matrix out(x.rows(), static_cast<Eigen::Index>(block.k()));
  for (std::size_t m = 0; m < block.k(); ++m) {
    const auto col = static_cast<Eigen::Index>(m);
    if (block.uses_pca())
      out.col(col) = decision_values(block.models[m], pca_transform(block.pca[m], x));
    else
      out.col(col) = decision_values(block.models[m], x);
  }
  return out;
}

template <typename Derived>
std::vector<Label> block_votes(const BlockModel& block, const Eigen::MatrixBase<Derived>& x) {
  const Matrix row = x.template cast<double>().reshaped().transpose();
  const Matrix d = block_decisions(block, row);
  std::vector<Label> votes(block.k());
  for (std::size_t m = 0; m < block.k(); ++m) votes[m] = label_from_decision(d(0, static_cast<Eigen::Index>(m)));
  return votes;
}

template <typename Derived>
Label block_predict(const BlockModel& block, const Eigen::MatrixBase<Derived>& x) {
  return majority_vote(block_votes(block, x));
}

/// Vote-fraction score in [0, 1], or the mean member decision value.
inline double score_from_decisions(std::span<const double> decisions, ScoreRule rule) {
  double acc = 0.0;
  for (double f : decisions)
    acc += rule == ScoreRule::kVoteFraction ? static_cast<double>(label_from_decision(f)) : f;
  return acc / static_cast<double>(decisions.size());
}

template <typename Derived>
double block_score(const BlockModel& block, const Eigen::MatrixBase<Derived>& x,
                   ScoreRule rule = ScoreRule::kVoteFraction) {
  const Matrix row = x.template cast<double>().reshaped().transpose();
  const Matrix d = block_decisions(block, row);
  return score_from_decisions({d.data(), block.k()}, rule);
}

/// Per-sample block predictions and scores over a whole matrix.
struct BlockOutputs {
  std::vector<Label> predictions;
  std::vector<double> scores;
};

inline BlockOutputs block_outputs(const BlockModel& block, const Matrix& x,
                                  ScoreRule rule = ScoreRule::kVoteFraction) {
  const Matrix d = block_decisions(block, x);
  BlockOutputs out;
  out.predictions.resize(static_cast<std::size_t>(x.rows()));
  out.scores.resize(static_cast<std::size_t>(x.rows()));
  std::vector<Label> votes(block.k());
  for (Eigen::Index i = 0; i < x.rows(); ++i) {
    std::span<const double> row(d.row(i).data(), block.k());
    for (std::size_t m = 0; m < block.k(); ++m) votes[m] = label_from_decision(row[m]);
    out.predictions[static_cast<std::size_t>(i)] = majority_vote(votes);
    out.scores[static_cast<std::size_t>(i)] = score_from_decisions(row, rule);
  }
  return out;
}

/// Final label of the model-level ensemble: one feature vector per block, in
/// block order.
inline Label vdv_predict(const VdvModel& model, std::span<const Vector> features_per_block) {
  if (features_per_block.size() != model.blocks.size())
    throw DimensionMismatch("vdv_predict blocks", model.blocks.size(), features_per_block.size());
  if (model.blocks.empty()) throw InvalidArgument("vdv model has no blocks");
  std::vector<Label> votes;
  for (std::size_t b = 0; b < model.blocks.size(); ++b)
    votes.push_back(block_predict(model.blocks[b], features_per_block[b]));
  return majority_vote(votes);
}

inline double vdv_score(const VdvModel& model, std::span<const Vector> features_per_block,
                        ScoreRule rule = ScoreRule::kVoteFraction) {
  if (features_per_block.size() != model.blocks.size())
    throw DimensionMismatch("vdv_score blocks", model.blocks.size(), features_per_block.size());
  if (model.blocks.empty()) throw InvalidArgument("vdv model has no blocks");
  double acc = 0.0;
  for (std::size_t b = 0; b < model.blocks.size(); ++b)
    acc += block_score(model.blocks[b], features_per_block[b], rule);
  return acc / static_cast<double>(model.blocks.size());
}

/// Batch form of vdv_predict / vdv_score: `inputs[b]` holds every sample's
/// features for block b. Also returns each block's own outputs.
struct VdvOutputs {
  std::vector<BlockOutputs> blocks;
  BlockOutputs combined;
};

inline VdvOutputs vdv_outputs(const VdvModel& model, std::span<const Matrix> inputs,
                              ScoreRule rule = ScoreRule::kVoteFraction) {
  if (inputs.size() != model.blocks.size())
    throw DimensionMismatch("vdv blocks", model.blocks.size(), inputs.size());
  if (model.blocks.empty()) throw InvalidArgument("vdv model has no blocks");
  const auto n = static_cast<std::size_t>(inputs.front().rows());
  VdvOutputs out;
  for (std::size_t b = 0; b < model.blocks.size(); ++b) {
    if (static_cast<std::size_t>(inputs[b].rows()) != n)
      throw DimensionMismatch("vdv sample count", n, static_cast<std::size_t>(inputs[b].rows()));
    out.blocks.push_back(block_outputs(model.blocks[b], inputs[b], rule));
  }
  out.combined.predictions.resize(n);
  out.combined.scores.resize(n);
  std::vector<Label> votes(model.blocks.size());
  for (std::size_t i = 0; i < n; ++i) {
    double acc = 0.0;
    for (std::size_t b = 0; b < model.blocks.size(); ++b) {
      votes[b] = out.blocks[b].predictions[i];
      acc += out.blocks[b].scores[i];
    }
    out.combined.predictions[i] = majority_vote(votes);
    out.combined.scores[i] = acc / static_cast<double>(model.blocks.size());
  }
  return out;
}

// Block container: "BLK1", tag length u32, tag bytes, k u32, flags u8
// (bit0 PCA present), k PCA blobs if present, then k SVM blobs; every blob
// is prefixed by its u64 length. VDV container: "VDV1", block count u32,
// then length-prefixed block blobs.
inline constexpr std::array<std::uint8_t, 4> kBlockMagic{0x42, 0x4C, 0x4B, 0x31};
inline constexpr std::array<std::uint8_t, 4> kVdvMagic{0x56, 0x44, 0x56, 0x31};

inline std::vector<std::uint8_t> serialize_block(const BlockModel& block) {
  block.validate();
  io::ByteWriter w;
  w.put_bytes(kBlockMagic);
  w.put<std::uint32_t>(static_cast<std::uint32_t>(block.extractor_tag.size()));
  w.put_string(block.extractor_tag);
  w.put<std::uint32_t>(static_cast<std::uint32_t>(block.k()));
  w.put<std::uint8_t>(block.uses_pca() ? 1 : 0);
  for (const auto& p : block.pca) w.put_blob(serialize_pca(p));
  for (const auto& m : block.models) w.put_blob(serialize_svm(m));
  return w.take();
}

inline BlockModel deserialize_block(std::span<const std::uint8_t> bytes) {
  io::ByteReader r(bytes);
  r.expect_magic(kBlockMagic, "block_magic");
  BlockModel block;
  const auto tag_len = r.get<std::uint32_t>("tag_length");
  const auto tag = r.get_bytes(tag_len, "tag");
  block.extractor_tag.assign(tag.begin(), tag.end());
  const auto k = r.get<std::uint32_t>("k");
  const auto flags_at = r.offset();
  const auto flags = r.get<std::uint8_t>("block_flags");
  if (flags > 1) throw HeaderError("block_flags", flags_at, "unknown flag bits set");
  if (flags & 1)
    for (std::uint32_t i = 0; i < k; ++i) block.pca.push_back(deserialize_pca(r.get_blob("pca_blob")));
  for (std::uint32_t i = 0; i < k; ++i) block.models.push_back(deserialize_svm(r.get_blob("svm_blob")));
  if (!r.at_end()) throw LoadError("block_trailer", r.offset(), "unexpected trailing bytes");
  try {
    block.validate();
  } catch (const InvalidArgument& e) {
    throw LoadError("block", 0, e.what());
  }
  return block;
}

inline std::vector<std::uint8_t> serialize_vdv(const VdvModel& model) {
  io::ByteWriter w;
  w.put_bytes(kVdvMagic);
  w.put<std::uint32_t>(static_cast<std::uint32_t>(model.blocks.size()));
  for (const auto& b : model.blocks) w.put_blob(serialize_block(b));
  return w.take();
}

inline VdvModel deserialize_vdv(std::span<const std::uint8_t> bytes) {
  io::ByteReader r(bytes);
  r.expect_magic(kVdvMagic, "vdv_magic");
  VdvModel model;
  const auto count_at = r.offset();
  const auto count = r.get<std::uint32_t>("block_count");
  if (count == 0) throw HeaderError("block_count", count_at, "model has no blocks");
  for (std::uint32_t b = 0; b < count; ++b)
    model.blocks.push_back(deserialize_block(r.get_blob("block_blob")));
  if (!r.at_end()) throw LoadError("vdv_trailer", r.offset(), "unexpected trailing bytes");
  return model;
}

}  // namespace vdv
