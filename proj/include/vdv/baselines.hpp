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

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <random>
#include <string>
#include <vector>

#include "vdv/dataset.hpp"
#include "vdv/ensemble.hpp"
#include "vdv/error.hpp"
#include "vdv/metrics.hpp"
#include "vdv/svm.hpp"

namespace vdv {

/// Non-negative rational in lowest terms.
struct Fraction {
  std::uint64_t num = 0;
  std::uint64_t den = 1;

  static Fraction make(std::uint64_t num, std::uint64_t den) {
    if (den == 0) throw InvalidArgument("fraction with zero denominator");
    const auto g = std::gcd(num, den);
    return g == 0 ? Fraction{0, 1} : Fraction{num / g, den / g};
  }
  double value() const noexcept { return static_cast<double>(num) / static_cast<double>(den); }
  Fraction operator*(std::uint64_t k) const {
    const auto g = std::gcd(k, den);
    return make(num * (k / g), den / g);
  }
  friend bool operator==(const Fraction&, const Fraction&) = default;
};

/// weight_c = n_samples / (n_classes * count_c) with n_classes = 2, kept exact.
struct ClassWeights {
  std::array<Fraction, 2> weight_per_class;

  std::array<double, 2> values() const {
    return {weight_per_class[0].value(), weight_per_class[1].value()};
  }
};

inline ClassWeights compute_class_weights(std::span<const Label> labels) {
  std::array<std::uint64_t, 2> counts{0, 0};
  for (auto l : labels) {
    if (l > 1) throw InvalidArgument("compute_class_weights: non-binary label");
    ++counts[l];
  }
  if (counts[0] == 0 || counts[1] == 0)
    throw InvalidArgument("compute_class_weights: both classes must be present");
  const std::uint64_t n = labels.size();
  return {{Fraction::make(n, 2 * counts[0]), Fraction::make(n, 2 * counts[1])}};
}

/// Keeps every minority sample and n_min majority samples drawn without
/// replacement. Rows keep their source order.
inline FeatureSet undersample(const FeatureSet& train, std::uint64_t seed) {
  train.require_labels("undersample");
  auto part = partition_indices(train.labels());
  std::mt19937_64 rng(seed);
  std::shuffle(part.majority.begin(), part.majority.end(), rng);
  std::vector<std::size_t> rows(part.majority.begin(),
                                part.majority.begin() + static_cast<std::ptrdiff_t>(part.minority.size()));
  rows.insert(rows.end(), part.minority.begin(), part.minority.end());
  std::ranges::sort(rows);
  return train.subset(rows);
}

/// Grows the minority class to n_maj. Originals are kept exactly; each
/// minority sample is replicated floor(extra / n_min) times and the
/// remaining extra replicas are drawn at random without repeats. With
/// jitter_sigma > 0 every replica receives zero-mean Gaussian noise of
/// standard deviation jitter_sigma * (per-feature minority std).
/// Replica ids are "<sample_id>#<copy>"; patient ids are inherited.
inline FeatureSet oversample(const FeatureSet& train, std::uint64_t seed, double jitter_sigma = 0.0) {
  train.require_labels("oversample");
  if (!(jitter_sigma >= 0.0) || !std::isfinite(jitter_sigma))
    throw InvalidArgument("oversample: jitter_sigma must be >= 0");
  const auto part = partition_indices(train.labels());
  const auto n_min = part.minority.size();
  const auto extra = part.majority.size() - n_min;
  if (extra == 0) return train;

  std::mt19937_64 rng(seed);
  std::vector<std::size_t> replicas;
  replicas.reserve(extra);
  for (std::size_t round = 0; round < extra / n_min; ++round)
    replicas.insert(replicas.end(), part.minority.begin(), part.minority.end());
  auto pool = part.minority;
  std::shuffle(pool.begin(), pool.end(), rng);
  replicas.insert(replicas.end(), pool.begin(), pool.begin() + static_cast<std::ptrdiff_t>(extra % n_min));

  Eigen::VectorXd stddev = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(train.dim()));
  if (jitter_sigma > 0.0 && n_min > 1) {
    Matrix minority(static_cast<Eigen::Index>(n_min), static_cast<Eigen::Index>(train.dim()));
    for (std::size_t r = 0; r < n_min; ++r)
      minority.row(static_cast<Eigen::Index>(r)) = train.row(part.minority[r]).cast<double>();
    const Eigen::RowVectorXd mean = minority.colwise().mean();
    stddev = ((minority.rowwise() - mean).colwise().squaredNorm() / static_cast<double>(n_min - 1))
                 .cwiseSqrt()
                 .transpose();
  }

  const auto n = train.size() + extra;
  FeatureMatrix f(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(train.dim()));
  f.topRows(static_cast<Eigen::Index>(train.size())) = train.features();
  std::vector<Label> labels(train.labels().begin(), train.labels().end());
  std::vector<std::string> sids(train.sample_ids().begin(), train.sample_ids().end());
  std::vector<std::string> pids(train.patient_ids().begin(), train.patient_ids().end());
  std::vector<std::size_t> copies(train.size(), 0);
  std::normal_distribution<double> gauss(0.0, 1.0);
  for (std::size_t r = 0; r < extra; ++r) {
    const auto src = replicas[r];
    const auto dst = static_cast<Eigen::Index>(train.size() + r);
    f.row(dst) = train.row(src);
    if (jitter_sigma > 0.0)
      for (Eigen::Index j = 0; j < f.cols(); ++j)
        f(dst, j) += static_cast<float>(jitter_sigma * stddev[j] * gauss(rng));
    labels.push_back(train.label(src));
    sids.push_back(train.sample_ids()[src] + "#" + std::to_string(++copies[src]));
    if (train.has_patient_ids()) pids.push_back(train.patient_ids()[src]);
  }
  return FeatureSet(std::move(f), std::move(labels), std::move(sids), std::move(pids));
}

struct StrategyResult {
  std::string strategy;
  std::size_t n_train_neg = 0;
  std::size_t n_train_pos = 0;
  EvalReport report;
  /// AUC under the score rule not used for `report.auc`; single-model
  /// strategies score by decision value so both coincide.
  double auc_alternate = 0.0;
};

struct ComparisonOptions {
  ScoreRule score_rule = ScoreRule::kVoteFraction;
  double oversample_jitter = 0.0;
};

namespace detail {
inline StrategyResult evaluate_single_svm(const std::string& name, const FeatureSet& train_used,
                                          const FeatureSet& test, const KernelSpec& spec,
                                          const TrainConfig& cfg) {
  const auto model = train_svm(train_used, spec, cfg);
  const Vector f = decision_values(model, test.features_as_double());
  std::vector<double> scores(f.data(), f.data() + f.size());
  std::vector<Label> preds(scores.size());
  std::ranges::transform(scores, preds.begin(), label_from_decision);
  StrategyResult r{name, train_used.count(kNegative), train_used.count(kPositive),
                   evaluate(test.labels(), preds, scores, "decision-value"), 0.0};
  r.auc_alternate = r.report.auc;
  return r;
}
}  // namespace detail

/// Weight balancing, under-sampling, over-sampling and a single-block
/// data-level ensemble, each trained from `train` and scored on the same
/// untouched `test`.
inline std::vector<StrategyResult> run_comparison(const FeatureSet& train, const FeatureSet& test,
                                                  const KernelSpec& spec, const TrainConfig& cfg,
                                                  std::uint64_t seed,
                                                  const ComparisonOptions& opts = {}) {
  train.require_labels("run_comparison");
  test.require_labels("run_comparison");
  if (train.dim() != test.dim()) throw DimensionMismatch("run_comparison dim", train.dim(), test.dim());
  std::vector<StrategyResult> out;

  TrainConfig weighted = cfg;
  weighted.per_class_weight = compute_class_weights(train.labels()).values();
  out.push_back(detail::evaluate_single_svm("weight-balancing", train, test, spec, weighted));
  out.push_back(detail::evaluate_single_svm("under-sampling", undersample(train, seed), test, spec, cfg));
  out.push_back(detail::evaluate_single_svm("over-sampling",
                                            oversample(train, seed, opts.oversample_jitter), test,
                                            spec, cfg));

  TrainConfig ens_cfg = cfg;
  ens_cfg.seed = seed;
  const auto block = train_block(train, "ensemble", spec, ens_cfg);
  const Matrix x = test.features_as_double();
  const auto alt_rule = opts.score_rule == ScoreRule::kVoteFraction ? ScoreRule::kMeanDecision
                                                                   : ScoreRule::kVoteFraction;
  const auto primary = block_outputs(block, x, opts.score_rule);
  const auto alternate = block_outputs(block, x, alt_rule);
  const auto n_min = std::min(train.count(kNegative), train.count(kPositive));
  StrategyResult ens{"ensemble", n_min, n_min,
                     evaluate(test.labels(), primary.predictions, primary.scores,
                              to_string(opts.score_rule)),
                     roc_auc(alternate.scores, test.labels()).auc};
  out.push_back(std::move(ens));
  return out;
}

inline constexpr const char* kComparisonCsvHeader =
    "strategy,n_train_neg,n_train_pos,accuracy,recall,specificity,auc,precision,f1,f2,g_mean,"
    "score_rule,auc_alternate";

inline std::string comparison_csv(const std::vector<StrategyResult>& rows) {
  std::string out = std::string(kComparisonCsvHeader) + "\n";
  for (const auto& r : rows) {
    const auto& e = r.report;
    out += r.strategy + "," + std::to_string(r.n_train_neg) + "," + std::to_string(r.n_train_pos) +
           "," + format_percent(e.accuracy) + "," + format_percent(e.recall) + "," +
           format_percent(e.specificity) + "," + format_percent(e.auc) + "," +
           format_percent(e.precision) + "," + format_percent(e.f1) + "," + format_percent(e.f2) +
           "," + format_percent(e.g_mean) + "," + e.score_rule + "," +
           format_percent(r.auc_alternate) + "\n";
  }
  return out;
}

}  // namespace vdv
