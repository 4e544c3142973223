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

#include "vdv/metrics.hpp"

#include <random>

#include <gtest/gtest.h>

namespace vdv {
namespace {

// Reference confusion matrices: the SIIM test set and the random and
// patient-wise RS-NIH splits.
constexpr ConfusionMatrix kSiim{.tp = 247, .fp = 255, .tn = 827, .fn = 43};
constexpr ConfusionMatrix kNihRandom{.tp = 50, .fp = 110, .tn = 499, .fn = 5};
constexpr ConfusionMatrix kNihPatient{.tp = 47, .fp = 197, .tn = 412, .fn = 8};

// Reference rates are percentages with two decimals.
constexpr double kReferenceTol = 1e-4;

TEST(Confusion, HandCount) {
  const std::vector<Label> labels{1, 1, 0, 0}, preds{1, 0, 0, 1};
  const auto cm = confusion(labels, preds);
  EXPECT_EQ(cm, (ConfusionMatrix{.tp = 1, .fp = 1, .tn = 1, .fn = 1}));
  const auto perfect = confusion(labels, labels);
  EXPECT_EQ(perfect.fp, 0u);
  EXPECT_EQ(perfect.fn, 0u);
  EXPECT_THROW(confusion(labels, std::vector<Label>{1, 0}), DimensionMismatch);
  EXPECT_THROW(confusion(labels, std::vector<Label>{1, 0, 2, 0}), InvalidArgument);
}

TEST(Confusion, SiimFixtureFromLabels) {
  std::vector<Label> labels, preds;
  auto add = [&](Label l, Label p, int count) {
    for (int i = 0; i < count; ++i) {
      labels.push_back(l);
      preds.push_back(p);
    }
  };
  add(0, 0, 827);
  add(0, 1, 255);
  add(1, 0, 43);
  add(1, 1, 247);
  EXPECT_EQ(confusion(labels, preds), kSiim);
}

TEST(Metrics, SiimRow) {
  EXPECT_DOUBLE_EQ(recall(kSiim), 247.0 / 290.0);
  EXPECT_DOUBLE_EQ(accuracy(kSiim), 1074.0 / 1372.0);
  EXPECT_DOUBLE_EQ(specificity(kSiim), 827.0 / 1082.0);
  EXPECT_DOUBLE_EQ(precision(kSiim), 247.0 / 502.0);
  EXPECT_NEAR(accuracy(kSiim), 0.7827, kReferenceTol);
  EXPECT_NEAR(recall(kSiim), 0.8517, kReferenceTol);
  EXPECT_NEAR(specificity(kSiim), 0.7643, kReferenceTol);
  EXPECT_NEAR(precision(kSiim), 0.4920, kReferenceTol);
  EXPECT_NEAR(f_beta(precision(kSiim), recall(kSiim), 1.0), 0.6237, kReferenceTol);
  EXPECT_NEAR(f_beta(precision(kSiim), recall(kSiim), 2.0), 0.7430, kReferenceTol);
  EXPECT_NEAR(g_mean(recall(kSiim), specificity(kSiim)), 0.8068, kReferenceTol);
}

TEST(Metrics, RsNihRows) {
  EXPECT_NEAR(accuracy(kNihRandom), 0.8268, kReferenceTol);
  EXPECT_NEAR(recall(kNihRandom), 0.9090, kReferenceTol);
  EXPECT_NEAR(specificity(kNihRandom), 0.8193, kReferenceTol);
  EXPECT_DOUBLE_EQ(precision(kNihRandom), 0.3125);
  EXPECT_NEAR(g_mean(0.85454, 0.67652), 0.76033, 1e-5);

  const auto r = evaluate_confusion(kNihPatient);
  EXPECT_NEAR(r.accuracy, 0.6912, kReferenceTol);
  EXPECT_NEAR(r.precision, 0.1926, kReferenceTol);
  EXPECT_NEAR(r.f1, 0.3143, kReferenceTol);
  EXPECT_NEAR(r.f2, 0.5064, kReferenceTol);
  EXPECT_NEAR(r.g_mean, 0.7603, kReferenceTol);
}

TEST(Metrics, AllOnesIsOneHalf) {
  const ConfusionMatrix cm{1, 1, 1, 1};
  EXPECT_DOUBLE_EQ(accuracy(cm), 0.5);
  EXPECT_DOUBLE_EQ(recall(cm), 0.5);
  EXPECT_DOUBLE_EQ(precision(cm), 0.5);
  EXPECT_DOUBLE_EQ(specificity(cm), 0.5);
}

TEST(Metrics, ZeroDenominatorsRaise) {
  const ConfusionMatrix no_pred_pos{.tp = 0, .fp = 0, .tn = 5, .fn = 0};
  EXPECT_THROW(precision(no_pred_pos), UndefinedMetric);
  EXPECT_THROW(recall(no_pred_pos), UndefinedMetric);
  EXPECT_THROW(accuracy(ConfusionMatrix{}), UndefinedMetric);
  EXPECT_THROW(specificity(ConfusionMatrix{.tp = 3, .fp = 0, .tn = 0, .fn = 0}), UndefinedMetric);
  EXPECT_THROW(f_beta(0.0, 0.0, 1.0), UndefinedMetric);
}

TEST(Metrics, EvaluateOnAllNegativeSliceSurfacesError) {
  const std::vector<Label> labels{0, 0, 0, 1}, preds{0, 0, 0, 0};
  const std::vector<double> scores{0.1, 0.2, 0.3, 0.4};
  EXPECT_THROW(evaluate(labels, preds, scores), UndefinedMetric);
}

TEST(FBeta, Identities) {
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> u(0.01, 1.0);
  for (int i = 0; i < 200; ++i) {
    const double p = u(rng), r = u(rng), b = u(rng) * 3;
    EXPECT_NEAR(f_beta(r, r, b), r, 1e-15);
    EXPECT_NEAR(f_beta(p, r, 1.0), 2 * p * r / (p + r), 1e-15);
  }
  EXPECT_THROW(f_beta(0.5, 0.5, 0.0), InvalidArgument);
  EXPECT_THROW(f_beta(1.5, 0.5, 1.0), InvalidArgument);
}

TEST(Metrics, AccuracyDecomposition) {
  std::mt19937_64 rng(6);
  for (int i = 0; i < 200; ++i) {
    const ConfusionMatrix cm{1 + rng() % 50, rng() % 50, 1 + rng() % 50, rng() % 50};
    const double p = static_cast<double>(cm.positives()), n = static_cast<double>(cm.negatives());
    EXPECT_NEAR(accuracy(cm), (recall(cm) * p + specificity(cm) * n) / (p + n), 1e-14);
  }
}

TEST(GMean, Basics) {
  EXPECT_DOUBLE_EQ(g_mean(1.0, 1.0), 1.0);
  EXPECT_THROW(g_mean(-0.1, 1.0), InvalidArgument);
}

double pair_count_auc(const std::vector<double>& s, const std::vector<Label>& l) {
  double wins = 0, pairs = 0;
  for (std::size_t i = 0; i < s.size(); ++i)
    for (std::size_t j = 0; j < s.size(); ++j)
      if (l[i] == 1 && l[j] == 0) {
        pairs += 1;
        wins += s[i] > s[j] ? 1.0 : (s[i] == s[j] ? 0.5 : 0.0);
      }
  return wins / pairs;
}

TEST(RocAuc, Examples) {
  EXPECT_DOUBLE_EQ(roc_auc(std::vector<double>{0.9, 0.8, 0.3, 0.1}, std::vector<Label>{1, 1, 0, 0}).auc, 1.0);
  EXPECT_DOUBLE_EQ(roc_auc(std::vector<double>{0.3, 0.8}, std::vector<Label>{1, 0}).auc, 0.0);
  EXPECT_DOUBLE_EQ(roc_auc(std::vector<double>{0.5, 0.5}, std::vector<Label>{1, 0}).auc, 0.5);
  EXPECT_THROW(roc_auc(std::vector<double>{0.5, 0.5}, std::vector<Label>{1, 1}), InvalidArgument);
}

TEST(RocAuc, CurveEndpoints) {
  const auto r = roc_auc(std::vector<double>{0.9, 0.4, 0.4, 0.1}, std::vector<Label>{1, 0, 1, 0});
  ASSERT_EQ(r.points.size(), 4u);
  EXPECT_TRUE(std::isinf(r.points.front().threshold));
  EXPECT_EQ(r.points.front().fpr, 0.0);
  EXPECT_EQ(r.points.back().fpr, 1.0);
  EXPECT_EQ(r.points.back().tpr, 1.0);
  EXPECT_DOUBLE_EQ(r.auc, 0.875);
}

TEST(RocAuc, MatchesPairCountingWithTies) {
  std::mt19937_64 rng(12);
  for (int trial = 0; trial < 200; ++trial) {
    std::vector<double> s(12);
    std::vector<Label> l(12);
    for (std::size_t i = 0; i < 12; ++i) {
      s[i] = static_cast<double>(rng() % 5) / 4.0;
      l[i] = i < 2 ? static_cast<Label>(i) : static_cast<Label>(rng() % 2);
    }
    const double auc = roc_auc(s, l).auc;
    EXPECT_NEAR(auc, pair_count_auc(s, l), 1e-12);

    std::vector<double> neg(s.size()), warped(s.size());
    for (std::size_t i = 0; i < s.size(); ++i) {
      neg[i] = -s[i];
      warped[i] = std::exp(3.0 * s[i]) - 7.0;
    }
    EXPECT_NEAR(auc + roc_auc(neg, l).auc, 1.0, 1e-12);
    EXPECT_NEAR(roc_auc(warped, l).auc, auc, 1e-12);
  }
}

TEST(Report, CsvRowMirrorsTableColumns) {
  EvalReport r = evaluate_confusion(kSiim);
  r.auc = 0.86;
  r.score_rule = "vote-fraction";
  EXPECT_EQ(report_csv_row("VDV", r),
            "VDV,247,43,827,255,78.28,85.17,76.43,49.20,62.37,74.31,80.68,86.00,vote-fraction");
}

TEST(Report, RocCsv) {
  const auto r = roc_auc(std::vector<double>{1.0, 0.0}, std::vector<Label>{1, 0});
  EXPECT_EQ(roc_csv(r), "threshold,fpr,tpr\ninf,0,0\n1,0,1\n0,1,1\n");
}

}  // namespace
}  // namespace vdv
