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
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <limits>
#include <numeric>
#include <span>
#include <string>
#include <vector>

#include "vdv/dataset.hpp"
#include "vdv/error.hpp"

namespace vdv {

struct ConfusionMatrix {
  std::uint64_t tp = 0;
  std::uint64_t fp = 0;
  std::uint64_t tn = 0;
  std::uint64_t fn = 0;

  std::uint64_t positives() const noexcept { return tp + fn; }
  std::uint64_t negatives() const noexcept { return tn + fp; }
  std::uint64_t total() const noexcept { return tp + fp + tn + fn; }

  friend bool operator==(const ConfusionMatrix&, const ConfusionMatrix&) = default;
};

inline ConfusionMatrix confusion(std::span<const Label> labels, std::span<const Label> predictions) {
  if (labels.size() != predictions.size())
    throw DimensionMismatch("confusion", labels.size(), predictions.size());
  ConfusionMatrix cm;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] > 1 || predictions[i] > 1) throw InvalidArgument("confusion: non-binary value");
    if (labels[i] == kPositive) {
      (predictions[i] == kPositive ? cm.tp : cm.fn)++;
    } else {
      (predictions[i] == kPositive ? cm.fp : cm.tn)++;
    }
  }
  return cm;
}

namespace detail {
inline double ratio(std::uint64_t num, std::uint64_t den, const char* metric) {
  if (den == 0) throw UndefinedMetric(std::string(metric) + " is undefined (zero denominator)");
  return static_cast<double>(num) / static_cast<double>(den);
}
}  // namespace detail

inline double accuracy(const ConfusionMatrix& cm) {
  return detail::ratio(cm.tp + cm.tn, cm.total(), "accuracy");
}
inline double recall(const ConfusionMatrix& cm) { return detail::ratio(cm.tp, cm.tp + cm.fn, "recall"); }
inline double precision(const ConfusionMatrix& cm) {
  return detail::ratio(cm.tp, cm.tp + cm.fp, "precision");
}
inline double specificity(const ConfusionMatrix& cm) {
  return detail::ratio(cm.tn, cm.tn + cm.fp, "specificity");
}

/// (1 + b^2) * P * R / (b^2 * P + R).
inline double f_beta(double precision, double recall, double beta) {
  if (!(precision >= 0.0 && precision <= 1.0 && recall >= 0.0 && recall <= 1.0))
    throw InvalidArgument("f_beta: precision and recall must lie in [0, 1]");
  if (!(beta > 0.0)) throw InvalidArgument("f_beta: beta must be > 0");
  const double b2 = beta * beta;
  const double den = b2 * precision + recall;
  if (den == 0.0) throw UndefinedMetric("f_beta is undefined when precision and recall are 0");
  return (1.0 + b2) * precision * recall / den;
}

inline double g_mean(double recall, double specificity) {
  if (!(recall >= 0.0 && recall <= 1.0 && specificity >= 0.0 && specificity <= 1.0))
    throw InvalidArgument("g_mean: inputs must lie in [0, 1]");
  return std::sqrt(recall * specificity);
}

struct RocPoint {
  double threshold;
  double fpr;
  double tpr;
};

struct RocResult {
  double auc = 0.0;
  std::vector<RocPoint> points;
};

/// ROC over every distinct score threshold (score >= threshold predicts
/// positive), starting at (0, 0) with threshold +inf. Tied scores form one
/// step, so the trapezoidal area equals the Mann-Whitney statistic with ties
/// counted as one half.
inline RocResult roc_auc(std::span<const double> scores, std::span<const Label> labels) {
  if (scores.size() != labels.size()) throw DimensionMismatch("roc_auc", labels.size(), scores.size());
  std::uint64_t pos = 0, neg = 0;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] > 1) throw InvalidArgument("roc_auc: non-binary label");
    if (!std::isfinite(scores[i])) throw InvalidArgument("roc_auc: non-finite score");
    (labels[i] == kPositive ? pos : neg)++;
  }
  if (pos == 0 || neg == 0) throw InvalidArgument("roc_auc: both classes must be present");

  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::ranges::sort(order, [&](auto a, auto b) { return scores[a] > scores[b]; });

  RocResult out;
  out.points.push_back({std::numeric_limits<double>::infinity(), 0.0, 0.0});
  std::uint64_t tp = 0, fp = 0;
  // Area accumulated in integer units of (1 / (pos * neg)) * 0.5.
  std::uint64_t twice_area = 0;
  std::size_t i = 0;
  while (i < order.size()) {
    const double s = scores[order[i]];
    std::uint64_t dtp = 0, dfp = 0;
    for (; i < order.size() && scores[order[i]] == s; ++i) (labels[order[i]] == kPositive ? dtp : dfp)++;
    twice_area += dfp * (2 * tp + dtp);
    tp += dtp;
    fp += dfp;
    out.points.push_back({s, static_cast<double>(fp) / static_cast<double>(neg),
                          static_cast<double>(tp) / static_cast<double>(pos)});
  }
  out.auc = static_cast<double>(twice_area) / (2.0 * static_cast<double>(pos) * static_cast<double>(neg));
  return out;
}

enum class ScoreRule { kVoteFraction, kMeanDecision };

inline std::string to_string(ScoreRule r) {
  return r == ScoreRule::kVoteFraction ? "vote-fraction" : "mean-decision";
}

inline ScoreRule parse_score_rule(const std::string& s) {
  if (s == "vote-fraction") return ScoreRule::kVoteFraction;
  if (s == "mean-decision") return ScoreRule::kMeanDecision;
  throw InvalidArgument("unknown score rule '" + s + "'");
}

struct EvalReport {
  ConfusionMatrix confusion;
  double accuracy = 0.0;
  double recall = 0.0;
  double specificity = 0.0;
  double precision = 0.0;
  double f1 = 0.0;
  double f2 = 0.0;
  double g_mean = 0.0;
  double auc = 0.0;
  std::string score_rule;
};

/// Every threshold metric from the confusion matrix.
inline EvalReport evaluate_confusion(const ConfusionMatrix& cm) {
  EvalReport r;
  r.confusion = cm;
  r.accuracy = accuracy(cm);
  r.recall = recall(cm);
  r.specificity = specificity(cm);
  r.precision = precision(cm);
  r.f1 = f_beta(r.precision, r.recall, 1.0);
  r.f2 = f_beta(r.precision, r.recall, 2.0);
  r.g_mean = g_mean(r.recall, r.specificity);
  return r;
}

inline EvalReport evaluate(std::span<const Label> labels, std::span<const Label> predictions,
                           std::span<const double> scores, const std::string& score_rule = "") {
  EvalReport r = evaluate_confusion(confusion(labels, predictions));
  r.auc = roc_auc(scores, labels).auc;
  r.score_rule = score_rule;
  return r;
}

/// Rate as a percentage with two decimals, e.g. 0.851724 -> "85.17".
inline std::string format_percent(double rate) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f", 100.0 * rate);
  return buf;
}

inline constexpr const char* kReportCsvHeader =
    "name,tp,fn,tn,fp,accuracy,recall,specificity,precision,f1,f2,g_mean,auc,score_rule";

/// One CSV row in the column order of the report header; rates in percent.
inline std::string report_csv_row(const std::string& name, const EvalReport& r) {
  const auto& c = r.confusion;
  return name + "," + std::to_string(c.tp) + "," + std::to_string(c.fn) + "," +
         std::to_string(c.tn) + "," + std::to_string(c.fp) + "," + format_percent(r.accuracy) +
         "," + format_percent(r.recall) + "," + format_percent(r.specificity) + "," +
         format_percent(r.precision) + "," + format_percent(r.f1) + "," + format_percent(r.f2) +
         "," + format_percent(r.g_mean) + "," + format_percent(r.auc) + "," + r.score_rule;
}

inline std::string roc_csv(const RocResult& roc) {
  std::string out = "threshold,fpr,tpr\n";
  char buf[96];
  for (const auto& p : roc.points) {
    std::snprintf(buf, sizeof buf, "%.17g,%.17g,%.17g\n", p.threshold, p.fpr, p.tpr);
    out += buf;
  }
  return out;
}

}  // namespace vdv
