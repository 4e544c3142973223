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
#include <filesystem>
#include <numeric>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <unordered_map>
#include <unordered_set>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "vdv/binary_io.hpp"
#include "vdv/error.hpp"

namespace vdv {

/// Row-major single-precision feature storage, matching the on-disk layout.
using FeatureMatrix = Eigen::Matrix<float, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
/// Double-precision row-major matrix used by the solvers.
using Matrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using Vector = Eigen::VectorXd;

/// Binary class label: 0 = negative (Normal), 1 = positive (Pneumothorax).
using Label = std::uint8_t;
inline constexpr Label kNegative = 0;
inline constexpr Label kPositive = 1;

/// Feature vectors with binary labels, sample identifiers and optional
/// patient identifiers. Immutable once constructed; every constructor
/// validates the invariants.
class FeatureSet {
 public:
  FeatureSet() = default;

  /// Labeled set with default sample ids "0", "1", ...
  FeatureSet(FeatureMatrix features, std::vector<Label> labels)
      : features_(std::move(features)),
        labels_(std::move(labels)),
        sample_ids_(default_ids(static_cast<std::size_t>(features_.rows()))) {
    validate();
  }

  /// An empty `labels` makes a non-empty set unlabeled; an empty
  /// `patient_ids` means no patient table. A zero-sample set counts as labeled.
  FeatureSet(FeatureMatrix features, std::vector<Label> labels, std::vector<std::string> sample_ids,
             std::vector<std::string> patient_ids)
      : features_(std::move(features)),
        labels_(std::move(labels)),
        sample_ids_(std::move(sample_ids)),
        patient_ids_(std::move(patient_ids)) {
    validate();
  }

  std::size_t size() const noexcept { return static_cast<std::size_t>(features_.rows()); }
  std::size_t dim() const noexcept { return static_cast<std::size_t>(features_.cols()); }
  bool empty() const noexcept { return size() == 0; }
  bool has_labels() const noexcept { return labels_.size() == size(); }
  bool has_patient_ids() const noexcept { return !patient_ids_.empty(); }

  const FeatureMatrix& features() const noexcept { return features_; }
  std::span<const Label> labels() const noexcept { return labels_; }
  std::span<const std::string> sample_ids() const noexcept { return sample_ids_; }
  std::span<const std::string> patient_ids() const noexcept { return patient_ids_; }

  Label label(std::size_t i) const { return labels_.at(i); }
  auto row(std::size_t i) const { return features_.row(static_cast<Eigen::Index>(i)); }

  std::size_t count(Label c) const {
    require_labels("count");
    return static_cast<std::size_t>(std::count(labels_.begin(), labels_.end(), c));
  }

  /// Rows `indices` in the given order.
  FeatureSet subset(std::span<const std::size_t> indices) const {
    FeatureMatrix f(static_cast<Eigen::Index>(indices.size()), features_.cols());
    std::vector<Label> l;
    std::vector<std::string> s, p;
    l.reserve(has_labels() ? indices.size() : 0);
    s.reserve(indices.size());
    for (std::size_t r = 0; r < indices.size(); ++r) {
      const auto i = indices[r];
      if (i >= size()) throw InvalidArgument("subset index out of range");
      f.row(static_cast<Eigen::Index>(r)) = features_.row(static_cast<Eigen::Index>(i));
      if (!labels_.empty()) l.push_back(labels_[i]);
      s.push_back(sample_ids_[i]);
      if (has_patient_ids()) p.push_back(patient_ids_[i]);
    }
    return FeatureSet(std::move(f), std::move(l), std::move(s), std::move(p));
  }

  /// Features converted to double precision.
  Matrix features_as_double() const { return features_.cast<double>(); }

  void require_labels(const char* op) const {
    if (!has_labels()) throw InvalidArgument(std::string(op) + ": feature set has no labels");
  }

  friend bool operator==(const FeatureSet& a, const FeatureSet& b) {
    return a.features_.rows() == b.features_.rows() && a.features_.cols() == b.features_.cols() &&
           a.features_ == b.features_ && a.labels_ == b.labels_ &&
           a.sample_ids_ == b.sample_ids_ && a.patient_ids_ == b.patient_ids_;
  }

  static std::vector<std::string> default_ids(std::size_t n) {
    std::vector<std::string> ids(n);
    for (std::size_t i = 0; i < n; ++i) ids[i] = std::to_string(i);
    return ids;
  }

 private:
  void validate() const {
    const auto n = size();
    if (!labels_.empty() && labels_.size() != n)
      throw DimensionMismatch("label count", n, labels_.size());
    if (sample_ids_.size() != n) throw DimensionMismatch("sample id count", n, sample_ids_.size());
    if (!patient_ids_.empty() && patient_ids_.size() != n)
      throw DimensionMismatch("patient id count", n, patient_ids_.size());
    for (std::size_t i = 0; i < labels_.size(); ++i)
      if (labels_[i] > 1)
        throw InvalidArgument("label of sample " + std::to_string(i) + " is not binary");
    if (!features_.allFinite()) throw InvalidArgument("feature matrix contains non-finite values");
    std::unordered_set<std::string_view> seen;
    seen.reserve(n);
    for (const auto& id : sample_ids_)
      if (!seen.insert(id).second) throw InvalidArgument("duplicate sample id '" + id + "'");
  }

  FeatureMatrix features_;
  std::vector<Label> labels_;
  std::vector<std::string> sample_ids_;
  std::vector<std::string> patient_ids_;
};

/// One class-balanced training set: a majority slice joined with every
/// minority sample.
struct MiniTrainingSet {
  FeatureSet data;
  std::size_t subset_index = 0;
};

// ---------------------------------------------------------------------------
// Feature file format
//
//   0  magic   46 56 45 43 00 01   ("FVEC", version 1)
//   6  u32     n_samples
//  10  u32     dim
//  14  u8      flags: bit0 labels present, bit1 patient table present
//  15  f32     n_samples * dim, row-major
//      u8      n_samples labels                      (bit0)
//      u32     byte length of the text block         (bit1)
//      text    one "sample_id,patient_id\n" line per sample
//
// The patient table is also how custom sample ids are stored. A set without
// patient ids but with non-default sample ids writes empty patient fields.
// ---------------------------------------------------------------------------

inline constexpr std::array<std::uint8_t, 6> kFeatureMagic{0x46, 0x56, 0x45, 0x43, 0x00, 0x01};
inline constexpr std::uint8_t kFlagLabels = 0x01;
inline constexpr std::uint8_t kFlagPatients = 0x02;
inline constexpr std::size_t kFeatureHeaderSize = 15;

inline std::vector<std::uint8_t> encode_feature_set(const FeatureSet& set) {
  if (set.size() > UINT32_MAX || set.dim() > UINT32_MAX)
    throw InvalidArgument("feature set too large for the file format");
  const bool need_table = set.has_patient_ids() ||
                          !std::ranges::equal(set.sample_ids(), FeatureSet::default_ids(set.size()));
  std::uint8_t flags = 0;
  if (set.has_labels()) flags |= kFlagLabels;
  if (need_table) flags |= kFlagPatients;

  io::ByteWriter w;
  w.bytes().reserve(kFeatureHeaderSize + 4 * set.size() * set.dim() + set.size());
  w.put_bytes(kFeatureMagic);
  w.put<std::uint32_t>(static_cast<std::uint32_t>(set.size()));
  w.put<std::uint32_t>(static_cast<std::uint32_t>(set.dim()));
  w.put<std::uint8_t>(flags);
  const auto& f = set.features();
  w.put_array(std::span<const float>(f.data(), static_cast<std::size_t>(f.size())));
  if (flags & kFlagLabels) w.put_array(set.labels());
  if (flags & kFlagPatients) {
    std::string text;
    for (std::size_t i = 0; i < set.size(); ++i) {
      const auto& sid = set.sample_ids()[i];
      const std::string pid = set.has_patient_ids() ? set.patient_ids()[i] : std::string{};
      if (sid.find_first_of(",\n") != std::string::npos ||
          pid.find_first_of(",\n") != std::string::npos)
        throw InvalidArgument("identifiers may not contain ',' or newline: '" + sid + "'");
      text += sid;
      text += ',';
      text += pid;
      text += '\n';
    }
    if (text.size() > UINT32_MAX) throw InvalidArgument("patient table too large");
    w.put<std::uint32_t>(static_cast<std::uint32_t>(text.size()));
    w.put_string(text);
  }
  return w.take();
}

inline FeatureSet decode_feature_set(std::span<const std::uint8_t> bytes) {
  io::ByteReader r(bytes);
  r.expect_magic(kFeatureMagic, "magic");
  const auto n = r.get<std::uint32_t>("n_samples");
  const auto dim = r.get<std::uint32_t>("dim");
  const auto flags_at = r.offset();
  const auto flags = r.get<std::uint8_t>("flags");
  if (flags & ~(kFlagLabels | kFlagPatients))
    throw HeaderError("flags", flags_at, "unknown flag bits set");

  const std::uint64_t cells = std::uint64_t{n} * dim;
  const auto features_at = r.offset();
  r.require(cells * 4, "features");
  FeatureMatrix features(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(dim));
  r.get_array(std::span<float>(features.data(), cells), "features");
  for (std::uint64_t k = 0; k < cells; ++k)
    if (!std::isfinite(features.data()[k]))
      throw NonFiniteError("features", features_at + 4 * k,
                           "non-finite value at sample " + std::to_string(k / dim) + ", feature " +
                               std::to_string(k % dim));

  std::vector<Label> labels;
  if (flags & kFlagLabels) {
    const auto labels_at = r.offset();
    labels.resize(n);
    r.get_array(std::span<Label>(labels), "labels");
    for (std::size_t i = 0; i < n; ++i)
      if (labels[i] > 1)
        throw LabelDomainError("labels", labels_at + i,
                               "label " + std::to_string(labels[i]) + " of sample " +
                                   std::to_string(i) + " is not 0 or 1");
  }

  std::vector<std::string> sample_ids;
  std::vector<std::string> patient_ids;
  if (flags & kFlagPatients) {
    const auto len = r.get<std::uint32_t>("patient_table_length");
    const auto text_at = r.offset();
    const auto raw = r.get_bytes(len, "patient_table");
    std::string_view text(reinterpret_cast<const char*>(raw.data()), raw.size());
    sample_ids.reserve(n);
    patient_ids.reserve(n);
    bool any_patient = false;
    std::size_t pos = 0;
    while (pos < text.size()) {
      const auto eol = text.find('\n', pos);
      if (eol == std::string_view::npos)
        throw LoadError("patient_table", text_at + pos, "unterminated line");
      const auto line = text.substr(pos, eol - pos);
      const auto comma = line.find(',');
      if (comma == std::string_view::npos)
        throw LoadError("patient_table", text_at + pos, "line without ','");
      sample_ids.emplace_back(line.substr(0, comma));
      patient_ids.emplace_back(line.substr(comma + 1));
      any_patient = any_patient || !patient_ids.back().empty();
      pos = eol + 1;
    }
    if (sample_ids.size() != n)
      throw LoadError("patient_table", text_at,
                      "has " + std::to_string(sample_ids.size()) + " lines for " +
                          std::to_string(n) + " samples");
    if (!any_patient) {
      patient_ids.clear();
    } else if (std::ranges::any_of(patient_ids, [](const auto& p) { return p.empty(); })) {
      throw LoadError("patient_table", text_at, "patient ids must be all present or all absent");
    }
  } else {
    sample_ids = FeatureSet::default_ids(n);
  }
  if (!r.at_end()) throw LoadError("trailer", r.offset(), "unexpected trailing bytes");

  try {
    return FeatureSet(std::move(features), std::move(labels), std::move(sample_ids),
                      std::move(patient_ids));
  } catch (const InvalidArgument& e) {
    throw LoadError("patient_table", 0, e.what());
  }
}

inline FeatureSet load_feature_set(const std::filesystem::path& path) {
  return decode_feature_set(io::read_file(path));
}

inline void save_feature_set(const FeatureSet& set, const std::filesystem::path& path) {
  io::write_file(path, encode_feature_set(set));
}

// ---------------------------------------------------------------------------
// Partitioning and splitting
// ---------------------------------------------------------------------------

/// Row indices grouped by class, majority first. Equal counts make class 0
/// the majority.
struct ClassPartition {
  Label majority_label = kNegative;
  std::vector<std::size_t> majority;
  std::vector<std::size_t> minority;
};

inline ClassPartition partition_indices(std::span<const Label> labels) {
  std::array<std::vector<std::size_t>, 2> by_class;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] > 1) throw InvalidArgument("label is not binary");
    by_class[labels[i]].push_back(i);
  }
  if (by_class[0].empty() || by_class[1].empty())
    throw InvalidArgument("both classes must be present");
  const Label maj = by_class[1].size() > by_class[0].size() ? kPositive : kNegative;
  return {maj, std::move(by_class[maj]), std::move(by_class[1 - maj])};
}

inline std::pair<FeatureSet, FeatureSet> partition_by_class(const FeatureSet& set) {
  set.require_labels("partition_by_class");
  const auto p = partition_indices(set.labels());
  return {set.subset(p.majority), set.subset(p.minority)};
}

/// Index-level plan of the balanced subsets: which majority rows were
/// trimmed and which slice each mini-set receives.
struct SubsetPlan {
  Label majority_label = kNegative;
  std::size_t k = 0;
  std::vector<std::size_t> minority;
  std::vector<std::vector<std::size_t>> slices;
  std::vector<std::size_t> trimmed;
};

/// K = floor(n_maj / n_min) slices of n_min majority rows each. The excess
/// majority rows are removed by seeded uniform sampling.
inline SubsetPlan plan_balanced_subsets(std::span<const Label> labels, std::uint64_t seed) {
  auto part = partition_indices(labels);
  const auto n_min = part.minority.size();
  const auto k = part.majority.size() / n_min;

  std::mt19937_64 rng(seed);
  auto shuffled = part.majority;
  std::shuffle(shuffled.begin(), shuffled.end(), rng);

  SubsetPlan plan;
  plan.majority_label = part.majority_label;
  plan.k = k;
  plan.minority = std::move(part.minority);
  plan.slices.resize(k);
  for (std::size_t s = 0; s < k; ++s) {
    auto first = shuffled.begin() + static_cast<std::ptrdiff_t>(s * n_min);
    plan.slices[s].assign(first, first + static_cast<std::ptrdiff_t>(n_min));
    std::ranges::sort(plan.slices[s]);
  }
  plan.trimmed.assign(shuffled.begin() + static_cast<std::ptrdiff_t>(k * n_min), shuffled.end());
  std::ranges::sort(plan.trimmed);
  return plan;
}

/// Rows of each mini-set keep their order in the source set.
inline std::vector<MiniTrainingSet> build_balanced_subsets(const FeatureSet& train,
                                                           std::uint64_t seed) {
  train.require_labels("build_balanced_subsets");
  const auto plan = plan_balanced_subsets(train.labels(), seed);
  std::vector<MiniTrainingSet> out;
  out.reserve(plan.k);
  for (std::size_t s = 0; s < plan.k; ++s) {
    std::vector<std::size_t> rows = plan.slices[s];
    rows.insert(rows.end(), plan.minority.begin(), plan.minority.end());
    std::ranges::sort(rows);
    out.push_back({train.subset(rows), s});
  }
  return out;
}

inline std::pair<FeatureSet, FeatureSet> split_by_mask(const FeatureSet& set,
                                                       const std::vector<bool>& in_test) {
  std::vector<std::size_t> train, test;
  for (std::size_t i = 0; i < set.size(); ++i) (in_test[i] ? test : train).push_back(i);
  return {set.subset(train), set.subset(test)};
}

/// Test part holds round(n * test_fraction) samples; both parts keep source order.
inline std::pair<FeatureSet, FeatureSet> random_split(const FeatureSet& set, double test_fraction,
                                                      std::uint64_t seed) {
  if (!(test_fraction > 0.0 && test_fraction < 1.0))
    throw InvalidArgument("test_fraction must lie in (0, 1)");
  const auto n = set.size();
  const auto n_test = static_cast<std::size_t>(std::llround(static_cast<double>(n) * test_fraction));
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::mt19937_64 rng(seed);
  std::shuffle(order.begin(), order.end(), rng);
  std::vector<bool> in_test(n, false);
  for (std::size_t i = 0; i < n_test; ++i) in_test[order[i]] = true;
  return split_by_mask(set, in_test);
}

/// Whole patients are assigned to the test side in seeded random order until
/// the test side reaches round(n * test_fraction) samples, so it overshoots the
/// target by less than one patient group. Fails when the result would leave
/// either side empty.
inline std::pair<FeatureSet, FeatureSet> patient_wise_split(const FeatureSet& set,
                                                            double test_fraction,
                                                            std::uint64_t seed) {
  if (!(test_fraction > 0.0 && test_fraction < 1.0))
    throw InvalidArgument("test_fraction must lie in (0, 1)");
  if (!set.has_patient_ids()) throw InvalidArgument("patient_wise_split: no patient ids");

  std::vector<std::vector<std::size_t>> groups;
  std::unordered_map<std::string_view, std::size_t> group_of;
  for (std::size_t i = 0; i < set.size(); ++i) {
    auto [it, fresh] = group_of.try_emplace(set.patient_ids()[i], groups.size());
    if (fresh) groups.emplace_back();
    groups[it->second].push_back(i);
  }
  if (groups.size() < 2) throw InvalidArgument("patient_wise_split: need at least two patients");

  const auto target = static_cast<std::size_t>(
      std::llround(static_cast<double>(set.size()) * test_fraction));
  std::vector<std::size_t> order(groups.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::mt19937_64 rng(seed);
  std::shuffle(order.begin(), order.end(), rng);

  std::vector<bool> in_test(set.size(), false);
  std::size_t n_test = 0;
  std::size_t assigned_groups = 0;
  for (auto g : order) {
    if (n_test >= target) break;
    for (auto i : groups[g]) in_test[i] = true;
    n_test += groups[g].size();
    ++assigned_groups;
  }
  if (n_test == 0 || assigned_groups == groups.size())
    throw InvalidArgument("patient_wise_split: split would leave one side empty");
  return split_by_mask(set, in_test);
}

/// Two unit-variance Gaussian clouds: class 0 centred at the origin, class 1
/// shifted by `separation` along the first axis. Class-0 rows come first.
/// Patient ids pair consecutive samples ("p0" owns samples 0 and 1, ...).
inline FeatureSet synth_imbalanced(std::size_t n_maj, std::size_t n_min, std::size_t dim,
                                   double separation, std::uint64_t seed) {
  if (n_maj == 0 || n_min == 0 || dim == 0)
    throw InvalidArgument("synth_imbalanced: counts and dim must be positive");
  if (!std::isfinite(separation)) throw InvalidArgument("synth_imbalanced: separation not finite");
  const auto n = n_maj + n_min;
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> gauss(0.0, 1.0);
  FeatureMatrix f(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(dim));
  std::vector<Label> labels(n);
  std::vector<std::string> sids(n), pids(n);
  for (std::size_t i = 0; i < n; ++i) {
    labels[i] = i < n_maj ? kNegative : kPositive;
    for (std::size_t j = 0; j < dim; ++j) {
      double v = gauss(rng);
      if (j == 0 && labels[i] == kPositive) v += separation;
      f(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = static_cast<float>(v);
    }
    sids[i] = "s" + std::to_string(i);
    pids[i] = "p" + std::to_string(i / 2);
  }
  return FeatureSet(std::move(f), std::move(labels), std::move(sids), std::move(pids));
}

}  // namespace vdv
