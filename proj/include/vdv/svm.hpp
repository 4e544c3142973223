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
#include <limits>
#include <list>
#include <optional>
#include <span>
#include <unordered_map>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "vdv/binary_io.hpp"
#include "vdv/dataset.hpp"
#include "vdv/error.hpp"
#include "vdv/kernel.hpp"

namespace vdv {

struct TrainConfig {
  double c = 100.0;
  /// Stop when the maximal KKT violation m(a) - M(a) drops below this.
  double tolerance = 1e-3;
  /// Iteration budget in passes; one pass is max(10n, 1000000) pair updates.
  int max_passes = 10;
  /// Multiplies C for class 0 and class 1 respectively.
  std::optional<std::array<double, 2>> per_class_weight;
  /// Kept for reproducible configs. The working-set selection is deterministic.
  std::uint64_t seed = 0;

  void validate() const {
    if (!(c > 0.0) || !std::isfinite(c)) throw InvalidArgument("C must be > 0");
    if (!(tolerance > 0.0)) throw InvalidArgument("tolerance must be > 0");
    if (max_passes < 1) throw InvalidArgument("max_passes must be >= 1");
    if (per_class_weight)
      for (double w : *per_class_weight)
        if (!(w > 0.0) || !std::isfinite(w)) throw InvalidArgument("class weights must be > 0");
  }
};

struct TrainingDiagnostics {
  /// W(a) = sum(a) - 0.5 * a'Qa at the returned point.
  double dual_objective = 0.0;
  std::size_t iterations = 0;
  /// m(a) - M(a) at termination.
  double max_kkt_violation = 0.0;
  /// Full multiplier vector and per-sample upper bounds, in training order.
  std::vector<double> alpha;
  std::vector<double> upper_bound;
};

/// Dual solution f(x) = bias + sum_i dual_coef_i * K(sv_i, x), where
/// dual_coef_i = a_i * y_i with y in {-1, +1}.
struct TrainedSvm {
  Matrix support_vectors;
  Vector dual_coefs;
  double bias = 0.0;
  KernelSpec kernel;
  double c = 1.0;
  TrainingDiagnostics diagnostics;

  std::size_t dim() const noexcept { return static_cast<std::size_t>(support_vectors.cols()); }
  std::size_t n_support() const noexcept {
    return static_cast<std::size_t>(support_vectors.rows());
  }
};

class ConvergenceError : public Error {
 public:
  ConvergenceError(const std::string& what, TrainingDiagnostics diag)
      : Error(what), diagnostics_(std::move(diag)) {}
  const TrainingDiagnostics& diagnostics() const noexcept { return diagnostics_; }

 private:
  TrainingDiagnostics diagnostics_;
};

namespace detail {

/// Kernel rows of the training matrix: a full Gram matrix up to
/// `kFullGramLimit` samples, otherwise rows computed on demand and kept in a
/// small LRU cache.
class KernelRows {
 public:
  static constexpr std::size_t kFullGramLimit = 8192;

  KernelRows(const KernelSpec& spec, const Matrix& x, std::size_t cache_rows = 512,
             std::size_t full_gram_limit = kFullGramLimit)
      : spec_(spec), x_(x), cache_rows_(std::max<std::size_t>(cache_rows, 2)) {
    const auto n = x.rows();
    diag_.resize(n);
    if (static_cast<std::size_t>(n) <= full_gram_limit) {
      full_ = gram_matrix(spec, x);
      diag_ = full_.diagonal();
    } else {
      for (Eigen::Index i = 0; i < n; ++i) diag_[i] = spec.from_dot(x.row(i).squaredNorm());
    }
  }

  double diag(std::size_t i) const { return diag_[static_cast<Eigen::Index>(i)]; }

  std::span<const double> row(std::size_t i) {
    const auto n = static_cast<std::size_t>(x_.rows());
    if (full_.size() != 0) return {full_.row(static_cast<Eigen::Index>(i)).data(), n};
    if (auto it = index_.find(i); it != index_.end()) {
      lru_.splice(lru_.begin(), lru_, it->second);
      return it->second->second;
    }
    if (lru_.size() >= cache_rows_) {
      index_.erase(lru_.back().first);
      lru_.pop_back();
    }
    Vector dots = x_ * x_.row(static_cast<Eigen::Index>(i)).transpose();
    std::vector<double> values(n);
    for (std::size_t k = 0; k < n; ++k) values[k] = spec_.from_dot(dots[static_cast<Eigen::Index>(k)]);
    lru_.emplace_front(i, std::move(values));
    index_[i] = lru_.begin();
    return lru_.front().second;
  }

 private:
  KernelSpec spec_;
  const Matrix& x_;
  std::size_t cache_rows_;
  Matrix full_;
  Vector diag_;
  std::list<std::pair<std::size_t, std::vector<double>>> lru_;
  std::unordered_map<std::size_t, decltype(lru_)::iterator> index_;
};

inline constexpr double kTau = 1e-12;

}  // namespace detail

/// Soft-margin dual training by sequential minimal optimization with
/// second-order working-set selection. Each sample i gets its own box
/// 0 <= a_i <= C_i, C_i = c * per_class_weight[label_i].
inline TrainedSvm train_svm(const Matrix& x, std::span<const Label> labels,
                            const KernelSpec& spec, const TrainConfig& cfg) {
  spec.validate();
  cfg.validate();
  const auto n = static_cast<std::size_t>(x.rows());
  if (labels.size() != n) throw DimensionMismatch("train_svm labels", n, labels.size());
  (void)partition_indices(labels);  // both classes present
  if (!x.allFinite()) throw InvalidArgument("train_svm: non-finite features");

  std::vector<double> y(n), ub(n);
  for (std::size_t i = 0; i < n; ++i) {
    y[i] = labels[i] == kPositive ? 1.0 : -1.0;
    ub[i] = cfg.c * (cfg.per_class_weight ? (*cfg.per_class_weight)[labels[i]] : 1.0);
  }

  detail::KernelRows kernel(spec, x);
  std::vector<double> alpha(n, 0.0);
  std::vector<double> grad(n, -1.0);  // G = Qa - e

  auto in_up = [&](std::size_t t) {
    return y[t] > 0 ? alpha[t] < ub[t] : alpha[t] > 0.0;
  };
  auto in_low = [&](std::size_t t) {
    return y[t] > 0 ? alpha[t] > 0.0 : alpha[t] < ub[t];
  };

  const std::size_t per_pass = std::max<std::size_t>(10 * n, 1000000);
  const std::size_t max_iter = per_pass * static_cast<std::size_t>(cfg.max_passes);
  std::size_t iter = 0;
  double violation = 0.0;

  for (;;) {
    // i maximises -y_t G_t over I_up.
    double g_max = -std::numeric_limits<double>::infinity();
    std::size_t i = n;
    for (std::size_t t = 0; t < n; ++t)
      if (in_up(t) && -y[t] * grad[t] > g_max) {
        g_max = -y[t] * grad[t];
        i = t;
      }
    double g_min = std::numeric_limits<double>::infinity();
    std::size_t j = n;
    double best = std::numeric_limits<double>::infinity();
    std::span<const double> ki;
    if (i != n) ki = kernel.row(i);
    for (std::size_t t = 0; t < n; ++t) {
      if (!in_low(t)) continue;
      const double v = -y[t] * grad[t];
      g_min = std::min(g_min, v);
      if (i == n) continue;
      const double b = g_max - v;
      if (b <= 0.0) continue;
      double a = kernel.diag(i) + kernel.diag(t) - 2.0 * ki[t];
      if (a <= 0.0) a = detail::kTau;
      const double score = -(b * b) / a;
      if (score < best) {
        best = score;
        j = t;
      }
    }
    violation = (i == n || !std::isfinite(g_min)) ? 0.0 : std::max(0.0, g_max - g_min);
    if (violation < cfg.tolerance || j == n) break;
    if (iter >= max_iter) {
      TrainingDiagnostics d;
      d.iterations = iter;
      d.max_kkt_violation = violation;
      d.alpha = alpha;
      d.upper_bound = ub;
      throw ConvergenceError("train_svm did not converge within " + std::to_string(max_iter) +
                                 " iterations (KKT violation " + std::to_string(violation) + ")",
                             std::move(d));
    }
    ++iter;

    const auto kj = kernel.row(j);
    ki = kernel.row(i);  // may have been evicted by the row(j) lookup
    const double ci = ub[i], cj = ub[j];
    const double old_ai = alpha[i], old_aj = alpha[j];
    const double kij = ki[j];
    double& ai = alpha[i];
    double& aj = alpha[j];
    if (y[i] != y[j]) {
      double quad = kernel.diag(i) + kernel.diag(j) - 2.0 * kij;
      if (quad <= 0.0) quad = detail::kTau;
      const double delta = (-grad[i] - grad[j]) / quad;
      const double diff = ai - aj;
      ai += delta;
      aj += delta;
      if (diff > 0.0) {
        if (aj < 0.0) { aj = 0.0; ai = diff; }
      } else {
        if (ai < 0.0) { ai = 0.0; aj = -diff; }
      }
      if (diff > ci - cj) {
        if (ai > ci) { ai = ci; aj = ci - diff; }
      } else {
        if (aj > cj) { aj = cj; ai = cj + diff; }
      }
    } else {
      double quad = kernel.diag(i) + kernel.diag(j) - 2.0 * kij;
      if (quad <= 0.0) quad = detail::kTau;
      const double delta = (grad[i] - grad[j]) / quad;
      const double sum = ai + aj;
      ai -= delta;
      aj += delta;
      if (sum > ci) {
        if (ai > ci) { ai = ci; aj = sum - ci; }
      } else {
        if (aj < 0.0) { aj = 0.0; ai = sum; }
      }
      if (sum > cj) {
        if (aj > cj) { aj = cj; ai = sum - cj; }
      } else {
        if (ai < 0.0) { ai = 0.0; aj = sum; }
      }
    }
    const double dai = (ai - old_ai) * y[i];
    const double daj = (aj - old_aj) * y[j];
    for (std::size_t t = 0; t < n; ++t) grad[t] += y[t] * (ki[t] * dai + kj[t] * daj);
  }

  // Bias from free multipliers, or the midpoint of the feasible interval.
  double ub_rho = std::numeric_limits<double>::infinity();
  double lb_rho = -std::numeric_limits<double>::infinity();
  double sum_free = 0.0;
  std::size_t n_free = 0;
  for (std::size_t t = 0; t < n; ++t) {
    const double yg = y[t] * grad[t];
    if (alpha[t] >= ub[t]) {
      if (y[t] < 0) ub_rho = std::min(ub_rho, yg); else lb_rho = std::max(lb_rho, yg);
    } else if (alpha[t] <= 0.0) {
      if (y[t] > 0) ub_rho = std::min(ub_rho, yg); else lb_rho = std::max(lb_rho, yg);
    } else {
      ++n_free;
      sum_free += yg;
    }
  }
  const double rho = n_free > 0 ? sum_free / static_cast<double>(n_free) : 0.5 * (ub_rho + lb_rho);

  double objective = 0.0;
  for (std::size_t t = 0; t < n; ++t) objective += alpha[t] * (1.0 - grad[t]);

  TrainedSvm model;
  model.kernel = spec;
  model.c = cfg.c;
  model.bias = -rho;
  std::vector<Eigen::Index> sv;
  for (std::size_t t = 0; t < n; ++t)
    if (alpha[t] > 0.0) sv.push_back(static_cast<Eigen::Index>(t));
  model.support_vectors.resize(static_cast<Eigen::Index>(sv.size()), x.cols());
  model.dual_coefs.resize(static_cast<Eigen::Index>(sv.size()));
  for (std::size_t s = 0; s < sv.size(); ++s) {
    model.support_vectors.row(static_cast<Eigen::Index>(s)) = x.row(sv[s]);
    model.dual_coefs[static_cast<Eigen::Index>(s)] =
        alpha[static_cast<std::size_t>(sv[s])] * y[static_cast<std::size_t>(sv[s])];
  }
  model.diagnostics.dual_objective = 0.5 * objective;
  model.diagnostics.iterations = iter;
  model.diagnostics.max_kkt_violation = violation;
  model.diagnostics.alpha = std::move(alpha);
  model.diagnostics.upper_bound = std::move(ub);
  return model;
}

inline TrainedSvm train_svm(const FeatureSet& data, const KernelSpec& spec, const TrainConfig& cfg) {
  data.require_labels("train_svm");
  return train_svm(data.features_as_double(), data.labels(), spec, cfg);
}

inline TrainedSvm train_svm(const MiniTrainingSet& data, const KernelSpec& spec,
                            const TrainConfig& cfg) {
  return train_svm(data.data, spec, cfg);
}

template <typename Derived>
double decision_value(const TrainedSvm& model, const Eigen::MatrixBase<Derived>& x) {
  if (static_cast<std::size_t>(x.size()) != model.dim() && model.n_support() > 0)
    throw DimensionMismatch("decision_value", model.dim(), static_cast<std::size_t>(x.size()));
  double f = model.bias;
  const Eigen::VectorXd xd = x.template cast<double>().reshaped();
  for (Eigen::Index s = 0; s < model.support_vectors.rows(); ++s)
    f += model.dual_coefs[s] * model.kernel.from_dot(model.support_vectors.row(s).dot(xd));
  return f;
}

/// Decision values for every row of `x`.
inline Vector decision_values(const TrainedSvm& model, const Matrix& x) {
  if (model.n_support() == 0) return Vector::Constant(x.rows(), model.bias);
  if (static_cast<std::size_t>(x.cols()) != model.dim())
    throw DimensionMismatch("decision_values", model.dim(), static_cast<std::size_t>(x.cols()));
  const Matrix k = cross_kernel(model.kernel, x, model.support_vectors);
  return (k * model.dual_coefs).array() + model.bias;
}

/// A decision value of exactly zero predicts the positive class.
inline Label label_from_decision(double f) noexcept { return f >= 0.0 ? kPositive : kNegative; }

template <typename Derived>
Label predict(const TrainedSvm& model, const Eigen::MatrixBase<Derived>& x) {
  return label_from_decision(decision_value(model, x));
}

// SVM container: "SVM1", family u8, degree u32, gamma f64, coef0 f64, c f64,
// bias f64, n_sv u32, dim u32, support vectors f64 row-major, dual coefs f64.
inline constexpr std::array<std::uint8_t, 4> kSvmMagic{0x53, 0x56, 0x4D, 0x31};

inline std::vector<std::uint8_t> serialize_svm(const TrainedSvm& m) {
  io::ByteWriter w;
  w.put_bytes(kSvmMagic);
  w.put<std::uint8_t>(static_cast<std::uint8_t>(m.kernel.family));
  w.put<std::uint32_t>(static_cast<std::uint32_t>(m.kernel.degree));
  w.put<double>(m.kernel.gamma);
  w.put<double>(m.kernel.coef0);
  w.put<double>(m.c);
  w.put<double>(m.bias);
  w.put<std::uint32_t>(static_cast<std::uint32_t>(m.n_support()));
  w.put<std::uint32_t>(static_cast<std::uint32_t>(m.dim()));
  w.put_array(std::span<const double>(m.support_vectors.data(),
                                      static_cast<std::size_t>(m.support_vectors.size())));
  w.put_array(std::span<const double>(m.dual_coefs.data(),
                                      static_cast<std::size_t>(m.dual_coefs.size())));
  return w.take();
}

inline TrainedSvm deserialize_svm(std::span<const std::uint8_t> bytes) {
  io::ByteReader r(bytes);
  r.expect_magic(kSvmMagic, "svm_magic");
  TrainedSvm m;
  const auto family_at = r.offset();
  const auto family = r.get<std::uint8_t>("kernel_family");
  if (family > 1) throw HeaderError("kernel_family", family_at, "unknown kernel family");
  m.kernel.family = static_cast<KernelFamily>(family);
  m.kernel.degree = static_cast<int>(r.get<std::uint32_t>("degree"));
  m.kernel.gamma = r.get<double>("gamma");
  m.kernel.coef0 = r.get<double>("coef0");
  m.c = r.get<double>("c");
  m.bias = r.get<double>("bias");
  const auto n_sv = r.get<std::uint32_t>("n_sv");
  const auto dim = r.get<std::uint32_t>("dim");
  r.require((std::uint64_t{n_sv} * dim + n_sv) * sizeof(double), "support_vectors");
  m.support_vectors.resize(n_sv, dim);
  r.get_array(std::span<double>(m.support_vectors.data(), std::size_t{n_sv} * dim), "support_vectors");
  m.dual_coefs.resize(n_sv);
  r.get_array(std::span<double>(m.dual_coefs.data(), n_sv), "dual_coefs");
  if (!r.at_end()) throw LoadError("svm_trailer", r.offset(), "unexpected trailing bytes");
  try {
    m.kernel.validate();
  } catch (const InvalidArgument& e) {
    throw HeaderError("kernel", family_at, e.what());
  }
  return m;
}

}  // namespace vdv
