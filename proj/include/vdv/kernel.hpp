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

#include <cmath>
#include <cstdint>
#include <string>

#include <Eigen/Dense>

#include "vdv/dataset.hpp"
#include "vdv/error.hpp"

namespace vdv {

enum class KernelFamily : std::uint8_t { kLinear = 0, kPolynomial = 1 };

/// Linear: <x, y>. Polynomial: (gamma * <x, y> + coef0)^degree. The
/// polynomial parameters are ignored by the linear family.
struct KernelSpec {
  KernelFamily family = KernelFamily::kLinear;
  int degree = 3;
  double gamma = 0.002;
  double coef0 = 1.0;

  static KernelSpec linear() { return {KernelFamily::kLinear, 3, 0.002, 1.0}; }
  static KernelSpec polynomial(int degree = 3, double gamma = 0.002, double coef0 = 1.0) {
    return {KernelFamily::kPolynomial, degree, gamma, coef0};
  }

  void validate() const {
    if (family == KernelFamily::kLinear) return;
    if (family != KernelFamily::kPolynomial) throw InvalidArgument("unknown kernel family");
    if (degree < 1) throw InvalidArgument("polynomial degree must be >= 1");
    if (!(gamma > 0.0) || !std::isfinite(gamma)) throw InvalidArgument("gamma must be > 0");
    if (!std::isfinite(coef0)) throw InvalidArgument("coef0 must be finite");
  }

  /// Kernel value from a precomputed inner product.
  double from_dot(double dot) const {
    if (family == KernelFamily::kLinear) return dot;
    const double base = gamma * dot + coef0;
    double out = 1.0;
    for (int p = 0; p < degree; ++p) out *= base;
    return out;
  }

  friend bool operator==(const KernelSpec& a, const KernelSpec& b) {
    if (a.family != b.family) return false;
    if (a.family == KernelFamily::kLinear) return true;
    return a.degree == b.degree && a.gamma == b.gamma && a.coef0 == b.coef0;
  }
};

inline std::string to_string(KernelFamily f) {
  return f == KernelFamily::kLinear ? "linear" : "poly";
}

template <typename A, typename B>
double kernel_eval(const KernelSpec& spec, const Eigen::MatrixBase<A>& x,
                   const Eigen::MatrixBase<B>& y) {
  if (x.size() != y.size())
    throw DimensionMismatch("kernel_eval", static_cast<std::size_t>(x.size()),
                            static_cast<std::size_t>(y.size()));
  const double dot = x.template cast<double>().reshaped().dot(y.template cast<double>().reshaped());
  return spec.from_dot(dot);
}

/// Kernel matrix between the rows of `a` and the rows of `b`.
inline Matrix cross_kernel(const KernelSpec& spec, const Matrix& a, const Matrix& b) {
  if (a.cols() != b.cols())
    throw DimensionMismatch("cross_kernel", static_cast<std::size_t>(a.cols()),
                            static_cast<std::size_t>(b.cols()));
  Matrix k(a.rows(), b.rows());
  k.noalias() = a * b.transpose();
  if (spec.family != KernelFamily::kLinear) k = k.unaryExpr([&](double d) { return spec.from_dot(d); });
  return k;
}

/// Symmetric kernel matrix of the rows of `x`.
inline Matrix gram_matrix(const KernelSpec& spec, const Matrix& x) {
  Eigen::MatrixXd dots = Eigen::MatrixXd::Zero(x.rows(), x.rows());
  dots.selfadjointView<Eigen::Lower>().rankUpdate(x);
  Matrix k(x.rows(), x.rows());
  for (Eigen::Index i = 0; i < x.rows(); ++i)
    for (Eigen::Index j = 0; j <= i; ++j) k(i, j) = k(j, i) = spec.from_dot(dots(i, j));
  return k;
}

}  // namespace vdv
