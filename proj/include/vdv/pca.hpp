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
#include <optional>
#include <span>
#include <vector>

#include <Eigen/Dense>
#include <lapacke.h>

#include "vdv/binary_io.hpp"
#include "vdv/dataset.hpp"
#include "vdv/error.hpp"

namespace vdv {

/// Principal axes of a data matrix. `components` rows are orthonormal and
/// ordered by non-increasing singular value.
struct PcaModel {
  Vector mean;
  Matrix components;  // n_components x dim
  Vector singular_values;

  std::size_t dim() const noexcept { return static_cast<std::size_t>(mean.size()); }
  std::size_t n_components() const noexcept {
    return static_cast<std::size_t>(components.rows());
  }
};

/// Pass as `n_components` to keep min(n_samples, dim) components.
inline constexpr std::optional<std::size_t> kFullRank = std::nullopt;

namespace detail {

/// Eigenpairs of a symmetric matrix in descending eigenvalue order
/// (LAPACK divide and conquer). Columns of `vectors` are the eigenvectors.
inline void symmetric_eigen(Eigen::MatrixXd a, Eigen::VectorXd& values, Eigen::MatrixXd& vectors) {
  const auto n = static_cast<lapack_int>(a.rows());
  Eigen::VectorXd w(n);
  if (n > 0) {
    const lapack_int info = LAPACKE_dsyevd(LAPACK_COL_MAJOR, 'V', 'L', n, a.data(), n, w.data());
    if (info != 0) throw Error("symmetric eigensolver failed (info " + std::to_string(info) + ")");
  }
  values = w.reverse();
  vectors = a.rowwise().reverse();
}

/// Appends orthonormal rows to `basis` (k x d, orthonormal rows) until it has
/// `target` rows. Candidates are the standard basis vectors with the largest
/// residual after projection.
inline void complete_basis(Matrix& basis, std::size_t k, std::size_t target) {
  const auto d = basis.cols();
  Eigen::VectorXd residual(d);
  for (Eigen::Index j = 0; j < d; ++j)
    residual[j] = 1.0 - (k > 0 ? basis.topRows(static_cast<Eigen::Index>(k)).col(j).squaredNorm() : 0.0);
  for (; k < target; ++k) {
    Eigen::Index best;
    residual.maxCoeff(&best);
    Eigen::VectorXd v = Eigen::VectorXd::Unit(d, best);
    for (int pass = 0; pass < 2; ++pass)
      for (std::size_t r = 0; r < k; ++r) {
        const auto row = basis.row(static_cast<Eigen::Index>(r));
        v -= row.dot(v) * row.transpose();
      }
    v.normalize();
    basis.row(static_cast<Eigen::Index>(k)) = v.transpose();
    residual -= v.cwiseAbs2();
  }
}

/// Re-orthonormalises the first `k` rows of `basis` (nearly orthonormal on
/// entry) by two rounds of Cholesky QR, preserving row order like
/// Gram-Schmidt.
inline void orthonormalize_rows(Matrix& basis, std::size_t k) {
  if (k == 0) return;
  auto rows = basis.topRows(static_cast<Eigen::Index>(k));
  for (int pass = 0; pass < 2; ++pass) {
    Eigen::MatrixXd gram = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(k));
    gram.selfadjointView<Eigen::Lower>().rankUpdate(rows);
    Eigen::LLT<Eigen::MatrixXd> llt(gram);
    if (llt.info() != Eigen::Success) throw Error("fit_pca: component basis lost rank");
    Matrix solved = llt.matrixL().solve(Matrix(rows));
    rows = solved;
  }
}

}  // namespace detail

/// Thin PCA of `data` (n_samples x dim) without forming the dim x dim
/// covariance when n_samples <= dim: eigenvectors of the n x n Gram matrix
/// of the centred data are mapped to right singular vectors. Directions in
/// the null space of the centred data complete the basis when more
/// components are requested than its rank.
inline PcaModel fit_pca(const Matrix& data, std::optional<std::size_t> n_components = kFullRank) {
  const auto n = static_cast<std::size_t>(data.rows());
  const auto d = static_cast<std::size_t>(data.cols());
  if (n == 0 || d == 0) throw InvalidArgument("fit_pca: empty data");
  if (!data.allFinite()) throw InvalidArgument("fit_pca: non-finite data");
  const auto max_k = std::min(n, d);
  const auto k = n_components.value_or(max_k);
  if (k == 0 || k > max_k)
    throw InvalidArgument("fit_pca: n_components must lie in [1, " + std::to_string(max_k) + "]");

  PcaModel model;
  model.mean = data.colwise().mean().transpose();
  const Matrix centred = data.rowwise() - model.mean.transpose();

  Eigen::VectorXd values;
  Eigen::MatrixXd vectors;
  Matrix comps(static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(d));
  std::size_t filled = 0;
  if (n <= d) {
    Eigen::MatrixXd gram = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n));
    gram.selfadjointView<Eigen::Lower>().rankUpdate(centred);
    detail::symmetric_eigen(std::move(gram), values, vectors);
    const double top = std::sqrt(std::max(values[0], 0.0));
    while (filled < k && std::sqrt(std::max(values[static_cast<Eigen::Index>(filled)], 0.0)) > 1e-6 * top)
      ++filled;
    const auto f = static_cast<Eigen::Index>(filled);
    comps.topRows(f).noalias() = vectors.leftCols(f).transpose() * centred;
    for (Eigen::Index r = 0; r < f; ++r) comps.row(r) /= std::sqrt(values[r]);
  } else {
    Eigen::MatrixXd cov = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(d), static_cast<Eigen::Index>(d));
    cov.selfadjointView<Eigen::Lower>().rankUpdate(centred.transpose());
    detail::symmetric_eigen(std::move(cov), values, vectors);
    comps = vectors.leftCols(static_cast<Eigen::Index>(k)).transpose();
    filled = k;
  }
  detail::orthonormalize_rows(comps, filled);
  detail::complete_basis(comps, filled, k);

  // Singular values as ||X_c v||, then reorder; largest-magnitude entry of
  // each component is made positive.
  const Matrix projected = centred * comps.transpose();
  Eigen::VectorXd sv = projected.colwise().norm().transpose();
  std::vector<Eigen::Index> order(k);
  std::iota(order.begin(), order.end(), Eigen::Index{0});
  std::ranges::stable_sort(order, [&](auto a, auto b) { return sv[a] > sv[b]; });
  model.components.resize(static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(d));
  model.singular_values.resize(static_cast<Eigen::Index>(k));
  for (std::size_t r = 0; r < k; ++r) {
    auto row = comps.row(order[r]);
    Eigen::Index arg;
    row.cwiseAbs().maxCoeff(&arg);
    const double sign = row[arg] < 0.0 ? -1.0 : 1.0;
    model.components.row(static_cast<Eigen::Index>(r)) = sign * row;
    model.singular_values[static_cast<Eigen::Index>(r)] = sv[order[r]];
  }
  return model;
}

inline Matrix pca_transform(const PcaModel& model, const Matrix& data) {
  if (static_cast<std::size_t>(data.cols()) != model.dim())
    throw DimensionMismatch("pca_transform", model.dim(), static_cast<std::size_t>(data.cols()));
  Matrix out(data.rows(), model.components.rows());
  out.noalias() = (data.rowwise() - model.mean.transpose()) * model.components.transpose();
  return out;
}

template <typename Derived>
Vector pca_transform_row(const PcaModel& model, const Eigen::MatrixBase<Derived>& x) {
  if (static_cast<std::size_t>(x.size()) != model.dim())
    throw DimensionMismatch("pca_transform", model.dim(), static_cast<std::size_t>(x.size()));
  return model.components * (x.template cast<double>().reshaped() - model.mean);
}

inline Matrix pca_reconstruct(const PcaModel& model, const Matrix& coords) {
  Matrix out = coords * model.components;
  out.rowwise() += model.mean.transpose();
  return out;
}

// PCA blob: "PCA1", n_components u32, dim u32, mean f64[dim],
// singular values f64[k], components f64[k*dim] row-major.
inline constexpr std::array<std::uint8_t, 4> kPcaMagic{0x50, 0x43, 0x41, 0x31};

inline std::vector<std::uint8_t> serialize_pca(const PcaModel& m) {
  io::ByteWriter w;
  w.put_bytes(kPcaMagic);
  w.put<std::uint32_t>(static_cast<std::uint32_t>(m.n_components()));
  w.put<std::uint32_t>(static_cast<std::uint32_t>(m.dim()));
  w.put_array(std::span<const double>(m.mean.data(), m.dim()));
  w.put_array(std::span<const double>(m.singular_values.data(), m.n_components()));
  w.put_array(std::span<const double>(m.components.data(),
                                      static_cast<std::size_t>(m.components.size())));
  return w.take();
}

inline PcaModel deserialize_pca(std::span<const std::uint8_t> bytes) {
  io::ByteReader r(bytes);
  r.expect_magic(kPcaMagic, "pca_magic");
  const auto k = r.get<std::uint32_t>("pca_n_components");
  const auto d = r.get<std::uint32_t>("pca_dim");
  PcaModel m;
  m.mean.resize(d);
  m.singular_values.resize(k);
  m.components.resize(k, d);
  r.get_array(std::span<double>(m.mean.data(), d), "pca_mean");
  r.get_array(std::span<double>(m.singular_values.data(), k), "pca_singular_values");
  r.get_array(std::span<double>(m.components.data(), std::size_t{k} * d), "pca_components");
  if (!r.at_end()) throw LoadError("pca_trailer", r.offset(), "unexpected trailing bytes");
  return m;
}

}  // namespace vdv
