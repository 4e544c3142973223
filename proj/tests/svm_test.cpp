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

#include "vdv/svm.hpp"

#include <random>

#include <gtest/gtest.h>

#include "support/small_problems.hpp"
#include "vdv/dataset.hpp"
#include "vdv/kernel.hpp"

namespace vdv {
namespace {

Eigen::VectorXd vec(std::initializer_list<double> v) {
  Eigen::VectorXd out(static_cast<Eigen::Index>(v.size()));
  Eigen::Index i = 0;
  for (double x : v) out[i++] = x;
  return out;
}

TEST(Kernel, LinearIsDotProduct) {
  EXPECT_DOUBLE_EQ(kernel_eval(KernelSpec::linear(), vec({1, 2}), vec({3, 4})), 11.0);
}

TEST(Kernel, PolynomialForm) {
  EXPECT_DOUBLE_EQ(kernel_eval(KernelSpec::polynomial(2, 1.0, 1.0), vec({1, 0}), vec({1, 0})), 4.0);
  EXPECT_DOUBLE_EQ(kernel_eval(KernelSpec::polynomial(3, 0.002, 1.0), vec({0, 0, 0}), vec({0, 0, 0})),
                   1.0);
}

TEST(Kernel, DimensionMismatchThrows) {
  EXPECT_THROW(kernel_eval(KernelSpec::linear(), vec({1, 2}), vec({1})), DimensionMismatch);
}

TEST(Kernel, InvalidSpecRejected) {
  EXPECT_THROW(KernelSpec::polynomial(0).validate(), InvalidArgument);
  EXPECT_THROW(KernelSpec::polynomial(3, 0.0).validate(), InvalidArgument);
  EXPECT_NO_THROW((KernelSpec{KernelFamily::kLinear, 0, -1.0, 0.0}.validate()));
}

TEST(Kernel, SymmetricAndPsdOnRandomSets) {
  std::mt19937_64 rng(7);
  std::normal_distribution<double> g;
  for (int trial = 0; trial < 40; ++trial) {
    Matrix x(12, 4);
    for (Eigen::Index i = 0; i < x.size(); ++i) x.data()[i] = g(rng);
    for (const auto& spec : {KernelSpec::linear(), KernelSpec::polynomial(2, 0.3, 1.0),
                             KernelSpec::polynomial(3, 0.002, 0.0)}) {
      for (int a = 0; a < 3; ++a) {
        EXPECT_DOUBLE_EQ(kernel_eval(spec, x.row(a), x.row(a + 1)),
                         kernel_eval(spec, x.row(a + 1), x.row(a)));
      }
      const Eigen::MatrixXd k = gram_matrix(spec, x);
      Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(k);
      EXPECT_GE(eig.eigenvalues().minCoeff(), -1e-8);
    }
  }
}

struct OneDim {
  Matrix x;
  std::vector<Label> labels;
  OneDim() : x(2, 1), labels{0, 1} {
    x(0, 0) = -1.0;
    x(1, 0) = 1.0;
  }
};

TEST(TrainSvm, OneDimensionalAnalyticSolution) {
  OneDim d;
  TrainConfig cfg;
  cfg.c = 100.0;
  const auto m = train_svm(d.x, d.labels, KernelSpec::linear(), cfg);
  ASSERT_EQ(m.n_support(), 2u);
  EXPECT_NEAR(m.diagnostics.alpha[0], 0.5, 1e-6);
  EXPECT_NEAR(m.diagnostics.alpha[1], 0.5, 1e-6);
  EXPECT_NEAR(m.bias, 0.0, 1e-6);
  EXPECT_NEAR(decision_value(m, vec({2.0})), 2.0, 1e-6);
  EXPECT_EQ(predict(m, vec({3.0})), kPositive);
  EXPECT_EQ(predict(m, vec({-3.0})), kNegative);
  // Both multipliers equal 0.5: W = 1 - 0.5 * 1 = 0.5.
  EXPECT_NEAR(m.diagnostics.dual_objective, 0.5, 1e-9);
}

TEST(Predict, ZeroDecisionIsPositive) {
  TrainedSvm m;
  m.bias = 0.0;
  m.support_vectors.resize(0, 2);
  EXPECT_EQ(predict(m, vec({5, 5})), kPositive);
  m.bias = -0.25;
  EXPECT_DOUBLE_EQ(decision_value(m, vec({1, 2})), -0.25);
  EXPECT_EQ(predict(m, vec({1, 2})), kNegative);
}

TEST(Predict, DimensionMismatch) {
  OneDim d;
  const auto m = train_svm(d.x, d.labels, KernelSpec::linear(), TrainConfig{});
  EXPECT_THROW(decision_value(m, vec({1, 2})), DimensionMismatch);
}

TEST(TrainSvm, RejectsSingleClass) {
  Matrix x = Matrix::Random(4, 2);
  std::vector<Label> labels{1, 1, 1, 1};
  EXPECT_THROW(train_svm(x, labels, KernelSpec::linear(), TrainConfig{}), InvalidArgument);
}

TEST(TrainSvm, NonConvergenceCarriesDiagnostics) {
  const auto set = synth_imbalanced(60, 40, 3, 0.5, 3);
  TrainConfig cfg;
  cfg.tolerance = 1e-300;
  cfg.max_passes = 1;
  try {
    train_svm(set, KernelSpec::linear(), cfg);
    FAIL() << "expected ConvergenceError";
  } catch (const ConvergenceError& e) {
    EXPECT_EQ(e.diagnostics().iterations, 1000000u);
    EXPECT_EQ(e.diagnostics().alpha.size(), 100u);
  }
}

TEST(TrainSvm, SeparableSetHasPerfectTrainingRecall) {
  const auto set = synth_imbalanced(300, 40, 6, 6.0, 11);
  const auto m = train_svm(set, KernelSpec::linear(), TrainConfig{});
  const Vector f = decision_values(m, set.features_as_double());
  std::size_t tp = 0;
  for (std::size_t i = 0; i < set.size(); ++i)
    if (set.label(i) == kPositive && f[static_cast<Eigen::Index>(i)] >= 0.0) ++tp;
  EXPECT_EQ(tp, set.count(kPositive));
}

TEST(TrainSvm, IdentityWeightsMatchUnweighted) {
  const auto set = synth_imbalanced(50, 20, 4, 1.5, 5);
  TrainConfig plain;
  TrainConfig weighted;
  weighted.per_class_weight = std::array<double, 2>{1.0, 1.0};
  const auto a = train_svm(set, KernelSpec::polynomial(), plain);
  const auto b = train_svm(set, KernelSpec::polynomial(), weighted);
  EXPECT_EQ(serialize_svm(a), serialize_svm(b));
  EXPECT_EQ(a.diagnostics.dual_objective, b.diagnostics.dual_objective);
}

TEST(TrainSvm, FeasibilityAndKktOnRandomProblems) {
  for (int i = 0; i < 48; ++i) {
    const auto p = testing::make_small_problem(1000 + static_cast<std::uint64_t>(i), i);
    const auto m = train_svm(p.x, p.labels, p.spec, p.cfg);
    const auto& a = m.diagnostics.alpha;
    const auto& ub = m.diagnostics.upper_bound;
    double eq = 0.0;
    for (std::size_t t = 0; t < a.size(); ++t) {
      EXPECT_GE(a[t], 0.0);
      EXPECT_LE(a[t], ub[t]);
      eq += a[t] * (p.labels[t] ? 1.0 : -1.0);
    }
    EXPECT_NEAR(eq, 0.0, 1e-9);
    EXPECT_NEAR(m.dual_coefs.sum(), 0.0, 1e-9);
    EXPECT_LE(m.diagnostics.max_kkt_violation, p.cfg.tolerance);
    // Unbounded support vectors sit on the margin.
    for (std::size_t t = 0; t < a.size(); ++t) {
      if (a[t] > 1e-8 && a[t] < ub[t] - 1e-8) {
        const double yf = (p.labels[t] ? 1.0 : -1.0) * decision_value(m, p.x.row(static_cast<Eigen::Index>(t)));
        EXPECT_NEAR(yf, 1.0, p.cfg.tolerance);
      }
    }
  }
}

TEST(TrainSvm, MatchesDenseQpOracle) {
  for (int i = 0; i < 32; ++i) {
    const auto p = testing::make_small_problem(77 + static_cast<std::uint64_t>(i), i);
    const auto m = train_svm(p.x, p.labels, p.spec, p.cfg);
    const auto ref = testing::oracle_for(p);
    EXPECT_LE(std::abs(m.diagnostics.dual_objective - ref.dual_objective) / std::abs(ref.dual_objective),
              1e-6)
        << "instance " << i;
  }
}

TEST(TrainSvm, FlippingLabelsNegatesDecisions) {
  const auto set = synth_imbalanced(40, 25, 3, 1.0, 9);
  std::vector<Label> flipped(set.labels().begin(), set.labels().end());
  for (auto& l : flipped) l = 1 - l;
  const Matrix x = set.features_as_double();
  TrainConfig cfg;
  cfg.c = 1.0;
  cfg.tolerance = 1e-8;
  const auto a = train_svm(x, set.labels(), KernelSpec::polynomial(2, 0.5, 1.0), cfg);
  const auto b = train_svm(x, flipped, KernelSpec::polynomial(2, 0.5, 1.0), cfg);
  const Vector fa = decision_values(a, x), fb = decision_values(b, x);
  for (Eigen::Index i = 0; i < fa.size(); ++i) EXPECT_NEAR(fa[i], -fb[i], 1e-5);
}

TEST(SvmSerialization, RoundTripAndLayout) {
  const auto set = synth_imbalanced(20, 10, 3, 2.0, 1);
  const auto m = train_svm(set, KernelSpec::polynomial(3, 0.002, 1.0), TrainConfig{});
  const auto bytes = serialize_svm(m);
  EXPECT_EQ(bytes.size(), 4 + 1 + 4 + 4 * 8 + 4 + 4 + m.n_support() * (m.dim() + 1) * 8);
  EXPECT_EQ(bytes[0], 'S');
  EXPECT_EQ(bytes[3], '1');
  const auto back = deserialize_svm(bytes);
  EXPECT_EQ(serialize_svm(back), bytes);
  EXPECT_EQ(back.kernel, m.kernel);
  auto corrupt = bytes;
  corrupt[4] = 7;
  EXPECT_THROW(deserialize_svm(corrupt), HeaderError);
  corrupt = bytes;
  corrupt.pop_back();
  EXPECT_THROW(deserialize_svm(corrupt), TruncatedError);
}

TEST(KernelRows, LazyMatchesFullGram) {
  Matrix x = Matrix::Random(40, 3);
  const auto spec = KernelSpec::polynomial(2, 0.5, 1.0);
  const Matrix full = gram_matrix(spec, x);
  detail::KernelRows rows(spec, x, 2, 0);
  for (std::size_t i : {0u, 5u, 0u, 39u, 12u, 5u}) {
    const auto r = rows.row(i);
    for (std::size_t j = 0; j < 40; ++j)
      EXPECT_NEAR(r[j], full(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)), 1e-12);
  }
}

}  // namespace
}  // namespace vdv
