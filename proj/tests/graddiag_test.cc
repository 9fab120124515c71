// Copyright 2026 The SelHN Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "selhn/graddiag.h"

#include <cmath>
#include <vector>

#include <gtest/gtest.h>

namespace selhn {
namespace {

std::vector<double> Unit(std::vector<double> x) {
  double n = 0.0;
  for (double v : x) n += v * v;
  n = std::sqrt(n);
  for (double& v : x) v /= n;
  return x;
}

std::vector<double> RandomUnit(std::size_t d, std::uint64_t seed) {
  const Matrix g = gaussian(1, d, seed);
  return Unit(std::vector<double>(g.values().begin(), g.values().end()));
}

TEST(DeltaSTest, EqualScoresGiveZero) {
  const SimMatrix s(Matrix::FromRows({{0.5, 0.5}, {0.5, 0.5}}));
  const DeltaSPerAnchor ds = delta_s_per_anchor(s);
  for (Direction dir : kBothDirections)
    for (double d : ds[dir]) EXPECT_EQ(d, 0.0);
}

TEST(DeltaSTest, HandExample) {
  const SimMatrix s(Matrix::FromRows({{0.6, 0.5}, {0.7, 0.4}}));
  EXPECT_NEAR(delta_s_per_anchor(s).image_to_text[0], 0.1, 1e-12);
}

TEST(DeltaSTest, BatchOfOneThrows) {
  EXPECT_THROW(delta_s_per_anchor(SimMatrix(Matrix(1, 1))), NoNegativesError);
}

TEST(TangentTest, StatedFormulaExample) {
  // v.t_hat = 0.7, v.t = 0.3, |t_hat - t| = 1.
  const double c = std::sqrt(1.0 - 0.49);
  const double e = std::sqrt(1.0 - 0.09);
  const std::vector<double> v = {1, 0, 0};
  const std::vector<double> t_hat = {0.7, c, 0};
  // t in the plane chosen so that |t_hat - t| = 1: solve for the angle.
  // |t_hat - t|^2 = 2 - 2 t_hat.t = 1  =>  t_hat.t = 0.5.
  // t = (0.3, a, b) with 0.7*0.3 + c*a = 0.5 and a^2 + b^2 = e^2.
  const double a = (0.5 - 0.21) / c;
  const std::vector<double> t = {0.3, a, std::sqrt(e * e - a * a)};
  const TangentReport r = tangent_report(v, t, t_hat);
  EXPECT_NEAR(r.g_norm, 1.0, 1e-12);
  EXPECT_NEAR(r.g_v_stated, 0.4, 1e-12);
  EXPECT_NEAR(r.delta_s, 0.4, 1e-12);
  EXPECT_NEAR(r.g_that_stated, 0.7, 1e-12);
}

TEST(TangentTest, CoincidentVectorsGiveZero) {
  const std::vector<double> v = Unit({1, 2, 3});
  const std::vector<double> t = Unit({3, -1, 0.5});
  const TangentReport r = tangent_report(v, t, t);
  EXPECT_EQ(r.g_v_stated, 0.0);
  EXPECT_EQ(r.g_v_exact, 0.0);
  EXPECT_EQ(r.delta_s, 0.0);
}

TEST(TangentTest, StatedNegativeModulusIsTheScore) {
  const std::vector<double> v = {1, 0};
  const std::vector<double> t_hat = {0.3, std::sqrt(0.91)};
  const std::vector<double> t = {0, 1};
  EXPECT_NEAR(tangent_report(v, t, t_hat).g_that_stated, 0.3, 1e-15);
}

TEST(TangentTest, SignedStatedModulusGoesNegative) {
  const std::vector<double> v = {1, 0};
  const std::vector<double> t_hat = {0.1, std::sqrt(0.99)};
  const std::vector<double> t = {0.9, std::sqrt(0.19)};
  const TangentReport r = tangent_report(v, t, t_hat);
  EXPECT_LT(r.g_v_stated, 0.0);
  EXPECT_EQ(r.g_v_stated_abs, -r.g_v_stated);
}

TEST(TangentTest, PythagorasOnRandomTriples) {
  for (std::uint64_t seed = 0; seed < 200; ++seed) {
    const auto v = RandomUnit(5, mix_seed(seed, 1));
    const auto t = RandomUnit(5, mix_seed(seed, 2));
    const auto th = RandomUnit(5, mix_seed(seed, 3));
    const TangentReport r = tangent_report(v, t, th);
    EXPECT_NEAR(r.g_v_exact * r.g_v_exact + r.g_radial * r.g_radial, r.g_norm * r.g_norm,
                1e-12);
  }
}

TEST(TangentTest, StatedModulusVanishesWithTheGap) {
  // t_hat approaches t along a fixed great circle: the stated modulus goes
  // to zero with delta_s.
  const std::vector<double> v = Unit({1, 1, 0});
  const std::vector<double> t = {1, 0, 0};
  double previous = std::numeric_limits<double>::infinity();
  for (double angle : {0.5, 0.1, 0.01, 0.001}) {
    const std::vector<double> th = {std::cos(angle), 0, std::sin(angle)};
    const TangentReport r = tangent_report(v, t, th);
    EXPECT_LT(r.g_v_stated_abs, previous);
    previous = r.g_v_stated_abs;
  }
  EXPECT_LT(previous, 1e-6);
}

TEST(TangentTest, RejectsNonUnitAndMismatchedInput) {
  const std::vector<double> u = {1, 0};
  EXPECT_THROW(tangent_report(std::vector<double>{2, 0}, u, u), InputError);
  EXPECT_THROW(tangent_report(u, std::vector<double>{1, 0, 0}, u), InputError);
}

TEST(VanishingTest, Predicate) {
  EXPECT_TRUE(vanishing_predicate(0.005, 0.01));
  EXPECT_FALSE(vanishing_predicate(0.3, 0.01));
  EXPECT_TRUE(vanishing_predicate(0.01, 0.01));
  EXPECT_THROW(vanishing_predicate(0.1, -1.0), InputError);
}

TEST(VanishingTest, FractionBelowIsMonotoneAndReachesOne) {
  const Matrix v = l2_normalize_rows(gaussian(8, 4, 1)).first;
  const Matrix t = l2_normalize_rows(gaussian(8, 4, 2)).first;
  EncoderGrads g;
  g.tensors.push_back(Matrix::FromRows({{3, 4}}));
  const VanishingReport rep = vanishing_report(cosine_sim_matrix(v, t), g, g);
  EXPECT_DOUBLE_EQ(rep.first_layer_grad_norm_image, 5.0);
  double previous = 0.0;
  for (double e : {0.0, 0.01, 0.1, 0.3, 0.7, 1.0, 1.5}) {
    const double f = rep.fraction_below(e);
    EXPECT_GE(f, previous);
    previous = f;
  }
  EXPECT_EQ(rep.fraction_below(2.0), 1.0);
}

TEST(GradNormTest, Examples) {
  EncoderGrads g;
  g.tensors.push_back(Matrix(3, 2));
  EXPECT_EQ(first_layer_grad_norm(g), 0.0);
  g.tensors[0](0, 0) = 3;
  g.tensors[0](2, 1) = 4;
  EXPECT_DOUBLE_EQ(first_layer_grad_norm(g), 5.0);
  const Matrix r = gaussian(4, 5, 9);
  double sq = 0.0;
  for (double x : r.values()) sq += x * x;
  g.tensors[0] = r;
  EXPECT_NEAR(first_layer_grad_norm(g), std::sqrt(sq), 1e-12);
  EXPECT_THROW(first_layer_grad_norm(EncoderGrads{}), InputError);
}

TEST(RelativeErrorTest, UsesTheFloor) {
  EXPECT_EQ(relative_error(0.0, 0.0), 0.0);
  EXPECT_DOUBLE_EQ(relative_error(1e-6, 0.0), 1e-3);
  EXPECT_DOUBLE_EQ(relative_error(2.0, 1.0), 0.5);
}

TEST(FiniteDiffTest, TripletMatches) {
  std::size_t checked = 0;
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const FdReport r = finite_diff_check(LossKind::kTriplet, gaussian(4, 8, mix_seed(seed, 1)),
                                         gaussian(4, 8, mix_seed(seed, 2)), LossHyper{}, 1e-6);
    if (r.skipped) continue;
    EXPECT_LT(r.max_rel_error, 1e-4);
    ++checked;
  }
  EXPECT_GE(checked, 5u);
}

TEST(FiniteDiffTest, InactiveHingesGiveExactZero) {
  // Orthogonal pairs, margin small: every hinge is far from active.
  const Matrix v = Matrix::Identity(4);
  const FdReport r = finite_diff_check(LossKind::kTriplet, v, v, LossHyper{0.2, 0.01}, 1e-6);
  ASSERT_FALSE(r.skipped);
  EXPECT_EQ(r.max_rel_error, 0.0);
}

TEST(FiniteDiffTest, SelHnMixedBranches) {
  std::size_t checked = 0;
  for (std::uint64_t seed = 0; seed < 40 && checked < 5; ++seed) {
    const Matrix v = gaussian(6, 5, mix_seed(seed, 11));
    const Matrix t = gaussian(6, 5, mix_seed(seed, 12));
    const LossHyper h{0.2, 0.1};
    const SimMatrix s =
        cosine_sim_matrix(l2_normalize_rows(v).first, l2_normalize_rows(t).first);
    const LossResult res = selhn_loss(s, h);
    bool hn = false, tri = false;
    for (Direction dir : kBothDirections)
      for (const AnchorRecord& rec : res.mining[dir]) {
        hn |= rec.branch == Branch::kHn;
        tri |= rec.branch == Branch::kTriplet;
      }
    if (!hn || !tri) continue;
    const FdReport r = finite_diff_check(LossKind::kSelHn, v, t, h, 1e-6);
    if (r.skipped) continue;
    EXPECT_LT(r.max_rel_error, 1e-4);
    ++checked;
  }
  EXPECT_GE(checked, 1u);
}

TEST(FiniteDiffTest, KinkProximitySkips) {
  // s_hn - s_p + margin == 0 exactly on the first anchor.
  const Matrix v = Matrix::FromRows({{1, 0}, {0, 1}});
  const Matrix t = Matrix::FromRows({{1, 0}, {0.8, 0.6}});
  const FdReport r = finite_diff_check(LossKind::kHn, v, t, LossHyper{0.2, 0.01}, 1e-6);
  EXPECT_TRUE(r.skipped);
}

TEST(FiniteDiffTest, RejectsBadStep) {
  EXPECT_THROW(finite_diff_check(LossKind::kHn, gaussian(2, 2, 1), gaussian(2, 2, 2),
                                 LossHyper{}, 0.1),
               InputError);
}

TEST(CheckGradientTest, CatchesAWrongGradient) {
  double x = 0.7;
  std::vector<double*> params = {&x};
  auto objective = [&x](std::vector<int>& sig) {
    sig.clear();
    return x * x;
  };
  const std::vector<double> right = {1.4};
  const std::vector<double> wrong = {1.5};
  EXPECT_LT(check_gradient(objective, params, right, 1e-6).max_rel_error, 1e-8);
  EXPECT_GT(check_gradient(objective, params, wrong, 1e-6).max_rel_error, 0.05);
}

}  // namespace
}  // namespace selhn
