// Copyright 2026 The reltrack Authors
// SPDX-License-Identifier: Apache-2.0

#include <algorithm>
#include <cmath>

#include <gtest/gtest.h>

#include "reltrack/gcd/gcd.hpp"
#include "reltrack/tensor/grad_check.hpp"

namespace reltrack::gcd {
namespace {

Tensor<double> map_of(std::size_t h, std::size_t w, std::size_t c, std::vector<double> v) {
  return Tensor<double>(Shape{1, h, w, c}, std::move(v));
}

TEST(ContextVector, SinglePositionIsInput) {
  Graph<double> g;
  Var z = context_vector(g, g.input(map_of(1, 1, 3, {0.3, -2.0, 5.0})),
                         g.input(Tensor<double>(Shape{3, 1}, std::vector<double>{4, -1, 9})));
  EXPECT_EQ(g.value(z).values(), (std::vector<double>{0.3, -2.0, 5.0}));
}

TEST(ContextVector, ZeroLogitsAverage) {
  Graph<double> g;
  Var z = context_vector(g, g.input(map_of(1, 2, 2, {1, 0, 0, 1})), g.input(Tensor<double>(Shape{2, 1})));
  EXPECT_DOUBLE_EQ(g.value(z)[0], 0.5);
  EXPECT_DOUBLE_EQ(g.value(z)[1], 0.5);
}

TEST(ContextVector, SharpLogits) {
  Graph<double> g;
  Var z = context_vector(g, g.input(map_of(1, 2, 2, {1, 0, 0, 1})),
                         g.input(Tensor<double>(Shape{2, 1}, std::vector<double>{10, 0})));
  const double p = 1.0 / (1.0 + std::exp(-10.0));
  EXPECT_NEAR(g.value(z)[0], p, 1e-15);
  EXPECT_NEAR(g.value(z)[1], 1.0 - p, 1e-15);
  EXPECT_NEAR(g.value(z)[0], 0.99995, 5e-6);
  EXPECT_NEAR(g.value(z)[1], 0.00005, 5e-6);
}

TEST(ContextVector, WeightsSumToOnePerImage) {
  Rng rng(1);
  Graph<double> g;
  Var x = g.input(normal_tensor<double>(Shape{3, 4, 5, 6}, 2.0, rng));
  const auto& w = g.value(context_weights(g, x, g.input(normal_tensor<double>(Shape{6, 1}, 1.0, rng))));
  ASSERT_EQ(w.shape(), (Shape{3, 20}));
  for (std::size_t b = 0; b < 3; ++b) {
    double s = 0.0;
    for (std::size_t j = 0; j < 20; ++j) s += w[b * 20 + j];
    EXPECT_NEAR(s, 1.0, 1e-12);
  }
}

TEST(ContextVector, PermutationInvariant) {
  Rng rng(2);
  const std::size_t n = 12, c = 5;
  const auto x = normal_tensor<double>(Shape{1, 3, 4, c}, 1.0, rng);
  const auto wk = normal_tensor<double>(Shape{c, 1}, 1.0, rng);
  std::vector<std::size_t> perm(n);
  for (std::size_t i = 0; i < n; ++i) perm[i] = i;
  std::shuffle(perm.begin(), perm.end(), rng);
  Tensor<double> xp(Shape{1, 4, 3, c});  // different spatial layout too
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t k = 0; k < c; ++k) xp[i * c + k] = x[perm[i] * c + k];
  Graph<double> g;
  const auto& a = g.value(context_vector(g, g.input(x), g.input(wk)));
  const auto& b = g.value(context_vector(g, g.input(xp), g.input(wk)));
  for (std::size_t k = 0; k < c; ++k) EXPECT_NEAR(a[k], b[k], 1e-10);
}

TEST(Disentangle, FreshBlockIsIdentity) {
  Rng rng(3);
  auto params = GcdParams<double>::init(8, rng);
  EXPECT_EQ(params.mid_channels(), 2u);
  Graph<double> g;
  const auto x = normal_tensor<double>(Shape{2, 3, 3, 8}, 1.0, rng);
  const auto out = disentangle(g, g.input(x), params);
  EXPECT_EQ(g.value(out.det), x);
  EXPECT_EQ(g.value(out.reid), x);
}

TEST(Disentangle, ShiftIsSpatiallyConstant) {
  Rng rng(4);
  auto params = GcdParams<double>::init(8, rng);
  params.w_d2.value = normal_tensor<double>(Shape{2, 8}, 1.0, rng);
  params.w_r2.value = normal_tensor<double>(Shape{2, 8}, 1.0, rng);
  Graph<double> g;
  const auto x = normal_tensor<double>(Shape{2, 3, 4, 8}, 1.0, rng);
  const auto out = disentangle(g, g.input(x), params);
  for (Var v : {out.det, out.reid}) {
    const auto& y = g.value(v);
    ASSERT_EQ(y.shape(), x.shape());
    for (std::size_t b = 0; b < 2; ++b) {
      for (std::size_t k = 0; k < 8; ++k) {
        const double d0 = y[b * 96 + k] - x[b * 96 + k];
        for (std::size_t i = 1; i < 12; ++i) {
          const std::size_t at = b * 96 + i * 8 + k;
          // Each output is x + shift in one rounding step; recovering the shift can differ by an ulp of x.
          EXPECT_NEAR(y[at] - x[at], d0, 4e-16 * (1.0 + std::abs(x[at]) + std::abs(d0)));
        }
      }
    }
  }
  // The two branches have different weights, so their shifts differ.
  EXPECT_NE(g.value(out.det), g.value(out.reid));
}

TEST(Disentangle, GradientsOfAllWeights) {
  Rng rng(5);
  auto params = GcdParams<double>::init(8, rng);
  params.w_d2.value = normal_tensor<double>(Shape{2, 8}, 0.5, rng);
  params.w_r2.value = normal_tensor<double>(Shape{2, 8}, 0.5, rng);
  Parameter<double> x(normal_tensor<double>(Shape{1, 3, 3, 8}, 1.0, rng));
  const auto r = normal_tensor<double>(Shape{1, 3, 3, 8}, 1.0, rng);
  auto ps = params.parameters();
  ps.push_back(&x);
  const auto res = grad_check(
      [&](Graph<double>& g) {
        const auto out = disentangle(g, g.param(x), params);
        return add(g, sum(g, out.det), sum(g, mul(g, out.reid, g.input(r))));
      },
      ps);
  EXPECT_LE(res.max_rel_error, 1e-4);
}

TEST(Disentangle, RejectsChannelMismatch) {
  Rng rng(6);
  auto params = GcdParams<double>::init(8, rng);
  Graph<double> g;
  EXPECT_THROW(disentangle(g, g.input(Tensor<double>(Shape{1, 2, 2, 4})), params), DimensionError);
}

}  // namespace
}  // namespace reltrack::gcd
