// Copyright 2026 The reltrack Authors
// SPDX-License-Identifier: Apache-2.0

#include <cmath>

#include <gtest/gtest.h>

#include "reltrack/gte/gte.hpp"
#include "reltrack/tensor/grad_check.hpp"

namespace reltrack::gte {
namespace {

void randomize(DeformAttnParams<double>& p, Rng& rng) {
  p.offset_w.value = normal_tensor<double>(p.offset_w.shape(), 0.5, rng);
  p.offset_b.value = uniform_tensor<double>(p.offset_b.shape(), -1.5, 1.5, rng);
  p.attn_b.value = normal_tensor<double>(p.attn_b.shape(), 0.5, rng);
}

TEST(Offsets, ChannelCount) {
  Rng rng(1);
  auto p = DeformAttnParams<double>::init(8, 1, 9, rng);
  EXPECT_EQ(p.offset_w.shape(), (Shape{8, 18}));
  Graph<double> g;
  Var o = predict_offsets(g, g.input(normal_tensor<double>(Shape{1, 3, 3, 8}, 1.0, rng)), p);
  EXPECT_EQ(g.shape(o), (Shape{1, 3, 3, 1, 9, 2}));
  for (double v : g.value(o).values()) EXPECT_EQ(v, 0.0);  // zero-initialized projection
}

TEST(Offsets, DependOnQueryContent) {
  Rng rng(2);
  auto p = DeformAttnParams<double>::init(4, 2, 3, rng);
  p.offset_w.value = normal_tensor<double>(p.offset_w.shape(), 1.0, rng);
  Graph<double> g;
  const auto& o = g.value(predict_offsets(g, g.input(normal_tensor<double>(Shape{1, 1, 2, 4}, 1.0, rng)), p));
  const std::size_t per_query = 2 * 3 * 2;
  bool differ = false;
  for (std::size_t i = 0; i < per_query; ++i) differ |= o[i] != o[per_query + i];
  EXPECT_TRUE(differ);
}

TEST(Offsets, RejectsIndivisibleHeads) {
  Rng rng(3);
  EXPECT_THROW(DeformAttnParams<double>::init(6, 4, 9, rng), DimensionError);
}

TEST(SampleKeys, Examples) {
  Tensor<double> map(Shape{6, 6, 2});
  for (std::size_t i = 0; i < map.size(); ++i) map[i] = static_cast<double>(i);
  const auto s = sample_keys(map, 3.0, 4.0, {{1.0, -2.0}, {0.0, 0.0}});
  EXPECT_EQ(s[0].values(), (std::vector<double>{map.at({4, 2, 0}), map.at({4, 2, 1})}));
  EXPECT_EQ(s[1].values(), (std::vector<double>{map.at({3, 4, 0}), map.at({3, 4, 1})}));

  const Tensor<double> two(Shape{1, 2, 1}, std::vector<double>{0.0, 2.0});
  EXPECT_DOUBLE_EQ(sample_keys(two, 0.0, 0.0, {{0.0, 0.5}})[0][0], 1.0);
  EXPECT_DOUBLE_EQ(sample_keys(two, 0.0, 0.0, {{-5.0, -5.0}})[0][0], 0.0);
}

TEST(DeformableAttention, IdentityConfigurationPassesInput) {
  Rng rng(4);
  auto p = DeformAttnParams<double>::identity(6, 1, 9);
  const auto x = normal_tensor<double>(Shape{1, 4, 5, 6}, 1.0, rng);
  Graph<double> g;
  const auto& y = g.value(deformable_attention(g, g.input(x), p));
  for (std::size_t i = 0; i < x.size(); ++i) EXPECT_NEAR(y[i], x[i], 1e-14);
}

TEST(DeformableAttention, SingleSampleIgnoresAttentionProjection) {
  Rng rng(5);
  auto p = DeformAttnParams<double>::init(4, 2, 1, rng);
  randomize(p, rng);
  const auto x = normal_tensor<double>(Shape{1, 3, 4, 4}, 1.0, rng);
  Graph<double> g;
  const auto a = g.value(deformable_attention(g, g.input(x), p));
  p.attn_w.value = normal_tensor<double>(p.attn_w.shape(), 5.0, rng);
  p.attn_b.value = normal_tensor<double>(p.attn_b.shape(), 5.0, rng);
  const auto b = g.value(deformable_attention(g, g.input(x), p));
  EXPECT_EQ(a, b);
}

TEST(DeformableAttention, WeightsSumToOne) {
  Rng rng(6);
  auto p = DeformAttnParams<double>::init(8, 4, 9, rng);
  randomize(p, rng);
  Graph<double> g;
  const auto& w = g.value(attention_weights(g, g.input(normal_tensor<double>(Shape{2, 3, 3, 8}, 2.0, rng)), p));
  for (std::size_t q = 0; q < w.size() / 9; ++q) {
    double s = 0.0;
    for (std::size_t k = 0; k < 9; ++k) s += w[q * 9 + k];
    EXPECT_NEAR(s, 1.0, 1e-12);
  }
}

TEST(DeformableAttention, TranslationEquivariantOnInterior) {
  Rng rng(7);
  auto p = DeformAttnParams<double>::init(4, 2, 3, rng);
  p.attn_w.value = normal_tensor<double>(p.attn_w.shape(), 1.0, rng);
  const std::size_t h = 8, w = 8, c = 4, dy = 2, dx = 1;
  const auto x = normal_tensor<double>(Shape{1, h, w, c}, 1.0, rng);
  Tensor<double> shifted(Shape{1, h, w, c});
  for (std::size_t i = dy; i < h; ++i)
    for (std::size_t j = dx; j < w; ++j)
      for (std::size_t k = 0; k < c; ++k) shifted.at({0, i, j, k}) = x.at({0, i - dy, j - dx, k});
  Graph<double> g;
  const auto& a = g.value(deformable_attention(g, g.input(x), p));
  const auto& b = g.value(deformable_attention(g, g.input(shifted), p));
  for (std::size_t i = dy; i < h; ++i)
    for (std::size_t j = dx; j < w; ++j)
      for (std::size_t k = 0; k < c; ++k) EXPECT_EQ(b.at({0, i, j, k}), a.at({0, i - dy, j - dx, k}));
}

TEST(DeformableAttention, TapelessForwardMatchesGraph) {
  Rng rng(8);
  auto p = DeformAttnParams<double>::init(8, 2, 4, rng);
  randomize(p, rng);
  const auto x = normal_tensor<double>(Shape{1, 5, 6, 8}, 1.0, rng);
  Graph<double> g(false);
  const auto& ref = g.value(deformable_attention(g, g.input(x), p));
  for (auto exec : {kernels::Exec::kSerial, kernels::Exec::kParallel}) {
    const auto y = deformable_attention_forward(x, p, exec);
    ASSERT_EQ(y.shape(), ref.shape());
    for (std::size_t i = 0; i < y.size(); ++i) EXPECT_NEAR(y[i], ref[i], 1e-12);
  }
}

TEST(DeformableAttention, Gradients) {
  Rng rng(9);
  auto p = DeformAttnParams<double>::init(4, 2, 3, rng);
  randomize(p, rng);
  Parameter<double> x(normal_tensor<double>(Shape{1, 3, 4, 4}, 1.0, rng));
  const auto r = normal_tensor<double>(Shape{1, 3, 4, 4}, 1.0, rng);
  auto ps = p.parameters();
  ps.push_back(&x);
  const auto res = grad_check(
      [&](Graph<double>& g) { return sum(g, mul(g, deformable_attention(g, g.param(x), p), g.input(r))); }, ps);
  EXPECT_LE(res.max_rel_error, 1e-4);
}

// Direct softmax(QK^T / rho) V per head, written without the op library.
Tensor<double> naive_dense(const Tensor<double>& x, const DenseAttnParams<double>& p) {
  const std::size_t n = x.dim(1) * x.dim(2), c = x.dim(3), ch = c / p.heads;
  auto proj = [&](const Tensor<double>& w) {
    std::vector<double> out(n * c, 0.0);
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < c; ++j)
        for (std::size_t k = 0; k < c; ++k) out[i * c + j] += x[i * c + k] * w[k * c + j];
    return out;
  };
  const auto q = proj(p.query_w.value), k = proj(p.key_w.value), v = proj(p.value_w.value);
  std::vector<double> mixed(n * c, 0.0);
  for (std::size_t h = 0; h < p.heads; ++h) {
    for (std::size_t i = 0; i < n; ++i) {
      std::vector<double> a(n);
      double mx = -1e300, z = 0.0;
      for (std::size_t j = 0; j < n; ++j) {
        double dot = 0.0;
        for (std::size_t t = 0; t < ch; ++t) dot += q[i * c + h * ch + t] * k[j * c + h * ch + t];
        a[j] = dot / p.rho;
        mx = std::max(mx, a[j]);
      }
      for (double& e : a) z += (e = std::exp(e - mx));
      for (std::size_t j = 0; j < n; ++j)
        for (std::size_t t = 0; t < ch; ++t) mixed[i * c + h * ch + t] += a[j] / z * v[j * c + h * ch + t];
    }
  }
  Tensor<double> out(x.shape());
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < c; ++j)
      for (std::size_t k = 0; k < c; ++k) out[i * c + j] += mixed[i * c + k] * p.out_w.value[k * c + j];
  return out;
}

TEST(DenseAttention, MatchesDirectEvaluation) {
  Rng rng(10);
  auto p = DenseAttnParams<double>::init(8, 2, rng);
  EXPECT_DOUBLE_EQ(p.rho, 2.0);
  const auto x = normal_tensor<double>(Shape{1, 3, 4, 8}, 1.0, rng);
  const auto ref = naive_dense(x, p);
  Graph<double> g;
  const auto& y = g.value(dense_attention(g, g.input(x), p));
  const auto fwd = dense_attention_forward(x, p, kernels::Exec::kSerial);
  for (std::size_t i = 0; i < ref.size(); ++i) {
    EXPECT_NEAR(y[i], ref[i], 1e-12);
    EXPECT_NEAR(fwd[i], ref[i], 1e-12);
  }
}

TEST(DenseAttention, RowsAreStochasticAndUniformForUniformInput) {
  Rng rng(11);
  auto p = DenseAttnParams<double>::init(4, 2, rng);
  Graph<double> g;
  const auto& a = g.value(dense_attention_weights(g, g.input(normal_tensor<double>(Shape{2, 2, 3, 4}, 1.0, rng)), p));
  ASSERT_EQ(a.shape(), (Shape{2, 2, 6, 6}));
  for (std::size_t row = 0; row < 24; ++row) {
    double s = 0.0;
    for (std::size_t j = 0; j < 6; ++j) s += a[row * 6 + j];
    EXPECT_NEAR(s, 1.0, 1e-12);
  }
  const auto& u = g.value(dense_attention_weights(g, g.input(Tensor<double>(Shape{1, 2, 3, 4}, 0.7)), p));
  for (double v : u.values()) EXPECT_NEAR(v, 1.0 / 6.0, 1e-15);
}

TEST(DenseAttention, SinglePosition) {
  Rng rng(12);
  auto p = DenseAttnParams<double>::init(4, 1, rng);
  const auto x = normal_tensor<double>(Shape{1, 1, 1, 4}, 1.0, rng);
  Graph<double> g;
  const auto& y = g.value(dense_attention(g, g.input(x), p));
  for (std::size_t j = 0; j < 4; ++j) {
    double expect = 0.0;
    for (std::size_t k = 0; k < 4; ++k) {
      double v = 0.0;
      for (std::size_t t = 0; t < 4; ++t) v += x[t] * p.value_w.value[t * 4 + k];
      expect += v * p.out_w.value[k * 4 + j];
    }
    EXPECT_NEAR(y[j], expect, 1e-14);
  }
}

TEST(EncoderBlock, ZeroBranchesGiveDoubleNorm) {
  Rng rng(13);
  auto p = EncoderBlockParams<double>::init(4, 2, 3, rng);
  p.attn.out_w.value.fill(0.0);
  p.ffn_w2.value.fill(0.0);
  const auto x = normal_tensor<double>(Shape{1, 3, 3, 4}, 2.0, rng);
  Graph<double> g;
  Var xv = g.input(x);
  const auto& y = g.value(encoder_block(g, xv, p));
  const auto& ref = g.value(layer_norm(g, layer_norm(g, xv, 1e-5), 1e-5));
  EXPECT_EQ(y.shape(), x.shape());
  for (std::size_t i = 0; i < y.size(); ++i) EXPECT_NEAR(y[i], ref[i], 1e-12);
}

TEST(Gte, ShapeAndDeterminism) {
  Rng rng(14);
  auto p = GteParams<double>::init(8, 5, 2, 2, 9, rng);
  const auto x = normal_tensor<double>(Shape{2, 4, 4, 8}, 1.0, rng);
  Graph<double> g;
  const auto a = g.value(gte_forward(g, g.input(x), p));
  const auto b = g.value(gte_forward(g, g.input(x), p));
  EXPECT_EQ(a.shape(), (Shape{2, 4, 4, 5}));
  EXPECT_EQ(a, b);
}

}  // namespace
}  // namespace reltrack::gte
