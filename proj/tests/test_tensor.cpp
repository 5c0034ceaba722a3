// Copyright 2026 The reltrack Authors
// SPDX-License-Identifier: Apache-2.0

#include <cmath>
#include <numeric>

#include <gtest/gtest.h>

#include "reltrack/tensor/grad_check.hpp"
#include "reltrack/tensor/init.hpp"
#include "reltrack/tensor/kernels.hpp"
#include "reltrack/tensor/ops.hpp"
#include "reltrack/tensor/sampling.hpp"

namespace reltrack {
namespace {

using P = Parameter<double>;

Tensor<double> T2(std::size_t r, std::size_t c, std::vector<double> v) { return Tensor<double>(Shape{r, c}, std::move(v)); }

TEST(Tensor, ShapeAndFiniteness) {
  Tensor<double> t(Shape{2, 3}, 1.5);
  EXPECT_EQ(t.size(), 6u);
  EXPECT_EQ(t.rank(), 2u);
  EXPECT_THROW(Tensor<double>(Shape{2, 2}, std::vector<double>{1, 2, 3}), DimensionError);
  t[4] = std::nan("");
  EXPECT_FALSE(t.all_finite());
  EXPECT_THROW(t.require_finite("test"), NumericError);
}

TEST(Graph, RecordRejectsNonFinite) {
  Graph<double> g;
  Var x = g.input(Tensor<double>(Shape{2}, std::vector<double>{1.0, -1.0}));
  EXPECT_THROW(log(g, x), NumericError);
}

TEST(Graph, ValueReferencesSurviveTapeGrowth) {
  Graph<double> g;
  Var x = g.input(Tensor<double>(Shape{3, 4}, 1.0));
  const Shape& s = g.shape(x);
  for (int i = 0; i < 2000; ++i) x = add_scalar(g, x, 1e-3);
  EXPECT_EQ(s, (Shape{3, 4}));
}

TEST(Graph, BackwardNeedsScalar) {
  Graph<double> g;
  Var x = g.input(Tensor<double>(Shape{2}, 1.0));
  EXPECT_THROW(g.backward(x), DimensionError);
  Graph<double> nograd(false);
  Var y = sum(nograd, nograd.input(Tensor<double>(Shape{2}, 1.0)));
  EXPECT_THROW(nograd.backward(y), std::logic_error);
}

TEST(Ops, LinearMapExamples) {
  Graph<double> g;
  Var a = linear_map(g, g.input(T2(1, 2, {1, 2})), g.input(T2(2, 2, {1, 0, 0, 1})));
  EXPECT_EQ(g.value(a).values(), (std::vector<double>{1, 2}));
  Var b = linear_map(g, g.input(T2(2, 2, {1, 0, 0, 1})), g.input(T2(2, 1, {3, 5})));
  EXPECT_EQ(g.value(b).values(), (std::vector<double>{3, 5}));
  EXPECT_THROW(linear_map(g, g.input(T2(1, 3, {1, 2, 3})), g.input(T2(2, 2, {1, 0, 0, 1}))), DimensionError);
}

TEST(Ops, LinearMapGradientTight) {
  Rng rng(3);
  P x(normal_tensor<double>(Shape{4, 3}, 1.0, rng));
  P w(normal_tensor<double>(Shape{3, 5}, 1.0, rng));
  P b(normal_tensor<double>(Shape{5}, 1.0, rng));
  const auto r = normal_tensor<double>(Shape{4, 5}, 1.0, rng);
  // Linear in every parameter, so central differences are exact up to rounding.
  GradCheckOptions o;
  o.floor = 1e-2;
  const auto res = grad_check(
      [&](Graph<double>& g) {
        return sum(g, mul(g, linear_map(g, g.param(x), g.param(w), g.param(b)), g.input(r)));
      },
      {&x, &w, &b}, o);
  EXPECT_LE(res.max_rel_error, 1e-6);
  EXPECT_EQ(res.checked, 12u + 15u + 5u);
}

TEST(Ops, SoftmaxExamples) {
  Graph<double> g;
  auto sm = [&](std::vector<double> v) {
    const std::size_t n = v.size();
    return g.value(softmax(g, g.input(Tensor<double>(Shape{1, n}, std::move(v))), 1)).values();
  };
  for (double p : sm({0, 0, 0})) EXPECT_NEAR(p, 1.0 / 3.0, 1e-15);
  const auto big = sm({1000, 0});
  EXPECT_NEAR(big[0], 1.0, 1e-15);
  EXPECT_GE(big[1], 0.0);
  const auto v = sm({1, 2, 3});
  // e^x / sum e^x evaluated independently.
  const double z = std::exp(1.0) + std::exp(2.0) + std::exp(3.0);
  EXPECT_NEAR(v[0], std::exp(1.0) / z, 1e-15);
  EXPECT_NEAR(v[1], std::exp(2.0) / z, 1e-15);
  EXPECT_NEAR(v[2], std::exp(3.0) / z, 1e-15);
  EXPECT_NEAR(v[0], 0.09003, 5e-6);
  EXPECT_NEAR(v[1], 0.24473, 5e-6);
  EXPECT_NEAR(v[2], 0.66524, 5e-6);
}

TEST(Ops, SoftmaxOverMiddleAxis) {
  Rng rng(1);
  Graph<double> g;
  const auto x = normal_tensor<double>(Shape{2, 3, 4}, 2.0, rng);
  const auto& y = g.value(softmax(g, g.input(x), 1));
  for (std::size_t a = 0; a < 2; ++a) {
    for (std::size_t c = 0; c < 4; ++c) {
      double s = 0.0;
      for (std::size_t b = 0; b < 3; ++b) s += y[(a * 3 + b) * 4 + c];
      EXPECT_NEAR(s, 1.0, 1e-14);
    }
  }
}

TEST(Ops, LayerNormExamples) {
  Graph<double> g;
  const auto& y = g.value(layer_norm(g, g.input(T2(1, 3, {1, 2, 3})), 0.0));
  EXPECT_NEAR(y[0], -std::sqrt(1.5), 1e-12);
  EXPECT_NEAR(y[1], 0.0, 1e-15);
  EXPECT_NEAR(y[2], std::sqrt(1.5), 1e-12);
  const auto& z = g.value(layer_norm(g, g.input(T2(1, 3, {4, 4, 4})), 1e-5));
  for (double v : z.values()) EXPECT_EQ(v, 0.0);

  Rng rng(5);
  const auto x = normal_tensor<double>(Shape{3, 4, 5, 6}, 3.0, rng);
  const auto& n = g.value(layer_norm(g, g.input(x), 1e-5));
  for (std::size_t b = 0; b < 3; ++b) {
    double mu = 0.0, var = 0.0;
    for (std::size_t i = 0; i < 120; ++i) mu += n[b * 120 + i];
    mu /= 120.0;
    for (std::size_t i = 0; i < 120; ++i) var += (n[b * 120 + i] - mu) * (n[b * 120 + i] - mu);
    var /= 120.0;
    EXPECT_LE(std::abs(mu), 1e-6);
    EXPECT_NEAR(var, 1.0, 1e-4);
  }
}

TEST(Ops, ReluGradientOffKink) {
  Rng rng(2);
  P x(uniform_tensor<double>(Shape{20}, 0.1, 1.0, rng));
  for (std::size_t i = 0; i < 20; i += 2) x.value[i] = -x.value[i];
  const auto r = normal_tensor<double>(Shape{20}, 1.0, rng);
  const auto res = grad_check([&](Graph<double>& g) { return sum(g, mul(g, relu(g, g.param(x)), g.input(r))); }, {&x});
  EXPECT_LE(res.max_rel_error, 1e-8);
}

// Gradient check of every remaining differentiable op on small random inputs.
TEST(Ops, GradientsOfAllOps) {
  Rng rng(11);
  const auto rand = [&](Shape s, double lo = -1.0, double hi = 1.0) { return P(uniform_tensor<double>(std::move(s), lo, hi, rng)); };
  P a = rand({3, 4}), b = rand({3, 4}), m = rand({4, 2}), pos = rand({3, 4}, 0.5, 2.0);
  P gw = rand({2, 2, 3}), gx = rand({5, 4}), v = rand({3, 4});
  P pool_x = rand({2, 5, 3}), pool_w = rand({2, 5});
  P img = rand({1, 5, 6, 2}), kern = rand({3, 3, 2, 3}), kb = rand({3});
  P bx = rand({2, 3, 4}), bv = rand({2, 4});
  const std::vector<std::pair<const char*, std::function<Var(Graph<double>&)>>> fns = {
      {"matmul", [&](Graph<double>& g) { return sum(g, mul(g, matmul(g, g.param(a), g.param(m)), matmul(g, g.param(b), g.param(m)))); }},
      {"transpose", [&](Graph<double>& g) { return sum(g, mul(g, transpose(g, g.param(a)), transpose(g, g.param(v)))); }},
      {"sub_scale", [&](Graph<double>& g) { return sum(g, mul(g, scale(g, sub(g, g.param(a), g.param(b)), 1.7), g.param(v))); }},
      {"sigmoid", [&](Graph<double>& g) { return sum(g, mul(g, sigmoid(g, g.param(a)), g.param(v))); }},
      {"exp_log", [&](Graph<double>& g) { return sum(g, mul(g, log(g, g.param(pos)), exp(g, g.param(a)))); }},
      {"abs", [&](Graph<double>& g) { return sum(g, mul(g, abs(g, g.param(pos)), g.param(v))); }},
      {"clamp", [&](Graph<double>& g) { return sum(g, mul(g, clamp(g, g.param(pos), 0.75, 1.5), g.param(v))); }},
      {"softmax", [&](Graph<double>& g) { return sum(g, mul(g, softmax(g, g.param(a), 1), g.param(v))); }},
      {"layer_norm", [&](Graph<double>& g) { return sum(g, mul(g, layer_norm(g, g.param(a), 1e-5), g.param(v))); }},
      {"mean", [&](Graph<double>& g) { return mean(g, mul(g, g.param(a), g.param(b))); }},
      {"grouped_linear", [&](Graph<double>& g) {
         Var y = grouped_linear(g, g.param(gx), g.param(gw));
         return sum(g, mul(g, y, y));
       }},
      {"weighted_pool", [&](Graph<double>& g) { return sum(g, mul(g, weighted_pool(g, g.param(pool_x), g.param(pool_w)), g.input(Tensor<double>(Shape{2, 3}, 0.7)))); }},
      {"gather_rows", [&](Graph<double>& g) { return sum(g, mul(g, gather_rows(g, g.param(gx), {4, 0, 4}), gather_rows(g, g.param(gx), {1, 2, 3}))); }},
      {"slice_concat", [&](Graph<double>& g) {
         Var s1 = slice_channels(g, g.param(a), 0, 1), s2 = slice_channels(g, g.param(a), 1, 4);
         return sum(g, mul(g, concat_channels(g, {s2, s1}), g.param(v)));
       }},
      {"conv2d", [&](Graph<double>& g) {
         Var y = conv2d(g, g.param(img), g.param(kern), g.param(kb), 2, 1);
         return sum(g, mul(g, y, y));
       }},
      {"add_broadcast", [&](Graph<double>& g) { return sum(g, mul(g, add_broadcast(g, g.param(bx), g.param(bv)), g.param(bx))); }},
  };
  for (const auto& [name, f] : fns) {
    const auto res = grad_check(f, {&a, &b, &m, &pos, &gw, &gx, &v, &pool_x, &pool_w, &img, &kern, &kb, &bx, &bv});
    EXPECT_LE(res.max_rel_error, 1e-6) << name;
  }
}

// conv2d against a direct loop written independently of the kernel.
TEST(Ops, Conv2dMatchesDirectLoop) {
  Rng rng(4);
  const std::size_t h = 7, w = 5, ci = 3, co = 4, k = 3, stride = 2, pad = 1;
  const auto x = normal_tensor<double>(Shape{2, h, w, ci}, 1.0, rng);
  const auto wt = normal_tensor<double>(Shape{k, k, ci, co}, 1.0, rng);
  const auto bias = normal_tensor<double>(Shape{co}, 1.0, rng);
  Graph<double> g;
  const auto& y = g.value(conv2d(g, g.input(x), g.input(wt), g.input(bias), stride, pad));
  const std::size_t oh = (h + 2 * pad - k) / stride + 1, ow = (w + 2 * pad - k) / stride + 1;
  ASSERT_EQ(y.shape(), (Shape{2, oh, ow, co}));
  for (std::size_t b = 0; b < 2; ++b)
    for (std::size_t i = 0; i < oh; ++i)
      for (std::size_t j = 0; j < ow; ++j)
        for (std::size_t o = 0; o < co; ++o) {
          double acc = bias[o];
          for (std::size_t di = 0; di < k; ++di)
            for (std::size_t dj = 0; dj < k; ++dj) {
              const long yy = static_cast<long>(i * stride + di) - static_cast<long>(pad);
              const long xx = static_cast<long>(j * stride + dj) - static_cast<long>(pad);
              if (yy < 0 || xx < 0 || yy >= static_cast<long>(h) || xx >= static_cast<long>(w)) continue;
              for (std::size_t c = 0; c < ci; ++c)
                acc += x.at({b, static_cast<std::size_t>(yy), static_cast<std::size_t>(xx), c}) * wt.at({di, dj, c, o});
            }
          EXPECT_NEAR(y.at({b, i, j, o}), acc, 1e-12);
        }
}

TEST(Sampling, BilinearExamples) {
  // 1 x 2 map with one channel: F(0,0)=0, F(0,1)=2.
  const Tensor<double> map(Shape{1, 2, 1}, std::vector<double>{0.0, 2.0});
  EXPECT_DOUBLE_EQ(bilinear_sample(map, 0.0, 0.5)[0], 1.0);
  EXPECT_DOUBLE_EQ(bilinear_sample(map, 0.0, 1.0)[0], 2.0);
  // Half a cell outside: the missing corner contributes zero.
  EXPECT_DOUBLE_EQ(bilinear_sample(map, 0.0, 1.5)[0], 1.0);
  EXPECT_DOUBLE_EQ(bilinear_sample(map, -0.5, 1.0)[0], 1.0);
  EXPECT_DOUBLE_EQ(bilinear_sample(map, 5.0, 5.0)[0], 0.0);
}

TEST(Sampling, TapWeightsSumToOneInside) {
  for (double y : {0.0, 0.3, 1.7, 2.0}) {
    for (double x : {0.0, 0.25, 3.9}) {
      const auto taps = kernels::bilinear_taps(y, x, 3, 5);
      EXPECT_NEAR(taps.weight[0] + taps.weight[1] + taps.weight[2] + taps.weight[3], 1.0, 1e-15);
    }
  }
}

TEST(Ops, DeformAggregateGradientIncludingOffsets) {
  Rng rng(8);
  const std::size_t h = 4, w = 5, c = 4, heads = 2, samples = 3;
  P values(normal_tensor<double>(Shape{1, h, w, c}, 1.0, rng));
  P offsets(uniform_tensor<double>(Shape{1, h, w, heads, samples, 2}, -1.7, 1.7, rng));
  P weights(uniform_tensor<double>(Shape{1, h, w, heads, samples}, 0.1, 1.0, rng));
  const auto r = normal_tensor<double>(Shape{1, h, w, c}, 1.0, rng);
  const auto res = grad_check(
      [&](Graph<double>& g) {
        return sum(g, mul(g, deform_aggregate(g, g.param(values), g.param(offsets), g.param(weights)), g.input(r)));
      },
      {&values, &offsets, &weights});
  EXPECT_LE(res.max_rel_error, 1e-6);
}

// The OpenMP kernels must reproduce the serial reference bit for bit.
TEST(Kernels, ParallelMatchesSerialExactly) {
  Rng rng(21);
  const auto f = [&](std::size_t n) { return uniform_tensor<float>(Shape{n}, -1.0, 1.0, rng); };
  {
    const std::size_t rows = 37, in = 13, out = 11;
    const auto x = f(rows * in), w = f(in * out), b = f(out);
    Tensor<float> a(Shape{rows * out}), c(Shape{rows * out});
    kernels::serial::linear<float>(x.data(), w.data(), b.data(), a.data(), rows, in, out);
    kernels::omp::linear<float>(x.data(), w.data(), b.data(), c.data(), rows, in, out);
    EXPECT_EQ(a, c);
  }
  {
    const std::size_t rows = 29, groups = 3, ig = 4, og = 5;
    const auto x = f(rows * groups * ig), w = f(groups * ig * og);
    Tensor<float> a(Shape{rows * groups * og}), c(Shape{rows * groups * og});
    kernels::serial::grouped_linear<float>(x.data(), w.data(), a.data(), rows, groups, ig, og);
    kernels::omp::grouped_linear<float>(x.data(), w.data(), c.data(), rows, groups, ig, og);
    EXPECT_EQ(a, c);
  }
  {
    const std::size_t h = 9, w = 11, ci = 3, co = 6;
    const auto x = f(h * w * ci), k = f(9 * ci * co), b = f(co);
    const std::size_t oh = kernels::conv_out_extent(h, 3, 2, 1), ow = kernels::conv_out_extent(w, 3, 2, 1);
    Tensor<float> a(Shape{oh * ow * co}), c(Shape{oh * ow * co});
    kernels::serial::conv2d<float>(x.data(), k.data(), b.data(), a.data(), h, w, ci, co, 3, 2, 1);
    kernels::omp::conv2d<float>(x.data(), k.data(), b.data(), c.data(), h, w, ci, co, 3, 2, 1);
    EXPECT_EQ(a, c);
  }
  {
    const kernels::DeformGeometry geo{7, 6, 8, 2, 4};
    const std::size_t n = geo.height * geo.width;
    const auto v = f(n * geo.channels), o = uniform_tensor<float>(Shape{n * geo.heads * geo.samples * 2}, -3, 3, rng);
    const auto wt = f(n * geo.heads * geo.samples);
    Tensor<float> a(Shape{n * geo.channels}), c(Shape{n * geo.channels});
    kernels::serial::deform_aggregate<float>(v.data(), o.data(), wt.data(), a.data(), geo);
    kernels::omp::deform_aggregate<float>(v.data(), o.data(), wt.data(), c.data(), geo);
    EXPECT_EQ(a, c);
  }
  {
    const std::size_t n = 30, ch = 8, heads = 2;
    const auto q = f(n * ch), k = f(n * ch), v = f(n * ch);
    Tensor<float> a(Shape{n * ch}), c(Shape{n * ch});
    kernels::serial::dense_attention<float>(q.data(), k.data(), v.data(), a.data(), n, ch, heads, 2.0);
    kernels::omp::dense_attention<float>(q.data(), k.data(), v.data(), c.data(), n, ch, heads, 2.0);
    EXPECT_EQ(a, c);
  }
}

TEST(Graph, SerialAndParallelGraphsAgree) {
  Rng rng(9);
  const auto x = normal_tensor<float>(Shape{1, 8, 8, 3}, 1.0, rng);
  const auto w = normal_tensor<float>(Shape{3, 3, 3, 5}, 1.0, rng);
  const auto b = normal_tensor<float>(Shape{5}, 1.0, rng);
  Graph<float> gs(false, kernels::Exec::kSerial), gp(false, kernels::Exec::kParallel);
  const auto ys = gs.value(conv2d(gs, gs.input(x), gs.input(w), gs.input(b), 1, 1));
  const auto yp = gp.value(conv2d(gp, gp.input(x), gp.input(w), gp.input(b), 1, 1));
  EXPECT_EQ(ys, yp);
}

}  // namespace
}  // namespace reltrack
