// Copyright 2026 The reltrack Authors
// SPDX-License-Identifier: Apache-2.0

#include <cmath>

#include <gtest/gtest.h>

#include "reltrack/detect/detect.hpp"
#include "reltrack/tensor/grad_check.hpp"
#include "reltrack/tensor/init.hpp"

namespace reltrack::detect {
namespace {

TEST(Render, SmallBoxAtOrigin) {
  const auto t = render_targets({{Box{0, 0, 4, 4}, 1}}, 16, 16);
  EXPECT_EQ(t.grid_h(), 4u);
  EXPECT_EQ(t.centers[0], (GridCell{0, 0}));
  EXPECT_DOUBLE_EQ(t.offsets[0].x, 0.5);
  EXPECT_DOUBLE_EQ(t.offsets[0].y, 0.5);
  EXPECT_DOUBLE_EQ(t.heatmap.at({0, 0}), 1.0);
}

TEST(Render, OffsetsAndSizes) {
  // Center (10, 7).
  const auto t = render_targets({{Box{8, 5, 12, 9}, 1}, {Box{12, 20, 48, 80}, 2}}, 100, 100);
  EXPECT_DOUBLE_EQ(t.offsets[0].x, 0.5);
  EXPECT_DOUBLE_EQ(t.offsets[0].y, 0.75);
  EXPECT_EQ(t.centers[0], (GridCell{1, 2}));
  EXPECT_DOUBLE_EQ(t.sizes[1].x, 36.0);
  EXPECT_DOUBLE_EQ(t.sizes[1].y, 60.0);
  EXPECT_EQ(t.identities, (std::vector<int>{1, 2}));
}

TEST(Render, OverlapsCombineByMax) {
  const auto t = render_targets({{Box{10, 10, 50, 60}, 1}, {Box{14, 12, 54, 62}, 2}}, 80, 80);
  for (double v : t.heatmap.values()) {
    EXPECT_GE(v, 0.0);
    EXPECT_LE(v, 1.0);
  }
  for (const auto& c : t.centers) EXPECT_DOUBLE_EQ(t.heatmap.at({c.row, c.col}), 1.0);
  for (const auto& o : t.offsets) {
    EXPECT_GE(o.x, 0.0);
    EXPECT_LT(o.x, 1.0);
  }
}

TEST(Render, RejectsBadBoxes) {
  EXPECT_THROW(render_targets({{Box{5, 5, 5, 9}, 1}}, 32, 32), std::invalid_argument);
  EXPECT_THROW(render_targets({{Box{20, 20, 40, 30}, 1}}, 32, 32), std::invalid_argument);
}

TEST(Render, RadiusGrowsWithSize) {
  EXPECT_EQ(gaussian_radius(1.0, 1.0), 0.0);
  EXPECT_LT(gaussian_radius(4.0, 4.0), gaussian_radius(16.0, 16.0));
  EXPECT_GT(gaussian_sigma(1.0, 1.0), 0.0);
}

TEST(HeatmapLoss, SinglePositive) {
  Graph<double> g;
  Var p = g.input(Tensor<double>(Shape{1, 1}, 0.5));
  const double l = g.value(heatmap_loss(g, p, Tensor<double>(Shape{1, 1}, 1.0), 1))[0];
  EXPECT_NEAR(l, -0.25 * std::log(0.5), 1e-15);
  EXPECT_NEAR(l, 0.17329, 5e-6);
}

TEST(HeatmapLoss, PerfectLimitAndNoObjects) {
  const auto t = render_targets({{Box{8, 8, 24, 28}, 1}}, 32, 32);
  Tensor<double> perfect(t.heatmap.shape());
  for (std::size_t i = 0; i < perfect.size(); ++i) perfect[i] = t.heatmap[i] == 1.0 ? 1.0 : 0.0;
  Graph<double> g;
  const double l = g.value(heatmap_loss(g, g.input(perfect), t.heatmap, 1))[0];
  EXPECT_GE(l, 0.0);
  EXPECT_LE(l, 1e-5);
  EXPECT_EQ(g.value(heatmap_loss(g, g.input(Tensor<double>(Shape{2, 2}, 0.3)), Tensor<double>(Shape{2, 2}), 0))[0], 0.0);
}

TEST(HeatmapLoss, Gradient) {
  Rng rng(1);
  const auto t = render_targets({{Box{4, 4, 20, 28}, 1}, {Box{18, 2, 30, 14}, 2}}, 32, 32);
  Parameter<double> p(uniform_tensor<double>(t.heatmap.shape(), 0.05, 0.95, rng));
  const auto res = grad_check([&](Graph<double>& g) { return heatmap_loss(g, g.param(p), t.heatmap, 2); }, {&p});
  EXPECT_LE(res.max_rel_error, 1e-4);
}

TEST(BoxLoss, L1Sums) {
  Graph<double> g;
  const Tensor<double> to(Shape{1, 2}, std::vector<double>{0.5, 0.5});
  const Tensor<double> ts(Shape{1, 2}, std::vector<double>{20, 30});
  Var po = g.input(Tensor<double>(Shape{1, 2}, std::vector<double>{0.6, 0.3}));
  Var ps = g.input(Tensor<double>(Shape{1, 2}, std::vector<double>{23, 29}));
  EXPECT_NEAR(g.value(box_loss(g, po, ps, to, ts))[0], 4.3, 1e-12);
  EXPECT_EQ(g.value(box_loss(g, g.input(to), g.input(ts), to, ts))[0], 0.0);
}

TEST(ReidLoss, Examples) {
  Graph<double> g;
  Var uniform = g.input(Tensor<double>(Shape{2, 4}, 0.25));
  EXPECT_NEAR(g.value(reid_loss(g, uniform, {0, 3}))[0], std::log(4.0), 1e-12);
  EXPECT_NEAR(g.value(reid_loss(g, uniform, {0, 3}))[0], 1.38629, 5e-6);
  Var onehot = g.input(Tensor<double>(Shape{1, 3}, std::vector<double>{0, 1, 0}));
  EXPECT_LE(g.value(reid_loss(g, onehot, {1}))[0], 1e-6);
  EXPECT_THROW(reid_loss(g, g.input(Tensor<double>(Shape{1, 1}, 1.0)), {0}), DimensionError);
}

TEST(ReidLoss, GradientFromLogits) {
  Rng rng(2);
  Parameter<double> logits(normal_tensor<double>(Shape{3, 5}, 1.0, rng));
  const auto res =
      grad_check([&](Graph<double>& g) { return reid_loss_from_logits(g, g.param(logits), {4, 0, 2}); }, {&logits});
  EXPECT_LE(res.max_rel_error, 1e-4);
}

TEST(TotalLoss, ZeroWeightsAndOmegaGradient) {
  LossWeights<double> w;
  Graph<double> g;
  Var lh = g.input(Tensor<double>::scalar(1.5)), lb = g.input(Tensor<double>::scalar(2.0));
  Var lr = g.input(Tensor<double>::scalar(0.7));
  EXPECT_NEAR(g.value(total_loss(g, lh, lb, lr, w))[0], 0.5 * (3.5 + 0.7), 1e-15);

  w.omega1.value[0] = 0.3;
  w.omega2.value[0] = -0.2;
  w.omega1.zero_grad();
  w.omega2.zero_grad();
  Graph<double> h;
  Var l = total_loss(h, h.input(Tensor<double>::scalar(1.5)), h.input(Tensor<double>::scalar(2.0)),
                     h.input(Tensor<double>::scalar(0.7)), w);
  h.backward(l);
  EXPECT_NEAR(w.omega1.grad[0], 0.5 * (1.0 - std::exp(-0.3) * 3.5), 1e-14);
  EXPECT_NEAR(w.omega2.grad[0], 0.5 * (1.0 - std::exp(0.2) * 0.7), 1e-14);

  // Stationary where exp(omega1) equals the detection loss.
  w.omega1.value[0] = std::log(3.5);
  w.omega1.zero_grad();
  Graph<double> k;
  k.backward(total_loss(k, k.input(Tensor<double>::scalar(1.5)), k.input(Tensor<double>::scalar(2.0)),
                        k.input(Tensor<double>::scalar(0.7)), w));
  EXPECT_NEAR(w.omega1.grad[0], 0.0, 1e-15);
}

TEST(TotalLoss, Gradient) {
  LossWeights<double> w;
  w.omega1.value[0] = 0.4;
  w.omega2.value[0] = -0.6;
  Parameter<double> lh(Tensor<double>::scalar(0.8)), lb(Tensor<double>::scalar(1.9)), lr(Tensor<double>::scalar(1.1));
  auto ps = w.parameters();
  ps.insert(ps.end(), {&lh, &lb, &lr});
  const auto res = grad_check(
      [&](Graph<double>& g) { return total_loss(g, g.param(lh), g.param(lb), g.param(lr), w); },
      ps);
  EXPECT_LE(res.max_rel_error, 1e-4);
}

TEST(Decode, UniformMapHasNoPeaks) {
  const Tensor<double> r(Shape{6, 7}, 0.9), pair(Shape{6, 7, 2});
  EXPECT_TRUE(decode(r, pair, pair).empty());
}

TEST(Decode, ThresholdFilter) {
  Tensor<double> r(Shape{8, 8}), pair(Shape{8, 8, 2}, 1.0);
  r.at({1, 1}) = 0.9;
  r.at({6, 6}) = 0.3;
  const auto dets = decode(r, pair, pair);
  ASSERT_EQ(dets.size(), 1u);
  EXPECT_EQ(dets[0].center, (GridCell{1, 1}));
  EXPECT_DOUBLE_EQ(dets[0].score, 0.9);
  DecodeOptions all;
  all.score_thresh = 0.0;
  all.max_k = 1;
  EXPECT_EQ(decode(r, pair, pair, all).size(), 1u);
}

TEST(Decode, ScoresDescendAndCountBounded) {
  Rng rng(3);
  const auto r = uniform_tensor<double>(Shape{20, 20}, 0.0, 1.0, rng);
  const Tensor<double> pair(Shape{20, 20, 2}, 2.0);
  DecodeOptions o;
  o.score_thresh = 0.0;
  o.max_k = 10;
  const auto dets = decode(r, pair, pair, o);
  EXPECT_EQ(dets.size(), 10u);
  for (std::size_t i = 1; i < dets.size(); ++i) EXPECT_GE(dets[i - 1].score, dets[i].score);
}

TEST(Decode, RoundTripsRenderedBoxes) {
  const std::vector<BoxAnnotation> boxes = {{Box{3.5, 7.25, 29.0, 51.5}, 1}, {Box{60.0, 10.0, 90.5, 70.0}, 2},
                                            {Box{10.0, 70.0, 40.0, 100.0}, 3}};
  const auto t = render_targets(boxes, 112, 128);
  const auto dets = decode(t.heatmap, offset_map(t), size_map(t));
  ASSERT_EQ(dets.size(), boxes.size());
  for (const auto& b : boxes) {
    bool found = false;
    for (const auto& d : dets) {
      if (std::abs(d.box.l - b.box.l) <= 1e-6 && std::abs(d.box.t - b.box.t) <= 1e-6 &&
          std::abs(d.box.r - b.box.r) <= 1e-6 && std::abs(d.box.b - b.box.b) <= 1e-6) {
        found = true;
      }
    }
    EXPECT_TRUE(found) << b.identity;
  }
}

}  // namespace
}  // namespace reltrack::detect
