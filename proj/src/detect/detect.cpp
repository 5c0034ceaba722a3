// Copyright 2026 The reltrack Authors
// SPDX-License-Identifier: Apache-2.0

#include "reltrack/detect/detect.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>
#include <string>

namespace reltrack::detect {

double gaussian_radius(double height, double width, double min_overlap) {
  const double b1 = height + width;
  const double c1 = width * height * (1.0 - min_overlap) / (1.0 + min_overlap);
  const double r1 = (b1 + std::sqrt(b1 * b1 - 4.0 * c1)) / 2.0;

  const double a2 = 4.0;
  const double b2 = 2.0 * (height + width);
  const double c2 = (1.0 - min_overlap) * width * height;
  const double r2 = (b2 + std::sqrt(b2 * b2 - 4.0 * a2 * c2)) / 2.0;

  const double a3 = 4.0 * min_overlap;
  const double b3 = -2.0 * min_overlap * (height + width);
  const double c3 = (min_overlap - 1.0) * width * height;
  const double r3 = (b3 + std::sqrt(b3 * b3 - 4.0 * a3 * c3)) / 2.0;

  return std::max(0.0, std::floor(std::min({r1, r2, r3})));
}

double gaussian_sigma(double grid_height, double grid_width) {
  return (2.0 * gaussian_radius(grid_height, grid_width) + 1.0) / 6.0;
}

DetectionTargets render_targets(const std::vector<BoxAnnotation>& boxes, std::size_t image_h,
                                std::size_t image_w) {
  if (image_h == 0 || image_w == 0) throw std::invalid_argument("render_targets: empty image");
  const std::size_t gh = grid_extent(image_h), gw = grid_extent(image_w);
  DetectionTargets t;
  t.heatmap = Tensor<double>(Shape{gh, gw});
  const double s = static_cast<double>(kStride);
  for (std::size_t i = 0; i < boxes.size(); ++i) {
    const Box& b = boxes[i].box;
    if (!b.well_formed()) {
      throw std::invalid_argument("render_targets: degenerate box " + std::to_string(i));
    }
    if (b.l < 0.0 || b.t < 0.0 || b.r > static_cast<double>(image_w) || b.b > static_cast<double>(image_h)) {
      throw std::invalid_argument("render_targets: box " + std::to_string(i) + " outside the image");
    }
    const double cx = b.cx(), cy = b.cy();
    const double gx = std::floor(cx / s), gy = std::floor(cy / s);
    GridCell cell{std::min(static_cast<std::size_t>(gy), gh - 1), std::min(static_cast<std::size_t>(gx), gw - 1)};
    t.centers.push_back(cell);
    t.offsets.push_back({cx / s - gx, cy / s - gy});
    t.sizes.push_back({b.width(), b.height()});
    t.identities.push_back(boxes[i].identity);

    const double sigma = gaussian_sigma(b.height() / s, b.width() / s);
    const double denom = 2.0 * sigma * sigma;
    for (std::size_t y = 0; y < gh; ++y) {
      const double dy = static_cast<double>(y) - static_cast<double>(cell.row);
      for (std::size_t x = 0; x < gw; ++x) {
        const double dx = static_cast<double>(x) - static_cast<double>(cell.col);
        double& v = t.heatmap[y * gw + x];
        v = std::max(v, std::exp(-(dx * dx + dy * dy) / denom));
      }
    }
  }
  return t;
}

Tensor<double> offsets_tensor(const DetectionTargets& targets) {
  Tensor<double> t(Shape{targets.count(), 2});
  for (std::size_t i = 0; i < targets.count(); ++i) {
    t[2 * i] = targets.offsets[i].x;
    t[2 * i + 1] = targets.offsets[i].y;
  }
  return t;
}

Tensor<double> sizes_tensor(const DetectionTargets& targets) {
  Tensor<double> t(Shape{targets.count(), 2});
  for (std::size_t i = 0; i < targets.count(); ++i) {
    t[2 * i] = targets.sizes[i].x;
    t[2 * i + 1] = targets.sizes[i].y;
  }
  return t;
}

std::vector<std::size_t> center_indices(const DetectionTargets& targets) {
  std::vector<std::size_t> idx;
  for (const GridCell& c : targets.centers) idx.push_back(c.row * targets.grid_w() + c.col);
  return idx;
}

namespace {

Tensor<double> pair_map(const DetectionTargets& targets, const std::vector<Pair>& values) {
  const std::size_t gw = targets.grid_w();
  Tensor<double> m(Shape{targets.grid_h(), gw, 2});
  for (std::size_t i = 0; i < targets.count(); ++i) {
    const std::size_t k = targets.centers[i].row * gw + targets.centers[i].col;
    m[2 * k] = values[i].x;
    m[2 * k + 1] = values[i].y;
  }
  return m;
}

}  // namespace

Tensor<double> offset_map(const DetectionTargets& targets) { return pair_map(targets, targets.offsets); }
Tensor<double> size_map(const DetectionTargets& targets) { return pair_map(targets, targets.sizes); }

template <typename T>
Var heatmap_loss(Graph<T>& g, Var prob, const Tensor<T>& target, std::size_t num_objects,
                 const FocalOptions& options) {
  if (g.shape(prob) != target.shape()) {
    throw DimensionError("heatmap_loss: prediction " + shape_string(g.shape(prob)) + " vs target " +
                         shape_string(target.shape()));
  }
  if (num_objects == 0) return g.input(Tensor<T>::scalar(T{0}));
  const T lo = static_cast<T>(kProbClamp), hi = static_cast<T>(1.0 - kProbClamp);
  Var r = clamp(g, prob, lo, hi);
  const T alpha = static_cast<T>(options.alpha), beta = static_cast<T>(options.beta);
  const T inv_n = T{1} / static_cast<T>(num_objects);
  const auto rv = g.value(r).data();
  T total{0};
  for (std::size_t i = 0; i < rv.size(); ++i) {
    const T p = rv[i];
    if (target[i] == T{1}) {
      total += std::pow(T{1} - p, alpha) * std::log(p);
    } else {
      total += std::pow(T{1} - target[i], beta) * std::pow(p, alpha) * std::log(T{1} - p);
    }
  }
  return g.record(
      Tensor<T>::scalar(-total * inv_n),
      [r, target, alpha, beta, inv_n](Graph<T>& gr, const Tensor<T>& go) {
        const auto rv2 = gr.value(r).data();
        auto dr = gr.grad_buffer(r);
        for (std::size_t i = 0; i < rv2.size(); ++i) {
          const T p = rv2[i];
          T d;
          if (target[i] == T{1}) {
            d = -alpha * std::pow(T{1} - p, alpha - T{1}) * std::log(p) + std::pow(T{1} - p, alpha) / p;
          } else {
            const T w = std::pow(T{1} - target[i], beta);
            d = w * (alpha * std::pow(p, alpha - T{1}) * std::log(T{1} - p) - std::pow(p, alpha) / (T{1} - p));
          }
          dr[i] += -inv_n * d * go[0];
        }
      },
      "heatmap_loss");
}

template <typename T>
Var box_loss(Graph<T>& g, Var pred_offsets, Var pred_sizes, const Tensor<T>& target_offsets,
             const Tensor<T>& target_sizes) {
  if (g.shape(pred_offsets) != target_offsets.shape() || g.shape(pred_sizes) != target_sizes.shape()) {
    throw DimensionError("box_loss: predictions and targets disagree in shape");
  }
  Var off = sum(g, abs(g, sub(g, pred_offsets, g.input(target_offsets))));
  Var size = sum(g, abs(g, sub(g, pred_sizes, g.input(target_sizes))));
  return add(g, off, size);
}

template <typename T>
Var reid_loss(Graph<T>& g, Var prob, const std::vector<std::size_t>& labels) {
  const Shape& ps = g.shape(prob);
  if (ps.size() != 2) throw DimensionError("reid_loss: probabilities must be [N, K]");
  const std::size_t n = ps[0], k = ps[1];
  if (k < 2) throw DimensionError("reid_loss: needs at least 2 identity classes");
  if (labels.size() != n) throw DimensionError("reid_loss: one label per row required");
  if (n == 0) return g.input(Tensor<T>::scalar(T{0}));
  std::vector<std::size_t> picks(n);
  for (std::size_t i = 0; i < n; ++i) {
    if (labels[i] >= k) throw DimensionError("reid_loss: label out of range");
    picks[i] = i * k + labels[i];
  }
  Var flat = reshape(g, prob, Shape{n * k, 1});
  Var chosen = clamp(g, gather_rows(g, flat, picks), static_cast<T>(1e-12), T{1});
  return scale(g, mean(g, log(g, chosen)), T{-1});
}

template <typename T>
Var reid_loss_from_logits(Graph<T>& g, Var logits, const std::vector<std::size_t>& labels) {
  return reid_loss(g, softmax(g, logits, 1), labels);
}

template <typename T>
Var total_loss(Graph<T>& g, Var heatmap, Var box, Var reid, LossWeights<T>& weights) {
  Var w1 = g.param(weights.omega1);
  Var w2 = g.param(weights.omega2);
  Var det = add(g, heatmap, box);
  Var a = mul(g, exp(g, scale(g, w1, T{-1})), det);
  Var b = mul(g, exp(g, scale(g, w2, T{-1})), reid);
  return scale(g, add(g, add(g, a, b), add(g, w1, w2)), T{0.5});
}

template <typename T>
bool is_peak(const Tensor<T>& heatmap, std::size_t row, std::size_t col) {
  const std::size_t gh = heatmap.dim(0), gw = heatmap.dim(1);
  const T v = heatmap[row * gw + col];
  for (int dy = -1; dy <= 1; ++dy) {
    for (int dx = -1; dx <= 1; ++dx) {
      if (dy == 0 && dx == 0) continue;
      const long y = static_cast<long>(row) + dy, x = static_cast<long>(col) + dx;
      if (y < 0 || x < 0 || y >= static_cast<long>(gh) || x >= static_cast<long>(gw)) continue;
      if (!(v > heatmap[static_cast<std::size_t>(y) * gw + static_cast<std::size_t>(x)])) return false;
    }
  }
  return true;
}

template <typename T>
std::vector<Detection> decode(const Tensor<T>& heatmap, const Tensor<T>& offsets, const Tensor<T>& sizes,
                              const DecodeOptions& options) {
  if (heatmap.rank() != 2) throw DimensionError("decode: heatmap must be [H, W]");
  const std::size_t gh = heatmap.dim(0), gw = heatmap.dim(1);
  const Shape pair_shape{gh, gw, 2};
  if (offsets.shape() != pair_shape || sizes.shape() != pair_shape) {
    throw DimensionError("decode: offset and size maps must be [H, W, 2] on the heatmap grid");
  }
  std::vector<std::size_t> peaks;
  for (std::size_t y = 0; y < gh; ++y) {
    for (std::size_t x = 0; x < gw; ++x) {
      const std::size_t k = y * gw + x;
      if (static_cast<double>(heatmap[k]) >= options.score_thresh && is_peak(heatmap, y, x)) peaks.push_back(k);
    }
  }
  std::stable_sort(peaks.begin(), peaks.end(),
                   [&](std::size_t a, std::size_t b) { return heatmap[a] > heatmap[b]; });
  if (peaks.size() > options.max_k) peaks.resize(options.max_k);

  const double s = static_cast<double>(kStride);
  std::vector<Detection> out;
  out.reserve(peaks.size());
  for (std::size_t k : peaks) {
    const std::size_t row = k / gw, col = k % gw;
    const double cx = s * (static_cast<double>(col) + static_cast<double>(offsets[2 * k]));
    const double cy = s * (static_cast<double>(row) + static_cast<double>(offsets[2 * k + 1]));
    const double w = static_cast<double>(sizes[2 * k]), h = static_cast<double>(sizes[2 * k + 1]);
    Detection d;
    d.box = Box::from_center(cx, cy, w, h);
    d.score = std::clamp(static_cast<double>(heatmap[k]), 0.0, 1.0);
    d.center = {row, col};
    out.push_back(d);
  }
  return out;
}

#define RELTRACK_DETECT(T)                                                                                     \
  template Var heatmap_loss<T>(Graph<T>&, Var, const Tensor<T>&, std::size_t, const FocalOptions&);           \
  template Var box_loss<T>(Graph<T>&, Var, Var, const Tensor<T>&, const Tensor<T>&);                           \
  template Var reid_loss<T>(Graph<T>&, Var, const std::vector<std::size_t>&);                                  \
  template Var reid_loss_from_logits<T>(Graph<T>&, Var, const std::vector<std::size_t>&);                      \
  template Var total_loss<T>(Graph<T>&, Var, Var, Var, LossWeights<T>&);                                       \
  template bool is_peak<T>(const Tensor<T>&, std::size_t, std::size_t);                                        \
  template std::vector<Detection> decode<T>(const Tensor<T>&, const Tensor<T>&, const Tensor<T>&,              \
                                            const DecodeOptions&);

RELTRACK_DETECT(float)
RELTRACK_DETECT(double)

}  // namespace reltrack::detect
