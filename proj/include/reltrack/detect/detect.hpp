// Copyright 2026 The reltrack Authors
// SPDX-License-Identifier: Apache-2.0

// Center-point detection on a stride-4 grid: training-target rendering, the
// focal heatmap / L1 box / ReID cross-entropy losses, the uncertainty-weighted
// total, and peak decoding.

#pragma once

#include <cstddef>
#include <vector>

#include "reltrack/core/box.hpp"
#include "reltrack/tensor/ops.hpp"

namespace reltrack::detect {

inline constexpr std::size_t kStride = 4;
inline constexpr double kMinOverlap = 0.7;
inline constexpr double kProbClamp = 1e-6;

struct BoxAnnotation {
  Box box;
  int identity = -1;
};

struct GridCell {
  std::size_t row = 0;
  std::size_t col = 0;
  friend bool operator==(const GridCell&, const GridCell&) = default;
};

/// Per-object vector pair in (x, y) / (width, height) order.
struct Pair {
  double x = 0.0;
  double y = 0.0;
};

struct DetectionTargets {
  Tensor<double> heatmap;        // [grid_h, grid_w], values in [0, 1]
  std::vector<Pair> sizes;       // (r - l, b - t) in pixels
  std::vector<Pair> offsets;     // sub-cell residual of the center, each in [0, 1)
  std::vector<GridCell> centers;  // stride-4 cell of each center
  std::vector<int> identities;

  std::size_t grid_h() const { return heatmap.dim(0); }
  std::size_t grid_w() const { return heatmap.dim(1); }
  std::size_t count() const { return centers.size(); }
};

struct Detection {
  Box box;
  double score = 0.0;
  GridCell center;
};

struct DecodeOptions {
  std::size_t max_k = 128;
  double score_thresh = 0.4;
};

struct FocalOptions {
  double alpha = 2.0;
  double beta = 4.0;
};

/// Grid extent for an image extent: ceil(extent / 4).
inline std::size_t grid_extent(std::size_t pixels) { return (pixels + kStride - 1) / kStride; }

/// Radius (grid cells) at which a shifted box still overlaps the original by
/// `min_overlap`; the smallest of the three corner cases, floored at 0.
double gaussian_radius(double height, double width, double min_overlap = kMinOverlap);

/// Gaussian standard deviation for a grid-scale object: (2 * radius + 1) / 6.
double gaussian_sigma(double grid_height, double grid_width);

/// Renders heatmap, size and offset targets. Overlapping bumps combine by
/// elementwise maximum so the peak of every object stays exactly 1.
/// Throws std::invalid_argument on degenerate or out-of-image boxes.
DetectionTargets render_targets(const std::vector<BoxAnnotation>& boxes, std::size_t image_h,
                                std::size_t image_w);

/// Focal heatmap loss. `prob` holds predicted center probabilities (clamped to
/// [1e-6, 1 - 1e-6] internally); `target` is the rendered heatmap. Normalized
/// by `num_objects`; zero objects gives a constant 0.
template <typename T>
Var heatmap_loss(Graph<T>& g, Var prob, const Tensor<T>& target, std::size_t num_objects,
                 const FocalOptions& options = {});

/// Sum over objects of |o - o_hat|_1 + |s - s_hat|_1. Predictions are [N, 2]
/// gathered at the target center cells; targets are [N, 2].
template <typename T>
Var box_loss(Graph<T>& g, Var pred_offsets, Var pred_sizes, const Tensor<T>& target_offsets,
             const Tensor<T>& target_sizes);

/// Mean cross-entropy of class distributions `prob` [N, K] against integer labels.
/// Throws DimensionError when K < 2.
template <typename T>
Var reid_loss(Graph<T>& g, Var prob, const std::vector<std::size_t>& labels);

/// Same, taking unnormalized logits and applying a softmax over K first.
template <typename T>
Var reid_loss_from_logits(Graph<T>& g, Var logits, const std::vector<std::size_t>& labels);

template <typename T>
struct LossWeights {
  Parameter<T> omega1{Tensor<T>(Shape{1})};
  Parameter<T> omega2{Tensor<T>(Shape{1})};
  std::vector<Parameter<T>*> parameters() { return {&omega1, &omega2}; }
};

/// L = 0.5 * (exp(-w1) (L_h + L_b) + exp(-w2) L_r + w1 + w2).
template <typename T>
Var total_loss(Graph<T>& g, Var heatmap, Var box, Var reid, LossWeights<T>& weights);

/// Target tensors for box_loss: offsets and sizes as [N, 2].
Tensor<double> offsets_tensor(const DetectionTargets& targets);
Tensor<double> sizes_tensor(const DetectionTargets& targets);

/// Row-major flat indices of the target centers.
std::vector<std::size_t> center_indices(const DetectionTargets& targets);

/// True when the cell is strictly greater than every in-grid 8-neighbor.
template <typename T>
bool is_peak(const Tensor<T>& heatmap, std::size_t row, std::size_t col);

/// Peaks above the score threshold, top max_k by score (ties by row-major
/// order), decoded to boxes. `offsets` and `sizes` are [grid_h, grid_w, 2].
template <typename T>
std::vector<Detection> decode(const Tensor<T>& heatmap, const Tensor<T>& offsets, const Tensor<T>& sizes,
                              const DecodeOptions& options = {});

/// Dense [grid_h, grid_w, 2] maps holding each target's offset and size at its
/// center cell, zeros elsewhere.
Tensor<double> offset_map(const DetectionTargets& targets);
Tensor<double> size_map(const DetectionTargets& targets);

}  // namespace reltrack::detect
