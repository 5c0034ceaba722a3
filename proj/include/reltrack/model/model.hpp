// Copyright 2026 The reltrack Authors
// SPDX-License-Identifier: Apache-2.0

// A small end-to-end network: two stride-2 convolutions, global context
// disentangling, 1x1 detection heads on the detection branch, and one encoder
// block plus an identity classifier on the ReID branch.

#pragma once

#include <cstddef>
#include <vector>

#include "reltrack/detect/detect.hpp"
#include "reltrack/gcd/gcd.hpp"
#include "reltrack/gte/gte.hpp"

namespace reltrack::model {

struct NetConfig {
  std::size_t channels = 16;
  std::size_t stem_channels = 16;
  std::size_t heads = 2;
  std::size_t samples = 4;
  std::size_t embedding_dim = 16;
  std::size_t num_classes = 3;  // identities seen in training
};

// Size-head outputs are multiplied by this so pixel-scale sizes are reachable
// with unit-scale weights.
inline constexpr double kSizeScale = 16.0;
// Heatmap bias start: sigmoid(-2.19) ~= 0.1.
inline constexpr double kHeatmapBias = -2.19;

template <typename T>
struct NetParams {
  NetConfig config;
  Parameter<T> conv1_w, conv1_b, conv2_w, conv2_b;
  gcd::GcdParams<T> gcd;
  Parameter<T> heat_w, heat_b, offset_w, offset_b, size_w, size_b;
  gte::GteParams<T> gte;
  Parameter<T> cls_w, cls_b;
  detect::LossWeights<T> omegas;

  static NetParams init(const NetConfig& config, Rng& rng);
  std::vector<Parameter<T>*> parameters();
};

template <typename T>
struct NetOutputs {
  Var heatmap;     // [h, w] center probabilities
  Var offsets;     // [h, w, 2]
  Var sizes;       // [h, w, 2] pixels
  Var embeddings;  // [h, w, D]
};

/// `image` is [1, H, W, 3]; outputs live on the ceil(H/4) x ceil(W/4) grid.
template <typename T>
NetOutputs<T> forward(Graph<T>& g, Var image, NetParams<T>& params);

/// One annotated training frame.
template <typename T>
struct Sample {
  Tensor<T> image;  // [1, H, W, 3]
  detect::DetectionTargets targets;
  std::vector<std::size_t> labels;  // class of each target, < num_classes
};

/// Renders each box as a cone of its identity's color peaking at the box
/// center, on a black background, and builds the matching targets. Class
/// labels are identity - 1.
template <typename T>
Sample<T> render_sample(const std::vector<detect::BoxAnnotation>& boxes, std::size_t height, std::size_t width);

template <typename T>
struct LossParts {
  Var total, heatmap, box, reid;
};

template <typename T>
LossParts<T> losses(Graph<T>& g, const NetOutputs<T>& out, NetParams<T>& params, const Sample<T>& sample);

template <typename T>
class Adam {
 public:
  explicit Adam(double learning_rate, double beta1 = 0.9, double beta2 = 0.999, double eps = 1e-8)
      : lr_(learning_rate), b1_(beta1), b2_(beta2), eps_(eps) {}

  /// Applies one update from each parameter's accumulated grad.
  void step(const std::vector<Parameter<T>*>& params);

 private:
  double lr_, b1_, b2_, eps_;
  long long t_ = 0;
  std::vector<std::vector<double>> m_, v_;
};

struct StepLoss {
  double total, heatmap, box, reid;
};

/// Adam steps on a single sample; returns the losses before each step and
/// after the last one (steps + 1 entries).
template <typename T>
std::vector<StepLoss> fit(NetParams<T>& params, const Sample<T>& sample, std::size_t steps, double learning_rate,
                          kernels::Exec exec = kernels::Exec::kParallel);

struct Inference {
  Tensor<double> heatmap;     // [h, w]
  Tensor<double> offsets;     // [h, w, 2]
  Tensor<double> sizes;       // [h, w, 2]
  Tensor<double> embeddings;  // [h, w, D]
};

template <typename T>
Inference infer(NetParams<T>& params, const Tensor<T>& image, kernels::Exec exec = kernels::Exec::kParallel);

}  // namespace reltrack::model
