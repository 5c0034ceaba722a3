// Copyright 2026 The reltrack Authors
// SPDX-License-Identifier: Apache-2.0

// Global context disentangling: one softmax-pooled context vector per image,
// pushed through two bottleneck branches and broadcast-added back onto the
// input to give detection-specific and ReID-specific maps.

#pragma once

#include <cstddef>
#include <vector>

#include "reltrack/tensor/init.hpp"
#include "reltrack/tensor/ops.hpp"

namespace reltrack::gcd {

template <typename T>
struct GcdParams {
  Parameter<T> w_k;   // [C, 1] pooling logits
  Parameter<T> w_d1;  // [C, C_mid]
  Parameter<T> w_d2;  // [C_mid, C]
  Parameter<T> w_r1;  // [C, C_mid]
  Parameter<T> w_r2;  // [C_mid, C]
  T epsilon = T(1e-5);

  std::size_t channels() const { return w_k.value.dim(0); }
  std::size_t mid_channels() const { return w_d1.value.dim(1); }

  /// Fan-in uniform for w_k, w_d1, w_r1; zeros for w_d2, w_r2, so a fresh
  /// block passes its input through unchanged. mid = 0 selects C / 4.
  static GcdParams init(std::size_t channels, Rng& rng, std::size_t mid = 0);

  std::vector<Parameter<T>*> parameters() { return {&w_k, &w_d1, &w_d2, &w_r1, &w_r2}; }
};

template <typename T>
struct Disentangled {
  Var det;
  Var reid;
};

/// Softmax pooling weights [B, H'W'] of an input map [B, H', W', C].
template <typename T>
Var context_weights(Graph<T>& g, Var x, Var w_k);

/// z[b] = sum_j softmax_j(x[b, j] . w_k) x[b, j]; [B, C].
template <typename T>
Var context_vector(Graph<T>& g, Var x, Var w_k);

/// One branch applied to the pooled vector: LN -> ReLU -> second projection.
/// Input and output are [B, C]; cost does not depend on the map extent.
template <typename T>
Var context_transform(Graph<T>& g, Var z, Var w1, Var w2, T epsilon);

template <typename T>
Disentangled<T> disentangle(Graph<T>& g, Var x, GcdParams<T>& params);

}  // namespace reltrack::gcd
