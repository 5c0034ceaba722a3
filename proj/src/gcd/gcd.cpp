// Copyright 2026 The reltrack Authors
// SPDX-License-Identifier: Apache-2.0

#include "reltrack/gcd/gcd.hpp"

namespace reltrack::gcd {

template <typename T>
GcdParams<T> GcdParams<T>::init(std::size_t channels, Rng& rng, std::size_t mid) {
  if (channels == 0) throw DimensionError("gcd: channel count must be positive");
  if (mid == 0) mid = std::max<std::size_t>(1, channels / 4);
  GcdParams p;
  p.w_k = fan_in_uniform<T>(Shape{channels, 1}, channels, rng);
  p.w_d1 = fan_in_uniform<T>(Shape{channels, mid}, channels, rng);
  p.w_r1 = fan_in_uniform<T>(Shape{channels, mid}, channels, rng);
  p.w_d2 = zeros_param<T>(Shape{mid, channels});
  p.w_r2 = zeros_param<T>(Shape{mid, channels});
  return p;
}

template <typename T>
Var context_weights(Graph<T>& g, Var x, Var w_k) {
  const Shape& xs = g.shape(x);
  if (xs.size() != 4) throw DimensionError("gcd: input must be [B, H, W, C], got " + shape_string(xs));
  const std::size_t batch = xs[0], np = xs[1] * xs[2], c = xs[3];
  Var flat = reshape(g, x, Shape{batch, np, c});
  Var logits = reshape(g, linear_map(g, flat, w_k), Shape{batch, np});
  return softmax(g, logits, 1);
}

template <typename T>
Var context_vector(Graph<T>& g, Var x, Var w_k) {
  const Shape& xs = g.shape(x);
  Var weights = context_weights(g, x, w_k);
  Var flat = reshape(g, x, Shape{xs[0], xs[1] * xs[2], xs[3]});
  return weighted_pool(g, flat, weights);
}

template <typename T>
Var context_transform(Graph<T>& g, Var z, Var w1, Var w2, T epsilon) {
  Var hidden = relu(g, layer_norm(g, linear_map(g, z, w1), epsilon));
  return linear_map(g, hidden, w2);
}

template <typename T>
Disentangled<T> disentangle(Graph<T>& g, Var x, GcdParams<T>& params) {
  const Shape& xs = g.shape(x);
  if (xs.size() != 4 || xs[3] != params.channels()) {
    throw DimensionError("gcd: input " + shape_string(xs) + " does not match " +
                         std::to_string(params.channels()) + " channels");
  }
  Var w_k = g.param(params.w_k);
  Var z = context_vector(g, x, w_k);
  Var det_shift = context_transform(g, z, g.param(params.w_d1), g.param(params.w_d2), params.epsilon);
  Var reid_shift = context_transform(g, z, g.param(params.w_r1), g.param(params.w_r2), params.epsilon);
  return {add_broadcast(g, x, det_shift), add_broadcast(g, x, reid_shift)};
}

#define RELTRACK_GCD(T)                                                   \
  template struct GcdParams<T>;                                           \
  template Var context_weights<T>(Graph<T>&, Var, Var);                   \
  template Var context_vector<T>(Graph<T>&, Var, Var);                    \
  template Var context_transform<T>(Graph<T>&, Var, Var, Var, T);         \
  template Disentangled<T> disentangle<T>(Graph<T>&, Var, GcdParams<T>&);

RELTRACK_GCD(float)
RELTRACK_GCD(double)

}  // namespace reltrack::gcd
