// Copyright 2026 The reltrack Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cmath>
#include <cstdint>
#include <random>

#include "reltrack/tensor/tensor.hpp"

namespace reltrack {

using Rng = std::mt19937_64;

template <typename T>
Tensor<T> uniform_tensor(Shape shape, double lo, double hi, Rng& rng) {
  Tensor<T> t(std::move(shape));
  std::uniform_real_distribution<double> dist(lo, hi);
  for (auto& v : t.data()) v = static_cast<T>(dist(rng));
  return t;
}

template <typename T>
Tensor<T> normal_tensor(Shape shape, double stddev, Rng& rng) {
  Tensor<T> t(std::move(shape));
  std::normal_distribution<double> dist(0.0, stddev);
  for (auto& v : t.data()) v = static_cast<T>(dist(rng));
  return t;
}

/// U(-1/sqrt(fan_in), 1/sqrt(fan_in)).
template <typename T>
Parameter<T> fan_in_uniform(Shape shape, std::size_t fan_in, Rng& rng) {
  const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
  return Parameter<T>(uniform_tensor<T>(std::move(shape), -bound, bound, rng));
}

template <typename T>
Parameter<T> zeros_param(Shape shape) {
  return Parameter<T>(Tensor<T>(std::move(shape)));
}

template <typename T>
Parameter<T> identity_param(std::size_t n) {
  Tensor<T> t(Shape{n, n});
  for (std::size_t i = 0; i < n; ++i) t[i * n + i] = T{1};
  return Parameter<T>(std::move(t));
}

}  // namespace reltrack
