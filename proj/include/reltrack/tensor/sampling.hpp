// Copyright 2026 The reltrack Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include "reltrack/tensor/tensor.hpp"

namespace reltrack {

/// Bilinear interpolation of an [H, W, C] map at fractional (y, x). Each of the
/// four neighbor cells that falls outside the map contributes zero.
template <typename T>
Tensor<T> bilinear_sample(const Tensor<T>& map, double y, double x);

}  // namespace reltrack
