// Copyright 2026 The reltrack Authors
// SPDX-License-Identifier: Apache-2.0

// Differentiable ops recorded on a Graph. Channel-last layout throughout:
// "rows" means every leading index collapsed, "channels" the last axis.

#pragma once

#include <cstddef>
#include <optional>
#include <vector>

#include "reltrack/tensor/graph.hpp"

namespace reltrack {

/// out[n, j] = sum_i x[n, i] * w[i, j] (+ b[j]) over the last axis of x.
template <typename T>
Var linear_map(Graph<T>& g, Var x, Var w, std::optional<Var> b = std::nullopt);

/// Channel groups of x map independently: w is [groups, in_g, out_g].
template <typename T>
Var grouped_linear(Graph<T>& g, Var x, Var w);

/// 2-D matrix product a[M, K] * b[K, N].
template <typename T>
Var matmul(Graph<T>& g, Var a, Var b);

template <typename T>
Var transpose(Graph<T>& g, Var a);

template <typename T>
Var add(Graph<T>& g, Var a, Var b);

template <typename T>
Var sub(Graph<T>& g, Var a, Var b);

template <typename T>
Var mul(Graph<T>& g, Var a, Var b);

template <typename T>
Var scale(Graph<T>& g, Var a, T factor);

template <typename T>
Var add_scalar(Graph<T>& g, Var a, T shift);

/// x is [B, ..., C], v is [B, C]; v[b] is added at every position of image b.
template <typename T>
Var add_broadcast(Graph<T>& g, Var x, Var v);

template <typename T>
Var relu(Graph<T>& g, Var x);

template <typename T>
Var sigmoid(Graph<T>& g, Var x);

template <typename T>
Var exp(Graph<T>& g, Var x);

template <typename T>
Var log(Graph<T>& g, Var x);

template <typename T>
Var abs(Graph<T>& g, Var x);

/// Elementwise clamp; gradient passes only where the input is inside [lo, hi].
template <typename T>
Var clamp(Graph<T>& g, Var x, T lo, T hi);

/// Softmax along `axis`, with max subtraction.
template <typename T>
Var softmax(Graph<T>& g, Var x, std::size_t axis);

/// Normalizes each batch element (axis 0) over all remaining axes jointly.
/// No learned affine.
template <typename T>
Var layer_norm(Graph<T>& g, Var x, T epsilon);

template <typename T>
Var sum(Graph<T>& g, Var x);

template <typename T>
Var mean(Graph<T>& g, Var x);

template <typename T>
Var reshape(Graph<T>& g, Var x, Shape shape);

/// x is [B, N, C], w is [B, N]; out[b, c] = sum_n w[b, n] * x[b, n, c].
template <typename T>
Var weighted_pool(Graph<T>& g, Var x, Var w);

/// Rows of a [N, C] tensor; repeated indices allowed.
template <typename T>
Var gather_rows(Graph<T>& g, Var x, const std::vector<std::size_t>& rows);

/// Channels [begin, end) of the last axis.
template <typename T>
Var slice_channels(Graph<T>& g, Var x, std::size_t begin, std::size_t end);

/// Concatenate along the last axis; leading shapes must agree.
template <typename T>
Var concat_channels(Graph<T>& g, const std::vector<Var>& parts);

/// x is [B, H, W, Cin], w is [K, K, Cin, Cout], b is [Cout]; zero padding.
template <typename T>
Var conv2d(Graph<T>& g, Var x, Var w, Var b, std::size_t stride, std::size_t pad);

/// Deformable aggregation. values [B, H, W, C]; offsets [B, H, W, heads,
/// samples, 2] as (dy, dx) relative to the query cell; weights [B, H, W,
/// heads, samples]. Differentiable in all three inputs, including through the
/// bilinear sampling coordinates.
template <typename T>
Var deform_aggregate(Graph<T>& g, Var values, Var offsets, Var weights);

}  // namespace reltrack
