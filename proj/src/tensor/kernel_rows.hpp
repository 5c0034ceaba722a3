// Copyright 2026 The reltrack Authors
// SPDX-License-Identifier: Apache-2.0

// Per-row bodies shared by the serial and OpenMP kernels.

#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <span>
#include <vector>

#include "reltrack/tensor/kernels.hpp"

namespace reltrack::kernels::detail {

template <typename T>
inline void linear_row(const T* x, std::span<const T> w, std::span<const T> bias, T* out, std::size_t in,
                       std::size_t out_cols) {
  for (std::size_t j = 0; j < out_cols; ++j) out[j] = bias.empty() ? T{0} : bias[j];
  for (std::size_t i = 0; i < in; ++i) {
    const T xi = x[i];
    const T* wrow = w.data() + i * out_cols;
    for (std::size_t j = 0; j < out_cols; ++j) out[j] += xi * wrow[j];
  }
}

template <typename T>
inline void grouped_linear_row(const T* x, std::span<const T> w, T* out, std::size_t groups, std::size_t in_g,
                               std::size_t out_g) {
  for (std::size_t g = 0; g < groups; ++g) {
    const T* wg = w.data() + g * in_g * out_g;
    T* og = out + g * out_g;
    const T* xg = x + g * in_g;
    for (std::size_t j = 0; j < out_g; ++j) og[j] = T{0};
    for (std::size_t i = 0; i < in_g; ++i) {
      const T xi = xg[i];
      for (std::size_t j = 0; j < out_g; ++j) og[j] += xi * wg[i * out_g + j];
    }
  }
}

/// One output row (fixed oy) of a convolution.
template <typename T>
inline void conv2d_row(std::span<const T> x, std::span<const T> w, std::span<const T> bias, std::span<T> out,
                       std::size_t oy, std::size_t height, std::size_t width, std::size_t in_ch,
                       std::size_t out_ch, std::size_t kernel, std::size_t stride, std::size_t pad) {
  const std::size_t ow_n = conv_out_extent(width, kernel, stride, pad);
  for (std::size_t ox = 0; ox < ow_n; ++ox) {
    T* o = out.data() + (oy * ow_n + ox) * out_ch;
    for (std::size_t c = 0; c < out_ch; ++c) o[c] = bias.empty() ? T{0} : bias[c];
    for (std::size_t ky = 0; ky < kernel; ++ky) {
      const long iy = static_cast<long>(oy * stride + ky) - static_cast<long>(pad);
      if (iy < 0 || iy >= static_cast<long>(height)) continue;
      for (std::size_t kx = 0; kx < kernel; ++kx) {
        const long ix = static_cast<long>(ox * stride + kx) - static_cast<long>(pad);
        if (ix < 0 || ix >= static_cast<long>(width)) continue;
        const T* xp = x.data() + (static_cast<std::size_t>(iy) * width + static_cast<std::size_t>(ix)) * in_ch;
        const T* wp = w.data() + (ky * kernel + kx) * in_ch * out_ch;
        for (std::size_t ci = 0; ci < in_ch; ++ci) {
          const T xv = xp[ci];
          const T* wr = wp + ci * out_ch;
          for (std::size_t c = 0; c < out_ch; ++c) o[c] += xv * wr[c];
        }
      }
    }
  }
}

/// All heads of one query position.
template <typename T>
inline void deform_query(std::span<const T> values, std::span<const T> offsets, std::span<const T> weights,
                         std::span<T> out, const DeformGeometry& geo, std::size_t q) {
  const std::size_t ch = geo.head_channels();
  const double qy = static_cast<double>(q / geo.width);
  const double qx = static_cast<double>(q % geo.width);
  T* o = out.data() + q * geo.channels;
  for (std::size_t c = 0; c < geo.channels; ++c) o[c] = T{0};
  for (std::size_t h = 0; h < geo.heads; ++h) {
    for (std::size_t k = 0; k < geo.samples; ++k) {
      const std::size_t slot = (q * geo.heads + h) * geo.samples + k;
      const double py = qy + static_cast<double>(offsets[2 * slot]);
      const double px = qx + static_cast<double>(offsets[2 * slot + 1]);
      const T a = weights[slot];
      const BilinearTaps taps = bilinear_taps(py, px, geo.height, geo.width);
      for (int t = 0; t < 4; ++t) {
        if (taps.weight[t] == 0.0) continue;
        const T wt = a * static_cast<T>(taps.weight[t]);
        const T* v = values.data() + taps.index[t] * geo.channels + h * ch;
        T* oh = o + h * ch;
        for (std::size_t c = 0; c < ch; ++c) oh[c] += wt * v[c];
      }
    }
  }
}

/// All heads of one query row of dense attention.
template <typename T>
inline void dense_query(std::span<const T> q, std::span<const T> k, std::span<const T> v, std::span<T> out,
                        std::size_t n, std::size_t positions, std::size_t channels, std::size_t heads,
                        double rho, std::vector<T>& logits) {
  const std::size_t ch = channels / heads;
  const T inv_rho = static_cast<T>(1.0 / rho);
  logits.resize(positions);
  T* o = out.data() + n * channels;
  for (std::size_t h = 0; h < heads; ++h) {
    const T* qh = q.data() + n * channels + h * ch;
    T max_logit = -INFINITY;
    for (std::size_t m = 0; m < positions; ++m) {
      const T* km = k.data() + m * channels + h * ch;
      T dot{0};
      for (std::size_t c = 0; c < ch; ++c) dot += qh[c] * km[c];
      logits[m] = dot * inv_rho;
      max_logit = std::max(max_logit, logits[m]);
    }
    T denom{0};
    for (std::size_t m = 0; m < positions; ++m) {
      logits[m] = std::exp(logits[m] - max_logit);
      denom += logits[m];
    }
    T* oh = o + h * ch;
    for (std::size_t c = 0; c < ch; ++c) oh[c] = T{0};
    for (std::size_t m = 0; m < positions; ++m) {
      const T p = logits[m] / denom;
      const T* vm = v.data() + m * channels + h * ch;
      for (std::size_t c = 0; c < ch; ++c) oh[c] += p * vm[c];
    }
  }
}

}  // namespace reltrack::kernels::detail
