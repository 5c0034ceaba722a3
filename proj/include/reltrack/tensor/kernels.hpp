// Copyright 2026 The reltrack Authors
// SPDX-License-Identifier: Apache-2.0

// Forward kernels over raw row-major buffers. Every kernel has a serial
// reference and an OpenMP variant. The OpenMP variants partition work over
// independent output rows and keep the serial reduction order inside each
// row, so both produce bit-identical results.

#pragma once

#include <cmath>
#include <cstddef>
#include <span>

namespace reltrack::kernels {

enum class Exec { kSerial, kParallel };

/// Geometry of a deformable sampling pass over one (H, W, C) map.
struct DeformGeometry {
  std::size_t height = 0;
  std::size_t width = 0;
  std::size_t channels = 0;
  std::size_t heads = 1;
  std::size_t samples = 1;

  std::size_t head_channels() const { return channels / heads; }
};

/// One bilinear tap: four neighbor cells and their weights. Cells outside the
/// map have weight zero and index 0.
struct BilinearTaps {
  std::size_t index[4] = {0, 0, 0, 0};
  double weight[4] = {0.0, 0.0, 0.0, 0.0};
  // d weight / d y and d weight / d x for each corner.
  double dwy[4] = {0.0, 0.0, 0.0, 0.0};
  double dwx[4] = {0.0, 0.0, 0.0, 0.0};
};

/// Bilinear taps at (y, x) on an H x W grid with zero padding.
inline BilinearTaps bilinear_taps(double y, double x, std::size_t height, std::size_t width) {
  BilinearTaps taps;
  const double y0f = std::floor(y);
  const double x0f = std::floor(x);
  const double fy = y - y0f;
  const double fx = x - x0f;
  const double wy[2] = {1.0 - fy, fy};
  const double wx[2] = {1.0 - fx, fx};
  const double dy[2] = {-1.0, 1.0};
  const double dx[2] = {-1.0, 1.0};
  int k = 0;
  for (int a = 0; a < 2; ++a) {
    for (int b = 0; b < 2; ++b, ++k) {
      const double yy = y0f + a;
      const double xx = x0f + b;
      if (yy < 0.0 || xx < 0.0 || yy > static_cast<double>(height) - 1.0 ||
          xx > static_cast<double>(width) - 1.0) {
        continue;
      }
      taps.index[k] = static_cast<std::size_t>(yy) * width + static_cast<std::size_t>(xx);
      taps.weight[k] = wy[a] * wx[b];
      taps.dwy[k] = dy[a] * wx[b];
      taps.dwx[k] = wy[a] * dx[b];
    }
  }
  return taps;
}

namespace serial {

/// out[n, :] = x[n, :] * w (+ bias). x is [rows, in], w is [in, out].
template <typename T>
void linear(std::span<const T> x, std::span<const T> w, std::span<const T> bias, std::span<T> out,
            std::size_t rows, std::size_t in, std::size_t out_cols);

/// Grouped linear: channel groups map independently through w[g, in_g, out_g].
template <typename T>
void grouped_linear(std::span<const T> x, std::span<const T> w, std::span<T> out, std::size_t rows,
                    std::size_t groups, std::size_t in_g, std::size_t out_g);

/// 2-D convolution on a single (H, W, Cin) image; w is [K, K, Cin, Cout].
template <typename T>
void conv2d(std::span<const T> x, std::span<const T> w, std::span<const T> bias, std::span<T> out,
            std::size_t height, std::size_t width, std::size_t in_ch, std::size_t out_ch,
            std::size_t kernel, std::size_t stride, std::size_t pad);

/// Deformable aggregation for one image. values is (H, W, C); offsets is
/// (H, W, heads, samples, 2) holding (dy, dx); weights is (H, W, heads, samples).
template <typename T>
void deform_aggregate(std::span<const T> values, std::span<const T> offsets, std::span<const T> weights,
                      std::span<T> out, const DeformGeometry& geo);

/// Full softmax attention over all N positions, per head, with logits scaled
/// by 1 / rho. q, k, v, out are (N, C); head h owns channels [h*C/heads, (h+1)*C/heads).
template <typename T>
void dense_attention(std::span<const T> q, std::span<const T> k, std::span<const T> v, std::span<T> out,
                     std::size_t positions, std::size_t channels, std::size_t heads, double rho);

}  // namespace serial

namespace omp {

template <typename T>
void linear(std::span<const T> x, std::span<const T> w, std::span<const T> bias, std::span<T> out,
            std::size_t rows, std::size_t in, std::size_t out_cols);

template <typename T>
void grouped_linear(std::span<const T> x, std::span<const T> w, std::span<T> out, std::size_t rows,
                    std::size_t groups, std::size_t in_g, std::size_t out_g);

template <typename T>
void conv2d(std::span<const T> x, std::span<const T> w, std::span<const T> bias, std::span<T> out,
            std::size_t height, std::size_t width, std::size_t in_ch, std::size_t out_ch,
            std::size_t kernel, std::size_t stride, std::size_t pad);

template <typename T>
void deform_aggregate(std::span<const T> values, std::span<const T> offsets, std::span<const T> weights,
                      std::span<T> out, const DeformGeometry& geo);

template <typename T>
void dense_attention(std::span<const T> q, std::span<const T> k, std::span<const T> v, std::span<T> out,
                     std::size_t positions, std::size_t channels, std::size_t heads, double rho);

}  // namespace omp

inline std::size_t conv_out_extent(std::size_t in, std::size_t kernel, std::size_t stride, std::size_t pad) {
  return (in + 2 * pad - kernel) / stride + 1;
}

}  // namespace reltrack::kernels
