// Copyright 2026 The reltrack Authors
// SPDX-License-Identifier: Apache-2.0

#include "kernel_rows.hpp"

namespace reltrack::kernels::omp {

template <typename T>
void linear(std::span<const T> x, std::span<const T> w, std::span<const T> bias, std::span<T> out,
            std::size_t rows, std::size_t in, std::size_t out_cols) {
  const auto n_rows = static_cast<std::ptrdiff_t>(rows);
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t ni = 0; ni < n_rows; ++ni) {
    const auto n = static_cast<std::size_t>(ni);
    detail::linear_row(x.data() + n * in, w, bias, out.data() + n * out_cols, in, out_cols);
  }
}

template <typename T>
void grouped_linear(std::span<const T> x, std::span<const T> w, std::span<T> out, std::size_t rows,
                    std::size_t groups, std::size_t in_g, std::size_t out_g) {
  const auto n_rows = static_cast<std::ptrdiff_t>(rows);
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t ni = 0; ni < n_rows; ++ni) {
    const auto n = static_cast<std::size_t>(ni);
    detail::grouped_linear_row(x.data() + n * groups * in_g, w, out.data() + n * groups * out_g, groups, in_g,
                               out_g);
  }
}

template <typename T>
void conv2d(std::span<const T> x, std::span<const T> w, std::span<const T> bias, std::span<T> out,
            std::size_t height, std::size_t width, std::size_t in_ch, std::size_t out_ch, std::size_t kernel,
            std::size_t stride, std::size_t pad) {
  const std::size_t oh = conv_out_extent(height, kernel, stride, pad);
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t oyi = 0; oyi < static_cast<std::ptrdiff_t>(oh); ++oyi) {
    const auto oy = static_cast<std::size_t>(oyi);
    detail::conv2d_row(x, w, bias, out, oy, height, width, in_ch, out_ch, kernel, stride, pad);
  }
}

template <typename T>
void deform_aggregate(std::span<const T> values, std::span<const T> offsets, std::span<const T> weights,
                      std::span<T> out, const DeformGeometry& geo) {
  const std::size_t queries = geo.height * geo.width;
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t q = 0; q < static_cast<std::ptrdiff_t>(queries); ++q) {
    detail::deform_query(values, offsets, weights, out, geo, static_cast<std::size_t>(q));
  }
}

template <typename T>
void dense_attention(std::span<const T> q, std::span<const T> k, std::span<const T> v, std::span<T> out,
                     std::size_t positions, std::size_t channels, std::size_t heads, double rho) {
#pragma omp parallel
  {
    std::vector<T> logits;
#pragma omp for schedule(static)
    for (std::ptrdiff_t n = 0; n < static_cast<std::ptrdiff_t>(positions); ++n) {
      detail::dense_query(q, k, v, out, static_cast<std::size_t>(n), positions, channels, heads, rho, logits);
    }
  }
}

#define RELTRACK_INSTANTIATE(T)                                                                               \
  template void linear<T>(std::span<const T>, std::span<const T>, std::span<const T>, std::span<T>,           \
                          std::size_t, std::size_t, std::size_t);                                             \
  template void grouped_linear<T>(std::span<const T>, std::span<const T>, std::span<T>, std::size_t,          \
                                  std::size_t, std::size_t, std::size_t);                                     \
  template void conv2d<T>(std::span<const T>, std::span<const T>, std::span<const T>, std::span<T>,           \
                          std::size_t, std::size_t, std::size_t, std::size_t, std::size_t, std::size_t,       \
                          std::size_t);                                                                       \
  template void deform_aggregate<T>(std::span<const T>, std::span<const T>, std::span<const T>, std::span<T>, \
                                    const DeformGeometry&);                                                   \
  template void dense_attention<T>(std::span<const T>, std::span<const T>, std::span<const T>, std::span<T>,  \
                                   std::size_t, std::size_t, std::size_t, double);

RELTRACK_INSTANTIATE(float)
RELTRACK_INSTANTIATE(double)

}  // namespace reltrack::kernels::omp
