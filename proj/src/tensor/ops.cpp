// Copyright 2026 The reltrack Authors
// SPDX-License-Identifier: Apache-2.0

#include "reltrack/tensor/ops.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "reltrack/tensor/sampling.hpp"

namespace reltrack {

std::string shape_string(const Shape& shape) {
  std::string s = "[";
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) s += ",";
    s += std::to_string(shape[i]);
  }
  return s + "]";
}

namespace {

std::size_t last_dim(const Shape& s) { return s.empty() ? 1 : s.back(); }

// Neumaier-compensated sum over a strided range. Full reductions feed scalar
// objectives directly, so their rounding sets the floor of finite-difference checks.
template <typename T, typename F>
T accurate_sum(std::size_t n, F&& term) {
  T s{0}, c{0};
  for (std::size_t i = 0; i < n; ++i) {
    const T v = term(i);
    const T t = s + v;
    c += std::abs(s) >= std::abs(v) ? (s - t) + v : (v - t) + s;
    s = t;
  }
  return s + c;
}
std::size_t leading_rows(const Shape& s) { return s.empty() ? 1 : shape_size(s) / std::max<std::size_t>(s.back(), 1); }

void require(bool ok, const std::string& msg) {
  if (!ok) throw DimensionError(msg);
}

void require_same(const Shape& a, const Shape& b, const char* op) {
  require(a == b, std::string(op) + ": shape mismatch " + shape_string(a) + " vs " + shape_string(b));
}

template <typename T>
void run_linear(kernels::Exec exec, std::span<const T> x, std::span<const T> w, std::span<const T> b,
                std::span<T> out, std::size_t rows, std::size_t in, std::size_t cols) {
  if (exec == kernels::Exec::kParallel) {
    kernels::omp::linear<T>(x, w, b, out, rows, in, cols);
  } else {
    kernels::serial::linear<T>(x, w, b, out, rows, in, cols);
  }
}

template <typename T>
void add_into(std::span<T> dst, std::span<const T> src) {
  for (std::size_t i = 0; i < dst.size(); ++i) dst[i] += src[i];
}

template <typename T, typename Fn>
Var unary(Graph<T>& g, Var x, const char* name, Fn&& fwd_bwd) {
  // fwd_bwd(v) -> pair(value, derivative); derivative is recomputed from x in backward.
  const Tensor<T>& xv = g.value(x);
  Tensor<T> out(xv.shape());
  for (std::size_t i = 0; i < xv.size(); ++i) out[i] = fwd_bwd(xv[i]).first;
  return g.record(
      std::move(out),
      [x, fwd_bwd](Graph<T>& gr, const Tensor<T>& go) {
        const Tensor<T>& xv2 = gr.value(x);
        auto dx = gr.grad_buffer(x);
        for (std::size_t i = 0; i < go.size(); ++i) dx[i] += go[i] * fwd_bwd(xv2[i]).second;
      },
      name);
}

}  // namespace

template <typename T>
Var linear_map(Graph<T>& g, Var x, Var w, std::optional<Var> b) {
  const Shape& xs = g.shape(x);
  const Shape& ws = g.shape(w);
  require(ws.size() == 2, "linear_map: weight must be 2-D, got " + shape_string(ws));
  const std::size_t in = last_dim(xs);
  require(in == ws[0], "linear_map: inner dimensions disagree " + shape_string(xs) + " x " + shape_string(ws));
  const std::size_t cols = ws[1];
  if (b) require(g.shape(*b) == Shape{cols}, "linear_map: bias shape " + shape_string(g.shape(*b)));
  const std::size_t rows = leading_rows(xs);
  Shape os = xs;
  os.back() = cols;
  Tensor<T> out(os);
  std::span<const T> bias;
  if (b) bias = g.value(*b).data();
  run_linear<T>(g.exec(), g.value(x).data(), g.value(w).data(), bias, out.data(), rows, in, cols);
  return g.record(
      std::move(out),
      [x, w, b, rows, in, cols](Graph<T>& gr, const Tensor<T>& go) {
        const auto xv = gr.value(x).data();
        const auto wv = gr.value(w).data();
        auto dx = gr.grad_buffer(x);
        for (std::size_t n = 0; n < rows; ++n) {
          for (std::size_t i = 0; i < in; ++i) {
            T acc{0};
            for (std::size_t j = 0; j < cols; ++j) acc += go[n * cols + j] * wv[i * cols + j];
            dx[n * in + i] += acc;
          }
        }
        auto dw = gr.grad_buffer(w);
        for (std::size_t n = 0; n < rows; ++n) {
          for (std::size_t i = 0; i < in; ++i) {
            const T xi = xv[n * in + i];
            for (std::size_t j = 0; j < cols; ++j) dw[i * cols + j] += xi * go[n * cols + j];
          }
        }
        if (b) {
          auto db = gr.grad_buffer(*b);
          for (std::size_t n = 0; n < rows; ++n) {
            for (std::size_t j = 0; j < cols; ++j) db[j] += go[n * cols + j];
          }
        }
      },
      "linear_map");
}

template <typename T>
Var grouped_linear(Graph<T>& g, Var x, Var w) {
  const Shape& xs = g.shape(x);
  const Shape& ws = g.shape(w);
  require(ws.size() == 3, "grouped_linear: weight must be [groups, in, out]");
  const std::size_t groups = ws[0], in_g = ws[1], out_g = ws[2];
  require(last_dim(xs) == groups * in_g, "grouped_linear: channel count disagrees with weight groups");
  const std::size_t rows = leading_rows(xs);
  Shape os = xs;
  os.back() = groups * out_g;
  Tensor<T> out(os);
  if (g.exec() == kernels::Exec::kParallel) {
    kernels::omp::grouped_linear<T>(g.value(x).data(), g.value(w).data(), out.data(), rows, groups, in_g, out_g);
  } else {
    kernels::serial::grouped_linear<T>(g.value(x).data(), g.value(w).data(), out.data(), rows, groups, in_g,
                                       out_g);
  }
  return g.record(
      std::move(out),
      [x, w, rows, groups, in_g, out_g](Graph<T>& gr, const Tensor<T>& go) {
        const auto xv = gr.value(x).data();
        const auto wv = gr.value(w).data();
        auto dx = gr.grad_buffer(x);
        auto dw = gr.grad_buffer(w);
        const std::size_t cin = groups * in_g, cout = groups * out_g;
        for (std::size_t n = 0; n < rows; ++n) {
          for (std::size_t gi = 0; gi < groups; ++gi) {
            for (std::size_t i = 0; i < in_g; ++i) {
              const std::size_t xi = n * cin + gi * in_g + i;
              T acc{0};
              for (std::size_t j = 0; j < out_g; ++j) {
                const T gj = go[n * cout + gi * out_g + j];
                const std::size_t wi = (gi * in_g + i) * out_g + j;
                acc += gj * wv[wi];
                dw[wi] += xv[xi] * gj;
              }
              dx[xi] += acc;
            }
          }
        }
      },
      "grouped_linear");
}

template <typename T>
Var matmul(Graph<T>& g, Var a, Var b) {
  const Shape& as = g.shape(a);
  const Shape& bs = g.shape(b);
  require(as.size() == 2 && bs.size() == 2 && as[1] == bs[0],
          "matmul: incompatible " + shape_string(as) + " x " + shape_string(bs));
  const std::size_t m = as[0], k = as[1], n = bs[1];
  Tensor<T> out(Shape{m, n});
  run_linear<T>(g.exec(), g.value(a).data(), g.value(b).data(), {}, out.data(), m, k, n);
  return g.record(
      std::move(out),
      [a, b, m, k, n](Graph<T>& gr, const Tensor<T>& go) {
        const auto av = gr.value(a).data();
        const auto bv = gr.value(b).data();
        auto da = gr.grad_buffer(a);
        for (std::size_t i = 0; i < m; ++i) {
          for (std::size_t p = 0; p < k; ++p) {
            T acc{0};
            for (std::size_t j = 0; j < n; ++j) acc += go[i * n + j] * bv[p * n + j];
            da[i * k + p] += acc;
          }
        }
        auto db = gr.grad_buffer(b);
        for (std::size_t i = 0; i < m; ++i) {
          for (std::size_t p = 0; p < k; ++p) {
            const T ai = av[i * k + p];
            for (std::size_t j = 0; j < n; ++j) db[p * n + j] += ai * go[i * n + j];
          }
        }
      },
      "matmul");
}

template <typename T>
Var transpose(Graph<T>& g, Var a) {
  const Shape& as = g.shape(a);
  require(as.size() == 2, "transpose: expects 2-D");
  const std::size_t m = as[0], n = as[1];
  const auto av = g.value(a).data();
  Tensor<T> out(Shape{n, m});
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < n; ++j) out[j * m + i] = av[i * n + j];
  return g.record(
      std::move(out),
      [a, m, n](Graph<T>& gr, const Tensor<T>& go) {
        auto da = gr.grad_buffer(a);
        for (std::size_t i = 0; i < m; ++i)
          for (std::size_t j = 0; j < n; ++j) da[i * n + j] += go[j * m + i];
      },
      "transpose");
}

template <typename T>
Var add(Graph<T>& g, Var a, Var b) {
  require_same(g.shape(a), g.shape(b), "add");
  Tensor<T> out = g.value(a);
  add_into<T>(out.data(), g.value(b).data());
  return g.record(
      std::move(out),
      [a, b](Graph<T>& gr, const Tensor<T>& go) {
        add_into<T>(gr.grad_buffer(a), go.data());
        add_into<T>(gr.grad_buffer(b), go.data());
      },
      "add");
}

template <typename T>
Var sub(Graph<T>& g, Var a, Var b) {
  require_same(g.shape(a), g.shape(b), "sub");
  Tensor<T> out = g.value(a);
  const auto bv = g.value(b).data();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] -= bv[i];
  return g.record(
      std::move(out),
      [a, b](Graph<T>& gr, const Tensor<T>& go) {
        add_into<T>(gr.grad_buffer(a), go.data());
        auto db = gr.grad_buffer(b);
        for (std::size_t i = 0; i < go.size(); ++i) db[i] -= go[i];
      },
      "sub");
}

template <typename T>
Var mul(Graph<T>& g, Var a, Var b) {
  require_same(g.shape(a), g.shape(b), "mul");
  Tensor<T> out = g.value(a);
  const auto bv = g.value(b).data();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] *= bv[i];
  return g.record(
      std::move(out),
      [a, b](Graph<T>& gr, const Tensor<T>& go) {
        const auto av = gr.value(a).data();
        const auto bv2 = gr.value(b).data();
        auto da = gr.grad_buffer(a);
        for (std::size_t i = 0; i < go.size(); ++i) da[i] += go[i] * bv2[i];
        auto db = gr.grad_buffer(b);
        for (std::size_t i = 0; i < go.size(); ++i) db[i] += go[i] * av[i];
      },
      "mul");
}

template <typename T>
Var scale(Graph<T>& g, Var a, T factor) {
  return unary<T>(g, a, "scale", [factor](T v) { return std::pair<T, T>{v * factor, factor}; });
}

template <typename T>
Var add_scalar(Graph<T>& g, Var a, T shift) {
  return unary<T>(g, a, "add_scalar", [shift](T v) { return std::pair<T, T>{v + shift, T{1}}; });
}

template <typename T>
Var add_broadcast(Graph<T>& g, Var x, Var v) {
  const Shape& xs = g.shape(x);
  const Shape& vs = g.shape(v);
  require(xs.size() >= 2 && vs.size() == 2 && vs[0] == xs[0] && vs[1] == xs.back(),
          "add_broadcast: " + shape_string(xs) + " vs " + shape_string(vs));
  const std::size_t batch = xs[0], c = xs.back();
  const std::size_t per = shape_size(xs) / (batch * c);
  Tensor<T> out = g.value(x);
  const auto vv = g.value(v).data();
  for (std::size_t b = 0; b < batch; ++b)
    for (std::size_t p = 0; p < per; ++p)
      for (std::size_t k = 0; k < c; ++k) out[(b * per + p) * c + k] += vv[b * c + k];
  return g.record(
      std::move(out),
      [x, v, batch, per, c](Graph<T>& gr, const Tensor<T>& go) {
        add_into<T>(gr.grad_buffer(x), go.data());
        auto dv = gr.grad_buffer(v);
        for (std::size_t b = 0; b < batch; ++b)
          for (std::size_t p = 0; p < per; ++p)
            for (std::size_t k = 0; k < c; ++k) dv[b * c + k] += go[(b * per + p) * c + k];
      },
      "add_broadcast");
}

template <typename T>
Var relu(Graph<T>& g, Var x) {
  return unary<T>(g, x, "relu", [](T v) { return v > T{0} ? std::pair<T, T>{v, T{1}} : std::pair<T, T>{T{0}, T{0}}; });
}

template <typename T>
Var sigmoid(Graph<T>& g, Var x) {
  return unary<T>(g, x, "sigmoid", [](T v) {
    const T s = v >= T{0} ? T{1} / (T{1} + std::exp(-v)) : std::exp(v) / (T{1} + std::exp(v));
    return std::pair<T, T>{s, s * (T{1} - s)};
  });
}

template <typename T>
Var exp(Graph<T>& g, Var x) {
  return unary<T>(g, x, "exp", [](T v) {
    const T e = std::exp(v);
    return std::pair<T, T>{e, e};
  });
}

template <typename T>
Var log(Graph<T>& g, Var x) {
  return unary<T>(g, x, "log", [](T v) { return std::pair<T, T>{std::log(v), T{1} / v}; });
}

template <typename T>
Var abs(Graph<T>& g, Var x) {
  return unary<T>(g, x, "abs", [](T v) {
    return std::pair<T, T>{std::abs(v), v > T{0} ? T{1} : (v < T{0} ? T{-1} : T{0})};
  });
}

template <typename T>
Var clamp(Graph<T>& g, Var x, T lo, T hi) {
  return unary<T>(g, x, "clamp", [lo, hi](T v) {
    if (v < lo) return std::pair<T, T>{lo, T{0}};
    if (v > hi) return std::pair<T, T>{hi, T{0}};
    return std::pair<T, T>{v, T{1}};
  });
}

template <typename T>
Var softmax(Graph<T>& g, Var x, std::size_t axis) {
  const Shape& xs = g.shape(x);
  require(axis < xs.size(), "softmax: axis " + std::to_string(axis) + " out of range for " + shape_string(xs));
  std::size_t outer = 1, inner = 1;
  for (std::size_t i = 0; i < axis; ++i) outer *= xs[i];
  for (std::size_t i = axis + 1; i < xs.size(); ++i) inner *= xs[i];
  const std::size_t n = xs[axis];
  const auto xv = g.value(x).data();
  Tensor<T> out(xs);
  for (std::size_t o = 0; o < outer; ++o) {
    for (std::size_t in = 0; in < inner; ++in) {
      const std::size_t base = o * n * inner + in;
      T mx = xv[base];
      for (std::size_t k = 1; k < n; ++k) mx = std::max(mx, xv[base + k * inner]);
      T denom{0};
      for (std::size_t k = 0; k < n; ++k) {
        const T e = std::exp(xv[base + k * inner] - mx);
        out[base + k * inner] = e;
        denom += e;
      }
      for (std::size_t k = 0; k < n; ++k) out[base + k * inner] /= denom;
    }
  }
  Tensor<T> y = out;
  return g.record(
      std::move(out),
      [x, y = std::move(y), outer, inner, n](Graph<T>& gr, const Tensor<T>& go) {
        auto dx = gr.grad_buffer(x);
        for (std::size_t o = 0; o < outer; ++o) {
          for (std::size_t in = 0; in < inner; ++in) {
            const std::size_t base = o * n * inner + in;
            T dot{0};
            for (std::size_t k = 0; k < n; ++k) dot += go[base + k * inner] * y[base + k * inner];
            for (std::size_t k = 0; k < n; ++k) {
              const std::size_t i = base + k * inner;
              dx[i] += y[i] * (go[i] - dot);
            }
          }
        }
      },
      "softmax");
}

template <typename T>
Var layer_norm(Graph<T>& g, Var x, T epsilon) {
  const Shape& xs = g.shape(x);
  require(xs.size() >= 2 && shape_size(xs) > 0, "layer_norm: needs a batch axis and at least one element");
  const std::size_t batch = xs[0];
  const std::size_t m = shape_size(xs) / batch;
  const auto xv = g.value(x).data();
  Tensor<T> out(xs);
  std::vector<T> inv_std(batch);
  for (std::size_t b = 0; b < batch; ++b) {
    const T* p = xv.data() + b * m;
    const T mu = accurate_sum<T>(m, [p](std::size_t i) { return p[i]; }) / static_cast<T>(m);
    const T var = accurate_sum<T>(m, [p, mu](std::size_t i) { return (p[i] - mu) * (p[i] - mu); }) / static_cast<T>(m);
    inv_std[b] = T{1} / std::sqrt(var + epsilon);
    for (std::size_t i = 0; i < m; ++i) out[b * m + i] = (p[i] - mu) * inv_std[b];
  }
  Tensor<T> y = out;
  return g.record(
      std::move(out),
      [x, y = std::move(y), inv_std = std::move(inv_std), batch, m](Graph<T>& gr, const Tensor<T>& go) {
        auto dx = gr.grad_buffer(x);
        for (std::size_t b = 0; b < batch; ++b) {
          T gsum{0}, gy{0};
          for (std::size_t i = 0; i < m; ++i) {
            gsum += go[b * m + i];
            gy += go[b * m + i] * y[b * m + i];
          }
          const T mm = static_cast<T>(m);
          for (std::size_t i = 0; i < m; ++i) {
            const std::size_t k = b * m + i;
            dx[k] += inv_std[b] / mm * (mm * go[k] - gsum - y[k] * gy);
          }
        }
      },
      "layer_norm");
}

template <typename T>
Var sum(Graph<T>& g, Var x) {
  const auto xv = g.value(x).data();
  const T s = accurate_sum<T>(xv.size(), [xv](std::size_t i) { return xv[i]; });
  return g.record(
      Tensor<T>::scalar(s),
      [x](Graph<T>& gr, const Tensor<T>& go) {
        auto dx = gr.grad_buffer(x);
        for (auto& d : dx) d += go[0];
      },
      "sum");
}

template <typename T>
Var mean(Graph<T>& g, Var x) {
  const std::size_t n = g.value(x).size();
  require(n > 0, "mean: empty tensor");
  return scale<T>(g, sum<T>(g, x), T{1} / static_cast<T>(n));
}

template <typename T>
Var reshape(Graph<T>& g, Var x, Shape shape) {
  Tensor<T> out = g.value(x).reshaped(std::move(shape));
  return g.record(
      std::move(out), [x](Graph<T>& gr, const Tensor<T>& go) { add_into<T>(gr.grad_buffer(x), go.data()); },
      "reshape");
}

template <typename T>
Var weighted_pool(Graph<T>& g, Var x, Var w) {
  const Shape& xs = g.shape(x);
  const Shape& ws = g.shape(w);
  require(xs.size() == 3 && ws.size() == 2 && ws[0] == xs[0] && ws[1] == xs[1],
          "weighted_pool: " + shape_string(xs) + " vs " + shape_string(ws));
  const std::size_t batch = xs[0], n = xs[1], c = xs[2];
  const auto xv = g.value(x).data();
  const auto wv = g.value(w).data();
  Tensor<T> out(Shape{batch, c});
  for (std::size_t b = 0; b < batch; ++b)
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t k = 0; k < c; ++k) out[b * c + k] += wv[b * n + i] * xv[(b * n + i) * c + k];
  return g.record(
      std::move(out),
      [x, w, batch, n, c](Graph<T>& gr, const Tensor<T>& go) {
        const auto xv2 = gr.value(x).data();
        const auto wv2 = gr.value(w).data();
        auto dx = gr.grad_buffer(x);
        auto dw = gr.grad_buffer(w);
        for (std::size_t b = 0; b < batch; ++b) {
          for (std::size_t i = 0; i < n; ++i) {
            T acc{0};
            for (std::size_t k = 0; k < c; ++k) {
              dx[(b * n + i) * c + k] += wv2[b * n + i] * go[b * c + k];
              acc += go[b * c + k] * xv2[(b * n + i) * c + k];
            }
            dw[b * n + i] += acc;
          }
        }
      },
      "weighted_pool");
}

template <typename T>
Var gather_rows(Graph<T>& g, Var x, const std::vector<std::size_t>& rows) {
  const Shape& xs = g.shape(x);
  require(xs.size() == 2, "gather_rows: expects [N, C]");
  const std::size_t n = xs[0], c = xs[1];
  Tensor<T> out(Shape{rows.size(), c});
  const auto xv = g.value(x).data();
  for (std::size_t r = 0; r < rows.size(); ++r) {
    require(rows[r] < n, "gather_rows: row index out of range");
    std::copy_n(xv.data() + rows[r] * c, c, out.data().data() + r * c);
  }
  return g.record(
      std::move(out),
      [x, rows, c](Graph<T>& gr, const Tensor<T>& go) {
        auto dx = gr.grad_buffer(x);
        for (std::size_t r = 0; r < rows.size(); ++r)
          for (std::size_t k = 0; k < c; ++k) dx[rows[r] * c + k] += go[r * c + k];
      },
      "gather_rows");
}

template <typename T>
Var slice_channels(Graph<T>& g, Var x, std::size_t begin, std::size_t end) {
  const Shape& xs = g.shape(x);
  const std::size_t c = last_dim(xs);
  require(begin < end && end <= c, "slice_channels: bad range");
  const std::size_t rows = leading_rows(xs), w = end - begin;
  Shape os = xs;
  os.back() = w;
  Tensor<T> out(os);
  const auto xv = g.value(x).data();
  for (std::size_t r = 0; r < rows; ++r) std::copy_n(xv.data() + r * c + begin, w, out.data().data() + r * w);
  return g.record(
      std::move(out),
      [x, rows, c, begin, w](Graph<T>& gr, const Tensor<T>& go) {
        auto dx = gr.grad_buffer(x);
        for (std::size_t r = 0; r < rows; ++r)
          for (std::size_t k = 0; k < w; ++k) dx[r * c + begin + k] += go[r * w + k];
      },
      "slice_channels");
}

template <typename T>
Var concat_channels(Graph<T>& g, const std::vector<Var>& parts) {
  require(!parts.empty(), "concat_channels: no inputs");
  const Shape& first = g.shape(parts[0]);
  const std::size_t rows = leading_rows(first);
  std::vector<std::size_t> widths;
  std::size_t total = 0;
  for (Var p : parts) {
    const Shape& s = g.shape(p);
    require(s.size() == first.size() && leading_rows(s) == rows, "concat_channels: leading shapes disagree");
    widths.push_back(last_dim(s));
    total += widths.back();
  }
  Shape os = first;
  os.back() = total;
  Tensor<T> out(os);
  std::size_t off = 0;
  for (std::size_t i = 0; i < parts.size(); ++i) {
    const auto pv = g.value(parts[i]).data();
    for (std::size_t r = 0; r < rows; ++r)
      std::copy_n(pv.data() + r * widths[i], widths[i], out.data().data() + r * total + off);
    off += widths[i];
  }
  return g.record(
      std::move(out),
      [parts, widths, rows, total](Graph<T>& gr, const Tensor<T>& go) {
        std::size_t o = 0;
        for (std::size_t i = 0; i < parts.size(); ++i) {
          auto dp = gr.grad_buffer(parts[i]);
          for (std::size_t r = 0; r < rows; ++r)
            for (std::size_t k = 0; k < widths[i]; ++k) dp[r * widths[i] + k] += go[r * total + o + k];
          o += widths[i];
        }
      },
      "concat_channels");
}

template <typename T>
Var conv2d(Graph<T>& g, Var x, Var w, Var b, std::size_t stride, std::size_t pad) {
  const Shape& xs = g.shape(x);
  const Shape& ws = g.shape(w);
  require(xs.size() == 4, "conv2d: input must be [B, H, W, C]");
  require(ws.size() == 4 && ws[0] == ws[1] && ws[2] == xs[3], "conv2d: weight must be [K, K, Cin, Cout]");
  require(stride >= 1, "conv2d: stride must be positive");
  const std::size_t batch = xs[0], h = xs[1], wd = xs[2], cin = xs[3];
  const std::size_t k = ws[0], cout = ws[3];
  require(g.shape(b) == Shape{cout}, "conv2d: bias must be [Cout]");
  require(h + 2 * pad >= k && wd + 2 * pad >= k, "conv2d: kernel larger than padded input");
  const std::size_t oh = kernels::conv_out_extent(h, k, stride, pad);
  const std::size_t ow = kernels::conv_out_extent(wd, k, stride, pad);
  Tensor<T> out(Shape{batch, oh, ow, cout});
  const auto xv = g.value(x).data();
  for (std::size_t bi = 0; bi < batch; ++bi) {
    auto xin = xv.subspan(bi * h * wd * cin, h * wd * cin);
    auto o = out.data().subspan(bi * oh * ow * cout, oh * ow * cout);
    if (g.exec() == kernels::Exec::kParallel) {
      kernels::omp::conv2d<T>(xin, g.value(w).data(), g.value(b).data(), o, h, wd, cin, cout, k, stride, pad);
    } else {
      kernels::serial::conv2d<T>(xin, g.value(w).data(), g.value(b).data(), o, h, wd, cin, cout, k, stride, pad);
    }
  }
  return g.record(
      std::move(out),
      [=](Graph<T>& gr, const Tensor<T>& go) {
        const auto xv2 = gr.value(x).data();
        const auto wv = gr.value(w).data();
        auto dx = gr.grad_buffer(x);
        auto dw = gr.grad_buffer(w);
        auto db = gr.grad_buffer(b);
        for (std::size_t bi = 0; bi < batch; ++bi) {
          for (std::size_t oy = 0; oy < oh; ++oy) {
            for (std::size_t ox = 0; ox < ow; ++ox) {
              const T* gp = go.data().data() + ((bi * oh + oy) * ow + ox) * cout;
              for (std::size_t c = 0; c < cout; ++c) db[c] += gp[c];
              for (std::size_t ky = 0; ky < k; ++ky) {
                const long iy = static_cast<long>(oy * stride + ky) - static_cast<long>(pad);
                if (iy < 0 || iy >= static_cast<long>(h)) continue;
                for (std::size_t kx = 0; kx < k; ++kx) {
                  const long ix = static_cast<long>(ox * stride + kx) - static_cast<long>(pad);
                  if (ix < 0 || ix >= static_cast<long>(wd)) continue;
                  const std::size_t xoff =
                      ((bi * h + static_cast<std::size_t>(iy)) * wd + static_cast<std::size_t>(ix)) * cin;
                  const std::size_t woff = (ky * k + kx) * cin * cout;
                  for (std::size_t ci = 0; ci < cin; ++ci) {
                    T acc{0};
                    const T xval = xv2[xoff + ci];
                    for (std::size_t c = 0; c < cout; ++c) {
                      acc += gp[c] * wv[woff + ci * cout + c];
                      dw[woff + ci * cout + c] += xval * gp[c];
                    }
                    dx[xoff + ci] += acc;
                  }
                }
              }
            }
          }
        }
      },
      "conv2d");
}

template <typename T>
Var deform_aggregate(Graph<T>& g, Var values, Var offsets, Var weights) {
  const Shape& vs = g.shape(values);
  const Shape& os = g.shape(offsets);
  const Shape& ws = g.shape(weights);
  require(vs.size() == 4, "deform_aggregate: values must be [B, H, W, C]");
  require(os.size() == 6 && os[5] == 2, "deform_aggregate: offsets must be [B, H, W, heads, samples, 2]");
  require(ws.size() == 5, "deform_aggregate: weights must be [B, H, W, heads, samples]");
  kernels::DeformGeometry geo{vs[1], vs[2], vs[3], os[3], os[4]};
  require(os[0] == vs[0] && os[1] == vs[1] && os[2] == vs[2], "deform_aggregate: offsets grid disagrees");
  require(Shape(ws.begin(), ws.end()) == Shape(os.begin(), os.end() - 1), "deform_aggregate: weights disagree");
  require(geo.heads >= 1 && geo.channels % geo.heads == 0, "deform_aggregate: channels not divisible by heads");
  const std::size_t batch = vs[0];
  const std::size_t map_n = geo.height * geo.width * geo.channels;
  const std::size_t slot_n = geo.height * geo.width * geo.heads * geo.samples;
  Tensor<T> out(vs);
  for (std::size_t b = 0; b < batch; ++b) {
    auto v = g.value(values).data().subspan(b * map_n, map_n);
    auto o = g.value(offsets).data().subspan(b * slot_n * 2, slot_n * 2);
    auto w = g.value(weights).data().subspan(b * slot_n, slot_n);
    auto dst = out.data().subspan(b * map_n, map_n);
    if (g.exec() == kernels::Exec::kParallel) {
      kernels::omp::deform_aggregate<T>(v, o, w, dst, geo);
    } else {
      kernels::serial::deform_aggregate<T>(v, o, w, dst, geo);
    }
  }
  return g.record(
      std::move(out),
      [values, offsets, weights, geo, batch, map_n, slot_n](Graph<T>& gr, const Tensor<T>& go) {
        const auto vv = gr.value(values).data();
        const auto ov = gr.value(offsets).data();
        const auto wv = gr.value(weights).data();
        auto dv = gr.grad_buffer(values);
        auto dof = gr.grad_buffer(offsets);
        auto dwt = gr.grad_buffer(weights);
        const std::size_t ch = geo.head_channels();
        for (std::size_t b = 0; b < batch; ++b) {
          for (std::size_t q = 0; q < geo.height * geo.width; ++q) {
            const double qy = static_cast<double>(q / geo.width);
            const double qx = static_cast<double>(q % geo.width);
            for (std::size_t h = 0; h < geo.heads; ++h) {
              const T* gq = go.data().data() + b * map_n + q * geo.channels + h * ch;
              for (std::size_t k = 0; k < geo.samples; ++k) {
                const std::size_t slot = b * slot_n + (q * geo.heads + h) * geo.samples + k;
                const double py = qy + static_cast<double>(ov[2 * slot]);
                const double px = qx + static_cast<double>(ov[2 * slot + 1]);
                const T a = wv[slot];
                const kernels::BilinearTaps taps = kernels::bilinear_taps(py, px, geo.height, geo.width);
                T dweight{0}, doy{0}, dox{0};
                for (int t = 0; t < 4; ++t) {
                  if (taps.weight[t] == 0.0 && taps.dwy[t] == 0.0 && taps.dwx[t] == 0.0) continue;
                  const std::size_t vbase = b * map_n + taps.index[t] * geo.channels + h * ch;
                  T gdotv{0};
                  for (std::size_t c = 0; c < ch; ++c) {
                    gdotv += gq[c] * vv[vbase + c];
                    dv[vbase + c] += a * static_cast<T>(taps.weight[t]) * gq[c];
                  }
                  dweight += static_cast<T>(taps.weight[t]) * gdotv;
                  doy += static_cast<T>(taps.dwy[t]) * gdotv;
                  dox += static_cast<T>(taps.dwx[t]) * gdotv;
                }
                dwt[slot] += dweight;
                dof[2 * slot] += a * doy;
                dof[2 * slot + 1] += a * dox;
              }
            }
          }
        }
      },
      "deform_aggregate");
}

template <typename T>
Tensor<T> bilinear_sample(const Tensor<T>& map, double y, double x) {
  require(map.rank() == 3, "bilinear_sample: map must be [H, W, C]");
  const std::size_t c = map.dim(2);
  Tensor<T> out(Shape{c});
  const kernels::BilinearTaps taps = kernels::bilinear_taps(y, x, map.dim(0), map.dim(1));
  for (int t = 0; t < 4; ++t) {
    if (taps.weight[t] == 0.0) continue;
    for (std::size_t k = 0; k < c; ++k) out[k] += static_cast<T>(taps.weight[t]) * map[taps.index[t] * c + k];
  }
  return out;
}

#define RELTRACK_OPS(T)                                                                 \
  template Var linear_map<T>(Graph<T>&, Var, Var, std::optional<Var>);                  \
  template Var grouped_linear<T>(Graph<T>&, Var, Var);                                  \
  template Var matmul<T>(Graph<T>&, Var, Var);                                          \
  template Var transpose<T>(Graph<T>&, Var);                                            \
  template Var add<T>(Graph<T>&, Var, Var);                                             \
  template Var sub<T>(Graph<T>&, Var, Var);                                             \
  template Var mul<T>(Graph<T>&, Var, Var);                                             \
  template Var scale<T>(Graph<T>&, Var, T);                                             \
  template Var add_scalar<T>(Graph<T>&, Var, T);                                        \
  template Var add_broadcast<T>(Graph<T>&, Var, Var);                                   \
  template Var relu<T>(Graph<T>&, Var);                                                 \
  template Var sigmoid<T>(Graph<T>&, Var);                                              \
  template Var exp<T>(Graph<T>&, Var);                                                  \
  template Var log<T>(Graph<T>&, Var);                                                  \
  template Var abs<T>(Graph<T>&, Var);                                                  \
  template Var clamp<T>(Graph<T>&, Var, T, T);                                          \
  template Var softmax<T>(Graph<T>&, Var, std::size_t);                                 \
  template Var layer_norm<T>(Graph<T>&, Var, T);                                        \
  template Var sum<T>(Graph<T>&, Var);                                                  \
  template Var mean<T>(Graph<T>&, Var);                                                 \
  template Var reshape<T>(Graph<T>&, Var, Shape);                                       \
  template Var weighted_pool<T>(Graph<T>&, Var, Var);                                   \
  template Var gather_rows<T>(Graph<T>&, Var, const std::vector<std::size_t>&);         \
  template Var slice_channels<T>(Graph<T>&, Var, std::size_t, std::size_t);             \
  template Var concat_channels<T>(Graph<T>&, const std::vector<Var>&);                  \
  template Var conv2d<T>(Graph<T>&, Var, Var, Var, std::size_t, std::size_t);           \
  template Var deform_aggregate<T>(Graph<T>&, Var, Var, Var);                           \
  template Tensor<T> bilinear_sample<T>(const Tensor<T>&, double, double);

RELTRACK_OPS(float)
RELTRACK_OPS(double)

}  // namespace reltrack
