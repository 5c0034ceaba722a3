// Copyright 2026 The reltrack Authors
// SPDX-License-Identifier: Apache-2.0

#include "reltrack/gte/gte.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "reltrack/tensor/sampling.hpp"

namespace reltrack::gte {

namespace {

void require(bool ok, const std::string& msg) {
  if (!ok) throw DimensionError(msg);
}

}  // namespace

template <typename T>
void DeformAttnParams<T>::validate() const {
  const std::size_t c = channels();
  require(heads >= 1 && samples >= 1, "deformable attention: heads and samples must be positive");
  require(c % heads == 0, "deformable attention: C=" + std::to_string(c) + " not divisible by heads");
  require(offset_w.shape() == Shape{c, 2 * heads * samples}, "deformable attention: offset projection shape");
  require(attn_w.shape() == Shape{c, heads * samples}, "deformable attention: attention projection shape");
  require(value_w.shape() == Shape{heads, c / heads, c / heads}, "deformable attention: value projection shape");
  require(out_w.shape() == Shape{c, c} && key_w.shape() == Shape{c, c}, "deformable attention: key/out shape");
}

template <typename T>
DeformAttnParams<T> DeformAttnParams<T>::init(std::size_t channels, std::size_t heads, std::size_t samples,
                                              Rng& rng) {
  require(heads >= 1 && channels % heads == 0, "deformable attention: C must be divisible by heads");
  DeformAttnParams p;
  p.heads = heads;
  p.samples = samples;
  const std::size_t ch = channels / heads;
  p.offset_w = zeros_param<T>(Shape{channels, 2 * heads * samples});
  p.offset_b = zeros_param<T>(Shape{2 * heads * samples});
  p.key_w = fan_in_uniform<T>(Shape{channels, channels}, channels, rng);
  p.attn_w = fan_in_uniform<T>(Shape{channels, heads * samples}, channels, rng);
  p.attn_b = zeros_param<T>(Shape{heads * samples});
  p.value_w = fan_in_uniform<T>(Shape{heads, ch, ch}, ch, rng);
  p.out_w = fan_in_uniform<T>(Shape{channels, channels}, channels, rng);
  return p;
}

template <typename T>
DeformAttnParams<T> DeformAttnParams<T>::identity(std::size_t channels, std::size_t heads, std::size_t samples) {
  require(heads >= 1 && channels % heads == 0, "deformable attention: C must be divisible by heads");
  DeformAttnParams p;
  p.heads = heads;
  p.samples = samples;
  const std::size_t ch = channels / heads;
  p.offset_w = zeros_param<T>(Shape{channels, 2 * heads * samples});
  p.offset_b = zeros_param<T>(Shape{2 * heads * samples});
  p.key_w = identity_param<T>(channels);
  p.attn_w = zeros_param<T>(Shape{channels, heads * samples});
  p.attn_b = zeros_param<T>(Shape{heads * samples});
  Tensor<T> v(Shape{heads, ch, ch});
  for (std::size_t h = 0; h < heads; ++h)
    for (std::size_t i = 0; i < ch; ++i) v[(h * ch + i) * ch + i] = T{1};
  p.value_w = Parameter<T>(std::move(v));
  p.out_w = identity_param<T>(channels);
  return p;
}

template <typename T>
DenseAttnParams<T> DenseAttnParams<T>::init(std::size_t channels, std::size_t heads, Rng& rng) {
  require(heads >= 1 && channels % heads == 0, "dense attention: C must be divisible by heads");
  DenseAttnParams p;
  p.heads = heads;
  p.rho = std::sqrt(static_cast<double>(channels / heads));
  p.query_w = fan_in_uniform<T>(Shape{channels, channels}, channels, rng);
  p.key_w = fan_in_uniform<T>(Shape{channels, channels}, channels, rng);
  p.value_w = fan_in_uniform<T>(Shape{channels, channels}, channels, rng);
  p.out_w = fan_in_uniform<T>(Shape{channels, channels}, channels, rng);
  return p;
}

template <typename T>
EncoderBlockParams<T> EncoderBlockParams<T>::init(std::size_t channels, std::size_t heads, std::size_t samples,
                                                  Rng& rng, std::size_t ffn_mult) {
  EncoderBlockParams p;
  p.attn = DeformAttnParams<T>::init(channels, heads, samples, rng);
  const std::size_t f = ffn_mult * channels;
  p.ffn_w1 = fan_in_uniform<T>(Shape{channels, f}, channels, rng);
  p.ffn_b1 = zeros_param<T>(Shape{f});
  p.ffn_w2 = fan_in_uniform<T>(Shape{f, channels}, f, rng);
  p.ffn_b2 = zeros_param<T>(Shape{channels});
  return p;
}

template <typename T>
std::vector<Parameter<T>*> EncoderBlockParams<T>::parameters() {
  auto ps = attn.parameters();
  ps.insert(ps.end(), {&ffn_w1, &ffn_b1, &ffn_w2, &ffn_b2});
  return ps;
}

template <typename T>
GteParams<T> GteParams<T>::init(std::size_t channels, std::size_t embedding_dim, std::size_t num_blocks,
                                std::size_t heads, std::size_t samples, Rng& rng) {
  require(num_blocks >= 1, "gte: at least one encoder block is required");
  GteParams p;
  for (std::size_t i = 0; i < num_blocks; ++i) {
    p.blocks.push_back(EncoderBlockParams<T>::init(channels, heads, samples, rng));
  }
  p.head_w = fan_in_uniform<T>(Shape{channels, embedding_dim}, channels, rng);
  p.head_b = zeros_param<T>(Shape{embedding_dim});
  return p;
}

template <typename T>
std::vector<Parameter<T>*> GteParams<T>::parameters() {
  std::vector<Parameter<T>*> ps;
  for (auto& b : blocks) {
    auto bp = b.parameters();
    ps.insert(ps.end(), bp.begin(), bp.end());
  }
  ps.push_back(&head_w);
  ps.push_back(&head_b);
  return ps;
}

template <typename T>
Var predict_offsets(Graph<T>& g, Var x, DeformAttnParams<T>& params) {
  params.validate();
  const Shape& xs = g.shape(x);
  require(xs.size() == 4 && xs[3] == params.channels(), "predict_offsets: input must be [B, H, W, C]");
  Var flat = linear_map(g, x, g.param(params.offset_w), g.param(params.offset_b));
  return reshape(g, flat, Shape{xs[0], xs[1], xs[2], params.heads, params.samples, 2});
}

template <typename T>
Var attention_weights(Graph<T>& g, Var x, DeformAttnParams<T>& params) {
  const Shape& xs = g.shape(x);
  Var logits = linear_map(g, x, g.param(params.attn_w), g.param(params.attn_b));
  logits = reshape(g, logits, Shape{xs[0], xs[1], xs[2], params.heads, params.samples});
  return softmax(g, logits, 4);
}

template <typename T>
std::vector<Tensor<T>> sample_keys(const Tensor<T>& key_map, double query_y, double query_x,
                                   const std::vector<std::pair<double, double>>& offsets) {
  std::vector<Tensor<T>> out;
  out.reserve(offsets.size());
  for (const auto& [dy, dx] : offsets) out.push_back(bilinear_sample(key_map, query_y + dy, query_x + dx));
  return out;
}

template <typename T>
Var deformable_attention(Graph<T>& g, Var x, DeformAttnParams<T>& params) {
  Var offsets = predict_offsets(g, x, params);
  Var weights = attention_weights(g, x, params);
  Var keys = linear_map(g, x, g.param(params.key_w));
  // The value projection is linear and bias-free, so applying it to the key
  // map before sampling equals applying it to each sampled key vector.
  Var values = grouped_linear(g, keys, g.param(params.value_w));
  Var mixed = deform_aggregate(g, values, offsets, weights);
  return linear_map(g, mixed, g.param(params.out_w));
}

namespace {

template <typename T>
std::vector<std::size_t> row_range(std::size_t begin, std::size_t count) {
  std::vector<std::size_t> rows(count);
  for (std::size_t i = 0; i < count; ++i) rows[i] = begin + i;
  return rows;
}

// Per image and head: returns attention matrices and the mixed values.
template <typename T>
void dense_heads(Graph<T>& g, Var x, DenseAttnParams<T>& params, std::vector<Var>* weights_out,
                 std::vector<Var>* mixed_out) {
  const Shape& xs = g.shape(x);
  require(xs.size() == 4 && xs[3] == params.channels(), "dense attention: input must be [B, H, W, C]");
  require(params.rho > 0.0, "dense attention: rho must be positive");
  const std::size_t batch = xs[0], n = xs[1] * xs[2], c = xs[3];
  const std::size_t ch = c / params.heads;
  Var flat = reshape(g, x, Shape{batch * n, c});
  Var q = linear_map(g, flat, g.param(params.query_w));
  Var k = linear_map(g, flat, g.param(params.key_w));
  Var v = linear_map(g, flat, g.param(params.value_w));
  for (std::size_t b = 0; b < batch; ++b) {
    const auto rows = row_range<T>(b * n, n);
    Var qb = gather_rows(g, q, rows);
    Var kb = gather_rows(g, k, rows);
    Var vb = gather_rows(g, v, rows);
    std::vector<Var> heads;
    for (std::size_t h = 0; h < params.heads; ++h) {
      Var qh = slice_channels(g, qb, h * ch, (h + 1) * ch);
      Var kh = slice_channels(g, kb, h * ch, (h + 1) * ch);
      Var vh = slice_channels(g, vb, h * ch, (h + 1) * ch);
      Var logits = scale(g, matmul(g, qh, transpose(g, kh)), static_cast<T>(1.0 / params.rho));
      Var a = softmax(g, logits, 1);
      if (weights_out) weights_out->push_back(reshape(g, a, Shape{1, n * n}));
      heads.push_back(matmul(g, a, vh));
    }
    if (mixed_out) mixed_out->push_back(reshape(g, concat_channels(g, heads), Shape{1, n * c}));
  }
}

}  // namespace

template <typename T>
Var dense_attention(Graph<T>& g, Var x, DenseAttnParams<T>& params) {
  std::vector<Var> mixed;
  dense_heads(g, x, params, nullptr, &mixed);
  const Shape xs = g.shape(x);
  Var stacked = reshape(g, concat_channels(g, mixed), Shape{xs[0] * xs[1] * xs[2], xs[3]});
  return reshape(g, linear_map(g, stacked, g.param(params.out_w)), xs);
}

template <typename T>
Var dense_attention_weights(Graph<T>& g, Var x, DenseAttnParams<T>& params) {
  std::vector<Var> weights;
  dense_heads(g, x, params, &weights, nullptr);
  const Shape xs = g.shape(x);
  const std::size_t n = xs[1] * xs[2];
  return reshape(g, concat_channels(g, weights), Shape{xs[0], params.heads, n, n});
}

template <typename T>
Var encoder_block(Graph<T>& g, Var x, EncoderBlockParams<T>& params) {
  Var y = layer_norm(g, add(g, x, deformable_attention(g, x, params.attn)), params.epsilon);
  Var hidden = relu(g, linear_map(g, y, g.param(params.ffn_w1), g.param(params.ffn_b1)));
  Var ffn = linear_map(g, hidden, g.param(params.ffn_w2), g.param(params.ffn_b2));
  return layer_norm(g, add(g, y, ffn), params.epsilon);
}

template <typename T>
Var gte_forward(Graph<T>& g, Var reid_features, GteParams<T>& params) {
  require(!params.blocks.empty(), "gte: at least one encoder block is required");
  Var h = reid_features;
  for (auto& block : params.blocks) h = encoder_block(g, h, block);
  return linear_map(g, h, g.param(params.head_w), g.param(params.head_b));
}

namespace {

template <typename T>
void linear_exec(kernels::Exec exec, std::span<const T> x, std::span<const T> w, std::span<const T> b,
                 std::span<T> out, std::size_t rows, std::size_t in, std::size_t cols) {
  if (exec == kernels::Exec::kParallel) {
    kernels::omp::linear<T>(x, w, b, out, rows, in, cols);
  } else {
    kernels::serial::linear<T>(x, w, b, out, rows, in, cols);
  }
}

}  // namespace

template <typename T>
Tensor<T> deformable_attention_forward(const Tensor<T>& x, const DeformAttnParams<T>& params,
                                       kernels::Exec exec) {
  params.validate();
  require(x.rank() == 4 && x.dim(3) == params.channels(), "deformable attention: input must be [B, H, W, C]");
  const std::size_t batch = x.dim(0), h = x.dim(1), w = x.dim(2), c = x.dim(3);
  const std::size_t rows = batch * h * w;
  const std::size_t slots = params.heads * params.samples;

  Tensor<T> offsets(Shape{rows, 2 * slots});
  linear_exec<T>(exec, x.data(), params.offset_w.value.data(), params.offset_b.value.data(), offsets.data(), rows,
                 c, 2 * slots);
  Tensor<T> weights(Shape{rows, slots});
  linear_exec<T>(exec, x.data(), params.attn_w.value.data(), params.attn_b.value.data(), weights.data(), rows, c,
                 slots);
  for (std::size_t r = 0; r < rows * params.heads; ++r) {
    T* p = weights.data().data() + r * params.samples;
    T mx = *std::max_element(p, p + params.samples);
    T denom{0};
    for (std::size_t k = 0; k < params.samples; ++k) {
      p[k] = std::exp(p[k] - mx);
      denom += p[k];
    }
    for (std::size_t k = 0; k < params.samples; ++k) p[k] /= denom;
  }
  Tensor<T> keys(Shape{rows, c});
  linear_exec<T>(exec, x.data(), params.key_w.value.data(), {}, keys.data(), rows, c, c);
  Tensor<T> values(Shape{rows, c});
  const std::size_t ch = c / params.heads;
  if (exec == kernels::Exec::kParallel) {
    kernels::omp::grouped_linear<T>(keys.data(), params.value_w.value.data(), values.data(), rows, params.heads, ch,
                                    ch);
  } else {
    kernels::serial::grouped_linear<T>(keys.data(), params.value_w.value.data(), values.data(), rows, params.heads,
                                       ch, ch);
  }
  Tensor<T> mixed(Shape{rows, c});
  const kernels::DeformGeometry geo{h, w, c, params.heads, params.samples};
  const std::size_t map_n = h * w * c, slot_n = h * w * slots;
  for (std::size_t b = 0; b < batch; ++b) {
    auto v = std::span<const T>(values.data()).subspan(b * map_n, map_n);
    auto o = std::span<const T>(offsets.data()).subspan(b * slot_n * 2, slot_n * 2);
    auto wt = std::span<const T>(weights.data()).subspan(b * slot_n, slot_n);
    auto dst = mixed.data().subspan(b * map_n, map_n);
    if (exec == kernels::Exec::kParallel) {
      kernels::omp::deform_aggregate<T>(v, o, wt, dst, geo);
    } else {
      kernels::serial::deform_aggregate<T>(v, o, wt, dst, geo);
    }
  }
  Tensor<T> out(x.shape());
  linear_exec<T>(exec, mixed.data(), params.out_w.value.data(), {}, out.data(), rows, c, c);
  out.require_finite("deformable_attention");
  return out;
}

template <typename T>
Tensor<T> dense_attention_forward(const Tensor<T>& x, const DenseAttnParams<T>& params, kernels::Exec exec) {
  require(x.rank() == 4 && x.dim(3) == params.channels(), "dense attention: input must be [B, H, W, C]");
  const std::size_t batch = x.dim(0), n = x.dim(1) * x.dim(2), c = x.dim(3);
  const std::size_t rows = batch * n;
  Tensor<T> q(Shape{rows, c}), k(Shape{rows, c}), v(Shape{rows, c}), mixed(Shape{rows, c});
  linear_exec<T>(exec, x.data(), params.query_w.value.data(), {}, q.data(), rows, c, c);
  linear_exec<T>(exec, x.data(), params.key_w.value.data(), {}, k.data(), rows, c, c);
  linear_exec<T>(exec, x.data(), params.value_w.value.data(), {}, v.data(), rows, c, c);
  for (std::size_t b = 0; b < batch; ++b) {
    const std::size_t off = b * n * c;
    auto qs = std::span<const T>(q.data()).subspan(off, n * c);
    auto ks = std::span<const T>(k.data()).subspan(off, n * c);
    auto vs = std::span<const T>(v.data()).subspan(off, n * c);
    auto dst = mixed.data().subspan(off, n * c);
    if (exec == kernels::Exec::kParallel) {
      kernels::omp::dense_attention<T>(qs, ks, vs, dst, n, c, params.heads, params.rho);
    } else {
      kernels::serial::dense_attention<T>(qs, ks, vs, dst, n, c, params.heads, params.rho);
    }
  }
  Tensor<T> out(x.shape());
  linear_exec<T>(exec, mixed.data(), params.out_w.value.data(), {}, out.data(), rows, c, c);
  return out;
}

#define RELTRACK_GTE(T)                                                                                     \
  template struct DeformAttnParams<T>;                                                                      \
  template struct DenseAttnParams<T>;                                                                       \
  template struct EncoderBlockParams<T>;                                                                    \
  template struct GteParams<T>;                                                                             \
  template Var predict_offsets<T>(Graph<T>&, Var, DeformAttnParams<T>&);                                    \
  template Var attention_weights<T>(Graph<T>&, Var, DeformAttnParams<T>&);                                  \
  template std::vector<Tensor<T>> sample_keys<T>(const Tensor<T>&, double, double,                          \
                                                 const std::vector<std::pair<double, double>>&);            \
  template Var deformable_attention<T>(Graph<T>&, Var, DeformAttnParams<T>&);                               \
  template Var dense_attention<T>(Graph<T>&, Var, DenseAttnParams<T>&);                                     \
  template Var dense_attention_weights<T>(Graph<T>&, Var, DenseAttnParams<T>&);                             \
  template Var encoder_block<T>(Graph<T>&, Var, EncoderBlockParams<T>&);                                    \
  template Var gte_forward<T>(Graph<T>&, Var, GteParams<T>&);                                               \
  template Tensor<T> deformable_attention_forward<T>(const Tensor<T>&, const DeformAttnParams<T>&,          \
                                                     kernels::Exec);                                        \
  template Tensor<T> dense_attention_forward<T>(const Tensor<T>&, const DenseAttnParams<T>&, kernels::Exec);

RELTRACK_GTE(float)
RELTRACK_GTE(double)

}  // namespace reltrack::gte
