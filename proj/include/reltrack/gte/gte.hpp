// Copyright 2026 The reltrack Authors
// SPDX-License-Identifier: Apache-2.0

// Guided transformer encoder. Each block replaces dense dot-product attention
// with deformable attention: every query predicts `samples` offsets per head,
// reads the key map bilinearly at those points and mixes them with softmax
// weights predicted from the query itself. Cost is linear in H*W.

#pragma once

#include <cstddef>
#include <vector>

#include "reltrack/tensor/init.hpp"
#include "reltrack/tensor/ops.hpp"

namespace reltrack::gte {

inline constexpr std::size_t kDefaultSamples = 9;
inline constexpr std::size_t kDefaultHeads = 4;
inline constexpr std::size_t kDefaultEmbeddingDim = 64;

template <typename T>
struct DeformAttnParams {
  Parameter<T> offset_w;  // [C, 2 * heads * samples], zero-initialized
  Parameter<T> offset_b;  // [2 * heads * samples]
  Parameter<T> key_w;     // [C, C]
  Parameter<T> attn_w;    // [C, heads * samples]
  Parameter<T> attn_b;    // [heads * samples]
  Parameter<T> value_w;   // [heads, C / heads, C / heads]
  Parameter<T> out_w;     // [C, C]
  std::size_t heads = kDefaultHeads;
  std::size_t samples = kDefaultSamples;

  std::size_t channels() const { return key_w.value.dim(0); }

  static DeformAttnParams init(std::size_t channels, std::size_t heads, std::size_t samples, Rng& rng);
  /// Zero offsets, identity key/value/output maps, uniform attention logits.
  static DeformAttnParams identity(std::size_t channels, std::size_t heads, std::size_t samples);

  std::vector<Parameter<T>*> parameters() {
    return {&offset_w, &offset_b, &key_w, &attn_w, &attn_b, &value_w, &out_w};
  }
  void validate() const;
};

/// Reference multi-head dot-product attention over every position.
template <typename T>
struct DenseAttnParams {
  Parameter<T> query_w;  // [C, C]; head h owns columns [h*C/heads, (h+1)*C/heads)
  Parameter<T> key_w;    // [C, C]
  Parameter<T> value_w;  // [C, C]
  Parameter<T> out_w;    // [C, C]; rows of head h project its slice back to C
  std::size_t heads = kDefaultHeads;
  double rho = 1.0;

  std::size_t channels() const { return query_w.value.dim(0); }

  /// rho defaults to sqrt(C / heads).
  static DenseAttnParams init(std::size_t channels, std::size_t heads, Rng& rng);
  std::vector<Parameter<T>*> parameters() { return {&query_w, &key_w, &value_w, &out_w}; }
};

template <typename T>
struct EncoderBlockParams {
  DeformAttnParams<T> attn;
  Parameter<T> ffn_w1;  // [C, F]
  Parameter<T> ffn_b1;  // [F]
  Parameter<T> ffn_w2;  // [F, C]
  Parameter<T> ffn_b2;  // [C]
  T epsilon = T(1e-5);

  /// FFN hidden width F = ffn_mult * C.
  static EncoderBlockParams init(std::size_t channels, std::size_t heads, std::size_t samples, Rng& rng,
                                 std::size_t ffn_mult = 4);
  std::vector<Parameter<T>*> parameters();
};

template <typename T>
struct GteParams {
  std::vector<EncoderBlockParams<T>> blocks;
  Parameter<T> head_w;  // [C, D]
  Parameter<T> head_b;  // [D]

  static GteParams init(std::size_t channels, std::size_t embedding_dim, std::size_t num_blocks,
                        std::size_t heads, std::size_t samples, Rng& rng);
  std::vector<Parameter<T>*> parameters();
};

/// Offsets [B, H, W, heads, samples, 2] as (dy, dx).
template <typename T>
Var predict_offsets(Graph<T>& g, Var x, DeformAttnParams<T>& params);

/// Softmax-normalized sample weights [B, H, W, heads, samples].
template <typename T>
Var attention_weights(Graph<T>& g, Var x, DeformAttnParams<T>& params);

/// Bilinear reads of an [H, W, C] key map at query + offset for each offset.
template <typename T>
std::vector<Tensor<T>> sample_keys(const Tensor<T>& key_map, double query_y, double query_x,
                                   const std::vector<std::pair<double, double>>& offsets);

template <typename T>
Var deformable_attention(Graph<T>& g, Var x, DeformAttnParams<T>& params);

template <typename T>
Var dense_attention(Graph<T>& g, Var x, DenseAttnParams<T>& params);

/// Per-head attention matrices [B, heads, N, N] of the dense reference.
template <typename T>
Var dense_attention_weights(Graph<T>& g, Var x, DenseAttnParams<T>& params);

/// y = LN(x + attn(x)); out = LN(y + FFN(y)).
template <typename T>
Var encoder_block(Graph<T>& g, Var x, EncoderBlockParams<T>& params);

/// Stacked blocks followed by a per-position linear head to the embedding width.
template <typename T>
Var gte_forward(Graph<T>& g, Var reid_features, GteParams<T>& params);

// Forward-only paths straight onto the kernels, without a tape. Used for
// timing; the graph versions above remain the reference.
template <typename T>
Tensor<T> deformable_attention_forward(const Tensor<T>& x, const DeformAttnParams<T>& params, kernels::Exec exec);

template <typename T>
Tensor<T> dense_attention_forward(const Tensor<T>& x, const DenseAttnParams<T>& params, kernels::Exec exec);

}  // namespace reltrack::gte
