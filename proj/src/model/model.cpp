// Copyright 2026 The reltrack Authors
// SPDX-License-Identifier: Apache-2.0

#include "reltrack/model/model.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <stdexcept>

namespace reltrack::model {

template <typename T>
NetParams<T> NetParams<T>::init(const NetConfig& config, Rng& rng) {
  const std::size_t s = config.stem_channels, c = config.channels, d = config.embedding_dim;
  if (config.num_classes < 2) throw std::invalid_argument("model: need at least 2 identity classes");
  NetParams p;
  p.config = config;
  p.conv1_w = fan_in_uniform<T>(Shape{3, 3, 3, s}, 27, rng);
  p.conv1_b = zeros_param<T>(Shape{s});
  p.conv2_w = fan_in_uniform<T>(Shape{3, 3, s, c}, 9 * s, rng);
  p.conv2_b = zeros_param<T>(Shape{c});
  p.gcd = gcd::GcdParams<T>::init(c, rng);
  p.heat_w = fan_in_uniform<T>(Shape{c, 1}, c, rng);
  p.heat_b = Parameter<T>(Tensor<T>(Shape{1}, static_cast<T>(kHeatmapBias)));
  p.offset_w = fan_in_uniform<T>(Shape{c, 2}, c, rng);
  p.offset_b = zeros_param<T>(Shape{2});
  p.size_w = fan_in_uniform<T>(Shape{c, 2}, c, rng);
  p.size_b = zeros_param<T>(Shape{2});
  p.gte = gte::GteParams<T>::init(c, d, 1, config.heads, config.samples, rng);
  p.cls_w = fan_in_uniform<T>(Shape{d, config.num_classes}, d, rng);
  p.cls_b = zeros_param<T>(Shape{config.num_classes});
  return p;
}

template <typename T>
std::vector<Parameter<T>*> NetParams<T>::parameters() {
  std::vector<Parameter<T>*> ps{&conv1_w, &conv1_b, &conv2_w, &conv2_b};
  for (auto* q : gcd.parameters()) ps.push_back(q);
  for (auto* q : {&heat_w, &heat_b, &offset_w, &offset_b, &size_w, &size_b}) ps.push_back(q);
  for (auto* q : gte.parameters()) ps.push_back(q);
  ps.push_back(&cls_w);
  ps.push_back(&cls_b);
  for (auto* q : omegas.parameters()) ps.push_back(q);
  return ps;
}

template <typename T>
NetOutputs<T> forward(Graph<T>& g, Var image, NetParams<T>& p) {
  const Shape& in = g.shape(image);
  if (in.size() != 4 || in[0] != 1 || in[3] != 3) throw DimensionError("model: image must be [1, H, W, 3]");
  Var x = relu(g, conv2d(g, image, g.param(p.conv1_w), g.param(p.conv1_b), 2, 1));
  x = relu(g, conv2d(g, x, g.param(p.conv2_w), g.param(p.conv2_b), 2, 1));
  const std::size_t h = g.shape(x)[1], w = g.shape(x)[2];
  const auto branches = gcd::disentangle(g, x, p.gcd);

  NetOutputs<T> out;
  Var logits = linear_map(g, branches.det, g.param(p.heat_w), g.param(p.heat_b));
  out.heatmap = reshape(g, sigmoid(g, logits), Shape{h, w});
  out.offsets = reshape(g, linear_map(g, branches.det, g.param(p.offset_w), g.param(p.offset_b)), Shape{h, w, 2});
  Var sizes = linear_map(g, branches.det, g.param(p.size_w), g.param(p.size_b));
  out.sizes = reshape(g, scale(g, sizes, static_cast<T>(kSizeScale)), Shape{h, w, 2});
  Var emb = gte::gte_forward(g, branches.reid, p.gte);
  out.embeddings = reshape(g, emb, Shape{h, w, p.config.embedding_dim});
  return out;
}

template <typename T>
Sample<T> render_sample(const std::vector<detect::BoxAnnotation>& boxes, std::size_t height, std::size_t width) {
  static constexpr std::array<std::array<double, 3>, 6> kPalette{
      {{1.0, 0.2, 0.2}, {0.2, 1.0, 0.2}, {0.2, 0.4, 1.0}, {1.0, 1.0, 0.2}, {1.0, 0.2, 1.0}, {0.2, 1.0, 1.0}}};
  Sample<T> s;
  s.targets = detect::render_targets(boxes, height, width);
  s.image = Tensor<T>(Shape{1, height, width, 3});
  for (const auto& a : boxes) {
    if (a.identity < 1) throw std::invalid_argument("render_sample: identities must be >= 1");
    const auto& color = kPalette[static_cast<std::size_t>(a.identity - 1) % kPalette.size()];
    const double hw = 0.5 * a.box.width(), hh = 0.5 * a.box.height();
    for (std::size_t y = 0; y < height; ++y) {
      for (std::size_t x = 0; x < width; ++x) {
        const double dx = (static_cast<double>(x) + 0.5 - a.box.cx()) / hw;
        const double dy = (static_cast<double>(y) + 0.5 - a.box.cy()) / hh;
        const double v = 1.0 - std::sqrt(dx * dx + dy * dy);
        if (v <= 0.0) continue;
        for (std::size_t ch = 0; ch < 3; ++ch) {
          T& px = s.image[(y * width + x) * 3 + ch];
          px = std::max(px, static_cast<T>(v * color[ch]));
        }
      }
    }
    s.labels.push_back(static_cast<std::size_t>(a.identity - 1));
  }
  return s;
}

template <typename T>
LossParts<T> losses(Graph<T>& g, const NetOutputs<T>& out, NetParams<T>& p, const Sample<T>& sample) {
  const auto& tg = sample.targets;
  const std::size_t h = tg.grid_h(), w = tg.grid_w(), d = p.config.embedding_dim;
  if (g.shape(out.heatmap) != Shape{h, w}) throw DimensionError("model: output grid does not match the targets");
  for (std::size_t label : sample.labels) {
    if (label >= p.config.num_classes) throw DimensionError("model: label outside the classifier range");
  }
  const auto idx = detect::center_indices(tg);
  LossParts<T> parts;
  parts.heatmap = detect::heatmap_loss(g, out.heatmap, tg.heatmap.template cast<T>(), tg.count());
  Var off = gather_rows(g, reshape(g, out.offsets, Shape{h * w, 2}), idx);
  Var siz = gather_rows(g, reshape(g, out.sizes, Shape{h * w, 2}), idx);
  parts.box = detect::box_loss(g, off, siz, detect::offsets_tensor(tg).template cast<T>(), detect::sizes_tensor(tg).template cast<T>());
  Var emb = gather_rows(g, reshape(g, out.embeddings, Shape{h * w, d}), idx);
  Var logits = linear_map(g, emb, g.param(p.cls_w), g.param(p.cls_b));
  parts.reid = detect::reid_loss_from_logits(g, logits, sample.labels);
  parts.total = detect::total_loss(g, parts.heatmap, parts.box, parts.reid, p.omegas);
  return parts;
}

template <typename T>
void Adam<T>::step(const std::vector<Parameter<T>*>& params) {
  if (m_.empty()) {
    for (auto* p : params) {
      m_.emplace_back(p->value.size(), 0.0);
      v_.emplace_back(p->value.size(), 0.0);
    }
  }
  if (m_.size() != params.size()) throw std::invalid_argument("Adam: parameter list changed between steps");
  ++t_;
  const double c1 = 1.0 - std::pow(b1_, static_cast<double>(t_));
  const double c2 = 1.0 - std::pow(b2_, static_cast<double>(t_));
  for (std::size_t i = 0; i < params.size(); ++i) {
    auto val = params[i]->value.data();
    auto grad = params[i]->grad.data();
    for (std::size_t k = 0; k < val.size(); ++k) {
      const double gk = static_cast<double>(grad[k]);
      m_[i][k] = b1_ * m_[i][k] + (1.0 - b1_) * gk;
      v_[i][k] = b2_ * v_[i][k] + (1.0 - b2_) * gk * gk;
      val[k] -= static_cast<T>(lr_ * (m_[i][k] / c1) / (std::sqrt(v_[i][k] / c2) + eps_));
    }
  }
}

template <typename T>
std::vector<StepLoss> fit(NetParams<T>& params, const Sample<T>& sample, std::size_t steps, double learning_rate,
                          kernels::Exec exec) {
  Adam<T> opt(learning_rate);
  const auto ps = params.parameters();
  std::vector<StepLoss> history;
  for (std::size_t step = 0; step <= steps; ++step) {
    Graph<T> g(step < steps, exec);
    const auto out = forward(g, g.input(sample.image), params);
    const auto parts = losses(g, out, params, sample);
    history.push_back({static_cast<double>(g.value(parts.total)[0]), static_cast<double>(g.value(parts.heatmap)[0]),
                       static_cast<double>(g.value(parts.box)[0]), static_cast<double>(g.value(parts.reid)[0])});
    if (step == steps) break;
    for (auto* p : ps) p->zero_grad();
    g.backward(parts.total);
    opt.step(ps);
  }
  return history;
}

template <typename T>
Inference infer(NetParams<T>& params, const Tensor<T>& image, kernels::Exec exec) {
  Graph<T> g(false, exec);
  const auto out = forward(g, g.input(image), params);
  return {g.value(out.heatmap).template cast<double>(), g.value(out.offsets).template cast<double>(),
          g.value(out.sizes).template cast<double>(), g.value(out.embeddings).template cast<double>()};
}

#define RELTRACK_MODEL(T)                                                                                    \
  template struct NetParams<T>;                                                                              \
  template NetOutputs<T> forward<T>(Graph<T>&, Var, NetParams<T>&);                                          \
  template Sample<T> render_sample<T>(const std::vector<detect::BoxAnnotation>&, std::size_t, std::size_t);  \
  template LossParts<T> losses<T>(Graph<T>&, const NetOutputs<T>&, NetParams<T>&, const Sample<T>&);         \
  template class Adam<T>;                                                                                    \
  template std::vector<StepLoss> fit<T>(NetParams<T>&, const Sample<T>&, std::size_t, double, kernels::Exec); \
  template Inference infer<T>(NetParams<T>&, const Tensor<T>&, kernels::Exec);

RELTRACK_MODEL(float)
RELTRACK_MODEL(double)

}  // namespace reltrack::model
