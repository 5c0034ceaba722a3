// Copyright 2026 The reltrack Authors
// SPDX-License-Identifier: Apache-2.0

#include "reltrack/verify/verify.hpp"

#include <algorithm>
#include <chrono>
#include <stdexcept>

#include "reltrack/detect/detect.hpp"
#include "reltrack/gcd/gcd.hpp"
#include "reltrack/gte/gte.hpp"
#include "reltrack/tensor/grad_check.hpp"

namespace reltrack::verify {

namespace {

using P = Parameter<double>;

// Random fractional offsets so sampling points fall strictly between cells,
// away from the kinks of bilinear interpolation.
void randomize_offsets(gte::DeformAttnParams<double>& a, Rng& rng) {
  a.offset_w = P(normal_tensor<double>(a.offset_w.shape(), 0.5, rng));
  a.offset_b = P(uniform_tensor<double>(a.offset_b.shape(), -1.5, 1.5, rng));
  a.attn_b = P(normal_tensor<double>(a.attn_b.shape(), 0.5, rng));
}

// Sum of a map weighted by a fixed random tensor, so every output entry
// contributes a distinct gradient.
Var probe(Graph<double>& g, Var x, const Tensor<double>& weights) { return sum(g, mul(g, x, g.input(weights))); }

struct Case {
  std::string name;
  std::function<GradCheckResult(const GradSuiteOptions&, Rng&, const GradCheckOptions&)> run;
};

std::vector<Case> cases() {
  std::vector<Case> out;

  out.push_back({"gcd", [](const GradSuiteOptions& o, Rng& rng, const GradCheckOptions& gc) {
                   const Shape xs{1, o.height, o.width, o.channels};
                   P x(normal_tensor<double>(xs, 1.0, rng));
                   auto p = gcd::GcdParams<double>::init(o.channels, rng);
                   // Fresh second projections are zero; use random ones so both branches carry gradient.
                   p.w_d2 = P(normal_tensor<double>(p.w_d2.shape(), 0.5, rng));
                   p.w_r2 = P(normal_tensor<double>(p.w_r2.shape(), 0.5, rng));
                   const auto rd = normal_tensor<double>(xs, 1.0, rng), rr = normal_tensor<double>(xs, 1.0, rng);
                   auto ps = p.parameters();
                   ps.push_back(&x);
                   return grad_check(
                       [&](Graph<double>& g) {
                         auto out = gcd::disentangle(g, g.param(x), p);
                         return add(g, probe(g, out.det, rd), probe(g, out.reid, rr));
                       },
                       ps, gc);
                 }});

  out.push_back({"layer_norm", [](const GradSuiteOptions& o, Rng& rng, const GradCheckOptions& gc) {
                   const Shape xs{1, o.height, o.width, o.channels};
                   P x(normal_tensor<double>(xs, 1.0, rng));
                   const auto r = normal_tensor<double>(xs, 1.0, rng);
                   return grad_check([&](Graph<double>& g) { return probe(g, layer_norm(g, g.param(x), 1e-5), r); },
                                     {&x}, gc);
                 }});

  out.push_back({"deformable_attention", [](const GradSuiteOptions& o, Rng& rng, const GradCheckOptions& gc) {
                   const Shape xs{1, o.height, o.width, o.channels};
                   P x(normal_tensor<double>(xs, 1.0, rng));
                   auto a = gte::DeformAttnParams<double>::init(o.channels, o.heads, o.samples, rng);
                   randomize_offsets(a, rng);
                   const auto r = normal_tensor<double>(xs, 1.0, rng);
                   auto ps = a.parameters();
                   ps.push_back(&x);
                   return grad_check(
                       [&](Graph<double>& g) { return probe(g, gte::deformable_attention(g, g.param(x), a), r); }, ps,
                       gc);
                 }});

  out.push_back({"encoder_block", [](const GradSuiteOptions& o, Rng& rng, const GradCheckOptions& gc) {
                   const Shape xs{1, o.height, o.width, o.channels};
                   P x(normal_tensor<double>(xs, 1.0, rng));
                   auto b = gte::EncoderBlockParams<double>::init(o.channels, o.heads, o.samples, rng);
                   randomize_offsets(b.attn, rng);
                   b.ffn_b1 = P(normal_tensor<double>(b.ffn_b1.shape(), 0.5, rng));
                   const auto r = normal_tensor<double>(xs, 1.0, rng);
                   auto ps = b.parameters();
                   ps.push_back(&x);
                   return grad_check([&](Graph<double>& g) { return probe(g, gte::encoder_block(g, g.param(x), b), r); },
                                     ps, gc);
                 }});

  out.push_back({"heatmap_loss", [](const GradSuiteOptions& o, Rng& rng, const GradCheckOptions& gc) {
                   // Two boxes on an image whose stride-4 grid matches the map extent.
                   const std::size_t ih = 4 * o.height, iw = 4 * o.width;
                   std::uniform_real_distribution<double> u(0.0, 1.0);
                   std::vector<detect::BoxAnnotation> boxes;
                   for (int k = 0; k < 2; ++k) {
                     const double w = 4.0 + 8.0 * u(rng), h = 4.0 + 8.0 * u(rng);
                     const double l = u(rng) * (static_cast<double>(iw) - w), t = u(rng) * (static_cast<double>(ih) - h);
                     boxes.push_back({Box{l, t, l + w, t + h}, k + 1});
                   }
                   const auto targets = detect::render_targets(boxes, ih, iw);
                   // Probabilities kept inside (0.05, 0.95), clear of the clamp.
                   P prob(uniform_tensor<double>(Shape{o.height, o.width}, 0.05, 0.95, rng));
                   return grad_check(
                       [&](Graph<double>& g) {
                         return detect::heatmap_loss(g, g.param(prob), targets.heatmap, targets.count());
                       },
                       {&prob}, gc);
                 }});

  out.push_back({"box_loss", [](const GradSuiteOptions&, Rng& rng, const GradCheckOptions& gc) {
                   const std::size_t n = 5;
                   P off(uniform_tensor<double>(Shape{n, 2}, 0.0, 1.0, rng));
                   P siz(uniform_tensor<double>(Shape{n, 2}, 2.0, 40.0, rng));
                   const auto t_off = uniform_tensor<double>(Shape{n, 2}, 0.0, 1.0, rng);
                   const auto t_siz = uniform_tensor<double>(Shape{n, 2}, 2.0, 40.0, rng);
                   return grad_check(
                       [&](Graph<double>& g) { return detect::box_loss(g, g.param(off), g.param(siz), t_off, t_siz); },
                       {&off, &siz}, gc);
                 }});

  out.push_back({"reid_loss", [](const GradSuiteOptions&, Rng& rng, const GradCheckOptions& gc) {
                   const std::size_t n = 6, k = 5;
                   P logits(normal_tensor<double>(Shape{n, k}, 2.0, rng));
                   std::vector<std::size_t> labels(n);
                   for (auto& l : labels) l = std::uniform_int_distribution<std::size_t>(0, k - 1)(rng);
                   return grad_check(
                       [&](Graph<double>& g) { return detect::reid_loss_from_logits(g, g.param(logits), labels); },
                       {&logits}, gc);
                 }});

  out.push_back({"total_loss", [](const GradSuiteOptions&, Rng& rng, const GradCheckOptions& gc) {
                   P lh(uniform_tensor<double>(Shape{1}, 0.1, 3.0, rng));
                   P lb(uniform_tensor<double>(Shape{1}, 0.1, 3.0, rng));
                   P lr(uniform_tensor<double>(Shape{1}, 0.1, 3.0, rng));
                   detect::LossWeights<double> w;
                   w.omega1 = P(uniform_tensor<double>(Shape{1}, -2.0, 2.0, rng));
                   w.omega2 = P(uniform_tensor<double>(Shape{1}, -2.0, 2.0, rng));
                   return grad_check(
                       [&](Graph<double>& g) {
                         return detect::total_loss(g, g.param(lh), g.param(lb), g.param(lr), w);
                       },
                       {&lh, &lb, &lr, &w.omega1, &w.omega2}, gc);
                 }});
  return out;
}

}  // namespace

std::vector<std::string> gradient_case_names() {
  std::vector<std::string> names;
  for (const auto& c : cases()) names.push_back(c.name);
  return names;
}

std::vector<GradCaseResult> gradient_suite(const GradSuiteOptions& options, const std::string& only) {
  GradCheckOptions gc;
  gc.step = options.step;
  std::vector<GradCaseResult> results;
  for (const auto& c : cases()) {
    if (!only.empty() && c.name != only) continue;
    GradCaseResult r;
    r.name = c.name;
    for (std::size_t s = 0; s < options.seeds; ++s) {
      Rng rng(options.first_seed + s);
      const auto check = c.run(options, rng, gc);
      r.max_rel_error = std::max(r.max_rel_error, check.max_rel_error);
      r.checked += check.checked;
      ++r.seeds;
    }
    r.passed = r.seeds > 0 && r.checked > 0 && r.max_rel_error <= options.tolerance;
    results.push_back(r);
  }
  if (!only.empty() && results.empty()) throw std::invalid_argument("gradient_suite: unknown case '" + only + "'");
  return results;
}

double median_seconds(const std::function<void()>& fn, std::size_t repeats) {
  if (repeats == 0) throw std::invalid_argument("median_seconds: repeats must be positive");
  std::vector<double> t;
  for (std::size_t i = 0; i < repeats; ++i) {
    const auto start = std::chrono::steady_clock::now();
    fn();
    t.push_back(std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count());
  }
  std::nth_element(t.begin(), t.begin() + static_cast<std::ptrdiff_t>(t.size() / 2), t.end());
  return t[t.size() / 2];
}

ScalingResult attention_scaling(const ScalingOptions& o) {
  Rng rng(o.seed);
  auto deform = gte::DeformAttnParams<float>::init(o.channels, o.heads, o.samples, rng);
  deform.offset_w = Parameter<float>(normal_tensor<float>(deform.offset_w.shape(), 0.2, rng));
  deform.offset_b = Parameter<float>(uniform_tensor<float>(deform.offset_b.shape(), -3.0, 3.0, rng));
  const auto dense = gte::DenseAttnParams<float>::init(o.channels, o.heads, rng);

  ScalingResult r;
  r.sizes = o.sizes;
  for (std::size_t s : o.sizes) {
    const auto x = normal_tensor<float>(Shape{1, s, s, o.channels}, 1.0, rng);
    volatile float sink = 0.0f;
    r.deformable_seconds.push_back(median_seconds(
        [&] { sink = sink + gte::deformable_attention_forward(x, deform, o.exec)[0]; }, o.repeats));
    r.dense_seconds.push_back(
        median_seconds([&] { sink = sink + gte::dense_attention_forward(x, dense, o.exec)[0]; }, o.repeats));
  }
  for (std::size_t i = 1; i < r.sizes.size(); ++i) {
    r.deformable_ratios.push_back(r.deformable_seconds[i] / r.deformable_seconds[i - 1]);
    r.dense_ratios.push_back(r.dense_seconds[i] / r.dense_seconds[i - 1]);
  }
  return r;
}

}  // namespace reltrack::verify
