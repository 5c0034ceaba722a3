// Copyright 2026 The reltrack Authors
// SPDX-License-Identifier: Apache-2.0

#include "reltrack/io/synth.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <stdexcept>
#include <string>

#include "reltrack/detect/detect.hpp"

namespace reltrack::io {

namespace {

struct Path {
  int first = 1;
  int last = 1;
  double x0 = 0.0, y0 = 0.0, x1 = 0.0, y1 = 0.0;  // centers
  double w = 0.0, h = 0.0;

  Box at(int frame) const {
    const double s = last > first ? static_cast<double>(frame - first) / static_cast<double>(last - first) : 0.0;
    return Box::from_center(x0 + s * (x1 - x0), y0 + s * (y1 - y0), w, h);
  }
};

std::vector<Eigen::VectorXd> orthonormal(int count, int dim, std::mt19937_64& rng) {
  if (count > dim) {
    throw std::invalid_argument("synth: " + std::to_string(count) + " identities need embedding_dim >= " +
                                std::to_string(count));
  }
  std::normal_distribution<double> normal(0.0, 1.0);
  std::vector<Eigen::VectorXd> basis;
  while (static_cast<int>(basis.size()) < count) {
    Eigen::VectorXd v(dim);
    for (int k = 0; k < dim; ++k) v(k) = normal(rng);
    // Two Gram-Schmidt passes keep the set orthogonal to rounding.
    for (int pass = 0; pass < 2; ++pass) {
      for (const auto& b : basis) v -= b.dot(v) * b;
    }
    const double n = v.norm();
    if (n < 1e-6) continue;
    basis.push_back(v / n);
  }
  return basis;
}

}  // namespace

SynthSequence synth_sequence(const SynthScenario& s) {
  if (s.identities < 1) throw std::invalid_argument("synth: identities must be >= 1");
  if (s.frames < 1) throw std::invalid_argument("synth: frames must be >= 1");
  if (!(s.box_min > 0.0) || s.box_max < s.box_min) throw std::invalid_argument("synth: bad box width range");
  if (!(s.dropout >= 0.0 && s.dropout < 1.0)) throw std::invalid_argument("synth: dropout must be in [0, 1)");
  if (!(s.sigma >= 0.0)) throw std::invalid_argument("synth: sigma must be >= 0");
  if (!(s.max_speed > 0.0)) throw std::invalid_argument("synth: max_speed must be positive");
  const double W = s.image_width, H = s.image_height;
  if (s.box_max * 3.0 > std::min(W, H)) throw std::invalid_argument("synth: image too small for the box range");

  std::mt19937_64 rng(s.seed);
  SynthSequence out;
  out.identity_embeddings = orthonormal(s.identities, s.embedding_dim, rng);

  std::uniform_real_distribution<double> unit(0.0, 1.0);
  auto uniform = [&](double lo, double hi) { return lo + (hi - lo) * unit(rng); };
  std::vector<Path> paths(static_cast<std::size_t>(s.identities));
  for (int i = 0; i < s.identities; ++i) {
    Path& p = paths[static_cast<std::size_t>(i)];
    p.w = uniform(s.box_min, s.box_max);
    p.h = std::min(p.w * uniform(1.5, 2.5), H / 3.0);
    const double mx = 0.5 * p.w + 1.0, my = 0.5 * p.h + 1.0;
    p.x0 = uniform(mx, W - mx);
    p.y0 = uniform(my, H - my);
    p.x1 = uniform(mx, W - mx);
    p.y1 = uniform(my, H - my);
    p.first = 1;
    p.last = s.frames;
    if (s.staggered) {
      p.first = 1 + static_cast<int>(unit(rng) * (s.frames / 3));
      p.last = s.frames - static_cast<int>(unit(rng) * (s.frames / 3));
    }
    // Pull the end point toward the start so short sequences do not move
    // implausibly far per frame; the shortened path stays inside the image.
    const double steps = std::max(1, p.last - p.first);
    const double dist = std::hypot(p.x1 - p.x0, p.y1 - p.y0);
    if (dist > s.max_speed * steps) {
      const double k = s.max_speed * steps / dist;
      p.x1 = p.x0 + k * (p.x1 - p.x0);
      p.y1 = p.y0 + k * (p.y1 - p.y0);
    }
  }
  if (s.crossing && s.identities >= 2) {
    // Same size; the second path runs a little lower so the boxes overlap
    // without coinciding when they pass.
    const double w = 0.5 * (s.box_min + s.box_max), h = 2.0 * w;
    for (int i = 0; i < 2; ++i) {
      Path& p = paths[static_cast<std::size_t>(i)];
      p.w = w;
      p.h = h;
      p.first = 1;
      p.last = s.frames;
      p.y0 = p.y1 = 0.5 * H + (i == 0 ? 0.0 : 0.15 * h);
      p.x0 = i == 0 ? 0.25 * W : 0.75 * W;
      p.x1 = i == 0 ? 0.75 * W : 0.25 * W;
    }
  }

  std::normal_distribution<double> normal(0.0, 1.0);
  for (int f = 1; f <= s.frames; ++f) {
    SynthFrame frame;
    frame.frame = f;
    for (int i = 0; i < s.identities; ++i) {
      const Path& p = paths[static_cast<std::size_t>(i)];
      if (f < p.first || f > p.last) continue;
      const Box box = p.at(f);
      out.ground_truth[f].push_back({i + 1, box, 1.0});
      // Draws happen unconditionally so the stream does not depend on outcomes.
      const bool drop = unit(rng) < s.dropout && f > p.first && f < p.last;
      Eigen::VectorXd e = out.identity_embeddings[static_cast<std::size_t>(i)];
      if (s.sigma > 0.0) {
        for (Eigen::Index k = 0; k < e.size(); ++k) e(k) += s.sigma * normal(rng);
        e.normalize();
      }
      if (drop) continue;
      frame.detections.push_back({i + 1, box, s.score});
      frame.embeddings.push_back(std::move(e));
    }
    out.frames.push_back(std::move(frame));
  }
  return out;
}

std::vector<assoc::FrameObservations> observations(const SynthSequence& seq) {
  std::vector<assoc::FrameObservations> out;
  out.reserve(seq.frames.size());
  for (const auto& f : seq.frames) {
    assoc::FrameObservations obs;
    obs.frame = f.frame;
    for (const auto& d : f.detections) {
      detect::Detection det;
      det.box = d.box;
      det.score = d.score;
      det.center = {static_cast<std::size_t>(std::floor(d.box.cy() / detect::kStride)),
                    static_cast<std::size_t>(std::floor(d.box.cx() / detect::kStride))};
      obs.detections.push_back(det);
    }
    obs.embeddings = f.embeddings;
    out.push_back(std::move(obs));
  }
  return out;
}

Sequence detection_sequence(const SynthSequence& seq) {
  Sequence out;
  for (const auto& f : seq.frames) {
    auto& boxes = out[f.frame];
    for (const auto& d : f.detections) boxes.push_back({-1, d.box, d.score});
  }
  return out;
}

}  // namespace reltrack::io
