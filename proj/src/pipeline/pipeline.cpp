// Copyright 2026 The reltrack Authors
// SPDX-License-Identifier: Apache-2.0

#include "reltrack/pipeline/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <istream>
#include <ostream>
#include <sstream>

#include "reltrack/core/error.hpp"

namespace reltrack::pipeline {

namespace {

std::vector<detect::BoxAnnotation> annotations(const io::SynthFrame& f) {
  std::vector<detect::BoxAnnotation> out;
  for (const auto& d : f.detections) out.push_back({d.box, d.id});
  return out;
}

}  // namespace

std::vector<assoc::FrameObservations> observations_from_maps(const io::SynthSequence& seq,
                                                             const io::SynthScenario& scenario,
                                                             const detect::DecodeOptions& decode) {
  const auto ih = static_cast<std::size_t>(scenario.image_height), iw = static_cast<std::size_t>(scenario.image_width);
  std::vector<assoc::FrameObservations> out;
  for (const auto& f : seq.frames) {
    assoc::FrameObservations obs;
    obs.frame = f.frame;
    if (!f.detections.empty()) {
      const auto targets = detect::render_targets(annotations(f), ih, iw);
      const std::size_t gh = targets.grid_h(), gw = targets.grid_w();
      const std::size_t dim = static_cast<std::size_t>(f.embeddings.front().size());
      Tensor<double> emb(Shape{gh, gw, dim});
      for (std::size_t k = 0; k < targets.count(); ++k) {
        const auto& c = targets.centers[k];
        for (std::size_t j = 0; j < dim; ++j) emb[(c.row * gw + c.col) * dim + j] = f.embeddings[k](static_cast<Eigen::Index>(j));
      }
      obs.detections = detect::decode(targets.heatmap, detect::offset_map(targets), detect::size_map(targets), decode);
      obs.embeddings = assoc::embeddings_at_centers(emb, obs.detections);
    }
    out.push_back(std::move(obs));
  }
  return out;
}

std::vector<assoc::FrameObservations> observations_from_network(const io::SynthSequence& seq,
                                                                const io::SynthScenario& scenario,
                                                                const NetworkOptions& options,
                                                                const detect::DecodeOptions& decode) {
  if (seq.frames.empty() || seq.frames.front().detections.empty()) {
    throw std::invalid_argument("network mode: the first frame must contain objects to train on");
  }
  const auto ih = static_cast<std::size_t>(scenario.image_height), iw = static_cast<std::size_t>(scenario.image_width);
  model::NetConfig net = options.net;
  net.num_classes = std::max<std::size_t>(2, static_cast<std::size_t>(scenario.identities));
  Rng rng(options.seed);
  auto params = model::NetParams<float>::init(net, rng);
  model::fit(params, model::render_sample<float>(annotations(seq.frames.front()), ih, iw), options.train_steps,
             options.learning_rate);

  std::vector<assoc::FrameObservations> out;
  for (const auto& f : seq.frames) {
    assoc::FrameObservations obs;
    obs.frame = f.frame;
    const auto image = model::render_sample<float>(annotations(f), ih, iw).image;
    const auto inf = model::infer(params, image);
    obs.detections = detect::decode(inf.heatmap, inf.offsets, inf.sizes, decode);
    // Decoded sizes can be degenerate on an untrained or badly fitted model.
    std::erase_if(obs.detections, [](const detect::Detection& d) { return !d.box.well_formed(); });
    obs.embeddings = assoc::embeddings_at_centers(inf.embeddings, obs.detections);
    out.push_back(std::move(obs));
  }
  return out;
}

std::vector<assoc::FrameObservations> observations_from_files(const std::vector<io::MotLine>& detections,
                                                              std::istream& embeddings) {
  std::vector<assoc::FrameObservations> out;
  std::string line;
  std::size_t line_number = 0;
  Eigen::Index dim = -1;
  for (const auto& det : detections) {
    do {
      if (!std::getline(embeddings, line)) throw ParseError("fewer embedding rows than detections", line_number + 1);
      ++line_number;
    } while (line.find_first_not_of(" \t\r") == std::string::npos);
    std::vector<double> values;
    std::stringstream ss(line);
    std::string field;
    while (std::getline(ss, field, ',')) {
      double v = 0.0;
      if (!io::parse_real(field, v)) throw ParseError("bad embedding value '" + field + "'", line_number);
      values.push_back(v);
    }
    if (values.size() < 2) throw ParseError("expected frame followed by embedding values", line_number);
    if (values[0] != static_cast<double>(det.frame)) throw ParseError("embedding row frame does not match detection", line_number);
    const auto d = static_cast<Eigen::Index>(values.size() - 1);
    if (dim >= 0 && d != dim) throw ParseError("embedding width changes", line_number);
    dim = d;
    Eigen::VectorXd e(d);
    for (Eigen::Index k = 0; k < d; ++k) e(k) = values[static_cast<std::size_t>(k) + 1];
    if (!(e.norm() > 0.0)) throw ParseError("zero embedding", line_number);

    if (out.empty() || out.back().frame != det.frame) {
      if (!out.empty() && det.frame < out.back().frame) throw ParseError("detections are not sorted by frame", line_number);
      // Frames without detections still advance the tracker.
      const int first = out.empty() ? 1 : out.back().frame + 1;
      for (int f = first; f < det.frame; ++f) out.push_back({f, {}, {}});
      out.push_back({det.frame, {}, {}});
    }
    detect::Detection dd;
    dd.box = det.box();
    dd.score = det.conf;
    dd.center = {static_cast<std::size_t>(std::max(0.0, std::floor(dd.box.cy() / detect::kStride))),
                 static_cast<std::size_t>(std::max(0.0, std::floor(dd.box.cx() / detect::kStride)))};
    out.back().detections.push_back(dd);
    out.back().embeddings.push_back(e / e.norm());
  }
  while (std::getline(embeddings, line)) {
    ++line_number;
    if (line.find_first_not_of(" \t\r") != std::string::npos) throw ParseError("more embedding rows than detections", line_number);
  }
  return out;
}

void write_embeddings(std::ostream& out, const io::SynthSequence& seq) {
  for (const auto& f : seq.frames) {
    for (const auto& e : f.embeddings) {
      out << f.frame;
      for (Eigen::Index k = 0; k < e.size(); ++k) out << ',' << io::format_real(e(k));
      out << '\n';
    }
  }
}

}  // namespace reltrack::pipeline
