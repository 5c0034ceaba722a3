// Copyright 2026 The reltrack Authors
// SPDX-License-Identifier: Apache-2.0

// Deterministic synthetic sequences with oracle detections and embeddings.

#pragma once

#include <cstdint>
#include <vector>

#include <Eigen/Dense>

#include "reltrack/assoc/tracker.hpp"
#include "reltrack/core/sequence.hpp"

namespace reltrack::io {

struct SynthScenario {
  std::uint64_t seed = 1;
  int identities = 20;
  int frames = 200;
  int image_width = 640;
  int image_height = 480;
  int embedding_dim = 32;
  double dropout = 0.0;      // i.i.d. per interior frame
  double sigma = 0.0;        // embedding noise before renormalization
  bool crossing = false;     // first two identities swap x-positions
  bool staggered = false;    // random lifespans instead of all frames
  double box_min = 16.0;     // box width range, pixels
  double box_max = 40.0;
  double score = 1.0;
  double max_speed = 4.0;    // pixels per frame along random paths; crossings are fixed
};

struct SynthFrame {
  int frame = 0;
  std::vector<LabeledBox> detections;  // id is the true identity
  std::vector<Eigen::VectorXd> embeddings;
};

struct SynthSequence {
  Sequence ground_truth;
  std::vector<SynthFrame> frames;  // one per frame index, possibly empty
  std::vector<Eigen::VectorXd> identity_embeddings;
};

/// Builds the scenario. Identity embeddings are orthonormal, so
/// identities > embedding_dim throws std::invalid_argument.
SynthSequence synth_sequence(const SynthScenario& scenario);

/// Tracker input for each frame; detection centers use the stride-4 grid.
std::vector<assoc::FrameObservations> observations(const SynthSequence& seq);

/// Detections as a Sequence with ids replaced by -1.
Sequence detection_sequence(const SynthSequence& seq);

}  // namespace reltrack::io
