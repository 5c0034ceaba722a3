// Copyright 2026 The reltrack Authors
// SPDX-License-Identifier: Apache-2.0

// Ways of turning a sequence into tracker input: oracle features, rendered
// target maps run through the decoder, or the small network.

#pragma once

#include <string>
#include <vector>

#include <Eigen/Dense>

#include "reltrack/assoc/tracker.hpp"
#include "reltrack/io/mot.hpp"
#include "reltrack/io/synth.hpp"
#include "reltrack/model/model.hpp"

namespace reltrack::pipeline {

/// Renders each frame's detections as heatmap / offset / size maps plus an
/// embedding map holding each identity vector at its center cell, then decodes
/// the maps back into detections and reads their embeddings.
std::vector<assoc::FrameObservations> observations_from_maps(const io::SynthSequence& seq,
                                                             const io::SynthScenario& scenario,
                                                             const detect::DecodeOptions& decode = {});

struct NetworkOptions {
  model::NetConfig net;
  std::uint64_t seed = 7;
  std::size_t train_steps = 500;
  double learning_rate = 0.01;
};

/// Trains the network on the first frame, then runs it on every frame.
std::vector<assoc::FrameObservations> observations_from_network(const io::SynthSequence& seq,
                                                                const io::SynthScenario& scenario,
                                                                const NetworkOptions& options,
                                                                const detect::DecodeOptions& decode = {});

/// Detection lines paired with embedding rows "frame,e1,...,eD", line for line.
/// Throws ParseError on count, frame or width mismatches.
std::vector<assoc::FrameObservations> observations_from_files(const std::vector<io::MotLine>& detections,
                                                              std::istream& embeddings);

/// Embedding rows matching io::detection_sequence(seq) written with write_mot.
void write_embeddings(std::ostream& out, const io::SynthSequence& seq);

}  // namespace reltrack::pipeline
