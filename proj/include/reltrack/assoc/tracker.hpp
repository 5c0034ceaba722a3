// Copyright 2026 The reltrack Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <vector>

#include <Eigen/Dense>

#include "reltrack/assoc/hungarian.hpp"
#include "reltrack/assoc/motion.hpp"
#include "reltrack/detect/detect.hpp"

namespace reltrack::assoc {

struct TrackerConfig {
  double ema_momentum = 0.9;
  double embedding_thresh = 0.4;  // stage 1: forbid cosine cost above this
  double iou_thresh = 0.5;        // stage 2: forbid IoU below this
  double new_track_score = 0.5;
  int max_lost = 30;
  int gap_max = 30;
  bool motion_gating = true;
  double gate_sigmas = 3.0;
  bool fill_gaps = true;
  MotionNoise noise;
};

enum class TrackStatus { kActive, kLost, kFinished };

struct TrackBox {
  int frame = 0;
  Box box;
  double score = 0.0;
  bool filled = false;
};

struct Track {
  int id = 0;
  std::vector<TrackBox> boxes;  // strictly increasing frames
  Eigen::VectorXd embedding;    // unit norm
  MotionState motion;
  TrackStatus status = TrackStatus::kActive;
  int lost_since = -1;
  int last_frame = 0;
};

/// Detections of one frame with one embedding per detection.
struct FrameObservations {
  int frame = 0;
  std::vector<detect::Detection> detections;
  std::vector<Eigen::VectorXd> embeddings;
};

/// L2-normalized embedding vectors read at each detection's center cell of an
/// [H, W, D] map. Throws NumericError on an all-zero vector.
template <typename T>
std::vector<Eigen::VectorXd> embeddings_at_centers(const Tensor<T>& embedding_map,
                                                   const std::vector<detect::Detection>& detections);

/// cost[i][j] = 1 - <track_i.embedding, det_j>, for unit vectors.
CostMatrix cosine_cost(const std::vector<const Track*>& tracks, const std::vector<Eigen::VectorXd>& detections);

/// Online two-stage tracker: embedding matching gated by motion, then IoU
/// matching for the leftovers, then track birth and death.
class Tracker {
 public:
  explicit Tracker(TrackerConfig config = {}) : config_(config) {}

  /// Frames must arrive in strictly increasing order; a repeated or earlier
  /// index throws std::invalid_argument.
  void associate_frame(const FrameObservations& obs);

  /// Every track created so far, ordered by id.
  const std::vector<Track>& tracks() const { return tracks_; }
  const TrackerConfig& config() const { return config_; }

  /// Marks all tracks finished and returns them ordered by id.
  std::vector<Track> finish();

 private:
  void update_track(Track& track, const detect::Detection& det, const Eigen::VectorXd& embedding, int frame);

  TrackerConfig config_;
  std::vector<Track> tracks_;
  int next_id_ = 1;
  int last_frame_ = 0;
  bool started_ = false;
};

/// Linearly interpolates interior gaps of at most `gap_max` frames. Observed
/// boxes are left untouched; filled boxes carry filled = true.
std::vector<Track> fill_trajectories(std::vector<Track> tracks, int gap_max);

/// Runs the tracker over all frames, then fills gaps when configured.
std::vector<Track> track_sequence(const std::vector<FrameObservations>& frames, const TrackerConfig& config = {});

}  // namespace reltrack::assoc
