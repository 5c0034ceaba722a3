// Copyright 2026 The reltrack Authors
// SPDX-License-Identifier: Apache-2.0

#include "reltrack/assoc/tracker.hpp"

#include <algorithm>
#include <stdexcept>
#include <string>

namespace reltrack::assoc {

template <typename T>
std::vector<Eigen::VectorXd> embeddings_at_centers(const Tensor<T>& embedding_map,
                                                   const std::vector<detect::Detection>& detections) {
  if (embedding_map.rank() != 3) throw DimensionError("embeddings_at_centers: map must be [H, W, D]");
  const std::size_t gh = embedding_map.dim(0), gw = embedding_map.dim(1), d = embedding_map.dim(2);
  std::vector<Eigen::VectorXd> out;
  out.reserve(detections.size());
  for (const auto& det : detections) {
    if (det.center.row >= gh || det.center.col >= gw) {
      throw DimensionError("embeddings_at_centers: detection center outside the embedding grid");
    }
    Eigen::VectorXd v(static_cast<Eigen::Index>(d));
    const std::size_t base = (det.center.row * gw + det.center.col) * d;
    for (std::size_t k = 0; k < d; ++k) v(static_cast<Eigen::Index>(k)) = static_cast<double>(embedding_map[base + k]);
    const double norm = v.norm();
    if (!(norm > 0.0)) throw NumericError("embeddings_at_centers: zero embedding at a detection center");
    out.push_back(v / norm);
  }
  return out;
}

CostMatrix cosine_cost(const std::vector<const Track*>& tracks, const std::vector<Eigen::VectorXd>& detections) {
  CostMatrix costs(tracks.size(), detections.size());
  for (std::size_t i = 0; i < tracks.size(); ++i) {
    for (std::size_t j = 0; j < detections.size(); ++j) {
      if (tracks[i]->embedding.size() != detections[j].size()) {
        throw DimensionError("cosine_cost: embedding widths disagree");
      }
      costs(i, j) = std::clamp(1.0 - tracks[i]->embedding.dot(detections[j]), 0.0, 2.0);
    }
  }
  return costs;
}

void Tracker::update_track(Track& track, const detect::Detection& det, const Eigen::VectorXd& embedding,
                           int frame) {
  track.motion.update(det.box);
  const double m = config_.ema_momentum;
  Eigen::VectorXd e = m * track.embedding + (1.0 - m) * embedding;
  const double norm = e.norm();
  track.embedding = norm > 0.0 ? Eigen::VectorXd(e / norm) : embedding;
  track.boxes.push_back({frame, det.box, det.score, false});
  track.status = TrackStatus::kActive;
  track.lost_since = -1;
  track.last_frame = frame;
}

void Tracker::associate_frame(const FrameObservations& obs) {
  if (started_ && obs.frame <= last_frame_) {
    throw std::invalid_argument("associate_frame: frame " + std::to_string(obs.frame) +
                                " does not follow frame " + std::to_string(last_frame_));
  }
  if (obs.embeddings.size() != obs.detections.size()) {
    throw DimensionError("associate_frame: one embedding per detection required");
  }
  started_ = true;
  last_frame_ = obs.frame;

  std::vector<std::size_t> pool;
  for (std::size_t i = 0; i < tracks_.size(); ++i) {
    if (tracks_[i].status == TrackStatus::kFinished) continue;
    tracks_[i].motion.predict();
    pool.push_back(i);
  }

  const std::size_t n_det = obs.detections.size();
  std::vector<char> det_used(n_det, 0);
  std::vector<char> track_used(tracks_.size(), 0);

  // Stage 1: appearance, gated by motion.
  {
    std::vector<const Track*> ptrs;
    for (std::size_t i : pool) ptrs.push_back(&tracks_[i]);
    CostMatrix costs = cosine_cost(ptrs, obs.embeddings);
    const double gate_sq = config_.gate_sigmas * config_.gate_sigmas;
    for (std::size_t r = 0; r < pool.size(); ++r) {
      for (std::size_t c = 0; c < n_det; ++c) {
        if (costs(r, c) > config_.embedding_thresh) {
          costs.forbid(r, c);
        } else if (config_.motion_gating &&
                   tracks_[pool[r]].motion.center_distance_sq(obs.detections[c].box) > gate_sq) {
          costs.forbid(r, c);
        }
      }
    }
    for (const auto& [r, c] : hungarian(costs).pairs) {
      update_track(tracks_[pool[r]], obs.detections[c], obs.embeddings[c], obs.frame);
      track_used[pool[r]] = 1;
      det_used[c] = 1;
    }
  }

  // Stage 2: overlap between still-active tracks and leftover detections.
  {
    std::vector<std::size_t> rows, cols;
    for (std::size_t i : pool) {
      if (!track_used[i] && tracks_[i].status == TrackStatus::kActive) rows.push_back(i);
    }
    for (std::size_t j = 0; j < n_det; ++j) {
      if (!det_used[j]) cols.push_back(j);
    }
    CostMatrix costs(rows.size(), cols.size());
    for (std::size_t r = 0; r < rows.size(); ++r) {
      const Box predicted = tracks_[rows[r]].motion.box();
      for (std::size_t c = 0; c < cols.size(); ++c) {
        const double overlap = iou(predicted, obs.detections[cols[c]].box);
        if (overlap < config_.iou_thresh) {
          costs.forbid(r, c);
        } else {
          costs(r, c) = 1.0 - overlap;
        }
      }
    }
    for (const auto& [r, c] : hungarian(costs).pairs) {
      const std::size_t j = cols[c];
      update_track(tracks_[rows[r]], obs.detections[j], obs.embeddings[j], obs.frame);
      track_used[rows[r]] = 1;
      det_used[j] = 1;
    }
  }

  for (std::size_t i : pool) {
    Track& t = tracks_[i];
    if (track_used[i]) continue;
    if (t.status == TrackStatus::kActive) {
      t.status = TrackStatus::kLost;
      t.lost_since = obs.frame;
    }
    if (t.status == TrackStatus::kLost && obs.frame - t.last_frame > config_.max_lost) {
      t.status = TrackStatus::kFinished;
    }
  }

  for (std::size_t j = 0; j < n_det; ++j) {
    if (det_used[j] || obs.detections[j].score < config_.new_track_score) continue;
    Track t;
    t.id = next_id_++;
    t.motion = MotionState(obs.detections[j].box, config_.noise);
    const double norm = obs.embeddings[j].norm();
    if (!(norm > 0.0)) throw NumericError("associate_frame: zero embedding for a new track");
    t.embedding = obs.embeddings[j] / norm;
    t.boxes.push_back({obs.frame, obs.detections[j].box, obs.detections[j].score, false});
    t.last_frame = obs.frame;
    tracks_.push_back(std::move(t));
  }
}

std::vector<Track> Tracker::finish() {
  for (Track& t : tracks_) t.status = TrackStatus::kFinished;
  std::vector<Track> out = tracks_;
  std::sort(out.begin(), out.end(), [](const Track& a, const Track& b) { return a.id < b.id; });
  return out;
}

std::vector<Track> fill_trajectories(std::vector<Track> tracks, int gap_max) {
  for (Track& t : tracks) {
    std::vector<TrackBox> filled;
    filled.reserve(t.boxes.size());
    for (std::size_t i = 0; i < t.boxes.size(); ++i) {
      if (i > 0) {
        const TrackBox& a = t.boxes[i - 1];
        const TrackBox& b = t.boxes[i];
        const int gap = b.frame - a.frame - 1;
        if (gap >= 1 && gap <= gap_max) {
          const double span = static_cast<double>(b.frame - a.frame);
          for (int f = a.frame + 1; f < b.frame; ++f) {
            const double s = static_cast<double>(f - a.frame) / span;
            auto lerp = [s](double x, double y) { return x + s * (y - x); };
            TrackBox tb;
            tb.frame = f;
            tb.box = {lerp(a.box.l, b.box.l), lerp(a.box.t, b.box.t), lerp(a.box.r, b.box.r), lerp(a.box.b, b.box.b)};
            tb.score = lerp(a.score, b.score);
            tb.filled = true;
            filled.push_back(tb);
          }
        }
      }
      filled.push_back(t.boxes[i]);
    }
    t.boxes = std::move(filled);
  }
  return tracks;
}

std::vector<Track> track_sequence(const std::vector<FrameObservations>& frames, const TrackerConfig& config) {
  Tracker tracker(config);
  for (const auto& f : frames) tracker.associate_frame(f);
  std::vector<Track> tracks = tracker.finish();
  if (config.fill_gaps) tracks = fill_trajectories(std::move(tracks), config.gap_max);
  return tracks;
}

template std::vector<Eigen::VectorXd> embeddings_at_centers<float>(const Tensor<float>&,
                                                                   const std::vector<detect::Detection>&);
template std::vector<Eigen::VectorXd> embeddings_at_centers<double>(const Tensor<double>&,
                                                                    const std::vector<detect::Detection>&);

}  // namespace reltrack::assoc
