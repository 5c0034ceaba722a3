// Copyright 2026 The reltrack Authors
// SPDX-License-Identifier: Apache-2.0

// CLEAR-MOT (MOTA, MOTP, FP, FN, IDS), IDF1 and MT/ML over a whole sequence.

#pragma once

#include <cstddef>
#include <map>
#include <utility>
#include <vector>

#include "reltrack/core/sequence.hpp"

namespace reltrack::metrics {

struct EvalConfig {
  double iou_thresh = 0.5;
  // Keep last known gt -> prediction correspondences when they still overlap.
  bool continuity = true;
  double mostly_tracked = 0.8;  // inclusive
  double mostly_lost = 0.2;     // inclusive
};

/// Correspondences of one frame as (gt index, pred index) plus their IoU.
struct FrameMatch {
  std::vector<std::pair<std::size_t, std::size_t>> pairs;
  std::vector<double> overlaps;
  std::size_t false_positives = 0;
  std::size_t misses = 0;
};

struct MetricsReport {
  double mota = 0.0;
  double motp = 0.0;
  double idf1 = 0.0;
  double mt = 0.0;
  double ml = 0.0;
  std::size_t fp = 0;
  std::size_t fn = 0;
  std::size_t ids = 0;
  std::size_t tp = 0;
  std::size_t gt_count = 0;
  std::size_t pred_count = 0;
};

/// Hungarian matching on 1 - IoU with pairs below `iou_thresh` forbidden.
/// `previous` maps gt id -> prediction id from earlier frames; with
/// continuity on, those pairs are kept first when still above threshold.
FrameMatch match_frame(const std::vector<LabeledBox>& gt, const std::vector<LabeledBox>& pred,
                       const EvalConfig& config, const std::map<int, int>* previous = nullptr);

/// Per-frame matches for the whole sequence, in frame order.
std::vector<std::pair<int, FrameMatch>> match_sequence(const Sequence& gt, const Sequence& pred,
                                                       const EvalConfig& config = {});

/// MOTA, MOTP, FP, FN, IDS, TP and counts. Throws std::domain_error when the
/// ground truth is empty.
MetricsReport clear_mot(const Sequence& gt, const Sequence& pred, const EvalConfig& config = {});

/// ID F1 under the best one-to-one mapping of gt identities to prediction ids.
double idf1(const Sequence& gt, const Sequence& pred, const EvalConfig& config = {});

/// Fractions of gt identities covered at least `mostly_tracked` / at most
/// `mostly_lost` of their frames.
std::pair<double, double> mt_ml(const Sequence& gt, const Sequence& pred, const EvalConfig& config = {});

/// All of the above.
MetricsReport evaluate(const Sequence& gt, const Sequence& pred, const EvalConfig& config = {});

}  // namespace reltrack::metrics
