// Copyright 2026 The reltrack Authors
// SPDX-License-Identifier: Apache-2.0

#include "reltrack/metrics/metrics.hpp"

#include <set>
#include <tuple>
#include <stdexcept>

#include "reltrack/assoc/hungarian.hpp"

namespace reltrack::metrics {

namespace {

const std::vector<LabeledBox>& frame_or_empty(const Sequence& seq, int frame) {
  static const std::vector<LabeledBox> kEmpty;
  auto it = seq.find(frame);
  return it == seq.end() ? kEmpty : it->second;
}

std::set<int> all_frames(const Sequence& a, const Sequence& b) {
  std::set<int> frames;
  for (const auto& [f, _] : a) frames.insert(f);
  for (const auto& [f, _] : b) frames.insert(f);
  return frames;
}

std::size_t box_count(const Sequence& seq) {
  std::size_t n = 0;
  for (const auto& [_, boxes] : seq) n += boxes.size();
  return n;
}

}  // namespace

FrameMatch match_frame(const std::vector<LabeledBox>& gt, const std::vector<LabeledBox>& pred,
                       const EvalConfig& config, const std::map<int, int>* previous) {
  FrameMatch out;
  std::vector<char> gt_used(gt.size(), 0), pred_used(pred.size(), 0);

  if (config.continuity && previous != nullptr) {
    for (std::size_t i = 0; i < gt.size(); ++i) {
      auto it = previous->find(gt[i].id);
      if (it == previous->end()) continue;
      for (std::size_t j = 0; j < pred.size(); ++j) {
        if (pred_used[j] || pred[j].id != it->second) continue;
        const double o = iou(gt[i].box, pred[j].box);
        if (o >= config.iou_thresh) {
          out.pairs.emplace_back(i, j);
          out.overlaps.push_back(o);
          gt_used[i] = pred_used[j] = 1;
        }
        break;
      }
    }
  }

  std::vector<std::size_t> rows, cols;
  for (std::size_t i = 0; i < gt.size(); ++i) {
    if (!gt_used[i]) rows.push_back(i);
  }
  for (std::size_t j = 0; j < pred.size(); ++j) {
    if (!pred_used[j]) cols.push_back(j);
  }
  assoc::CostMatrix costs(rows.size(), cols.size());
  for (std::size_t r = 0; r < rows.size(); ++r) {
    for (std::size_t c = 0; c < cols.size(); ++c) {
      const double o = iou(gt[rows[r]].box, pred[cols[c]].box);
      if (o < config.iou_thresh) {
        costs.forbid(r, c);
      } else {
        costs(r, c) = 1.0 - o;
      }
    }
  }
  for (const auto& [r, c] : assoc::hungarian(costs).pairs) {
    out.pairs.emplace_back(rows[r], cols[c]);
    out.overlaps.push_back(1.0 - costs(r, c));
  }
  out.misses = gt.size() - out.pairs.size();
  out.false_positives = pred.size() - out.pairs.size();
  return out;
}

std::vector<std::pair<int, FrameMatch>> match_sequence(const Sequence& gt, const Sequence& pred,
                                                       const EvalConfig& config) {
  std::vector<std::pair<int, FrameMatch>> out;
  std::map<int, int> previous;
  for (int f : all_frames(gt, pred)) {
    const auto& g = frame_or_empty(gt, f);
    const auto& p = frame_or_empty(pred, f);
    FrameMatch m = match_frame(g, p, config, &previous);
    for (const auto& [i, j] : m.pairs) previous[g[i].id] = p[j].id;
    out.emplace_back(f, std::move(m));
  }
  return out;
}

MetricsReport clear_mot(const Sequence& gt, const Sequence& pred, const EvalConfig& config) {
  MetricsReport rep;
  rep.gt_count = box_count(gt);
  rep.pred_count = box_count(pred);
  if (rep.gt_count == 0) throw std::domain_error("clear_mot: ground truth has no boxes");

  std::map<int, int> last_pred;  // gt id -> most recent matched prediction id
  double overlap_sum = 0.0;
  for (const auto& [f, m] : match_sequence(gt, pred, config)) {
    const auto& g = frame_or_empty(gt, f);
    const auto& p = frame_or_empty(pred, f);
    for (std::size_t k = 0; k < m.pairs.size(); ++k) {
      const int gid = g[m.pairs[k].first].id, pid = p[m.pairs[k].second].id;
      auto it = last_pred.find(gid);
      if (it != last_pred.end() && it->second != pid) ++rep.ids;
      last_pred[gid] = pid;
      overlap_sum += m.overlaps[k];
    }
    rep.tp += m.pairs.size();
    rep.fp += m.false_positives;
    rep.fn += m.misses;
  }
  // Integer numerator keeps e.g. 94/100 exact before the single division.
  const long long errors = static_cast<long long>(rep.fp + rep.fn + rep.ids);
  rep.mota = static_cast<double>(static_cast<long long>(rep.gt_count) - errors) / static_cast<double>(rep.gt_count);
  rep.motp = rep.tp > 0 ? overlap_sum / static_cast<double>(rep.tp) : 0.0;
  return rep;
}

double idf1(const Sequence& gt, const Sequence& pred, const EvalConfig& config) {
  const std::size_t n_gt = box_count(gt), n_pred = box_count(pred);
  if (n_gt + n_pred == 0) return 0.0;

  std::map<int, std::size_t> gt_index, pred_index;
  for (const auto& [_, boxes] : gt) {
    for (const auto& b : boxes) gt_index.emplace(b.id, gt_index.size());
  }
  for (const auto& [_, boxes] : pred) {
    for (const auto& b : boxes) pred_index.emplace(b.id, pred_index.size());
  }
  std::vector<std::size_t> overlap(gt_index.size() * pred_index.size(), 0);
  for (const auto& [f, g] : gt) {
    const auto& p = frame_or_empty(pred, f);
    for (const auto& a : g) {
      for (const auto& b : p) {
        if (iou(a.box, b.box) >= config.iou_thresh) ++overlap[gt_index[a.id] * pred_index.size() + pred_index[b.id]];
      }
    }
  }
  assoc::CostMatrix costs(gt_index.size(), pred_index.size());
  for (std::size_t r = 0; r < costs.rows(); ++r) {
    for (std::size_t c = 0; c < costs.cols(); ++c) {
      const std::size_t k = overlap[r * costs.cols() + c];
      if (k == 0) {
        costs.forbid(r, c);
      } else {
        costs(r, c) = -static_cast<double>(k);
      }
    }
  }
  std::size_t idtp = 0;
  for (const auto& [r, c] : assoc::hungarian(costs).pairs) idtp += overlap[r * costs.cols() + c];
  return 2.0 * static_cast<double>(idtp) / static_cast<double>(n_gt + n_pred);
}

std::pair<double, double> mt_ml(const Sequence& gt, const Sequence& pred, const EvalConfig& config) {
  std::map<int, std::pair<std::size_t, std::size_t>> coverage;  // id -> (matched, total)
  for (const auto& [_, boxes] : gt) {
    for (const auto& b : boxes) ++coverage[b.id].second;
  }
  if (coverage.empty()) return {0.0, 0.0};
  for (const auto& [f, m] : match_sequence(gt, pred, config)) {
    const auto& g = frame_or_empty(gt, f);
    for (const auto& [i, _] : m.pairs) ++coverage[g[i].id].first;
  }
  std::size_t mt = 0, ml = 0;
  for (const auto& [_, c] : coverage) {
    const double ratio = static_cast<double>(c.first) / static_cast<double>(c.second);
    if (ratio >= config.mostly_tracked) ++mt;
    if (ratio <= config.mostly_lost) ++ml;
  }
  const double n = static_cast<double>(coverage.size());
  return {static_cast<double>(mt) / n, static_cast<double>(ml) / n};
}

MetricsReport evaluate(const Sequence& gt, const Sequence& pred, const EvalConfig& config) {
  MetricsReport rep = clear_mot(gt, pred, config);
  rep.idf1 = idf1(gt, pred, config);
  std::tie(rep.mt, rep.ml) = mt_ml(gt, pred, config);
  return rep;
}

}  // namespace reltrack::metrics
