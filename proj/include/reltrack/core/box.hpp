// Copyright 2026 The reltrack Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <algorithm>

namespace reltrack {

/// Axis-aligned box in pixel coordinates, (left, top) to (right, bottom).
struct Box {
  double l = 0.0;
  double t = 0.0;
  double r = 0.0;
  double b = 0.0;

  double width() const { return r - l; }
  double height() const { return b - t; }
  double cx() const { return 0.5 * (l + r); }
  double cy() const { return 0.5 * (t + b); }
  double area() const { return std::max(0.0, width()) * std::max(0.0, height()); }
  bool well_formed() const { return r > l && b > t; }

  static Box from_ltwh(double l, double t, double w, double h) { return {l, t, l + w, t + h}; }
  static Box from_center(double cx, double cy, double w, double h) {
    return {cx - 0.5 * w, cy - 0.5 * h, cx + 0.5 * w, cy + 0.5 * h};
  }

  friend bool operator==(const Box&, const Box&) = default;
};

inline double iou(const Box& a, const Box& b) {
  const double iw = std::min(a.r, b.r) - std::max(a.l, b.l);
  const double ih = std::min(a.b, b.b) - std::max(a.t, b.t);
  if (iw <= 0.0 || ih <= 0.0) return 0.0;
  const double inter = iw * ih;
  const double uni = a.area() + b.area() - inter;
  return uni > 0.0 ? inter / uni : 0.0;
}

}  // namespace reltrack
