// Copyright 2026 The reltrack Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <Eigen/Dense>

#include "reltrack/core/box.hpp"

namespace reltrack::assoc {

/// Noise scales, as multiples of the box height.
struct MotionNoise {
  double position = 1.0 / 20.0;
  double velocity = 1.0 / 160.0;
  // Initial uncertainty is kept separate so a zero-noise filter can still learn velocity.
  double init_position = 2.0 / 20.0;
  double init_velocity = 10.0 / 160.0;

  /// No process or measurement noise and an exact initial position; only the
  /// initial velocity is uncertain, so two observations pin a linear track.
  static MotionNoise zero() { return {0.0, 0.0, 0.0, 10.0 / 160.0}; }
};

/// Constant-velocity Kalman filter over (cx, cy, aspect, height) and their
/// velocities.
class MotionState {
 public:
  using Vec8 = Eigen::Matrix<double, 8, 1>;
  using Mat8 = Eigen::Matrix<double, 8, 8>;
  using Vec4 = Eigen::Matrix<double, 4, 1>;
  using Mat4 = Eigen::Matrix<double, 4, 4>;

  /// Starts at rest at `box`. Throws std::invalid_argument on a non-positive extent.
  MotionState(const Box& box, const MotionNoise& noise = {});
  MotionState() : MotionState(Box{0.0, 0.0, 1.0, 1.0}) {}

  void predict();
  void update(const Box& box);

  Box box() const;
  const Vec8& mean() const { return mean_; }
  const Mat8& covariance() const { return cov_; }

  /// Projected measurement mean and covariance (including measurement noise).
  void project(Vec4& mean, Mat4& cov) const;

  /// Squared Mahalanobis distance of the detection's center from the predicted
  /// center. Variances are floored at 1 px^2.
  double center_distance_sq(const Box& box) const;

 private:
  Vec4 measurement_noise_std() const;

  MotionNoise noise_;
  Vec8 mean_;
  Mat8 cov_;
};

}  // namespace reltrack::assoc
