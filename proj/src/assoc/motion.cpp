// Copyright 2026 The reltrack Authors
// SPDX-License-Identifier: Apache-2.0

#include "reltrack/assoc/motion.hpp"

#include <stdexcept>

namespace reltrack::assoc {

namespace {

MotionState::Vec4 to_measurement(const Box& box) {
  if (!(box.width() > 0.0) || !(box.height() > 0.0)) {
    throw std::invalid_argument("motion: box extent must be positive");
  }
  MotionState::Vec4 z;
  z << box.cx(), box.cy(), box.width() / box.height(), box.height();
  return z;
}

}  // namespace

MotionState::MotionState(const Box& box, const MotionNoise& noise) : noise_(noise) {
  const Vec4 z = to_measurement(box);
  mean_.setZero();
  mean_.head<4>() = z;
  const double h = z(3);
  Vec8 std;
  std << noise_.init_position * h, noise_.init_position * h, 1e-2, noise_.init_position * h,
      noise_.init_velocity * h, noise_.init_velocity * h, 1e-5, noise_.init_velocity * h;
  cov_ = std.array().square().matrix().asDiagonal();
}

void MotionState::predict() {
  const double h = mean_(3);
  Vec8 std;
  std << noise_.position * h, noise_.position * h, 1e-2 * (noise_.position > 0.0), noise_.position * h,
      noise_.velocity * h, noise_.velocity * h, 1e-5 * (noise_.velocity > 0.0), noise_.velocity * h;
  Mat8 f = Mat8::Identity();
  for (int i = 0; i < 4; ++i) f(i, i + 4) = 1.0;
  mean_ = f * mean_;
  cov_ = f * cov_ * f.transpose();
  cov_.diagonal() += std.array().square().matrix();
  cov_ = 0.5 * (cov_ + cov_.transpose());
}

MotionState::Vec4 MotionState::measurement_noise_std() const {
  const double h = mean_(3);
  Vec4 std;
  std << noise_.position * h, noise_.position * h, 1e-1 * (noise_.position > 0.0), noise_.position * h;
  return std;
}

void MotionState::project(Vec4& mean, Mat4& cov) const {
  mean = mean_.head<4>();
  cov = cov_.topLeftCorner<4, 4>();
  cov.diagonal() += measurement_noise_std().array().square().matrix();
}

void MotionState::update(const Box& box) {
  const Vec4 z = to_measurement(box);
  Vec4 proj_mean;
  Mat4 s;
  project(proj_mean, s);
  Mat4 r = Mat4::Zero();
  r.diagonal() = measurement_noise_std().array().square().matrix();
  Eigen::Matrix<double, 8, 4> h = Eigen::Matrix<double, 8, 4>::Zero();
  h.topRows<4>().setIdentity();
  // S may be singular when noise is switched off; the pseudo-inverse then
  // leaves directions with zero uncertainty untouched.
  const Mat4 s_inv = s.completeOrthogonalDecomposition().pseudoInverse();
  const Eigen::Matrix<double, 8, 4> gain = cov_ * h * s_inv;
  mean_ += gain * (z - proj_mean);
  // Joseph form keeps the covariance symmetric positive semi-definite.
  const Mat8 ikh = Mat8::Identity() - gain * h.transpose();
  cov_ = ikh * cov_ * ikh.transpose() + gain * r * gain.transpose();
  cov_ = 0.5 * (cov_ + cov_.transpose());
}

Box MotionState::box() const {
  const double h = mean_(3);
  const double w = mean_(2) * h;
  return Box::from_center(mean_(0), mean_(1), w, h);
}

double MotionState::center_distance_sq(const Box& box) const {
  Vec4 mean;
  Mat4 cov;
  project(mean, cov);
  Eigen::Matrix2d c = cov.topLeftCorner<2, 2>();
  c(0, 0) = std::max(c(0, 0), 1.0);
  c(1, 1) = std::max(c(1, 1), 1.0);
  const Eigen::Vector2d d(box.cx() - mean(0), box.cy() - mean(1));
  return d.dot(c.ldlt().solve(d));
}

}  // namespace reltrack::assoc
