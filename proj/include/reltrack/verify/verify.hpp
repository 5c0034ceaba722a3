// Copyright 2026 The reltrack Authors
// SPDX-License-Identifier: Apache-2.0

// Self-checks shared by the CLI, the acceptance suite and the benchmarks:
// finite-difference gradient checks of every differentiable block and the
// runtime scaling of deformable vs dense attention.

#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "reltrack/tensor/kernels.hpp"

namespace reltrack::verify {

struct GradSuiteOptions {
  std::size_t seeds = 20;
  std::uint64_t first_seed = 1;
  double tolerance = 1e-4;
  double step = 1e-6;
  std::size_t channels = 8;
  std::size_t height = 6;
  std::size_t width = 6;
  std::size_t samples = 4;
  std::size_t heads = 2;
};

struct GradCaseResult {
  std::string name;
  double max_rel_error = 0.0;  // worst over all seeds
  std::size_t seeds = 0;
  std::size_t checked = 0;     // gradient entries compared, summed over seeds
  bool passed = false;
};

/// Names of the checked blocks, in run order.
std::vector<std::string> gradient_case_names();

/// Runs every case on `seeds` random draws. `only`, when non-empty, restricts
/// the run to one case name.
std::vector<GradCaseResult> gradient_suite(const GradSuiteOptions& options = {}, const std::string& only = {});

struct ScalingOptions {
  std::vector<std::size_t> sizes{32, 45, 64};  // square maps
  std::size_t channels = 32;
  std::size_t samples = 9;
  std::size_t heads = 4;
  std::size_t repeats = 5;
  std::uint64_t seed = 1;
  kernels::Exec exec = kernels::Exec::kSerial;
};

struct ScalingResult {
  std::vector<std::size_t> sizes;
  std::vector<double> deformable_seconds;  // median per size
  std::vector<double> dense_seconds;
  std::vector<double> deformable_ratios;   // consecutive sizes
  std::vector<double> dense_ratios;
};

/// Median wall time of the forward attention pass per map size.
ScalingResult attention_scaling(const ScalingOptions& options = {});

/// Median wall time of `fn` over `repeats` calls.
double median_seconds(const std::function<void()>& fn, std::size_t repeats);

}  // namespace reltrack::verify
