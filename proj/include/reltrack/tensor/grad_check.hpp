// Copyright 2026 The reltrack Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <functional>
#include <vector>

#include "reltrack/tensor/graph.hpp"

namespace reltrack {

struct GradCheckOptions {
  double step = 1e-6;
  // Denominator floor: entries with |analytic|, |numeric| below it are
  // compared on an absolute scale.
  double floor = 1e-4;
};

struct GradCheckResult {
  double max_rel_error = 0.0;
  std::size_t checked = 0;
  // The entry behind max_rel_error.
  std::size_t worst_param = 0;
  std::size_t worst_index = 0;
  double worst_numeric = 0.0;
  double worst_analytic = 0.0;
};

/// Builds the scalar objective on the given graph. Parameters are bound with
/// Graph::param so both passes see the same values.
using ScalarFn = std::function<Var(Graph<double>&)>;

/// Compares reverse-mode gradients of `f` against central finite differences
/// for every element of every parameter. Throws NumericError if `f` is non-finite.
GradCheckResult grad_check(const ScalarFn& f, const std::vector<Parameter<double>*>& params,
                           const GradCheckOptions& options = {});

}  // namespace reltrack
