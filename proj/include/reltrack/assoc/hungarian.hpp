// Copyright 2026 The reltrack Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <limits>
#include <utility>
#include <vector>

namespace reltrack::assoc {

/// Rectangular cost table. Entries equal to kForbidden can never be matched.
class CostMatrix {
 public:
  static constexpr double kForbidden = std::numeric_limits<double>::infinity();

  CostMatrix() = default;
  CostMatrix(std::size_t rows, std::size_t cols, double fill = 0.0)
      : rows_(rows), cols_(cols), cost_(rows * cols, fill) {}
  CostMatrix(std::size_t rows, std::size_t cols, std::vector<double> values);

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }
  bool empty() const { return rows_ == 0 || cols_ == 0; }

  double& operator()(std::size_t r, std::size_t c) { return cost_[r * cols_ + c]; }
  double operator()(std::size_t r, std::size_t c) const { return cost_[r * cols_ + c]; }

  bool forbidden(std::size_t r, std::size_t c) const { return (*this)(r, c) == kForbidden; }
  void forbid(std::size_t r, std::size_t c) { (*this)(r, c) = kForbidden; }

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> cost_;
};

struct Assignment {
  std::vector<std::pair<std::size_t, std::size_t>> pairs;  // sorted by row
  std::vector<std::size_t> unmatched_rows;
  std::vector<std::size_t> unmatched_cols;

  double total_cost(const CostMatrix& costs) const;
};

/// Optimal assignment. Among matchings that use the largest possible number of
/// allowed pairs, returns one of minimum total cost; among those, the
/// lexicographically smallest (column of row 0 first, then row 1, ...).
/// Rectangular inputs are padded internally. Entries must be finite or kForbidden.
Assignment hungarian(const CostMatrix& costs);

}  // namespace reltrack::assoc
