// Copyright 2026 The reltrack Authors
// SPDX-License-Identifier: Apache-2.0

#include "reltrack/assoc/hungarian.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace reltrack::assoc {

CostMatrix::CostMatrix(std::size_t rows, std::size_t cols, std::vector<double> values)
    : rows_(rows), cols_(cols), cost_(std::move(values)) {
  if (cost_.size() != rows * cols) throw std::invalid_argument("CostMatrix: value count does not match shape");
}

double Assignment::total_cost(const CostMatrix& costs) const {
  double total = 0.0;
  for (const auto& [r, c] : pairs) total += costs(r, c);
  return total;
}

namespace {

// Shortest augmenting path solver on a dense square matrix (potentials form).
// Returns row_of_col and fills the dual potentials.
std::vector<std::size_t> solve_square(const std::vector<double>& a, std::size_t n, std::vector<double>& u,
                                      std::vector<double>& v) {
  constexpr double kInf = std::numeric_limits<double>::infinity();
  constexpr std::size_t kNone = std::numeric_limits<std::size_t>::max();
  // 1-based columns with column 0 as the virtual root.
  u.assign(n + 1, 0.0);
  v.assign(n + 1, 0.0);
  std::vector<std::size_t> p(n + 1, 0), way(n + 1, 0);
  for (std::size_t i = 1; i <= n; ++i) {
    p[0] = i;
    std::size_t j0 = 0;
    std::vector<double> minv(n + 1, kInf);
    std::vector<char> used(n + 1, 0);
    do {
      used[j0] = 1;
      const std::size_t i0 = p[j0];
      double delta = kInf;
      std::size_t j1 = kNone;
      for (std::size_t j = 1; j <= n; ++j) {
        if (used[j]) continue;
        const double cur = a[(i0 - 1) * n + (j - 1)] - u[i0] - v[j];
        if (cur < minv[j]) {
          minv[j] = cur;
          way[j] = j0;
        }
        if (minv[j] < delta) {
          delta = minv[j];
          j1 = j;
        }
      }
      for (std::size_t j = 0; j <= n; ++j) {
        if (used[j]) {
          u[p[j]] += delta;
          v[j] -= delta;
        } else {
          minv[j] -= delta;
        }
      }
      j0 = j1;
    } while (p[j0] != 0);
    do {
      const std::size_t j1 = way[j0];
      p[j0] = p[j1];
      j0 = j1;
    } while (j0 != 0);
  }
  std::vector<std::size_t> row_of_col(n);
  for (std::size_t j = 1; j <= n; ++j) row_of_col[j - 1] = p[j] - 1;
  return row_of_col;
}

// Moves an optimal matching to the lexicographically smallest optimal one by
// rerouting along alternating paths of zero reduced cost.
void lexicographic_refine(const std::vector<double>& a, std::size_t n, const std::vector<double>& u,
                          const std::vector<double>& v, double tol, std::vector<std::size_t>& col_of_row,
                          std::vector<std::size_t>& row_of_col) {
  auto tight = [&](std::size_t i, std::size_t j) { return std::abs(a[i * n + j] - u[i + 1] - v[j + 1]) <= tol; };
  constexpr std::size_t kNone = std::numeric_limits<std::size_t>::max();
  std::vector<std::size_t> parent_col(n), parent_row(n);
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t target = col_of_row[i];
    for (std::size_t j = 0; j < target; ++j) {
      if (!tight(i, j)) continue;
      const std::size_t r = row_of_col[j];
      if (r < i) continue;
      // BFS over rows > i from r, looking for a tight edge into `target`.
      std::fill(parent_col.begin(), parent_col.end(), kNone);
      std::fill(parent_row.begin(), parent_row.end(), kNone);
      std::vector<std::size_t> queue{r};
      std::vector<char> row_seen(n, 0), col_seen(n, 0);
      row_seen[r] = 1;
      col_seen[j] = 1;
      std::size_t found_row = kNone;
      for (std::size_t qi = 0; qi < queue.size() && found_row == kNone; ++qi) {
        const std::size_t x = queue[qi];
        for (std::size_t y = 0; y < n; ++y) {
          if (col_seen[y] || !tight(x, y)) continue;
          if (y == target) {
            found_row = x;
            break;
          }
          const std::size_t owner = row_of_col[y];
          if (owner <= i || row_seen[owner]) continue;
          col_seen[y] = 1;
          row_seen[owner] = 1;
          parent_row[owner] = x;
          parent_col[owner] = y;
          queue.push_back(owner);
        }
      }
      if (found_row == kNone) continue;
      // Augment: found_row takes target, each row on the path takes the column
      // that pulled its successor in, r ends with its new column, i takes j.
      std::size_t x = found_row, y = target;
      while (true) {
        col_of_row[x] = y;
        row_of_col[y] = x;
        if (x == r) break;
        y = parent_col[x];
        x = parent_row[x];
      }
      col_of_row[i] = j;
      row_of_col[j] = i;
      break;
    }
  }
}

}  // namespace

Assignment hungarian(const CostMatrix& costs) {
  Assignment out;
  const std::size_t rows = costs.rows(), cols = costs.cols();
  if (rows == 0 || cols == 0) {
    for (std::size_t r = 0; r < rows; ++r) out.unmatched_rows.push_back(r);
    for (std::size_t c = 0; c < cols; ++c) out.unmatched_cols.push_back(c);
    return out;
  }

  double lo = std::numeric_limits<double>::infinity(), hi = -lo;
  bool any_allowed = false;
  for (std::size_t r = 0; r < rows; ++r) {
    for (std::size_t c = 0; c < cols; ++c) {
      const double x = costs(r, c);
      if (x == CostMatrix::kForbidden) continue;
      if (!std::isfinite(x)) throw std::invalid_argument("hungarian: costs must be finite or forbidden");
      lo = std::min(lo, x);
      hi = std::max(hi, x);
      any_allowed = true;
    }
  }
  if (!any_allowed) lo = hi = 0.0;

  const std::size_t n = std::max(rows, cols);
  // Every unmatched slot costs `big`, which exceeds any achievable spread of
  // real costs, so cardinality is maximized before cost is minimized.
  const double big = (hi - lo) * static_cast<double>(n) + 1.0;
  std::vector<double> a(n * n, big);
  for (std::size_t r = 0; r < rows; ++r) {
    for (std::size_t c = 0; c < cols; ++c) {
      if (!costs.forbidden(r, c)) a[r * n + c] = costs(r, c) - lo;
    }
  }

  std::vector<double> u, v;
  std::vector<std::size_t> row_of_col = solve_square(a, n, u, v);
  std::vector<std::size_t> col_of_row(n);
  for (std::size_t j = 0; j < n; ++j) col_of_row[row_of_col[j]] = j;
  const double tol = 1e-11 * (1.0 + big * static_cast<double>(n));
  lexicographic_refine(a, n, u, v, tol, col_of_row, row_of_col);

  std::vector<char> col_used(cols, 0);
  for (std::size_t r = 0; r < rows; ++r) {
    const std::size_t c = col_of_row[r];
    if (c < cols && !costs.forbidden(r, c)) {
      out.pairs.emplace_back(r, c);
      col_used[c] = 1;
    } else {
      out.unmatched_rows.push_back(r);
    }
  }
  for (std::size_t c = 0; c < cols; ++c) {
    if (!col_used[c]) out.unmatched_cols.push_back(c);
  }
  return out;
}

}  // namespace reltrack::assoc
