// Copyright 2026 The reltrack Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <map>
#include <vector>

#include "reltrack/core/box.hpp"

namespace reltrack {

struct LabeledBox {
  int id = -1;
  Box box;
  double score = 1.0;
};

/// Frame index (1-based) to the labeled boxes in that frame.
using Sequence = std::map<int, std::vector<LabeledBox>>;

}  // namespace reltrack
