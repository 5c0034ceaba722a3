// Copyright 2026 The reltrack Authors
// SPDX-License-Identifier: Apache-2.0

// Plain-text tensor dumps and grayscale PPM rendering of 2-D maps.

#pragma once

#include <cstddef>
#include <iosfwd>
#include <string>

#include "reltrack/tensor/tensor.hpp"

namespace reltrack::io {

/// "tensor <rank> <d0> ... <dk>" then one shortest-form value per line.
void write_tensor(std::ostream& out, const Tensor<double>& t);
void write_tensor_file(const std::string& path, const Tensor<double>& t);

/// Throws ParseError with the line number on malformed input.
Tensor<double> read_tensor(std::istream& in);
Tensor<double> read_tensor_file(const std::string& path);

/// Picks one channel of an [H, W] or [H, W, C] tensor as an [H, W] map.
Tensor<double> channel_map(const Tensor<double>& t, std::size_t channel = 0);

/// Binary P6 image of an [H, W] map, min-max scaled to 0..255 and written to
/// all three color planes; each cell becomes a scale x scale block. A constant
/// map renders black.
void write_ppm(std::ostream& out, const Tensor<double>& map, std::size_t scale = 1);
void write_ppm_file(const std::string& path, const Tensor<double>& map, std::size_t scale = 1);

}  // namespace reltrack::io
