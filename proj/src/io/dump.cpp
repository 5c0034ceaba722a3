// Copyright 2026 The reltrack Authors
// SPDX-License-Identifier: Apache-2.0

#include "reltrack/io/dump.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>

#include "reltrack/core/error.hpp"
#include "reltrack/io/mot.hpp"

namespace reltrack::io {

void write_tensor(std::ostream& out, const Tensor<double>& t) {
  out << "tensor " << t.rank();
  for (std::size_t d : t.shape()) out << ' ' << d;
  out << '\n';
  for (double v : t.values()) out << format_real(v) << '\n';
}

void write_tensor_file(const std::string& path, const Tensor<double>& t) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path);
  write_tensor(out, t);
}

Tensor<double> read_tensor(std::istream& in) {
  std::string line;
  if (!std::getline(in, line)) throw ParseError("empty tensor dump", 1);
  std::istringstream header(line);
  std::string tag;
  std::size_t rank = 0;
  if (!(header >> tag >> rank) || tag != "tensor") throw ParseError("expected 'tensor <rank> <dims...>'", 1);
  Shape shape(rank);
  for (auto& d : shape) {
    if (!(header >> d)) throw ParseError("missing dimension", 1);
  }
  std::string rest;
  if (header >> rest) throw ParseError("trailing header text", 1);
  Tensor<double> t(shape);
  std::size_t line_number = 1;
  for (std::size_t i = 0; i < t.size(); ++i) {
    ++line_number;
    if (!std::getline(in, line)) throw ParseError("expected " + std::to_string(t.size()) + " values", line_number);
    double v = 0.0;
    if (!parse_real(line, v)) throw ParseError("bad value '" + line + "'", line_number);
    t[i] = v;
  }
  return t;
}

Tensor<double> read_tensor_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path);
  try {
    return read_tensor(in);
  } catch (const ParseError& e) {
    throw ParseError(e.message(), e.line(), path);
  }
}

Tensor<double> channel_map(const Tensor<double>& t, std::size_t channel) {
  if (t.rank() == 2) {
    if (channel != 0) throw DimensionError("channel_map: a 2-D map has only channel 0");
    return t;
  }
  if (t.rank() != 3) throw DimensionError("channel_map: expected [H, W] or [H, W, C], got " + shape_string(t.shape()));
  const std::size_t h = t.dim(0), w = t.dim(1), c = t.dim(2);
  if (channel >= c) throw DimensionError("channel_map: channel out of range");
  Tensor<double> out(Shape{h, w});
  for (std::size_t i = 0; i < h * w; ++i) out[i] = t[i * c + channel];
  return out;
}

void write_ppm(std::ostream& out, const Tensor<double>& map, std::size_t scale) {
  if (map.rank() != 2) throw DimensionError("write_ppm: expected an [H, W] map");
  if (scale == 0) throw std::invalid_argument("write_ppm: scale must be positive");
  map.require_finite("write_ppm");
  const std::size_t h = map.dim(0), w = map.dim(1);
  const auto [lo_it, hi_it] = std::minmax_element(map.values().begin(), map.values().end());
  const double lo = map.size() ? *lo_it : 0.0, hi = map.size() ? *hi_it : 0.0;
  out << "P6\n" << w * scale << ' ' << h * scale << "\n255\n";
  std::string row;
  for (std::size_t i = 0; i < h; ++i) {
    row.clear();
    for (std::size_t j = 0; j < w; ++j) {
      const double v = hi > lo ? (map[i * w + j] - lo) / (hi - lo) : 0.0;
      const char g = static_cast<char>(static_cast<unsigned char>(std::lround(v * 255.0)));
      row.append(3 * scale, g);
    }
    for (std::size_t s = 0; s < scale; ++s) out.write(row.data(), static_cast<std::streamsize>(row.size()));
  }
}

void write_ppm_file(const std::string& path, const Tensor<double>& map, std::size_t scale) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path);
  write_ppm(out, map, scale);
}

}  // namespace reltrack::io
