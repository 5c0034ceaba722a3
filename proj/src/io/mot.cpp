// Copyright 2026 The reltrack Authors
// SPDX-License-Identifier: Apache-2.0

#include "reltrack/io/mot.hpp"

#include <algorithm>
#include <cerrno>
#include <charconv>
#include <cstdlib>
#include <limits>
#include <cmath>
#include <fstream>
#include <istream>
#include <ostream>
#include <type_traits>

#include "reltrack/core/error.hpp"

namespace reltrack::io {

namespace {

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

template <typename V>
V parse_field(std::string_view field, const char* name, std::size_t line) {
  field = trim(field);
  V value{};
  bool ok = false;
  if constexpr (std::is_floating_point_v<V>) {
    ok = parse_real(field, value);
  } else {
    const char* end = field.data() + field.size();
    auto [ptr, ec] = std::from_chars(field.data(), end, value);
    ok = !field.empty() && ec == std::errc() && ptr == end;
  }
  if (!ok) throw ParseError(std::string("bad ") + name + " field '" + std::string(field) + "'", line);
  return value;
}

}  // namespace

bool parse_real(std::string_view text, double& value) {
  text = trim(text);
  if (text.empty() || text.size() > 64) return false;
  char buf[65];
  text.copy(buf, text.size());
  buf[text.size()] = '\0';
  char* end = nullptr;
  errno = 0;
  const double v = std::strtod(buf, &end);
  if (end != buf + text.size() || !std::isfinite(v)) return false;
  // ERANGE on underflow still yields the nearest subnormal or zero.
  if (errno == ERANGE && std::abs(v) > std::numeric_limits<double>::min()) return false;
  value = v;
  return true;
}

std::string format_real(double v) {
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
  (void)ec;
  return std::string(buf, ptr);
}

MotLine parse_mot_line(std::string_view text, std::size_t line_number) {
  std::vector<std::string_view> fields;
  std::size_t start = 0;
  while (true) {
    const std::size_t comma = text.find(',', start);
    fields.push_back(text.substr(start, comma == std::string_view::npos ? std::string_view::npos : comma - start));
    if (comma == std::string_view::npos) break;
    start = comma + 1;
  }
  if (fields.size() < 7 || fields.size() > 10) {
    throw ParseError("expected 7 to 10 fields, got " + std::to_string(fields.size()), line_number);
  }
  MotLine m;
  m.frame = parse_field<int>(fields[0], "frame", line_number);
  m.id = parse_field<int>(fields[1], "id", line_number);
  m.left = parse_field<double>(fields[2], "bb_left", line_number);
  m.top = parse_field<double>(fields[3], "bb_top", line_number);
  m.width = parse_field<double>(fields[4], "bb_width", line_number);
  m.height = parse_field<double>(fields[5], "bb_height", line_number);
  m.conf = parse_field<double>(fields[6], "conf", line_number);
  if (fields.size() > 7) m.x = parse_field<double>(fields[7], "x", line_number);
  if (fields.size() > 8) m.y = parse_field<double>(fields[8], "y", line_number);
  if (fields.size() > 9) m.z = parse_field<double>(fields[9], "z", line_number);
  if (m.frame < 1) throw ParseError("frame must be >= 1", line_number);
  if (!(m.width > 0.0) || !(m.height > 0.0)) throw ParseError("box width and height must be positive", line_number);
  return m;
}

std::string format_mot_line(const MotLine& m) {
  std::string s = std::to_string(m.frame) + ',' + std::to_string(m.id);
  for (double v : {m.left, m.top, m.width, m.height, m.conf, m.x, m.y, m.z}) {
    s += ',';
    s += format_real(v);
  }
  return s;
}

std::vector<MotLine> read_mot(std::istream& in) {
  std::vector<MotLine> out;
  std::string text;
  std::size_t line_number = 0;
  while (std::getline(in, text)) {
    ++line_number;
    if (trim(text).empty()) continue;
    out.push_back(parse_mot_line(text, line_number));
  }
  return out;
}

std::vector<MotLine> read_mot_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path);
  try {
    return read_mot(in);
  } catch (const ParseError& e) {
    throw ParseError(e.message(), e.line(), path);
  }
}

void write_mot(std::ostream& out, std::vector<MotLine> lines) {
  std::stable_sort(lines.begin(), lines.end(), [](const MotLine& a, const MotLine& b) {
    return a.frame != b.frame ? a.frame < b.frame : a.id < b.id;
  });
  for (const MotLine& m : lines) out << format_mot_line(m) << '\n';
}

void write_mot_file(const std::string& path, std::vector<MotLine> lines) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path);
  write_mot(out, std::move(lines));
}

Sequence to_sequence(const std::vector<MotLine>& lines) {
  Sequence seq;
  for (const MotLine& m : lines) seq[m.frame].push_back({m.id, m.box(), m.conf});
  return seq;
}

std::vector<MotLine> lines_from_tracks(const std::vector<assoc::Track>& tracks) {
  std::vector<MotLine> out;
  for (const auto& t : tracks) {
    for (const auto& tb : t.boxes) {
      out.push_back({tb.frame, t.id, tb.box.l, tb.box.t, tb.box.width(), tb.box.height(), tb.score});
    }
  }
  return out;
}

std::vector<MotLine> lines_from_sequence(const Sequence& seq) {
  std::vector<MotLine> out;
  for (const auto& [frame, boxes] : seq) {
    for (const auto& b : boxes) out.push_back({frame, b.id, b.box.l, b.box.t, b.box.width(), b.box.height(), b.score});
  }
  return out;
}

}  // namespace reltrack::io
