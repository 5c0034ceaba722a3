// Copyright 2026 The reltrack Authors
// SPDX-License-Identifier: Apache-2.0

// MOTChallenge text files: "frame,id,bb_left,bb_top,bb_width,bb_height,conf,x,y,z".

#pragma once

#include <iosfwd>
#include <string>
#include <string_view>
#include <vector>

#include "reltrack/assoc/tracker.hpp"
#include "reltrack/core/sequence.hpp"

namespace reltrack::io {

struct MotLine {
  int frame = 1;
  int id = -1;
  double left = 0.0;
  double top = 0.0;
  double width = 0.0;
  double height = 0.0;
  double conf = 1.0;
  double x = -1.0;
  double y = -1.0;
  double z = -1.0;

  Box box() const { return Box::from_ltwh(left, top, width, height); }
  friend bool operator==(const MotLine&, const MotLine&) = default;
};

/// Parses one line. Accepts 7 to 10 comma-separated fields (missing world
/// coordinates default to -1). Throws ParseError tagged with `line_number`.
MotLine parse_mot_line(std::string_view text, std::size_t line_number = 0);

/// Shortest round-trippable text of a line, without newline.
std::string format_mot_line(const MotLine& line);

/// Reads every non-blank line. Throws ParseError with the offending line number.
std::vector<MotLine> read_mot(std::istream& in);
std::vector<MotLine> read_mot_file(const std::string& path);

/// Writes lines sorted by (frame, id); equal keys keep their input order.
void write_mot(std::ostream& out, std::vector<MotLine> lines);
void write_mot_file(const std::string& path, std::vector<MotLine> lines);

/// Boxes grouped by frame; conf becomes the score.
Sequence to_sequence(const std::vector<MotLine>& lines);

/// One line per (frame, track box); conf is the box score.
std::vector<MotLine> lines_from_tracks(const std::vector<assoc::Track>& tracks);
std::vector<MotLine> lines_from_sequence(const Sequence& seq);

/// Shortest decimal text that parses back to the same double.
std::string format_real(double v);

/// Parses a whole field (surrounding blanks allowed) as a finite double.
/// Subnormal results are accepted. Returns false on any other input.
bool parse_real(std::string_view text, double& value);

}  // namespace reltrack::io
