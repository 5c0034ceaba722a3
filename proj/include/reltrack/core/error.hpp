// Copyright 2026 The reltrack Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace reltrack {

/// Shapes or sizes that do not agree with an operation's contract.
class DimensionError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// A NaN or Inf surfaced by a kernel.
class NumericError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Malformed external input; carries the 1-based line number when known.
/// what() reads "file:line: message", "line N: message" or just the message.
class ParseError : public std::runtime_error {
 public:
  ParseError(const std::string& message, std::size_t line, const std::string& file = {})
      : std::runtime_error(format(message, line, file)), message_(message), line_(line) {}

  std::size_t line() const { return line_; }
  const std::string& message() const { return message_; }

 private:
  static std::string format(const std::string& message, std::size_t line, const std::string& file) {
    if (!file.empty()) return file + (line > 0 ? ":" + std::to_string(line) : std::string()) + ": " + message;
    return line > 0 ? "line " + std::to_string(line) + ": " + message : message;
  }

  std::string message_;
  std::size_t line_;
};

}  // namespace reltrack
