// Copyright 2026 The reltrack Authors
// SPDX-License-Identifier: Apache-2.0

// Line-based "key = value" configuration with a fixed, documented key set.

#pragma once

#include <cstdint>
#include <iosfwd>
#include <map>
#include <string>
#include <vector>

#include "reltrack/assoc/tracker.hpp"
#include "reltrack/detect/detect.hpp"
#include "reltrack/io/synth.hpp"
#include "reltrack/metrics/metrics.hpp"

namespace reltrack::io {

enum class ValueKind { kInt, kReal, kBool, kChoice };

struct KeySpec {
  std::string key;
  ValueKind kind;
  std::string default_value;
  std::string doc;
  std::vector<std::string> choices;  // kChoice only
};

/// Every accepted key, in echo order.
const std::vector<KeySpec>& config_keys();

class Config {
 public:
  /// All keys at their defaults.
  Config();

  /// Defaults overridden by `key = value` lines. Blank lines and lines whose
  /// first non-space character is '#' are skipped. Unknown keys, malformed
  /// values and repeated keys throw ParseError with the line number.
  static Config parse(std::istream& in);
  static Config parse_file(const std::string& path);

  /// Validates and stores a value in canonical form. Throws ParseError.
  void set(const std::string& key, const std::string& value, std::size_t line = 0);

  const std::string& text(const std::string& key) const;
  long long get_int(const std::string& key) const;
  double get_real(const std::string& key) const;
  bool get_bool(const std::string& key) const;

  /// The effective configuration, one "key = value" line per key in key
  /// order. Parsing the echo and echoing again gives the same bytes.
  std::string echo() const;

  /// The echo with each key's documentation as a comment above it.
  std::string describe() const;

 private:
  std::map<std::string, std::string> values_;
};

SynthScenario synth_scenario(const Config& c);
assoc::TrackerConfig tracker_config(const Config& c);
detect::DecodeOptions decode_options(const Config& c);
metrics::EvalConfig eval_config(const Config& c);

}  // namespace reltrack::io
