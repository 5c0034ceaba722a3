// Copyright 2026 The reltrack Authors
// SPDX-License-Identifier: Apache-2.0

#include "reltrack/io/config.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <istream>
#include <set>

#include "reltrack/core/error.hpp"
#include "reltrack/io/mot.hpp"

namespace reltrack::io {

namespace {

using K = ValueKind;

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

const KeySpec& spec_of(const std::string& key, std::size_t line) {
  for (const auto& k : config_keys()) {
    if (k.key == key) return k;
  }
  throw ParseError("unknown key '" + key + "'", line);
}

std::string canonical(const KeySpec& spec, const std::string& raw, std::size_t line) {
  const std::string v = trim(raw);
  auto bad = [&]() { return ParseError("bad value '" + v + "' for " + spec.key, line); };
  const char* end = v.data() + v.size();
  switch (spec.kind) {
    case K::kInt: {
      long long x = 0;
      auto [p, ec] = std::from_chars(v.data(), end, x);
      if (v.empty() || ec != std::errc() || p != end) throw bad();
      return std::to_string(x);
    }
    case K::kReal: {
      double x = 0;
      if (!parse_real(v, x)) throw bad();
      return format_real(x);
    }
    case K::kBool:
      if (v == "true" || v == "false") return v;
      throw bad();
    case K::kChoice:
      if (std::find(spec.choices.begin(), spec.choices.end(), v) != spec.choices.end()) return v;
      throw bad();
  }
  throw bad();
}

}  // namespace

const std::vector<KeySpec>& config_keys() {
  static const std::vector<KeySpec> keys = {
      {"synth.seed", K::kInt, "1", "random seed of the synthetic scenario", {}},
      {"synth.identities", K::kInt, "20", "number of identities", {}},
      {"synth.frames", K::kInt, "200", "number of frames", {}},
      {"synth.image_width", K::kInt, "640", "image width in pixels", {}},
      {"synth.image_height", K::kInt, "480", "image height in pixels", {}},
      {"synth.embedding_dim", K::kInt, "32", "oracle embedding width (>= identities)", {}},
      {"synth.dropout", K::kReal, "0", "probability of dropping an interior detection", {}},
      {"synth.sigma", K::kReal, "0", "embedding noise before renormalization", {}},
      {"synth.crossing", K::kBool, "false", "first two identities swap x-positions", {}},
      {"synth.staggered", K::kBool, "false", "random lifespans instead of all frames", {}},
      {"synth.box_min", K::kReal, "16", "smallest box width in pixels", {}},
      {"synth.box_max", K::kReal, "40", "largest box width in pixels", {}},
      {"synth.score", K::kReal, "1", "confidence of oracle detections", {}},
      {"synth.max_speed", K::kReal, "4", "largest center displacement per frame along random paths, pixels", {}},
      {"tracker.ema_momentum", K::kReal, "0.9", "weight of the old embedding in the track update", {}},
      {"tracker.embedding_thresh", K::kReal, "0.4", "largest cosine distance matched in stage 1", {}},
      {"tracker.iou_thresh", K::kReal, "0.5", "smallest IoU matched in stage 2", {}},
      {"tracker.new_track_score", K::kReal, "0.5", "smallest score that starts a track", {}},
      {"tracker.max_lost", K::kInt, "30", "frames a lost track is kept", {}},
      {"tracker.gap_max", K::kInt, "30", "longest gap filled by interpolation", {}},
      {"tracker.motion_gating", K::kBool, "true", "forbid stage-1 pairs far from the motion prediction", {}},
      {"tracker.gate_sigmas", K::kReal, "3", "gate radius in standard deviations", {}},
      {"tracker.fill_gaps", K::kBool, "true", "interpolate gaps after tracking", {}},
      {"motion.position", K::kReal, "0.05", "position noise per unit box height", {}},
      {"motion.velocity", K::kReal, "0.00625", "velocity noise per unit box height", {}},
      {"motion.init_position", K::kReal, "0.1", "initial position uncertainty per unit box height", {}},
      {"motion.init_velocity", K::kReal, "0.0625", "initial velocity uncertainty per unit box height", {}},
      {"detect.score_thresh", K::kReal, "0.4", "smallest decoded peak score", {}},
      {"detect.max_k", K::kInt, "128", "most detections per frame", {}},
      {"eval.iou_thresh", K::kReal, "0.5", "smallest IoU counted as a match", {}},
      {"eval.continuity", K::kBool, "true", "keep previous-frame correspondences when possible", {}},
      {"eval.mostly_tracked", K::kReal, "0.8", "coverage counted as mostly tracked (inclusive)", {}},
      {"eval.mostly_lost", K::kReal, "0.2", "coverage counted as mostly lost (inclusive)", {}},
      {"track.mode", K::kChoice, "oracle", "oracle: synthetic features; maps: rendered maps + decode; network: model",
       {"oracle", "maps", "network"}},
      {"model.seed", K::kInt, "7", "weight initialization seed", {}},
      {"model.channels", K::kInt, "16", "feature channels", {}},
      {"model.heads", K::kInt, "2", "attention heads", {}},
      {"model.samples", K::kInt, "4", "sampled keys per head", {}},
      {"model.embedding_dim", K::kInt, "16", "ReID embedding width", {}},
      {"model.train_steps", K::kInt, "500", "Adam steps on the first frame", {}},
      {"model.learning_rate", K::kReal, "0.01", "Adam step size", {}},
  };
  return keys;
}

Config::Config() {
  for (const auto& k : config_keys()) values_[k.key] = k.default_value;
}

Config Config::parse(std::istream& in) {
  Config c;
  std::set<std::string> seen;
  std::string raw;
  std::size_t line = 0;
  while (std::getline(in, raw)) {
    ++line;
    // '#' starts a comment anywhere; no value contains one.
    const std::string s = trim(raw.substr(0, raw.find('#')));
    if (s.empty()) continue;
    const auto eq = s.find('=');
    if (eq == std::string::npos) throw ParseError("expected key = value", line);
    const std::string key = trim(s.substr(0, eq));
    if (!seen.insert(key).second) throw ParseError("repeated key '" + key + "'", line);
    c.set(key, s.substr(eq + 1), line);
  }
  return c;
}

Config Config::parse_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path);
  try {
    return parse(in);
  } catch (const ParseError& e) {
    throw ParseError(e.message(), e.line(), path);
  }
}

void Config::set(const std::string& key, const std::string& value, std::size_t line) {
  values_[key] = canonical(spec_of(key, line), value, line);
}

const std::string& Config::text(const std::string& key) const {
  auto it = values_.find(key);
  if (it == values_.end()) throw std::out_of_range("unknown config key " + key);
  return it->second;
}

long long Config::get_int(const std::string& key) const { return std::stoll(text(key)); }

double Config::get_real(const std::string& key) const {
  double x = 0.0;
  parse_real(text(key), x);
  return x;
}

bool Config::get_bool(const std::string& key) const { return text(key) == "true"; }

std::string Config::echo() const {
  std::string out;
  for (const auto& k : config_keys()) out += k.key + " = " + text(k.key) + "\n";
  return out;
}

std::string Config::describe() const {
  std::string out;
  for (const auto& k : config_keys()) {
    out += "# " + k.doc + " (default " + k.default_value + ")\n";
    out += k.key + " = " + text(k.key) + "\n";
  }
  return out;
}

SynthScenario synth_scenario(const Config& c) {
  SynthScenario s;
  s.seed = static_cast<std::uint64_t>(c.get_int("synth.seed"));
  s.identities = static_cast<int>(c.get_int("synth.identities"));
  s.frames = static_cast<int>(c.get_int("synth.frames"));
  s.image_width = static_cast<int>(c.get_int("synth.image_width"));
  s.image_height = static_cast<int>(c.get_int("synth.image_height"));
  s.embedding_dim = static_cast<int>(c.get_int("synth.embedding_dim"));
  s.dropout = c.get_real("synth.dropout");
  s.sigma = c.get_real("synth.sigma");
  s.crossing = c.get_bool("synth.crossing");
  s.staggered = c.get_bool("synth.staggered");
  s.box_min = c.get_real("synth.box_min");
  s.box_max = c.get_real("synth.box_max");
  s.score = c.get_real("synth.score");
  s.max_speed = c.get_real("synth.max_speed");
  return s;
}

assoc::TrackerConfig tracker_config(const Config& c) {
  assoc::TrackerConfig t;
  t.ema_momentum = c.get_real("tracker.ema_momentum");
  t.embedding_thresh = c.get_real("tracker.embedding_thresh");
  t.iou_thresh = c.get_real("tracker.iou_thresh");
  t.new_track_score = c.get_real("tracker.new_track_score");
  t.max_lost = static_cast<int>(c.get_int("tracker.max_lost"));
  t.gap_max = static_cast<int>(c.get_int("tracker.gap_max"));
  t.motion_gating = c.get_bool("tracker.motion_gating");
  t.gate_sigmas = c.get_real("tracker.gate_sigmas");
  t.fill_gaps = c.get_bool("tracker.fill_gaps");
  t.noise.position = c.get_real("motion.position");
  t.noise.velocity = c.get_real("motion.velocity");
  t.noise.init_position = c.get_real("motion.init_position");
  t.noise.init_velocity = c.get_real("motion.init_velocity");
  return t;
}

detect::DecodeOptions decode_options(const Config& c) {
  detect::DecodeOptions d;
  d.score_thresh = c.get_real("detect.score_thresh");
  d.max_k = static_cast<std::size_t>(c.get_int("detect.max_k"));
  return d;
}

metrics::EvalConfig eval_config(const Config& c) {
  metrics::EvalConfig e;
  e.iou_thresh = c.get_real("eval.iou_thresh");
  e.continuity = c.get_bool("eval.continuity");
  e.mostly_tracked = c.get_real("eval.mostly_tracked");
  e.mostly_lost = c.get_real("eval.mostly_lost");
  return e;
}

}  // namespace reltrack::io
