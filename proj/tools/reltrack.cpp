// Copyright 2026 The reltrack Authors
// SPDX-License-Identifier: Apache-2.0

// Command-line front end. Exit codes: 0 ok, 1 verification failure (gradcheck),
// 2 usage or input error.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <sstream>
#include <string>

#include <CLI11.hpp>

#include "reltrack/core/error.hpp"
#include "reltrack/io/config.hpp"
#include "reltrack/io/dump.hpp"
#include "reltrack/io/mot.hpp"
#include "reltrack/io/synth.hpp"
#include "reltrack/metrics/metrics.hpp"
#include "reltrack/pipeline/pipeline.hpp"
#include "reltrack/verify/verify.hpp"

namespace fs = std::filesystem;
using namespace reltrack;

namespace {

constexpr int kOk = 0;
constexpr int kVerifyFailed = 1;
constexpr int kUsage = 2;

struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

io::Config load_config(const std::string& path) { return path.empty() ? io::Config() : io::Config::parse_file(path); }

// A synth config has key = value lines; a detection file has none.
bool looks_like_config(const std::string& path) {
  std::ifstream in(path);
  std::string line;
  while (std::getline(in, line)) {
    const auto p = line.find_first_not_of(" \t\r");
    if (p == std::string::npos || line[p] == '#') continue;
    return line.find('=') != std::string::npos;
  }
  return false;
}

pipeline::NetworkOptions network_options(const io::Config& c) {
  pipeline::NetworkOptions o;
  o.seed = static_cast<std::uint64_t>(c.get_int("model.seed"));
  o.net.channels = static_cast<std::size_t>(c.get_int("model.channels"));
  o.net.heads = static_cast<std::size_t>(c.get_int("model.heads"));
  o.net.samples = static_cast<std::size_t>(c.get_int("model.samples"));
  o.net.embedding_dim = static_cast<std::size_t>(c.get_int("model.embedding_dim"));
  o.train_steps = static_cast<std::size_t>(c.get_int("model.train_steps"));
  o.learning_rate = c.get_real("model.learning_rate");
  return o;
}

struct TrackArgs {
  std::string in, out, config, emb, mode;
};

int run_track(const TrackArgs& a) {
  io::Config cfg = load_config(a.config);
  if (!a.mode.empty()) cfg.set("track.mode", a.mode);
  const std::string mode = cfg.text("track.mode");
  std::vector<assoc::FrameObservations> frames;
  if (looks_like_config(a.in)) {
    const io::Config scenario_cfg = io::Config::parse_file(a.in);
    for (const auto& k : io::config_keys()) {
      if (k.key.rfind("synth.", 0) == 0) cfg.set(k.key, scenario_cfg.text(k.key));
    }
    const auto scenario = io::synth_scenario(cfg);
    const auto seq = io::synth_sequence(scenario);
    if (mode == "oracle") {
      frames = io::observations(seq);
    } else if (mode == "maps") {
      frames = pipeline::observations_from_maps(seq, scenario, io::decode_options(cfg));
    } else {
      frames = pipeline::observations_from_network(seq, scenario, network_options(cfg), io::decode_options(cfg));
    }
  } else {
    if (mode != "oracle") throw UsageError("track: mode '" + mode + "' needs a synth config as --in");
    if (a.emb.empty()) throw UsageError("track: a detection file needs --emb with one embedding row per detection");
    std::ifstream emb(a.emb);
    if (!emb) throw UsageError("cannot open " + a.emb);
    frames = pipeline::observations_from_files(io::read_mot_file(a.in), emb);
  }
  const auto tracks = assoc::track_sequence(frames, io::tracker_config(cfg));
  const auto lines = io::lines_from_tracks(tracks);
  io::write_mot_file(a.out, lines);
  std::printf("%zu frames, %zu tracks, %zu boxes -> %s\n", frames.size(), tracks.size(), lines.size(), a.out.c_str());
  return kOk;
}

int run_eval(const std::string& gt_path, const std::string& pred_path, const std::string& config) {
  const auto cfg = load_config(config);
  const auto gt = io::to_sequence(io::read_mot_file(gt_path));
  const auto pred = io::to_sequence(io::read_mot_file(pred_path));
  const auto r = metrics::evaluate(gt, pred, io::eval_config(cfg));
  std::printf("%-6s %10s\n", "metric", "value");
  std::printf("%-6s %10.3f\n%-6s %10.3f\n%-6s %10.3f\n", "MOTA", r.mota, "MOTP", r.motp, "IDF1", r.idf1);
  std::printf("%-6s %10.3f\n%-6s %10.3f\n", "MT", r.mt, "ML", r.ml);
  std::printf("%-6s %10zu\n%-6s %10zu\n%-6s %10zu\n", "FP", r.fp, "FN", r.fn, "IDS", r.ids);
  std::printf("%-6s %10zu\n%-6s %10zu\n\n", "GT", r.gt_count, "PRED", r.pred_count);
  std::printf("mota,motp,idf1,mt,ml,fp,fn,ids,gt_count,pred_count\n");
  std::printf("%s,%s,%s,%s,%s,%zu,%zu,%zu,%zu,%zu\n", io::format_real(r.mota).c_str(), io::format_real(r.motp).c_str(),
              io::format_real(r.idf1).c_str(), io::format_real(r.mt).c_str(), io::format_real(r.ml).c_str(), r.fp, r.fn,
              r.ids, r.gt_count, r.pred_count);
  return kOk;
}

int run_synth(const std::string& config, const std::string& out_dir, int heatmap_frame) {
  const auto cfg = load_config(config);
  const auto scenario = io::synth_scenario(cfg);
  const auto seq = io::synth_sequence(scenario);
  fs::create_directories(out_dir);
  const fs::path dir(out_dir);
  io::write_mot_file((dir / "gt.txt").string(), io::lines_from_sequence(seq.ground_truth));
  io::write_mot_file((dir / "det.txt").string(), io::lines_from_sequence(io::detection_sequence(seq)));
  {
    std::ofstream emb(dir / "emb.txt");
    pipeline::write_embeddings(emb, seq);
  }
  std::printf("wrote %s, %s, %s\n", (dir / "gt.txt").c_str(), (dir / "det.txt").c_str(), (dir / "emb.txt").c_str());
  if (heatmap_frame > 0) {
    if (heatmap_frame > scenario.frames) throw UsageError("--heatmap-frame beyond the last frame");
    std::vector<detect::BoxAnnotation> boxes;
    for (const auto& d : seq.frames[static_cast<std::size_t>(heatmap_frame - 1)].detections) boxes.push_back({d.box, d.id});
    const auto targets = detect::render_targets(boxes, static_cast<std::size_t>(scenario.image_height),
                                                static_cast<std::size_t>(scenario.image_width));
    const auto path = dir / ("heatmap_" + std::to_string(heatmap_frame) + ".tensor");
    io::write_tensor_file(path.string(), targets.heatmap);
    std::printf("wrote %s\n", path.c_str());
  }
  return kOk;
}

int run_gradcheck(std::size_t seeds, const std::string& only) {
  verify::GradSuiteOptions o;
  o.seeds = seeds;
  bool ok = true;
  for (const auto& r : verify::gradient_suite(o, only)) {
    std::printf("%-22s max_rel_err %.3e  seeds %zu  entries %zu  %s\n", r.name.c_str(), r.max_rel_error, r.seeds,
                r.checked, r.passed ? "ok" : "FAIL");
    ok = ok && r.passed;
  }
  return ok ? kOk : kVerifyFailed;
}

int run_bench(const verify::ScalingOptions& o) {
  const auto r = verify::attention_scaling(o);
  std::printf("%6s %8s %14s %14s\n", "size", "HW", "deformable_ms", "dense_ms");
  for (std::size_t i = 0; i < r.sizes.size(); ++i) {
    std::printf("%6zu %8zu %14.3f %14.3f\n", r.sizes[i], r.sizes[i] * r.sizes[i], 1e3 * r.deformable_seconds[i],
                1e3 * r.dense_seconds[i]);
  }
  for (std::size_t i = 0; i < r.deformable_ratios.size(); ++i) {
    std::printf("ratio %zu->%zu: deformable %.2f  dense %.2f\n", r.sizes[i], r.sizes[i + 1], r.deformable_ratios[i],
                r.dense_ratios[i]);
  }
  return kOk;
}

int run_viz(const std::string& tensor, const std::string& out, std::size_t channel, std::size_t scale) {
  const auto map = io::channel_map(io::read_tensor_file(tensor), channel);
  io::write_ppm_file(out, map, scale);
  std::printf("wrote %s (%zux%zu)\n", out.c_str(), map.dim(1) * scale, map.dim(0) * scale);
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"reltrack: joint detection and embedding multi-object tracking"};
  app.require_subcommand(1);
  std::function<int()> run;

  TrackArgs track;
  auto* t = app.add_subcommand("track", "track detections or a synthetic scenario, write MOT results");
  t->add_option("--in", track.in, "detection file (MOT format) or synth config")->required()->check(CLI::ExistingFile);
  t->add_option("--out", track.out, "output MOT file")->required();
  t->add_option("--config", track.config, "config file")->check(CLI::ExistingFile);
  t->add_option("--emb", track.emb, "embedding rows for a detection file")->check(CLI::ExistingFile);
  t->add_option("--mode", track.mode, "override track.mode")->check(CLI::IsMember({"oracle", "maps", "network"}));
  t->callback([&] { run = [&] { return run_track(track); }; });

  std::string gt, pred, eval_cfg;
  auto* e = app.add_subcommand("eval", "CLEAR-MOT, IDF1 and MT/ML of predictions against ground truth");
  e->add_option("--gt", gt, "ground-truth MOT file")->required()->check(CLI::ExistingFile);
  e->add_option("--pred", pred, "predicted MOT file")->required()->check(CLI::ExistingFile);
  e->add_option("--config", eval_cfg, "config file (eval.* keys)")->check(CLI::ExistingFile);
  e->callback([&] { run = [&] { return run_eval(gt, pred, eval_cfg); }; });

  std::string synth_cfg, out_dir;
  int heatmap_frame = 0;
  auto* s = app.add_subcommand("synth", "write a synthetic scenario as gt.txt, det.txt and emb.txt");
  s->add_option("--config", synth_cfg, "config file (synth.* keys)")->check(CLI::ExistingFile);
  s->add_option("--out-dir", out_dir, "output directory")->required();
  s->add_option("--heatmap-frame", heatmap_frame, "also dump the rendered heatmap of this frame")->check(CLI::PositiveNumber);
  s->callback([&] { run = [&] { return run_synth(synth_cfg, out_dir, heatmap_frame); }; });

  std::size_t seeds = 20;
  std::string only;
  auto* g = app.add_subcommand("gradcheck", "finite-difference gradient suite; exit 1 on any failure");
  g->add_option("--seeds", seeds, "random draws per case")->check(CLI::PositiveNumber);
  g->add_option("--case", only, "run one case")->check(CLI::IsMember(verify::gradient_case_names()));
  g->callback([&] { run = [&] { return run_gradcheck(seeds, only); }; });

  verify::ScalingOptions bench;
  bool parallel = false;
  auto* b = app.add_subcommand("bench", "deformable vs dense attention timings and scaling ratios");
  b->add_option("--sizes", bench.sizes, "square map extents")->delimiter(',')->check(CLI::PositiveNumber);
  b->add_option("--channels", bench.channels, "channels")->check(CLI::PositiveNumber);
  b->add_option("--samples", bench.samples, "sampled keys per head")->check(CLI::PositiveNumber);
  b->add_option("--heads", bench.heads, "attention heads")->check(CLI::PositiveNumber);
  b->add_option("--repeats", bench.repeats, "runs per size (median reported)")->check(CLI::PositiveNumber);
  b->add_flag("--parallel", parallel, "use the OpenMP kernels");
  b->callback([&] {
    run = [&] {
      bench.exec = parallel ? kernels::Exec::kParallel : kernels::Exec::kSerial;
      return run_bench(bench);
    };
  });

  std::string tensor, ppm;
  std::size_t channel = 0, scale = 4;
  auto* v = app.add_subcommand("viz", "render a dumped map as a grayscale PPM");
  v->add_option("--tensor", tensor, "tensor dump")->required()->check(CLI::ExistingFile);
  v->add_option("--out", ppm, "output .ppm")->required();
  v->add_option("--channel", channel, "channel of an [H, W, C] dump");
  v->add_option("--scale", scale, "pixels per cell")->check(CLI::PositiveNumber);
  v->callback([&] { run = [&] { return run_viz(tensor, ppm, channel, scale); }; });

  std::string echo_cfg;
  bool describe = false;
  auto* c = app.add_subcommand("config", "print the effective configuration");
  c->add_option("--config", echo_cfg, "config file")->check(CLI::ExistingFile);
  c->add_flag("--describe", describe, "include each key's documentation");
  c->callback([&] {
    run = [&] {
      const auto cfg = load_config(echo_cfg);
      std::fputs((describe ? cfg.describe() : cfg.echo()).c_str(), stdout);
      return kOk;
    };
  });

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& err) {
    const int code = app.exit(err);
    return code == 0 ? kOk : kUsage;
  }
  try {
    return run();
  } catch (const std::exception& err) {
    // Bad flags, unreadable or malformed input, invalid scenarios.
    std::fprintf(stderr, "error: %s\n", err.what());
    return kUsage;
  }
}
