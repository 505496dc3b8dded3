// spherebev: command-line front end for the spherical-image BEV toolkit.
//
// Exit codes: 0 success, 1 computation error, 2 I/O or parse error.
// SPHEREBEV_THREADS caps worker threads (0 or unset: hardware concurrency);
// outputs are bit-identical at any thread count.

#include <CLI11.hpp>
#include <json.hpp>

#include <cstdio>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <spherebev/spherebev.hpp>

namespace fs = std::filesystem;
using namespace spherebev;

namespace {

bool g_verbose = false;

void note(const std::string& message) {
  if (g_verbose) std::cerr << "spherebev: " << message << "\n";
}

std::optional<ClassLabel> parse_class_filter(const std::string& name) {
  if (name == "all") return std::nullopt;
  const auto label = class_from_string(name);
  if (!label) throw CLI::ValidationError("--class", "unknown class '" + name + "'");
  return label;
}

double round_to(double value, int decimals) {
  const double scale = std::pow(10.0, decimals);
  return std::round(value * scale) / scale;
}

std::string format_range_key(double range) {
  const auto rounded = static_cast<long long>(std::llround(range));
  if (std::abs(range - static_cast<double>(rounded)) < 1e-9) {
    return "iou_" + std::to_string(rounded);
  }
  return "iou_" + io::detail::format_double(range);
}

std::vector<std::pair<int, int>> pattern_from_radius(int radius) {
  std::vector<std::pair<int, int>> pattern;
  for (int dr = -radius; dr <= radius; ++dr) {
    for (int dc = -radius; dc <= radius; ++dc) pattern.emplace_back(dr, dc);
  }
  return pattern;
}

/// Reads a segmentation grid from either a PGM (bound to `spec`) or a raster.
LabelGrid read_label_input(const fs::path& path, const GridSpec& spec, double threshold) {
  if (path.extension() == ".pgm") {
    return io::label_grid_from_pgm(io::read_pgm(path), spec, path);
  }
  return binarize(io::read_raster(path), threshold);
}

// ---------------------------------------------------------------------------

struct ProjectArgs {
  std::string calib, points, out;
};

int run_project(const ProjectArgs& args) {
  const auto cal = io::read_calibration(args.calib);
  const auto points = io::read_points(args.points);
  const auto pixels = project_batch(points, cal);
  std::string csv;
  for (const auto& px : pixels) {
    csv += io::detail::format_double(px.u);
    csv += ',';
    csv += io::detail::format_double(px.v);
    csv += '\n';
  }
  if (args.out.empty()) {
    std::cout << csv;
  } else {
    io::detail::write_all(args.out, {csv.data(), csv.size()});
  }
  note("projected " + std::to_string(points.size()) + " points");
  return 0;
}

struct RasterizeArgs {
  std::string annotations, out;
  std::string centerness_out, offset_out;
  std::string class_name = "vehicle";
  double side = 100.0;
  double res = 0.5;
};

int run_rasterize(const RasterizeArgs& args) {
  const auto boxes = io::read_annotations(args.annotations);
  const GridSpec grid(args.side, args.res);
  const auto filter = parse_class_filter(args.class_name);
  if (args.centerness_out.empty() && args.offset_out.empty()) {
    io::write_pgm(args.out, rasterize(boxes, grid, filter));
  } else {
    const BevTargets targets = build_targets(boxes, grid, filter);
    io::write_pgm(args.out, targets.segmentation);
    if (!args.centerness_out.empty()) io::write_raster(args.centerness_out, targets.centerness);
    if (!args.offset_out.empty()) {
      // Background offsets are NaN by contract; zero them for the float file.
      VectorGrid offsets = targets.offset;
      for (std::size_t i = 0; i < offsets.data().size(); ++i) {
        if (!targets.segmentation.data()[i]) offsets.data()[i] = {0.0, 0.0};
      }
      io::write_vector_grid(args.offset_out, offsets);
    }
  }
  note("rasterized " + std::to_string(boxes.size()) + " boxes onto " +
       std::to_string(grid.n()) + "x" + std::to_string(grid.n()) + " cells");
  return 0;
}

struct PullArgs {
  std::string calib, featmap, out, anchors;
  bool all = false;
  double side = 100.0;
  double res = 0.5;
  std::size_t points_per_pillar = 8;
  double z_min = -1.0;
  double z_max = 3.0;
};

std::vector<CellIndex> parse_anchor_list(const std::string& text) {
  std::vector<CellIndex> anchors;
  std::size_t pos = 0;
  while (pos < text.size()) {
    std::size_t end = text.find(';', pos);
    if (end == std::string::npos) end = text.size();
    const std::string item = text.substr(pos, end - pos);
    const std::size_t comma = item.find(',');
    if (comma == std::string::npos) {
      throw CLI::ValidationError("--anchors", "expected 'row,col;row,col;...'");
    }
    try {
      anchors.push_back({std::stoi(item.substr(0, comma)), std::stoi(item.substr(comma + 1))});
    } catch (const std::exception&) {
      throw CLI::ValidationError("--anchors", "bad cell index '" + item + "'");
    }
    pos = end + 1;
  }
  return anchors;
}

int run_pull(const PullArgs& args) {
  const auto cal = io::read_calibration(args.calib);
  const auto fm = io::read_feature_map(args.featmap);
  const GridSpec grid(args.side, args.res);
  SamplingConfig cfg;
  cfg.points_per_pillar = args.points_per_pillar;
  cfg.z_min = args.z_min;
  cfg.z_max = args.z_max;

  std::vector<CellIndex> anchors;
  if (args.all) {
    cfg.n_coarse = grid.cell_count();
    anchors = coarse_anchor_cells(grid, cfg);
  } else {
    anchors = parse_anchor_list(args.anchors);
  }
  const auto volume = pull_features(make_pillars(anchors, cfg, grid), fm, cal);

  // Feature volume rides in the FMAP container as C x anchors x points.
  FeatureMap out(volume.channels, std::max<std::size_t>(volume.n_anchors, 1),
                 volume.points_per_pillar);
  for (std::size_t a = 0; a < volume.n_anchors; ++a) {
    for (std::size_t p = 0; p < volume.points_per_pillar; ++p) {
      for (std::size_t c = 0; c < volume.channels; ++c) {
        out.at(c, a, p) =
            static_cast<float>(volume.data[(a * volume.points_per_pillar + p) * volume.channels + c]);
      }
    }
  }
  io::write_feature_map(args.out, out);
  note("pulled " + std::to_string(volume.n_anchors) + " pillars");
  return 0;
}

struct PipelineArgs {
  std::string calib, featmap, decoder, out;
  std::string gt, bin_out, metrics_out;
  std::size_t n_coarse = 2500;
  std::size_t k = 100;
  double side = 100.0;
  double res = 0.5;
  std::size_t points_per_pillar = 8;
  double z_min = -1.0;
  double z_max = 3.0;
  int fine_radius = 1;
  bool fine_off = false;
  bool random_coarse = false;
  double threshold = 0.0;
  std::vector<double> ranges{100.0, 50.0, 20.0};
  std::uint64_t seed = 0;
};

int run_pipeline(const PipelineArgs& args) {
  const auto cal = io::read_calibration(args.calib);
  const auto fm = io::read_feature_map(args.featmap);
  const auto decoder = io::read_decoder(args.decoder);
  const GridSpec grid(args.side, args.res);

  SamplingConfig cfg;
  cfg.n_coarse = args.n_coarse;
  cfg.anchors_kept = args.k;
  cfg.points_per_pillar = args.points_per_pillar;
  cfg.z_min = args.z_min;
  cfg.z_max = args.z_max;
  cfg.fine_pattern = pattern_from_radius(args.fine_radius);
  cfg.random_coarse = args.random_coarse;
  cfg.seed = args.seed;

  const auto coarse = coarse_pass(fm, cal, cfg, grid, decoder);
  SparseLogits fine;
  if (!args.fine_off) {
    fine = fine_pass(coarse.anchors_kept, fm, cal, cfg, grid, decoder);
  }
  const ValueGrid logits = combine(coarse.logits, fine, grid);
  io::write_raster(args.out, logits);

  const LabelGrid prediction = binarize(logits, args.threshold);
  const fs::path bin_path = args.bin_out.empty() ? fs::path(args.out + ".pgm")
                                                 : fs::path(args.bin_out);
  io::write_pgm(bin_path, prediction);

  if (!args.gt.empty()) {
    const auto gt = io::label_grid_from_pgm(io::read_pgm(args.gt), grid, args.gt);
    nlohmann::ordered_json metrics;
    const auto values = iou_at_ranges(prediction, gt, args.ranges);
    for (std::size_t i = 0; i < args.ranges.size(); ++i) {
      metrics[format_range_key(args.ranges[i])] = round_to(values[i] * 100.0, 1);
    }
    const std::string text = metrics.dump() + "\n";
    if (args.metrics_out.empty()) {
      std::cout << text;
    } else {
      io::detail::write_all(args.metrics_out, {text.data(), text.size()});
    }
  }
  note("pipeline: " + std::to_string(coarse.logits.cells.size()) + " coarse + " +
       std::to_string(fine.cells.size()) + " fine anchors");
  return 0;
}

struct LossArgs {
  std::string pred, target;
  std::string pred_center, target_center, pred_offset, target_offset, fg_mask;
  double gamma = 2.0;
  bool sigmoid = false;
  std::vector<double> weights{1.0, 1.0, 1.0};
};

int run_loss(const LossArgs& args) {
  ValueGrid pred = io::read_raster(args.pred);
  if (args.sigmoid) {
    for (auto& v : pred.data()) v = 1.0 / (1.0 + std::exp(-v));
  }
  const GridSpec spec = pred.spec();
  const LabelGrid target = read_label_input(args.target, spec, 0.5);
  const LabelGrid fg = args.fg_mask.empty()
      ? target
      : read_label_input(args.fg_mask, spec, 0.5);

  const double seg = focal_loss_grid(pred, target, {.gamma = args.gamma});

  double center = 0.0;
  if (!args.pred_center.empty() || !args.target_center.empty()) {
    if (args.pred_center.empty() || args.target_center.empty()) {
      throw CLI::ValidationError("--pred-center/--target-center must be given together");
    }
    center = centerness_loss(io::read_raster(args.pred_center),
                             io::read_raster(args.target_center), fg);
  }

  double offset = 0.0;
  if (!args.pred_offset.empty() || !args.target_offset.empty()) {
    if (args.pred_offset.empty() || args.target_offset.empty()) {
      throw CLI::ValidationError("--pred-offset/--target-offset must be given together");
    }
    offset = offset_loss(io::read_vector_grid(args.pred_offset, spec),
                         io::read_vector_grid(args.target_offset, spec), fg);
  }

  if (args.weights.size() != 3) {
    throw CLI::ValidationError("--weights", "expected three weights");
  }
  const double total = multi_task_loss(
      seg, center, offset, {args.weights[0], args.weights[1], args.weights[2]});

  nlohmann::ordered_json report;
  report["seg"] = seg;
  report["center"] = center;
  report["offset"] = offset;
  report["total"] = total;
  std::cout << report.dump() << "\n";
  return 0;
}

struct EvaluateArgs {
  std::string pred, gt;
  std::vector<double> ranges{100.0, 50.0, 20.0};
  double threshold = 0.0;
};

int run_evaluate(const EvaluateArgs& args) {
  const ValueGrid logits = io::read_raster(args.pred);
  const LabelGrid pred = binarize(logits, args.threshold);
  const LabelGrid gt = io::label_grid_from_pgm(io::read_pgm(args.gt), logits.spec(), args.gt);
  const auto values = iou_at_ranges(pred, gt, args.ranges);
  nlohmann::ordered_json report;
  for (std::size_t i = 0; i < args.ranges.size(); ++i) {
    report[format_range_key(args.ranges[i])] = round_to(values[i] * 100.0, 1);
  }
  std::cout << report.dump() << "\n";
  return 0;
}

struct SyncArgs {
  std::string trace;
  std::string reference = "lidar";
  double slop = 0.03;
  std::size_t queue = 20;
};

int run_sync(const SyncArgs& args) {
  const auto trace = io::read_trace(args.trace);
  const auto reference = stream_from_string(args.reference);
  if (!reference) {
    throw CLI::ValidationError("--reference", "unknown stream '" + args.reference + "'");
  }

  // Participating streams: those present in the trace, in enum order.
  std::vector<StreamId> streams;
  for (const StreamId id : {StreamId::lidar, StreamId::camera, StreamId::gnss}) {
    for (const auto& msg : trace) {
      if (msg.stream == id) {
        streams.push_back(id);
        break;
      }
    }
  }

  SyncConfig cfg;
  cfg.reference = *reference;
  cfg.queue_size = args.queue;
  cfg.slop = args.slop;
  Synchronizer sync(streams, cfg);

  std::vector<SyncedFrame> frames;
  for (const auto& msg : trace) {
    auto out = sync.push(msg);
    frames.insert(frames.end(), out.begin(), out.end());
  }
  auto tail = sync.flush();
  frames.insert(frames.end(), tail.begin(), tail.end());

  std::string header = "frame_time";
  for (const StreamId id : streams) header += std::string(",") + to_string(id);
  std::cout << header << "\n";
  for (const auto& frame : frames) {
    std::string line = io::detail::format_double(frame.frame_time);
    for (const auto& member : frame.members) {
      line += ',';
      line += io::detail::format_double(member.timestamp);
    }
    std::cout << line << "\n";
  }

  const SyncStats stats = compute_stats(frames, trace, streams, cfg);
  nlohmann::ordered_json footer;
  footer["frames"] = stats.frames_emitted;
  footer["reference_messages"] = stats.reference_messages;
  footer["match_rate"] = stats.match_rate;
  nlohmann::ordered_json dt;
  for (const auto& [stream, mean] : stats.mean_abs_dt) dt[to_string(stream)] = mean;
  footer["mean_abs_dt"] = dt;
  std::cout << footer.dump() << "\n";
  return 0;
}

struct GenSceneArgs {
  std::string out_dir;
  std::size_t n_boxes = 5;
  std::size_t channels = 8;
  std::size_t fm_width = 256;
  std::size_t fm_height = 128;
  double side = 100.0;
  double res = 0.5;
  std::uint64_t seed = 0;
};

int run_gen_scene(const GenSceneArgs& args) {
  SceneSpec spec;
  spec.seed = args.seed;
  spec.n_boxes = args.n_boxes;
  spec.channels = args.channels;
  spec.fm_width = args.fm_width;
  spec.fm_height = args.fm_height;
  spec.grid = GridSpec(args.side, args.res);
  const Scene scene = generate_scene(spec);

  fs::create_directories(args.out_dir);
  const fs::path dir(args.out_dir);
  io::write_annotations(dir / "annotations.json", scene.boxes);
  io::write_feature_map(dir / "featmap.fmap", scene.feature_map);
  io::write_calibration(dir / "calib.json", scene.calibration);
  note("scene written to " + dir.string());
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Spherical dual-fisheye camera to BEV perception toolkit"};
  app.require_subcommand(1);
  std::uint64_t seed = 0;
  app.add_option("--seed", seed, "Seed for randomized modes")->capture_default_str();
  app.add_flag("--verbose", g_verbose, "Chatty progress notes on stderr");

  ProjectArgs project_args;
  auto* project_cmd = app.add_subcommand("project", "Project XYZ points to pixel coordinates");
  project_cmd->add_option("--calib", project_args.calib, "Calibration JSON")->required();
  project_cmd->add_option("--points", project_args.points, "Raw float32 XYZ triples")->required();
  project_cmd->add_option("--out", project_args.out, "Output CSV (default: stdout)");

  RasterizeArgs rasterize_args;
  auto* rasterize_cmd = app.add_subcommand("rasterize", "Rasterize 3D boxes to a BEV label map");
  rasterize_cmd->add_option("--annotations", rasterize_args.annotations, "Annotation JSON")->required();
  rasterize_cmd->add_option("--out", rasterize_args.out, "Output PGM")->required();
  rasterize_cmd->add_option("--class", rasterize_args.class_name, "Class filter or 'all'")
      ->capture_default_str();
  rasterize_cmd->add_option("--side", rasterize_args.side, "Grid side (m)")->capture_default_str();
  rasterize_cmd->add_option("--res", rasterize_args.res, "Cell size (m)")->capture_default_str();
  rasterize_cmd->add_option("--centerness-out", rasterize_args.centerness_out,
                            "Also write the centerness target raster");
  rasterize_cmd->add_option("--offset-out", rasterize_args.offset_out,
                            "Also write the offset target (2-ch FMAP, background zeroed)");

  PullArgs pull_args;
  auto* pull_cmd = app.add_subcommand("pull", "Pull per-pillar features from a feature map");
  pull_cmd->add_option("--calib", pull_args.calib, "Calibration JSON")->required();
  pull_cmd->add_option("--featmap", pull_args.featmap, "FMAP feature map")->required();
  pull_cmd->add_option("--out", pull_args.out, "Output FMAP (C x anchors x points)")->required();
  pull_cmd->add_option("--anchors", pull_args.anchors, "Cells as 'row,col;row,col;...'");
  pull_cmd->add_flag("--all", pull_args.all, "Use every grid cell as an anchor");
  pull_cmd->add_option("--side", pull_args.side, "Grid side (m)")->capture_default_str();
  pull_cmd->add_option("--res", pull_args.res, "Cell size (m)")->capture_default_str();
  pull_cmd->add_option("--points-per-pillar", pull_args.points_per_pillar, "Samples per pillar")
      ->capture_default_str();
  pull_cmd->add_option("--z-min", pull_args.z_min, "Pillar bottom (m)")->capture_default_str();
  pull_cmd->add_option("--z-max", pull_args.z_max, "Pillar top (m)")->capture_default_str();

  PipelineArgs pipeline_args;
  auto* pipeline_cmd =
      app.add_subcommand("pipeline", "Coarse-to-fine sampling pipeline to a BEV logit map");
  pipeline_cmd->add_option("--calib", pipeline_args.calib, "Calibration JSON")->required();
  pipeline_cmd->add_option("--featmap", pipeline_args.featmap, "FMAP feature map")->required();
  pipeline_cmd->add_option("--decoder", pipeline_args.decoder, "Decoder JSON")->required();
  pipeline_cmd->add_option("--out", pipeline_args.out, "Output logits raster")->required();
  pipeline_cmd->add_option("--n-coarse", pipeline_args.n_coarse, "Coarse anchor budget")
      ->capture_default_str();
  pipeline_cmd->add_option("--k", pipeline_args.k, "Anchors promoted to the fine stage")
      ->capture_default_str();
  pipeline_cmd->add_option("--side", pipeline_args.side, "Grid side (m)")->capture_default_str();
  pipeline_cmd->add_option("--res", pipeline_args.res, "Cell size (m)")->capture_default_str();
  pipeline_cmd->add_option("--points-per-pillar", pipeline_args.points_per_pillar,
                           "Samples per pillar")->capture_default_str();
  pipeline_cmd->add_option("--z-min", pipeline_args.z_min, "Pillar bottom (m)")->capture_default_str();
  pipeline_cmd->add_option("--z-max", pipeline_args.z_max, "Pillar top (m)")->capture_default_str();
  pipeline_cmd->add_option("--fine-radius", pipeline_args.fine_radius,
                           "Fine neighborhood radius in cells")->capture_default_str();
  pipeline_cmd->add_flag("--fine-off", pipeline_args.fine_off, "Skip the fine stage");
  pipeline_cmd->add_flag("--random-coarse", pipeline_args.random_coarse,
                         "Seeded random coarse anchors instead of the stride lattice");
  pipeline_cmd->add_option("--gt", pipeline_args.gt, "Ground-truth PGM for metrics");
  pipeline_cmd->add_option("--bin-out", pipeline_args.bin_out,
                           "Binary map PGM (default: <out>.pgm)");
  pipeline_cmd->add_option("--metrics-out", pipeline_args.metrics_out,
                           "Metrics JSON path (default: stdout)");
  pipeline_cmd->add_option("--threshold", pipeline_args.threshold, "Binarization logit threshold")
      ->capture_default_str();
  pipeline_cmd->add_option("--ranges", pipeline_args.ranges, "Evaluation ranges (m)")
      ->delimiter(',')->capture_default_str();

  LossArgs loss_args;
  auto* loss_cmd = app.add_subcommand("loss", "Multi-task loss report");
  loss_cmd->add_option("--pred", loss_args.pred, "Predicted probabilities raster")->required();
  loss_cmd->add_option("--target", loss_args.target, "Target labels (PGM or raster)")->required();
  loss_cmd->add_option("--gamma", loss_args.gamma, "Focal gamma")->capture_default_str();
  loss_cmd->add_flag("--sigmoid", loss_args.sigmoid, "Treat --pred as logits");
  loss_cmd->add_option("--pred-center", loss_args.pred_center, "Predicted centerness raster");
  loss_cmd->add_option("--target-center", loss_args.target_center, "Target centerness raster");
  loss_cmd->add_option("--pred-offset", loss_args.pred_offset, "Predicted offsets (2-ch FMAP)");
  loss_cmd->add_option("--target-offset", loss_args.target_offset, "Target offsets (2-ch FMAP)");
  loss_cmd->add_option("--fg-mask", loss_args.fg_mask, "Foreground mask (default: --target)");
  loss_cmd->add_option("--weights", loss_args.weights, "Task weights seg,center,offset")
      ->delimiter(',')->capture_default_str();

  EvaluateArgs evaluate_args;
  auto* evaluate_cmd = app.add_subcommand("evaluate", "Range-cropped IoU report");
  evaluate_cmd->add_option("--pred", evaluate_args.pred, "Predicted logits raster")->required();
  evaluate_cmd->add_option("--gt", evaluate_args.gt, "Ground-truth PGM")->required();
  evaluate_cmd->add_option("--ranges", evaluate_args.ranges, "Ranges (m)")
      ->delimiter(',')->capture_default_str();
  evaluate_cmd->add_option("--threshold", evaluate_args.threshold, "Binarization logit threshold")
      ->capture_default_str();

  SyncArgs sync_args;
  auto* sync_cmd = app.add_subcommand("sync", "Synchronize a multi-stream trace");
  sync_cmd->add_option("--trace", sync_args.trace, "CSV trace (stream_id,timestamp)")->required();
  sync_cmd->add_option("--slop", sync_args.slop, "Max pairing discrepancy (s)")
      ->capture_default_str();
  sync_cmd->add_option("--queue", sync_args.queue, "Per-stream queue size")->capture_default_str();
  sync_cmd->add_option("--reference", sync_args.reference, "Reference stream")
      ->capture_default_str();

  GenSceneArgs gen_args;
  auto* gen_cmd = app.add_subcommand("gen-scene", "Generate a synthetic scene");
  gen_cmd->add_option("--out-dir", gen_args.out_dir, "Output directory")->required();
  gen_cmd->add_option("--n-boxes", gen_args.n_boxes, "Number of boxes")->capture_default_str();
  gen_cmd->add_option("--channels", gen_args.channels, "Feature map channels")
      ->capture_default_str();
  gen_cmd->add_option("--fm-width", gen_args.fm_width, "Feature map width")->capture_default_str();
  gen_cmd->add_option("--fm-height", gen_args.fm_height, "Feature map height")
      ->capture_default_str();
  gen_cmd->add_option("--side", gen_args.side, "Grid side (m)")->capture_default_str();
  gen_cmd->add_option("--res", gen_args.res, "Cell size (m)")->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);  // prints the usage diagnostic
    return 2;
  }

  try {
    pipeline_args.seed = seed;
    gen_args.seed = seed;
    if (project_cmd->parsed()) return run_project(project_args);
    if (rasterize_cmd->parsed()) return run_rasterize(rasterize_args);
    if (pull_cmd->parsed()) return run_pull(pull_args);
    if (pipeline_cmd->parsed()) return run_pipeline(pipeline_args);
    if (loss_cmd->parsed()) return run_loss(loss_args);
    if (evaluate_cmd->parsed()) return run_evaluate(evaluate_args);
    if (sync_cmd->parsed()) return run_sync(sync_args);
    if (gen_cmd->parsed()) return run_gen_scene(gen_args);
  } catch (const io::IoError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const CLI::ValidationError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
