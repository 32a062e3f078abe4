#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include "CLI11.hpp"
#include "mdcn/analysis.hpp"
#include "mdcn/builder.hpp"
#include "mdcn/checkpoint.hpp"
#include "mdcn/config.hpp"
#include "mdcn/detector.hpp"
#include "mdcn/eval.hpp"
#include "mdcn/image.hpp"
#include "mdcn/synthetic.hpp"
#include "mdcn/trainer.hpp"

namespace fs = std::filesystem;
using namespace mdcn;

namespace {

struct CommonArgs {
  std::string config_path;
  Config cfg;

  void load() {
    if (!config_path.empty()) cfg = load_config_file(config_path);
  }
};

Schedule schedule_from_config(const Config& cfg) {
  Schedule s;
  s.total_iterations = cfg.total_iterations;
  s.decay = cfg.lr_decay;
  if (cfg.milestones.empty()) {
    s = Schedule::scaled_to(cfg.total_iterations);
    s.decay = cfg.lr_decay;
  } else {
    s.milestones = cfg.milestones;
  }
  s.validate();
  return s;
}

AnchorSet anchors_from_config(const NetworkGraph& g, const Config& cfg) {
  return generate_anchors(
      tap_specs_for_graph(g, cfg.input_size, cfg.anchor_scale_min, cfg.anchor_scale_max));
}

DetectorOptions detector_options(const Config& cfg) {
  DetectorOptions opt;
  opt.confidence_floor = cfg.confidence_floor;
  opt.nms_threshold = cfg.nms_threshold;
  opt.top_k = cfg.top_k;
  return opt;
}

void write_file(const std::string& path, const std::string& text) {
  std::ofstream f(path);
  if (!f) throw IoError("cannot write " + path);
  f << text;
}

// Exports scenes as PPM images plus KITTI-style labels, the layout `eval`
// consumes.
void export_scenes(const std::string& dir, const std::vector<SyntheticScene>& scenes) {
  fs::create_directories(fs::path(dir) / "images");
  fs::create_directories(fs::path(dir) / "labels");
  char name[32];
  for (std::size_t i = 0; i < scenes.size(); ++i) {
    std::snprintf(name, sizeof(name), "%06zu", i);
    write_ppm((fs::path(dir) / "images" / (std::string(name) + ".ppm")).string(),
              scenes[i].image);
    std::ostringstream lab;
    for (const auto& gt : scene_ground_truth(scenes[i])) {
      char line[256];
      std::snprintf(line, sizeof(line),
                    "%s 0.00 0 0.00 %.2f %.2f %.2f %.2f 0 0 0 0 0 0 0\n",
                    gt.cls.c_str(), gt.x1, gt.y1, gt.x2, gt.y2);
      lab << line;
    }
    write_file((fs::path(dir) / "labels" / (std::string(name) + ".txt")).string(),
               lab.str());
  }
}

struct DataDir {
  std::vector<Tensor> images;
  std::vector<std::vector<GroundTruth>> labels;
};

DataDir load_data_dir(const std::string& dir) {
  DataDir data;
  std::vector<fs::path> image_files;
  for (const auto& e : fs::directory_iterator(fs::path(dir) / "images")) {
    if (e.is_regular_file()) image_files.push_back(e.path());
  }
  std::sort(image_files.begin(), image_files.end());
  for (const auto& img : image_files) {
    const fs::path label = fs::path(dir) / "labels" / (img.stem().string() + ".txt");
    if (!fs::exists(label)) {
      throw IoError("eval: no label file for image " + img.string());
    }
    std::ifstream lf(label);
    std::stringstream ss;
    ss << lf.rdbuf();
    data.images.push_back(read_image(img.string()));
    data.labels.push_back(parse_kitti_labels(ss.str()));
  }
  return data;
}

int cmd_summarize(const CommonArgs& args, const std::string& format) {
  const NetworkGraph g = assemble_model(args.cfg.model_config());
  const ModelSummary s = summarize(g, args.cfg.input_size);
  std::cout << (format == "records" ? summary_records(s) : summary_text(s));
  return 0;
}

int cmd_count_params(const CommonArgs& args, const std::string& format) {
  const NetworkGraph g = assemble_model(args.cfg.model_config());
  const ParamCount pc = count_parameters(g);
  if (format == "records") {
    for (const auto& l : g.layers) {
      std::cout << "record=params layer=" << l.id << " params=" << pc.per_layer.at(l.id)
                << "\n";
    }
    std::cout << "record=total params=" << pc.total << "\n";
  } else {
    for (const auto& l : g.layers) {
      std::printf("%-18s %12zu\n", l.id.c_str(), pc.per_layer.at(l.id));
    }
    std::printf("total %zu\n", pc.total);
  }
  return 0;
}

int cmd_rf_report(const CommonArgs& args, const std::string& format) {
  NetworkGraph g = assemble_model(args.cfg.model_config());
  const RFReport rf = receptive_field(g);
  if (format == "records") {
    for (const auto& l : g.layers) {
      const RFEntry& e = rf.per_layer.at(l.id);
      char cov[40];
      std::snprintf(cov, sizeof(cov), "%.17g", e.coverage);
      std::cout << "record=rf layer=" << l.id << " rf=" << e.rf
                << " stride=" << e.effective_stride << " coverage=" << cov << "\n";
    }
  } else {
    std::printf("%-18s %8s %8s %10s\n", "layer", "rf", "stride", "coverage");
    for (const auto& l : g.layers) {
      const RFEntry& e = rf.per_layer.at(l.id);
      std::printf("%-18s %8zu %8zu %10.3f\n", l.id.c_str(), e.rf, e.effective_stride,
                  e.coverage);
    }
  }
  return 0;
}

int cmd_gen_anchors(const CommonArgs& args, const std::string& out) {
  const NetworkGraph g = assemble_model(args.cfg.model_config());
  const AnchorSet anchors = anchors_from_config(g, args.cfg);
  const std::string text = anchors_to_text(anchors);
  if (out.empty()) {
    std::cout << text;
  } else {
    write_file(out, text);
  }
  return 0;
}

int cmd_gradcheck(const CommonArgs& args, double tolerance, std::size_t samples) {
  // A tiny single-tap MDCN-style net keeps finite differences tractable
  // while still exercising every layer kind plus the joint loss.
  const Config& cfg = args.cfg;
  Rng rng(cfg.seed);

  NetworkGraph g;
  g.input_size = 16;
  g.num_classes = cfg.num_classes;
  g.variant = "gradcheck";
  g.layers.push_back([&] {
    LayerSpec l;
    l.id = "stem";
    l.kind = LayerKind::conv;
    l.inputs = {"input"};
    l.out_channels = 6;
    l.ksize = 3;
    l.stride = 1;
    l.pad = 1;
    return l;
  }());
  g.layers.push_back([&] {
    LayerSpec l;
    l.id = "stem_relu";
    l.kind = LayerKind::relu;
    l.inputs = {"stem"};
    return l;
  }());
  g.layers.push_back([&] {
    LayerSpec l;
    l.id = "pool";
    l.kind = LayerKind::pool;
    l.inputs = {"stem_relu"};
    l.ksize = 2;
    l.stride = 2;
    return l;
  }());
  g.layers.push_back([&] {
    LayerSpec l;
    l.id = "norm";
    l.kind = LayerKind::l2norm;
    l.inputs = {"pool"};
    l.scale_init = 4.0;
    return l;
  }());
  InceptionUnitSpec unit;
  unit.prefix = "unit";
  unit.in_channels = 6;
  unit.bottleneck_channels = 4;
  unit.entrance_channels = 4;
  unit.branch_channels = 3;
  const std::string top = build_inception_unit(g, unit, "norm");
  g.source_taps = {top, top};  // two taps so flattening covers multiple heads
  const auto shapes = infer_shapes(g, g.input_size);
  for (std::size_t t = 0; t < 2; ++t) {
    const int k = boxes_per_cell(static_cast<int>(t), shapes.at(top).h);
    LayerSpec conf;
    conf.id = "head" + std::to_string(t) + "_conf";
    conf.kind = LayerKind::predict_tap;
    conf.inputs = {top};
    conf.out_channels = k * (g.num_classes + 1);
    conf.ksize = 3;
    conf.pad = 1;
    conf.role = HeadRole::conf;
    conf.tap_index = static_cast<int>(t);
    conf.boxes_per_cell = k;
    g.layers.push_back(conf);
    LayerSpec loc = conf;
    loc.id = "head" + std::to_string(t) + "_loc";
    loc.out_channels = 4 * k;
    loc.role = HeadRole::loc;
    g.layers.push_back(loc);
  }
  g.validate();

  ParamStore params = init_params(g, rng);
  Tensor input({1, 3, 16, 16});
  for (auto& v : input.values()) v = rng.uniform(-1.0, 1.0) + 0.01;

  std::vector<TapSpec> taps;
  for (std::size_t t = 0; t < 2; ++t) {
    TapSpec spec;
    spec.map_size = static_cast<int>(shapes.at(top).h);
    spec.scale = 0.3 + 0.3 * static_cast<double>(t);
    spec.scale_next = 0.6 + 0.3 * static_cast<double>(t);
    // Box count per cell must match the heads: 4 on tap 0, 6 elsewhere.
    spec.ratios = (t == 0) ? std::vector<double>{1.0, 2.0, 0.5}
                           : std::vector<double>{1.0, 2.0, 3.0, 0.5, 1.0 / 3.0};
    taps.push_back(spec);
  }
  const AnchorSet anchors = generate_anchors(taps);
  const std::vector<GtBox> gts = {GtBox{Box{0.35, 0.4, 0.3, 0.25}, 1},
                                  GtBox{Box{0.7, 0.65, 0.2, 0.3}, cfg.num_classes}};

  const auto loss_of = [&](const ParamStore& p) {
    Activations acts = forward(g, p, input);
    FlatPredictions fp = flatten_predictions(g, acts);
    MatchAssignment m = match(gts, anchors, cfg.match_threshold);
    return multibox_loss(fp.conf, fp.loc, m, gts, anchors, cfg.neg_pos_ratio,
                         cfg.loss_alpha)
        .report.total;
  };

  Activations acts = forward(g, params, input);
  FlatPredictions fp = flatten_predictions(g, acts);
  MatchAssignment m = match(gts, anchors, cfg.match_threshold);
  MultiboxLossResult lr = multibox_loss(fp.conf, fp.loc, m, gts, anchors,
                                        cfg.neg_pos_ratio, cfg.loss_alpha);
  GradMap seeds = unflatten_prediction_grads(g, acts, lr.conf_grad, lr.loc_grad);
  BackwardResult back = backward(g, params, input, acts, seeds);

  Rng check_rng = rng.fork(7);
  const GradCheckReport report =
      grad_check(loss_of, params, back.grads, check_rng, samples, tolerance);
  std::printf("checked %zu coordinates, max relative error %.3e (tolerance %.1e)\n",
              report.checked, report.max_rel_error, tolerance);
  if (!report.pass) {
    std::printf("FAIL worst: %s[%zu] analytic %.12g numeric %.12g\n",
                report.worst.key.c_str(), report.worst.index, report.worst.analytic,
                report.worst.numeric);
    return 1;
  }
  std::printf("PASS\n");
  return 0;
}

int cmd_train_toy(const CommonArgs& args, const std::string& out_override) {
  Config cfg = args.cfg;
  if (!out_override.empty()) cfg.out_dir = out_override;

  const NetworkGraph g = assemble_model(cfg.model_config());
  const AnchorSet anchors = anchors_from_config(g, cfg);
  Rng init_rng(cfg.seed ^ 0xa5a5a5a5a5a5a5a5ULL);
  ParamStore params = init_params(g, init_rng);

  const auto scenes = make_synthetic_dataset(cfg.seed, cfg.images, cfg.input_size);
  const std::size_t n_val = static_cast<std::size_t>(
      std::llround(cfg.val_fraction * static_cast<double>(scenes.size())));
  const std::size_t n_train = scenes.size() - n_val;
  std::vector<SyntheticScene> train_set(scenes.begin(), scenes.begin() + n_train);
  std::vector<SyntheticScene> val_set(scenes.begin() + n_train, scenes.end());

  fs::create_directories(cfg.out_dir);
  write_file((fs::path(cfg.out_dir) / "config.txt").string(), dump_config(cfg));
  if (!val_set.empty()) {
    export_scenes((fs::path(cfg.out_dir) / "val").string(), val_set);
  }

  TrainOptions opts;
  opts.batch_size = cfg.batch_size;
  opts.schedule = schedule_from_config(cfg);
  opts.neg_pos_ratio = cfg.neg_pos_ratio;
  opts.loss_alpha = cfg.loss_alpha;
  opts.match_threshold = cfg.match_threshold;
  opts.augment_flip = cfg.augment_flip;
  opts.augment_crop = cfg.augment_crop;
  opts.seed = cfg.seed;
  opts.out_dir = cfg.out_dir;
  opts.checkpoint_every = cfg.checkpoint_every;

  OptimizerState opt;
  opt.momentum = cfg.momentum;
  opt.weight_decay = cfg.weight_decay;
  opt.base_lr = cfg.base_lr;

  const TrainResult result = train(g, std::move(params), train_set, anchors, opts, opt);
  std::printf("trained %zu iterations on %zu images (%zu held out), final loss %.4f\n",
              result.trace.size(), n_train, n_val,
              result.trace.empty() ? 0.0 : result.trace.back().loss);
  std::printf("checkpoint: %s/final\n", cfg.out_dir.c_str());
  return 0;
}

int cmd_detect(const CommonArgs& args, const std::string& checkpoint,
               const std::string& image_path) {
  const Config& cfg = args.cfg;
  Checkpoint ck = load_checkpoint(checkpoint);
  const AnchorSet anchors = generate_anchors(tap_specs_for_graph(
      ck.graph, ck.graph.input_size, cfg.anchor_scale_min, cfg.anchor_scale_max));
  const Detector det(ck.graph, std::move(ck.params), anchors, detector_options(cfg));
  const Tensor image = read_image(image_path);
  std::cout << detections_to_text(det.detect(image));
  return 0;
}

int cmd_eval(const CommonArgs& args, const std::string& checkpoint,
             const std::string& data_dir, bool sweep, const std::string& format) {
  const Config& cfg = args.cfg;
  Checkpoint ck = load_checkpoint(checkpoint);
  const AnchorSet anchors = generate_anchors(tap_specs_for_graph(
      ck.graph, ck.graph.input_size, cfg.anchor_scale_min, cfg.anchor_scale_max));
  const Detector det(ck.graph, std::move(ck.params), anchors, detector_options(cfg));

  const DataDir data = load_data_dir(data_dir);
  std::vector<std::vector<DetectionRecord>> dets(data.images.size());
  for (std::size_t i = 0; i < data.images.size(); ++i) {
    dets[i] = det.detect(data.images[i]);
  }

  const std::vector<std::string> classes = {"car", "pedestrian", "cyclist"};
  const EvalReport report = evaluate_detections(dets, data.labels, classes);
  std::cout << (format == "records" ? eval_report_records(report)
                                    : eval_report_text(report));
  if (sweep) {
    const IoUSweepTable table = iou_sweep(dets, data.labels, classes);
    std::cout << iou_sweep_text(table);
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{
      "mdcn: wide-context multi-scale detector toolkit.\n"
      "Flags override config-file keys (load order: --config file, then flags)."};
  app.require_subcommand(1);

  CommonArgs args;
  std::string format = "text";
  std::string out, checkpoint, image_path, data_dir;
  bool sweep = false;
  double tolerance = 1e-6;
  std::size_t samples = 200;

  auto add_common = [&](CLI::App* sub, bool with_variant = true) {
    sub->add_option("--config", args.config_path, "key=value config file");
    if (with_variant) {
      sub->add_option("--variant", args.cfg.variant, "ssd-300 | mdcn-i1 | mdcn-i2");
      sub->add_option("--input-size", args.cfg.input_size, "square input size");
      sub->add_option("--width-mult", args.cfg.width_mult, "channel width multiplier");
    }
    sub->add_option("--seed", args.cfg.seed, "seed for all randomness");
  };

  auto* s_sum = app.add_subcommand("summarize", "per-layer shape/param/rf report");
  add_common(s_sum);
  s_sum->add_option("--format", format, "text | records");

  auto* s_cnt = app.add_subcommand("count-params", "per-layer parameter table");
  add_common(s_cnt);
  s_cnt->add_option("--format", format, "text | records");

  auto* s_rf = app.add_subcommand("rf-report", "receptive field report");
  add_common(s_rf);
  s_rf->add_option("--format", format, "text | records");

  auto* s_anch = app.add_subcommand("gen-anchors", "dump default boxes");
  add_common(s_anch);
  s_anch->add_option("--out", out, "output file (default stdout)");

  auto* s_gc = app.add_subcommand("gradcheck", "finite-difference gradient check");
  add_common(s_gc, false);
  s_gc->add_option("--tolerance", tolerance, "max relative error");
  s_gc->add_option("--samples", samples, "parameter coordinates to probe");

  auto* s_train = app.add_subcommand("train-toy", "train on the synthetic dataset");
  add_common(s_train);
  s_train->add_option("--out", out, "output directory (overrides out_dir)");

  auto* s_det = app.add_subcommand("detect", "run detection on one image");
  add_common(s_det, false);
  s_det->add_option("--checkpoint", checkpoint, "checkpoint directory")->required();
  s_det->add_option("--image", image_path, "input image (.ppm or .mdt)")->required();

  auto* s_eval = app.add_subcommand("eval", "AP evaluation over a data directory");
  add_common(s_eval, false);
  s_eval->add_option("--checkpoint", checkpoint, "checkpoint directory")->required();
  s_eval->add_option("--data", data_dir, "directory with images/ and labels/")->required();
  s_eval->add_flag("--sweep", sweep, "also print the IoU-threshold sweep");
  s_eval->add_option("--format", format, "text | records");

  CLI11_PARSE(app, argc, argv);

  try {
    // Config file first, then re-apply any explicit flags on top.
    if (!args.config_path.empty()) {
      Config file_cfg = load_config_file(args.config_path);
      CLI::App* sub = app.get_subcommands().front();
      auto overridden = [&](const std::string& flag) {
        const CLI::Option* o = sub->get_option_no_throw(flag);
        return o != nullptr && o->count() > 0;
      };
      if (!overridden("--variant")) args.cfg.variant = file_cfg.variant;
      else file_cfg.variant = args.cfg.variant;
      if (!overridden("--input-size")) args.cfg.input_size = file_cfg.input_size;
      else file_cfg.input_size = args.cfg.input_size;
      if (!overridden("--width-mult")) args.cfg.width_mult = file_cfg.width_mult;
      else file_cfg.width_mult = args.cfg.width_mult;
      if (!overridden("--seed")) args.cfg.seed = file_cfg.seed;
      else file_cfg.seed = args.cfg.seed;
      file_cfg.validate();
      const auto variant = args.cfg.variant;
      const auto input_size = args.cfg.input_size;
      const auto width = args.cfg.width_mult;
      const auto seed = args.cfg.seed;
      args.cfg = file_cfg;
      args.cfg.variant = variant;
      args.cfg.input_size = input_size;
      args.cfg.width_mult = width;
      args.cfg.seed = seed;
    }
    args.cfg.validate();

    if (s_sum->parsed()) return cmd_summarize(args, format);
    if (s_cnt->parsed()) return cmd_count_params(args, format);
    if (s_rf->parsed()) return cmd_rf_report(args, format);
    if (s_anch->parsed()) return cmd_gen_anchors(args, out);
    if (s_gc->parsed()) return cmd_gradcheck(args, tolerance, samples);
    if (s_train->parsed()) return cmd_train_toy(args, out);
    if (s_det->parsed()) return cmd_detect(args, checkpoint, image_path);
    if (s_eval->parsed()) return cmd_eval(args, checkpoint, data_dir, sweep, format);
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
  return 0;
}
