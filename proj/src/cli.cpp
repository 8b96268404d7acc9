#include "plastisort/cli.hpp"

#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <omp.h>
#include <sstream>

#include <CLI11.hpp>

#include "plastisort/config.hpp"
#include "plastisort/synthgen.hpp"

namespace plastisort {

namespace {

namespace fs = std::filesystem;

struct CommonOpts {
  std::string config_path;
  std::vector<std::string> overrides;
  int64_t seed = -1; // -1 = not given
  int jobs = 0;      // 0 = auto
  std::string out;
};

void add_common(CLI::App* cmd, CommonOpts& o, bool with_out = true) {
  cmd->add_option("--config", o.config_path, "config file (lowest precedence)");
  cmd->add_option("--set", o.overrides, "override config values, section.key=value")
      ->take_all();
  cmd->add_option("--seed", o.seed, "seed for all randomness (overrides PLASTISORT_SEED)");
  cmd->add_option("--jobs", o.jobs, "cap worker threads (sweep cells / OpenMP)");
  if (with_out) cmd->add_option("--out", o.out, "output directory");
}

KvConfig load_config(const CommonOpts& o) {
  KvConfig cfg;
  if (!o.config_path.empty()) cfg = KvConfig::parse_file(o.config_path);
  for (const std::string& ov : o.overrides) cfg.set_dotted(ov);
  // seed precedence: --seed > PLASTISORT_SEED > config > default
  if (o.seed >= 0) {
    cfg.set("train", "seed", std::to_string(o.seed));
  } else if (const char* env = std::getenv("PLASTISORT_SEED")) {
    if (!cfg.get("train", "seed")) cfg.set("train", "seed", env);
  }
  return cfg;
}

uint64_t resolve_seed(const CommonOpts& o, uint64_t fallback) {
  if (o.seed >= 0) return static_cast<uint64_t>(o.seed);
  if (const char* env = std::getenv("PLASTISORT_SEED"))
    return std::strtoull(env, nullptr, 10);
  return fallback;
}

void apply_jobs(int jobs) {
  if (jobs > 0) omp_set_num_threads(jobs);
}

fs::path ensure_out_dir(const std::string& out) {
  if (out.empty()) throw ValidationError("--out is required for this subcommand");
  fs::path dir(out);
  fs::create_directories(dir);
  return dir;
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream f(path, std::ios::trunc | std::ios::binary);
  if (!f) throw IoError("cannot write " + path.string());
  f << text;
}

void write_snapshot(const fs::path& dir, const KvConfig& cfg) {
  write_text(dir / "resolved.cfg", cfg.serialize());
}

SegmentParams segment_params_from(const KvConfig& cfg) {
  SegmentParams sp;
  if (auto v = cfg.get("segment", "polarity")) {
    if (*v == "dark")
      sp.polarity = Polarity::DarkForeground;
    else if (*v == "light")
      sp.polarity = Polarity::LightForeground;
    else
      throw ValidationError("segment.polarity must be dark or light");
  }
  if (auto v = cfg.get("segment", "connectivity")) sp.connectivity = std::stoi(*v);
  if (auto v = cfg.get("segment", "min_area_fraction")) sp.min_area_fraction = std::stod(*v);
  if (auto v = cfg.get("segment", "crop_pad")) sp.crop_pad = std::stoi(*v);
  return sp;
}

void segment_params_to(KvConfig& cfg, const SegmentParams& sp) {
  cfg.set("segment", "polarity",
          sp.polarity == Polarity::DarkForeground ? "dark" : "light");
  cfg.set("segment", "connectivity", std::to_string(sp.connectivity));
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.17g", sp.min_area_fraction);
  cfg.set("segment", "min_area_fraction", buf);
  cfg.set("segment", "crop_pad", std::to_string(sp.crop_pad));
}

std::string eval_report_text(const EvalReport& r) {
  std::ostringstream out;
  char buf[128];
  for (size_t c = 0; c < r.classes.size(); ++c) {
    double pc = 100.0 * r.per_class_correct[c] / std::max(1, r.per_class_total[c]);
    std::snprintf(buf, sizeof(buf), "%-8s %d/%d correct (%.2f%%)\n", r.classes[c].c_str(),
                  r.per_class_correct[c], r.per_class_total[c], pc);
    out << buf;
  }
  std::snprintf(buf, sizeof(buf), "overall  %.2f%%\n", r.overall_accuracy_percent);
  out << buf;
  out << "confusion (rows = true, cols = predicted):\n";
  for (size_t t = 0; t < r.classes.size(); ++t) {
    out << "  " << r.classes[t] << ":";
    for (size_t p = 0; p < r.classes.size(); ++p) out << " " << r.confusion[t][p];
    out << "\n";
  }
  return out.str();
}

std::string eval_report_csv(const EvalReport& r) {
  std::ostringstream out;
  out << "true_class,predicted_class,count\n";
  for (size_t t = 0; t < r.classes.size(); ++t)
    for (size_t p = 0; p < r.classes.size(); ++p)
      out << r.classes[t] << "," << r.classes[p] << "," << r.confusion[t][p] << "\n";
  return out.str();
}

std::string stats_text(const InputStats& stats) {
  char buf[160];
  std::snprintf(buf, sizeof(buf), "mean_r = %.17g\nmean_g = %.17g\nmean_b = %.17g\n",
                stats.mean[0], stats.mean[1], stats.mean[2]);
  return buf;
}

int cmd_gen(const CommonOpts& common, int cli_images_per_class, int cli_trays, bool quiet) {
  KvConfig cfg = load_config(common);
  SynthSpec spec;
  auto geti = [&](const char* key, int& field) {
    if (auto v = cfg.get("gen", key)) field = std::stoi(*v);
  };
  geti("images_per_class", spec.images_per_class);
  geti("trays", spec.trays);
  geti("piece_min", spec.piece_min);
  geti("piece_max", spec.piece_max);
  geti("corr_a", spec.corr_a);
  geti("corr_b", spec.corr_b);
  geti("texture_amp", spec.texture_amp);
  geti("base_lo", spec.base_lo);
  geti("base_hi", spec.base_hi);
  geti("background", spec.background);
  geti("bg_noise", spec.bg_noise);
  geti("margin", spec.margin);
  geti("tray_width", spec.tray_width);
  geti("tray_height", spec.tray_height);
  if (auto v = cfg.get("gen", "seed")) spec.seed = std::stoull(*v);
  // explicit flags beat config values
  if (cli_images_per_class >= 0) spec.images_per_class = cli_images_per_class;
  if (cli_trays >= 0) spec.trays = cli_trays;
  spec.seed = resolve_seed(common, spec.seed);
  spec.validate();

  fs::path dir = ensure_out_dir(common.out);
  generate_dataset(spec, dir);

  KvConfig snap;
  snap.set("run", "subcommand", "gen");
  snap.set("gen", "images_per_class", std::to_string(spec.images_per_class));
  snap.set("gen", "trays", std::to_string(spec.trays));
  snap.set("gen", "piece_min", std::to_string(spec.piece_min));
  snap.set("gen", "piece_max", std::to_string(spec.piece_max));
  snap.set("gen", "corr_a", std::to_string(spec.corr_a));
  snap.set("gen", "corr_b", std::to_string(spec.corr_b));
  snap.set("gen", "texture_amp", std::to_string(spec.texture_amp));
  snap.set("gen", "base_lo", std::to_string(spec.base_lo));
  snap.set("gen", "base_hi", std::to_string(spec.base_hi));
  snap.set("gen", "background", std::to_string(spec.background));
  snap.set("gen", "bg_noise", std::to_string(spec.bg_noise));
  snap.set("gen", "margin", std::to_string(spec.margin));
  snap.set("gen", "tray_width", std::to_string(spec.tray_width));
  snap.set("gen", "tray_height", std::to_string(spec.tray_height));
  snap.set("gen", "seed", std::to_string(spec.seed));
  write_snapshot(dir, snap);
  if (!quiet)
    std::cout << "wrote " << 2 * spec.images_per_class << " piece images and " << spec.trays
              << " trays under " << dir.string() << "\n";
  return 0;
}

int cmd_segment(const CommonOpts& common, const std::string& image, bool quiet) {
  KvConfig cfg = load_config(common);
  SegmentParams sp = segment_params_from(cfg);
  fs::path dir = ensure_out_dir(common.out);

  RasterImage img = load_image(image);
  RasterImage gray = to_grayscale(img);
  OtsuResult ot = otsu_threshold(gray);
  BinaryImage bin = binarize(gray, ot.threshold, sp.polarity);
  LabelMap lm = label_components(bin, sp.connectivity);
  long long min_area = static_cast<long long>(sp.min_area_fraction * gray.pixel_count());
  std::vector<BoundingBox> boxes = region_bounding_boxes(lm, min_area);
  std::vector<RasterImage> crops = extract_crops(img, boxes, sp.crop_pad);

  std::ostringstream manifest;
  manifest << "label,x0,y0,width,height,area\n";
  for (size_t i = 0; i < boxes.size(); ++i) {
    const BoundingBox& b = boxes[i];
    manifest << b.label << "," << b.x0 << "," << b.y0 << "," << b.width << "," << b.height
             << "," << b.area << "\n";
    char name[64];
    std::snprintf(name, sizeof(name), "crop_%03d.%s", b.label,
                  img.channels == 3 ? "ppm" : "pgm");
    save_image(crops[i], dir / name);
  }
  write_text(dir / "boxes.csv", manifest.str());

  KvConfig snap;
  snap.set("run", "subcommand", "segment");
  snap.set("run", "image", image);
  segment_params_to(snap, sp);
  write_snapshot(dir, snap);
  if (!quiet) {
    std::cout << "otsu threshold " << ot.threshold << (ot.degenerate ? " (degenerate)" : "")
              << ", " << boxes.size() << " component(s) kept\n";
  }
  return 0;
}

int cmd_preprocess(const CommonOpts& common, const std::string& image, bool quiet) {
  KvConfig cfg = load_config(common);
  TrainConfig tc = train_config_from(cfg); // for [preprocess]; dataset not needed
  fs::path dir = ensure_out_dir(common.out);
  RasterImage img = load_image(image);
  RasterImage gray = to_grayscale(img);
  double blur = blur_metric(gray);
  RasterImage out = preprocess_crop(img, tc.pre);
  save_image(out, dir / "preprocessed.pgm");

  KvConfig snap = train_config_to_kv(tc);
  snap.set("run", "subcommand", "preprocess");
  snap.set("run", "image", image);
  write_snapshot(dir, snap);
  if (!quiet) {
    std::printf("blur metric %.4f%s\n", blur,
                tc.pre.blur_threshold > 0 && blur < tc.pre.blur_threshold
                    ? " (below threshold: would be skipped for training)"
                    : "");
    std::cout << "wrote " << (dir / "preprocessed.pgm").string() << "\n";
  }
  return 0;
}

int cmd_train(const CommonOpts& common, bool quiet) {
  KvConfig cfg = load_config(common);
  TrainConfig tc = train_config_from(cfg);
  fs::path dir = ensure_out_dir(common.out);

  auto [weights, report] = train(tc);

  save_weights(weights, dir / "weights.psnn");
  write_text(dir / "stats.txt", stats_text(weights.stats));

  std::ostringstream loss;
  loss << "iteration,loss\n";
  char buf[64];
  for (size_t i = 0; i < report.iteration_loss.size(); ++i) {
    std::snprintf(buf, sizeof(buf), "%zu,%.9g\n", i, report.iteration_loss[i]);
    loss << buf;
  }
  write_text(dir / "loss.csv", loss.str());

  std::ostringstream acc;
  acc << "epoch,val_accuracy_percent\n";
  for (size_t e = 0; e < report.epoch_val_accuracy.size(); ++e) {
    std::snprintf(buf, sizeof(buf), "%zu,%.6f\n", e, report.epoch_val_accuracy[e]);
    acc << buf;
  }
  write_text(dir / "accuracy.csv", acc.str());

  std::ostringstream summary;
  summary << "final_val_accuracy_percent = " << report.final_val_accuracy << "\n"
          << "iterations = " << report.iteration_loss.size() << "\n"
          << "skipped_blurry = " << report.skipped_blurry << "\n"
          << "wall_seconds = " << report.wall_seconds << "\n";
  write_text(dir / "summary.txt", summary.str());

  write_snapshot(dir, train_config_to_kv(tc));
  if (!quiet)
    std::printf("final validation accuracy %.2f%% after %zu iterations (%.1fs)\n",
                report.final_val_accuracy, report.iteration_loss.size(),
                report.wall_seconds);
  return 0;
}

int cmd_sweep(const CommonOpts& common, const std::string& axis_name, int runs, bool quiet) {
  KvConfig cfg = load_config(common);
  TrainConfig tc = train_config_from(cfg);
  SweepAxis axis = sweep_axis_from_string(axis_name);
  fs::path dir = ensure_out_dir(common.out);

  SweepReport report = sweep(axis, tc, runs, common.jobs > 0 ? common.jobs : 1);

  std::ostringstream csv, table;
  write_sweep_csv(report, csv);
  write_sweep_table(report, table);
  write_text(dir / "sweep.csv", csv.str());
  write_text(dir / "sweep.txt", table.str());
  KvConfig snap = train_config_to_kv(tc);
  snap.set("run", "subcommand", "sweep");
  snap.set("run", "axis", axis_name);
  snap.set("run", "runs", std::to_string(runs));
  write_snapshot(dir, snap);
  if (!quiet) std::cout << table.str();
  return 0;
}

int cmd_eval(const CommonOpts& common, const std::string& weights_path,
             const std::string& role_name, bool quiet) {
  KvConfig cfg = load_config(common);
  TrainConfig tc = train_config_from(cfg);
  NetworkSpec spec = tc.resolve_network();
  WeightStore weights = load_weights(weights_path, &spec);
  DatasetListing listing =
      split_dataset(tc.dataset_root, tc.val_fraction, tc.test_per_class, tc.seed);
  Role role;
  if (role_name == "val")
    role = Role::Val;
  else if (role_name == "test")
    role = Role::Test;
  else
    throw ValidationError("--role must be val or test");
  EvalReport report = evaluate(spec, weights, listing, role, tc.pre, tc.batch_size);
  if (!quiet) std::cout << eval_report_text(report);
  if (!common.out.empty()) {
    fs::path dir = ensure_out_dir(common.out);
    write_text(dir / "eval.txt", eval_report_text(report));
    write_text(dir / "eval.csv", eval_report_csv(report));
    KvConfig snap = train_config_to_kv(tc);
    snap.set("run", "subcommand", "eval");
    snap.set("run", "weights", weights_path);
    snap.set("run", "role", role_name);
    write_snapshot(dir, snap);
  }
  return 0;
}

int cmd_classify(const CommonOpts& common, const std::string& weights_path,
                 const std::string& image, const std::string& class_names) {
  KvConfig cfg = load_config(common);
  TrainConfig tc = train_config_from(cfg);
  SegmentParams sp = segment_params_from(cfg);
  NetworkSpec spec = tc.resolve_network();
  WeightStore weights = load_weights(weights_path, &spec);
  RasterImage tray = load_image(image);

  ClassifyResult result = classify(spec, weights, tray, sp, tc.pre);

  std::vector<std::string> names;
  {
    std::stringstream ss(class_names);
    std::string tok;
    while (std::getline(ss, tok, ',')) names.push_back(tok);
  }
  std::ostringstream csv;
  csv << "label,x0,y0,width,height,area,class";
  for (int c = 0; c < spec.classes; ++c)
    csv << ",prob_" << (c < static_cast<int>(names.size()) ? names[static_cast<size_t>(c)]
                                                           : std::to_string(c));
  csv << "\n";
  for (const Detection& d : result.detections) {
    csv << d.box.label << "," << d.box.x0 << "," << d.box.y0 << "," << d.box.width << ","
        << d.box.height << "," << d.box.area << ","
        << (d.cls < static_cast<int>(names.size()) ? names[static_cast<size_t>(d.cls)]
                                                   : std::to_string(d.cls));
    char buf[32];
    for (double p : d.probabilities) {
      std::snprintf(buf, sizeof(buf), ",%.6f", p);
      csv << buf;
    }
    csv << "\n";
  }
  if (result.empty_warning)
    std::cerr << "warning: no components found in " << image << "\n";
  if (common.out.empty()) {
    std::cout << csv.str();
  } else {
    fs::path dir = ensure_out_dir(common.out);
    write_text(dir / "detections.csv", csv.str());
    KvConfig snap = train_config_to_kv(tc);
    segment_params_to(snap, sp);
    snap.set("run", "subcommand", "classify");
    snap.set("run", "weights", weights_path);
    snap.set("run", "image", image);
    write_snapshot(dir, snap);
  }
  return 0;
}

} // namespace

int run_cli(const std::vector<std::string>& args) {
  CLI::App app{"black-plastic (PS/ABS) segmentation and classification pipeline"};
  app.require_subcommand(1);

  CommonOpts gen_o, seg_o, pre_o, train_o, sweep_o, eval_o, cls_o;
  int gen_images_per_class = -1;
  int gen_trays = -1;
  std::string seg_image, pre_image, sweep_axis, eval_weights, eval_role = "test";
  std::string cls_weights, cls_image, cls_names = "ABS,PS";
  int sweep_runs = 3;
  bool quiet = false;
  app.add_flag("--quiet", quiet, "suppress progress output");

  CLI::App* gen = app.add_subcommand("gen", "generate the synthetic dataset");
  add_common(gen, gen_o);
  gen->add_option("--images-per-class", gen_images_per_class);
  gen->add_option("--trays", gen_trays);

  CLI::App* seg = app.add_subcommand("segment", "segment a tray photo into crops");
  add_common(seg, seg_o);
  seg->add_option("--image", seg_image, "tray photo")->required();

  CLI::App* pre = app.add_subcommand("preprocess", "run the crop preprocessing chain");
  add_common(pre, pre_o);
  pre->add_option("--image", pre_image, "crop image")->required();

  CLI::App* tr = app.add_subcommand("train", "train a network");
  add_common(tr, train_o);

  CLI::App* sw = app.add_subcommand("sweep", "hyperparameter sweep");
  add_common(sw, sweep_o);
  sw->add_option("--axis", sweep_axis, "solvers | shuffles | batch-epoch")->required();
  sw->add_option("--runs", sweep_runs, "training runs per cell (default 3)");

  CLI::App* ev = app.add_subcommand("eval", "evaluate stored weights on a split");
  add_common(ev, eval_o);
  ev->add_option("--weights", eval_weights, "PSNN weight file")->required();
  ev->add_option("--role", eval_role, "val | test");

  CLI::App* cl = app.add_subcommand("classify", "segment + classify a tray photo");
  add_common(cl, cls_o);
  cl->add_option("--weights", cls_weights, "PSNN weight file")->required();
  cl->add_option("--image", cls_image, "tray photo")->required();
  cl->add_option("--classes", cls_names, "class names for the report (default ABS,PS)");

  std::vector<std::string> argv_rev(args.rbegin(), args.rend());
  try {
    app.parse(argv_rev);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) { // --help
      std::cout << app.help();
      return 0;
    }
    std::cerr << e.what() << "\n" << app.help();
    return 1;
  }

  try {
    if (gen->parsed()) {
      apply_jobs(gen_o.jobs);
      return cmd_gen(gen_o, gen_images_per_class, gen_trays, quiet);
    }
    if (seg->parsed()) {
      apply_jobs(seg_o.jobs);
      return cmd_segment(seg_o, seg_image, quiet);
    }
    if (pre->parsed()) {
      apply_jobs(pre_o.jobs);
      return cmd_preprocess(pre_o, pre_image, quiet);
    }
    if (tr->parsed()) {
      apply_jobs(train_o.jobs);
      return cmd_train(train_o, quiet);
    }
    if (sw->parsed()) {
      return cmd_sweep(sweep_o, sweep_axis, sweep_runs, quiet);
    }
    if (ev->parsed()) {
      apply_jobs(eval_o.jobs);
      return cmd_eval(eval_o, eval_weights, eval_role, quiet);
    }
    if (cl->parsed()) {
      apply_jobs(cls_o.jobs);
      return cmd_classify(cls_o, cls_weights, cls_image, cls_names);
    }
    std::cerr << app.help();
    return 1;
  } catch (const ValidationError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const FormatError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "failure: " << e.what() << "\n";
    return 2;
  }
}

} // namespace plastisort
