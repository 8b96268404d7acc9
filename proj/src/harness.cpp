#include "plastisort/harness.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <set>

#include "plastisort/rng.hpp"

namespace plastisort {

void TrainConfig::validate() const {
  if (batch_size < 1) throw ValidationError("batch_size must be >= 1");
  if (max_epochs < 1) throw ValidationError("max_epochs must be >= 1");
  if (!(val_fraction >= 0.0 && val_fraction < 1.0))
    throw ValidationError("val_fraction must be in [0,1)");
  if (test_per_class < 0) throw ValidationError("test_per_class must be >= 0");
  solver.validate();
  resolve_network().validate();
  if (dataset_root.empty()) throw ValidationError("dataset root not set");
}

NetworkSpec TrainConfig::resolve_network() const {
  if (network == "custom") {
    if (!custom_network)
      throw ValidationError("network=custom requires a [network] section");
    return *custom_network;
  }
  return builtin_network(network);
}

namespace {

uint64_t iteration_seed(uint64_t seed, int64_t iter) {
  return mix_seed(mix_seed(seed, 0x49544552ull /* "ITER" */), static_cast<uint64_t>(iter));
}

// Load + preprocess a file list in parallel; results keep the input order.
std::vector<RasterImage> preprocess_entries(const std::vector<DatasetListing::Entry>& entries,
                                            const PreprocessParams& pre) {
  std::vector<RasterImage> out(entries.size());
  std::string error;
#pragma omp parallel for schedule(dynamic)
  for (long long i = 0; i < static_cast<long long>(entries.size()); ++i) {
    try {
      RasterImage img = load_image(entries[static_cast<size_t>(i)].path);
      out[static_cast<size_t>(i)] = preprocess_crop(img, pre);
    } catch (const std::exception& e) {
#pragma omp critical
      if (error.empty())
        error = entries[static_cast<size_t>(i)].path.string() + ": " + e.what();
    }
  }
  if (!error.empty()) throw std::runtime_error("preprocessing failed: " + error);
  return out;
}

std::vector<int> predict_rasters(const NetworkSpec& spec, const WeightStore& ws,
                                 const std::vector<RasterImage>& rasters, int batch_size) {
  std::vector<int> pred;
  pred.reserve(rasters.size());
  const int64_t H = spec.in_height, W = spec.in_width;
  for (size_t start = 0; start < rasters.size(); start += static_cast<size_t>(batch_size)) {
    size_t end = std::min(rasters.size(), start + static_cast<size_t>(batch_size));
    Tensor input({static_cast<int64_t>(end - start), 3, H, W});
    for (size_t j = start; j < end; ++j)
      fill_input_tensor(input, static_cast<int64_t>(j - start), rasters[j], ws.stats);
    for (const Prediction& p : predict_batch(spec, ws, input)) pred.push_back(p.cls);
  }
  return pred;
}

double accuracy_percent(const std::vector<int>& truth, const std::vector<int>& pred) {
  int correct = 0;
  for (size_t i = 0; i < truth.size(); ++i)
    if (truth[i] == pred[i]) ++correct;
  return 100.0 * correct / static_cast<double>(truth.size());
}

} // namespace

std::pair<WeightStore, TrainReport> train(const TrainConfig& config) {
  config.validate();
  const auto t0 = std::chrono::steady_clock::now();
  const NetworkSpec spec = config.resolve_network();
  DatasetListing listing = split_dataset(config.dataset_root, config.val_fraction,
                                         config.test_per_class, config.seed);
  if (listing.train.empty()) throw ValidationError("train: training split is empty");
  if (listing.val.empty())
    throw ValidationError("train: validation split is empty (val_fraction too small?)");

  TrainReport report;
  report.seed = config.seed;

  // crops are resized to whatever the network consumes
  PreprocessParams pre = config.pre;
  pre.target_size = static_cast<int>(spec.in_height);

  std::vector<RasterImage> train_imgs = preprocess_entries(listing.train, pre);
  std::vector<int> train_labels;
  for (const auto& e : listing.train) train_labels.push_back(e.cls);

  // Optional blur gate on training images; the metric runs on the raw
  // grayscale crop, before CLAHE touches the contrast.
  if (config.pre.blur_threshold > 0.0) {
    std::vector<RasterImage> kept;
    std::vector<int> kept_labels;
    for (size_t i = 0; i < listing.train.size(); ++i) {
      RasterImage gray = to_grayscale(load_image(listing.train[i].path));
      if (blur_metric(gray) < config.pre.blur_threshold) {
        ++report.skipped_blurry;
        continue;
      }
      kept.push_back(std::move(train_imgs[i]));
      kept_labels.push_back(train_labels[i]);
    }
    train_imgs = std::move(kept);
    train_labels = std::move(kept_labels);
    if (train_imgs.empty())
      throw ValidationError("train: blur threshold removed every training image");
  }

  std::vector<RasterImage> val_imgs = preprocess_entries(listing.val, pre);
  std::vector<int> val_labels;
  for (const auto& e : listing.val) val_labels.push_back(e.cls);

  // Channel mean over the training set. Integer pixel sums keep this exact.
  InputStats stats;
  {
    uint64_t sum = 0, count = 0;
    for (const RasterImage& img : train_imgs) {
      for (uint8_t p : img.data) sum += p;
      count += img.data.size();
    }
    double m = static_cast<double>(sum) / (255.0 * static_cast<double>(count));
    stats.mean = {m, m, m};
  }

  WeightStore ws = init_weights(spec, config.seed);
  ws.stats = stats;
  SolverState state = make_solver_state(ws);

  const int n_train = static_cast<int>(train_imgs.size());
  const int64_t H = spec.in_height, W = spec.in_width;
  int64_t global_iter = 0;
  for (int epoch = 0; epoch < config.max_epochs; ++epoch) {
    const auto batches =
        make_batches(n_train, config.batch_size, config.shuffle, config.seed, epoch);
    for (const std::vector<int>& batch : batches) {
      const int64_t B = static_cast<int64_t>(batch.size());
      Tensor input({B, 3, H, W});
      std::vector<int> labels(batch.size());
      for (size_t j = 0; j < batch.size(); ++j) {
        fill_input_tensor(input, static_cast<int64_t>(j),
                          train_imgs[static_cast<size_t>(batch[j])], stats);
        labels[j] = train_labels[static_cast<size_t>(batch[j])];
      }
      ForwardOptions fo;
      fo.train = true;
      fo.seed = iteration_seed(config.seed, global_iter);
      fo.checked = config.checked;
      ForwardResult<float> cache = forward(spec, ws, input, fo);
      BackwardResult<float> back = backward(spec, ws, cache, labels);
      solver_step(config.solver, state, ws, back.gradients, config.checked);
      report.iteration_loss.push_back(back.loss);
      ++global_iter;
    }
    std::vector<int> pred = predict_rasters(spec, ws, val_imgs, config.batch_size);
    report.epoch_val_accuracy.push_back(accuracy_percent(val_labels, pred));
  }
  report.final_val_accuracy = report.epoch_val_accuracy.back();
  report.wall_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return {std::move(ws), std::move(report)};
}

EvalReport make_eval_report(const std::vector<int>& truth, const std::vector<int>& predicted,
                            const std::vector<std::string>& classes) {
  if (truth.size() != predicted.size())
    throw ValidationError("make_eval_report: truth/prediction size mismatch");
  if (truth.empty()) throw ValidationError("make_eval_report: empty evaluation set");
  const int k = static_cast<int>(classes.size());
  EvalReport r;
  r.classes = classes;
  r.per_class_correct.assign(static_cast<size_t>(k), 0);
  r.per_class_total.assign(static_cast<size_t>(k), 0);
  r.confusion.assign(static_cast<size_t>(k), std::vector<int>(static_cast<size_t>(k), 0));
  for (size_t i = 0; i < truth.size(); ++i) {
    int t = truth[i], p = predicted[i];
    if (t < 0 || t >= k || p < 0 || p >= k)
      throw ValidationError("make_eval_report: class index out of range");
    r.confusion[static_cast<size_t>(t)][static_cast<size_t>(p)]++;
    r.per_class_total[static_cast<size_t>(t)]++;
    if (t == p) r.per_class_correct[static_cast<size_t>(t)]++;
  }
  int correct = 0;
  for (int c = 0; c < k; ++c) correct += r.per_class_correct[static_cast<size_t>(c)];
  r.overall_accuracy_percent = 100.0 * correct / static_cast<double>(truth.size());
  return r;
}

EvalReport evaluate(const NetworkSpec& spec, const WeightStore& weights,
                    const DatasetListing& listing, Role role, const PreprocessParams& pre,
                    int batch_size) {
  const auto& entries = listing.role(role);
  if (entries.empty()) throw ValidationError("evaluate: empty role set");
  if (role == Role::Test) {
    // The held-out set must be disjoint from anything training ever saw.
    std::set<std::filesystem::path> seen;
    for (const auto& e : listing.train) seen.insert(e.path);
    for (const auto& e : listing.val) seen.insert(e.path);
    for (const auto& e : entries)
      if (seen.count(e.path))
        throw std::runtime_error("evaluate: test file also assigned to train/val: " +
                                 e.path.string());
  }
  PreprocessParams p = pre;
  p.target_size = static_cast<int>(spec.in_height);
  std::vector<RasterImage> imgs = preprocess_entries(entries, p);
  std::vector<int> truth;
  for (const auto& e : entries) truth.push_back(e.cls);
  std::vector<int> pred = predict_rasters(spec, weights, imgs, batch_size);
  return make_eval_report(truth, pred, listing.classes);
}

ClassifyResult classify(const NetworkSpec& spec, const WeightStore& weights,
                        const RasterImage& tray, const SegmentParams& seg,
                        const PreprocessParams& pre) {
  ClassifyResult result;
  RasterImage gray = to_grayscale(tray);
  OtsuResult ot = otsu_threshold(gray);
  BinaryImage bin = binarize(gray, ot.threshold, seg.polarity);
  LabelMap lm = label_components(bin, seg.connectivity);
  long long min_area =
      static_cast<long long>(seg.min_area_fraction * gray.pixel_count());
  std::vector<BoundingBox> boxes = region_bounding_boxes(lm, min_area);
  if (boxes.empty() || ot.degenerate) {
    result.empty_warning = true;
    return result;
  }
  std::vector<RasterImage> crops = extract_crops(tray, boxes, seg.crop_pad);

  PreprocessParams p = pre;
  p.target_size = static_cast<int>(spec.in_height);
  const int64_t H = spec.in_height, W = spec.in_width;
  Tensor input({static_cast<int64_t>(crops.size()), 3, H, W});
  for (size_t i = 0; i < crops.size(); ++i)
    fill_input_tensor(input, static_cast<int64_t>(i), preprocess_crop(crops[i], p),
                      weights.stats);
  std::vector<Prediction> preds = predict_batch(spec, weights, input);
  for (size_t i = 0; i < boxes.size(); ++i)
    result.detections.push_back({boxes[i], preds[i].cls, preds[i].probabilities});
  return result;
}

} // namespace plastisort
