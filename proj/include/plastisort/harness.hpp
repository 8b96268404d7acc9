#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "plastisort/dataset.hpp"
#include "plastisort/net.hpp"
#include "plastisort/optim.hpp"
#include "plastisort/preprocess.hpp"
#include "plastisort/segment.hpp"

namespace plastisort {

struct TrainConfig {
  std::string network = "alexnet-mini"; // alexnet-full | alexnet-mini | custom
  std::optional<NetworkSpec> custom_network;
  SolverConfig solver = SolverConfig::defaults(SolverKind::Adam);
  ShufflePolicy shuffle = ShufflePolicy::EveryEpoch;
  int batch_size = 50;
  int max_epochs = 40;
  uint64_t seed = 0;
  PreprocessParams pre;
  std::filesystem::path dataset_root;
  double val_fraction = 0.2;
  int test_per_class = 15;
  bool checked = false;

  void validate() const;
  NetworkSpec resolve_network() const;
};

struct TrainReport {
  std::vector<double> iteration_loss;
  std::vector<double> epoch_val_accuracy; // percent, after each epoch
  double final_val_accuracy = 0.0;        // percent, after the final epoch
  double wall_seconds = 0.0;
  uint64_t seed = 0;
  int skipped_blurry = 0;
};

// Full training protocol: split, preprocess once, train max_epochs with one
// solver step per batch, validation accuracy after every epoch. Bit
// deterministic for a given (config, dataset bytes): thread count does not
// enter anywhere.
std::pair<WeightStore, TrainReport> train(const TrainConfig& config);

struct EvalReport {
  std::vector<std::string> classes;
  std::vector<int> per_class_correct;
  std::vector<int> per_class_total;
  std::vector<std::vector<int>> confusion; // [true][predicted]
  double overall_accuracy_percent = 0.0;
};

// Assembles the report from (truth, prediction) pairs; evaluate() and the
// tests share this single path.
EvalReport make_eval_report(const std::vector<int>& truth, const std::vector<int>& predicted,
                            const std::vector<std::string>& classes);

EvalReport evaluate(const NetworkSpec& spec, const WeightStore& weights,
                    const DatasetListing& listing, Role role, const PreprocessParams& pre,
                    int batch_size);

enum class SweepAxis { Solvers, Shuffles, BatchEpoch };

SweepAxis sweep_axis_from_string(const std::string& s);
std::string sweep_axis_name(SweepAxis a);

struct SweepCell {
  SolverKind solver = SolverKind::Adam;
  ShufflePolicy shuffle = ShufflePolicy::EveryEpoch;
  int epochs = 10;
  int batch = 50;
  std::vector<double> run_accuracies; // percent, one per run

  double mean() const; // always recomputed from run_accuracies
};

struct SweepReport {
  SweepAxis axis = SweepAxis::Solvers;
  int runs = 3;
  uint64_t base_seed = 0;
  std::vector<SweepCell> cells;
};

// Mirrors the three experiment tables: the solver and shuffle axes run at
// epochs=10 / batch=50, the batch/epoch axis covers (epochs 40, batch
// 20..70) plus (batch 50, epochs 10..60). Each cell trains `runs` times
// with seeds base, base+1, base+2, ...
SweepReport sweep(SweepAxis axis, const TrainConfig& base, int runs = 3, int jobs = 1);

void write_sweep_csv(const SweepReport& r, std::ostream& out);
void write_sweep_table(const SweepReport& r, std::ostream& out);

struct SegmentParams {
  Polarity polarity = Polarity::DarkForeground;
  int connectivity = 8;
  double min_area_fraction = 0.001; // of total image area
  int crop_pad = 4;
};

struct Detection {
  BoundingBox box;
  int cls = 0;
  std::vector<double> probabilities;
};

struct ClassifyResult {
  std::vector<Detection> detections;
  bool empty_warning = false; // no components found
};

// Whole pipeline on one tray photo: grayscale, Otsu, labeling, box filter,
// crops, preprocessing, prediction.
ClassifyResult classify(const NetworkSpec& spec, const WeightStore& weights,
                        const RasterImage& tray, const SegmentParams& seg,
                        const PreprocessParams& pre);

} // namespace plastisort
