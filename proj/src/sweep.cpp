#include "plastisort/harness.hpp"

#include <atomic>
#include <cstdio>
#include <iomanip>
#include <mutex>
#include <omp.h>
#include <ostream>
#include <thread>

namespace plastisort {

SweepAxis sweep_axis_from_string(const std::string& s) {
  if (s == "solvers") return SweepAxis::Solvers;
  if (s == "shuffles") return SweepAxis::Shuffles;
  if (s == "batch-epoch") return SweepAxis::BatchEpoch;
  throw ValidationError("unknown sweep axis: " + s + " (solvers|shuffles|batch-epoch)");
}

std::string sweep_axis_name(SweepAxis a) {
  switch (a) {
    case SweepAxis::Solvers: return "solvers";
    case SweepAxis::Shuffles: return "shuffles";
    case SweepAxis::BatchEpoch: return "batch-epoch";
  }
  return "?";
}

double SweepCell::mean() const {
  double s = 0.0;
  for (double a : run_accuracies) s += a;
  return run_accuracies.empty() ? 0.0 : s / static_cast<double>(run_accuracies.size());
}

namespace {

// The fixed operating point of the paper's solver and shuffle comparisons.
constexpr int kComparisonEpochs = 10;
constexpr int kComparisonBatch = 50;

std::vector<SweepCell> axis_cells(SweepAxis axis, const TrainConfig& base) {
  std::vector<SweepCell> cells;
  switch (axis) {
    case SweepAxis::Solvers:
      for (SolverKind k : {SolverKind::Adam, SolverKind::Sgdm, SolverKind::RmsProp}) {
        SweepCell c;
        c.solver = k;
        c.shuffle = ShufflePolicy::EveryEpoch;
        c.epochs = kComparisonEpochs;
        c.batch = kComparisonBatch;
        cells.push_back(c);
      }
      break;
    case SweepAxis::Shuffles:
      for (ShufflePolicy p :
           {ShufflePolicy::Never, ShufflePolicy::Once, ShufflePolicy::EveryEpoch}) {
        SweepCell c;
        c.solver = base.solver.kind;
        c.shuffle = p;
        c.epochs = kComparisonEpochs;
        c.batch = kComparisonBatch;
        cells.push_back(c);
      }
      break;
    case SweepAxis::BatchEpoch: {
      // Left half: epochs fixed at 40, batch 20..70. Right half: batch fixed
      // at 50, epochs 10..60.
      for (int b = 20; b <= 70; b += 10) {
        SweepCell c;
        c.solver = base.solver.kind;
        c.shuffle = ShufflePolicy::EveryEpoch;
        c.epochs = 40;
        c.batch = b;
        cells.push_back(c);
      }
      for (int e = 10; e <= 60; e += 10) {
        SweepCell c;
        c.solver = base.solver.kind;
        c.shuffle = ShufflePolicy::EveryEpoch;
        c.epochs = e;
        c.batch = 50;
        cells.push_back(c);
      }
      break;
    }
  }
  return cells;
}

} // namespace

SweepReport sweep(SweepAxis axis, const TrainConfig& base, int runs, int jobs) {
  if (runs < 1) throw ValidationError("sweep: runs must be >= 1");
  base.validate();

  SweepReport report;
  report.axis = axis;
  report.runs = runs;
  report.base_seed = base.seed;
  report.cells = axis_cells(axis, base);
  for (auto& c : report.cells) c.run_accuracies.assign(static_cast<size_t>(runs), 0.0);

  struct Task {
    size_t cell;
    int run;
  };
  std::vector<Task> tasks;
  for (size_t ci = 0; ci < report.cells.size(); ++ci)
    for (int r = 0; r < runs; ++r) tasks.push_back({ci, r});

  auto run_task = [&](const Task& t) {
    const SweepCell& cell = report.cells[t.cell];
    TrainConfig cfg = base;
    cfg.solver = axis == SweepAxis::Solvers ? SolverConfig::defaults(cell.solver) : base.solver;
    cfg.shuffle = cell.shuffle;
    cfg.max_epochs = cell.epochs;
    cfg.batch_size = cell.batch;
    cfg.seed = base.seed + static_cast<uint64_t>(t.run);
    auto [weights, rep] = train(cfg);
    (void)weights;
    report.cells[t.cell].run_accuracies[static_cast<size_t>(t.run)] =
        rep.final_val_accuracy;
  };

  if (jobs <= 1) {
    for (const Task& t : tasks) run_task(t);
  } else {
    // Cells are independent models; split the machine between workers.
    const int per_worker = std::max(1, omp_get_num_procs() / jobs);
    std::atomic<size_t> next{0};
    std::vector<std::thread> workers;
    std::atomic<bool> failed{false};
    std::string error;
    std::mutex err_mutex;
    for (int wi = 0; wi < jobs; ++wi) {
      workers.emplace_back([&]() {
        omp_set_num_threads(per_worker);
        for (;;) {
          size_t i = next.fetch_add(1);
          if (i >= tasks.size() || failed.load()) break;
          try {
            run_task(tasks[i]);
          } catch (const std::exception& e) {
            std::lock_guard<std::mutex> lock(err_mutex);
            failed.store(true);
            if (error.empty()) error = e.what();
          }
        }
      });
    }
    for (auto& w : workers) w.join();
    if (failed.load()) throw std::runtime_error("sweep run failed: " + error);
  }
  return report;
}

namespace {

std::string pct(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.2f%%", v);
  return buf;
}

} // namespace

void write_sweep_csv(const SweepReport& r, std::ostream& out) {
  out << "solver,shuffle,epochs,batch";
  for (int i = 0; i < r.runs; ++i) out << ",acc_run" << (i + 1);
  out << ",mean\n";
  for (const SweepCell& c : r.cells) {
    out << solver_kind_name(c.solver) << "," << shuffle_policy_name(c.shuffle) << ","
        << c.epochs << "," << c.batch;
    char buf[32];
    for (double a : c.run_accuracies) {
      std::snprintf(buf, sizeof(buf), ",%.4f", a);
      out << buf;
    }
    std::snprintf(buf, sizeof(buf), ",%.4f", c.mean());
    out << buf << "\n";
  }
}

void write_sweep_table(const SweepReport& r, std::ostream& out) {
  auto row = [&](const std::string& head, const std::vector<std::string>& vals) {
    out << std::left << std::setw(22) << head;
    for (const std::string& v : vals) out << std::right << std::setw(26) << v;
    out << "\n";
  };
  switch (r.axis) {
    case SweepAxis::Solvers:
    case SweepAxis::Shuffles: {
      std::vector<std::string> heads;
      for (const SweepCell& c : r.cells)
        heads.push_back("Validation Acc (" +
                        (r.axis == SweepAxis::Solvers ? solver_kind_name(c.solver)
                                                      : shuffle_policy_name(c.shuffle)) +
                        ")");
      row("Epochs=10, MiniBS=50", heads);
      for (int run = 0; run < r.runs; ++run) {
        std::vector<std::string> vals;
        for (const SweepCell& c : r.cells)
          vals.push_back(pct(c.run_accuracies[static_cast<size_t>(run)]));
        row("Test " + std::to_string(run + 1), vals);
      }
      std::vector<std::string> means;
      for (const SweepCell& c : r.cells) means.push_back(pct(c.mean()));
      row("Average", means);
      break;
    }
    case SweepAxis::BatchEpoch: {
      // First six cells: epochs fixed at 40; last six: batch fixed at 50.
      out << std::left << std::setw(8) << "epochs" << std::setw(8) << "MiniBS"
          << "Validation Accuracy (mean of " << r.runs << ")\n";
      for (size_t i = 0; i < 6 && i < r.cells.size(); ++i) {
        const SweepCell& c = r.cells[i];
        out << std::left << std::setw(8) << c.epochs << std::setw(8) << c.batch << pct(c.mean())
            << "\n";
      }
      out << std::left << std::setw(8) << "MiniBS" << std::setw(8) << "epochs"
          << "Validation Accuracy (mean of " << r.runs << ")\n";
      for (size_t i = 6; i < r.cells.size(); ++i) {
        const SweepCell& c = r.cells[i];
        out << std::left << std::setw(8) << c.batch << std::setw(8) << c.epochs << pct(c.mean())
            << "\n";
      }
      break;
    }
  }
}

} // namespace plastisort
