#pragma once

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "sands/training.hpp"

namespace sands {

struct ClassScores {
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
  size_t support = 0;  // gold count
};

struct F1Report {
  std::vector<ClassScores> per_class;
  double macro_f1 = 0.0;
  std::vector<std::vector<size_t>> confusion;  // [gold][predicted]
};

// Per-class precision/recall/F1 with 0/0 -> 0, averaged over all classes
// (including classes that are neither predicted nor present in gold).
F1Report macro_f1(std::span<const int> predictions, std::span<const int> gold, int label_count);

struct EvalReport {
  std::string mode;
  int classifier = 1;  // 1 or 2
  std::string body;
  size_t split_size = 0;
  double unlabeled_fraction = 1.0;
  uint64_t seed = 0;
  F1Report scores;
  std::vector<double> epoch_series;  // test macro-F1 after each epoch
  std::string error;                 // non-empty when the cell failed
};

struct ExperimentGrid {
  TrainingConfig base;
  std::vector<TrainingMode> modes{TrainingMode::kSands};
  std::vector<size_t> split_sizes{500};
  std::vector<double> unlabeled_fractions{1.0};
  std::vector<uint64_t> seeds{1};
  size_t test_size = 2000;
};

using CellCallback = std::function<void(const EvalReport&)>;

// Trains and evaluates every (mode, split, fraction, seed) cell. A failing
// cell is recorded with its error and the remaining cells still run.
std::vector<EvalReport> run_experiment(const ExperimentGrid& grid, const Dataset& dataset,
                                       const FollowGraph& graph,
                                       const CellCallback& on_cell = nullptr);

// Mean macro-F1 over seeds; rows are mode/classifier/fraction, columns
// split sizes.
void write_comparison_table(std::span<const EvalReport> reports, std::ostream& out);
// Mean per-class F1; rows are mode/classifier/split/fraction, columns labels.
void write_class_table(std::span<const EvalReport> reports,
                       const std::vector<std::string>& label_set, std::ostream& out);
// One row per (run, epoch).
void write_convergence(std::span<const EvalReport> reports, std::ostream& out);
void write_reports(std::span<const EvalReport> reports, const std::vector<std::string>& label_set,
                   std::ostream& out);

}  // namespace sands
