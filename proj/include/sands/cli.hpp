#pragma once

#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "sands/checkpoint.hpp"
#include "sands/config.hpp"
#include "sands/eval.hpp"

namespace sands {

// Entry point of the `sands` tool. Returns 0 on success, 1 on a usage
// error, 2 on a data error and 3 on any other failure.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);
int run_cli(int argc, char** argv);

// `# config_hash=<hash> seed=<seed>` comment line carried by every artifact.
std::string artifact_header(const ExperimentConfig& config, const std::string& seed);

struct LoadedData {
  Dataset dataset;
  FollowGraph graph;
};
LoadedData load_data(const ExperimentConfig& config);

// Metrics log: header comment, column line, one row per epoch.
void write_metrics_log(std::ostream& out, const ExperimentConfig& config, uint64_t seed,
                       size_t split_size, const std::vector<EpochMetrics>& history);

struct RunOutcome {
  TrainState state;
  std::string metrics_path;
  std::string checkpoint_path;
};

// Single training run with the first split size, fraction and seed of the
// config. Writes metrics.csv and checkpoints under output_dir.
RunOutcome run_training(const ExperimentConfig& config, std::optional<int> stop_after);

// Continues the run stored in `checkpoint_path`. Throws UsageError listing
// the changed fields when the config hash differs from the recorded one.
RunOutcome resume_training(const std::string& checkpoint_path, const ExperimentConfig& config,
                           std::optional<int> stop_after);

// EvalReports as JSON, and back.
void write_reports_json(std::ostream& out, const ExperimentConfig& config,
                        const std::vector<EvalReport>& reports);
std::vector<EvalReport> read_reports_json(std::istream& in);

}  // namespace sands
