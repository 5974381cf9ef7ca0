#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "sands/eval.hpp"
#include "sands/synthgen.hpp"
#include "sands/training.hpp"

namespace sands {

// Everything a command needs. Plain-text `key = value` file with
// `[section]` headers; keys are unique across sections so each one can be
// overridden by a SANDS_<KEY> environment variable or `--set key=value`.
struct ExperimentConfig {
  // [experiment]
  TrainingMode mode = TrainingMode::kSands;
  std::vector<TrainingMode> compare_modes;  // evaluate grid; empty means {mode}
  BodyKind first_body = BodyKind::kConv;
  BodyKind second_body = BodyKind::kBlstm;
  std::vector<std::string> label_set;
  std::vector<size_t> split_sizes{500, 1000, 1500};
  size_t test_size = 2000;
  std::vector<double> unlabeled_fractions{1.0};
  std::vector<uint64_t> seeds{1};
  int epochs = 10;
  int checkpoint_every = 0;  // 0 writes only the final checkpoint

  // [model]
  int word_dim = 200;
  int hashtag_dim = 128;
  int attention_dim = 128;
  std::vector<int> conv_windows{1, 3, 5};
  std::vector<int> conv_filters{128, 64, 32};
  int lstm_hidden = 100;
  bool scale_attention = false;

  // [training]
  int supervised_batch = 128;
  int semi_max_batch = 512;
  double supervised_dropout = 0.1;
  double semi_dropout = 0.3;
  double learning_rate = 1e-4;
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.999;
  double adam_epsilon = 1e-8;
  int min_degree = 15;
  double weight_epsilon = 1e-8;
  bool clamp_supervised_weight = false;
  int self_training_k = 64;

  // [data]
  std::string tweets_path;
  std::string labels_path;
  std::string edges_path;
  std::string embeddings_path;
  std::string vocab_path;
  std::string output_dir = "runs";

  // [synth]
  SynthConfig synth;
  std::string synth_dir = "data";

  bool operator==(const ExperimentConfig&) const = default;
};

// Throws UsageError naming the offending field.
ExperimentConfig parse_config(std::istream& in);
ExperimentConfig load_config(const std::string& path);
void validate(const ExperimentConfig& config);

// Sets one field from its text form. Throws UsageError for unknown keys.
void set_field(ExperimentConfig& config, const std::string& key, const std::string& value);
// Applies SANDS_<KEY> variables found in the environment.
void apply_environment(ExperimentConfig& config);

// Canonical text: every field, fixed order, round-trip exact.
std::string serialize(const ExperimentConfig& config);
// 16 hex digits of FNV-1a over the canonical text.
std::string config_hash(const ExperimentConfig& config);
// "key: old -> new" per differing field.
std::vector<std::string> diff(const ExperimentConfig& before, const ExperimentConfig& after);

TrainingConfig training_config(const ExperimentConfig& config, uint64_t seed);
ExperimentGrid experiment_grid(const ExperimentConfig& config);

// Label names for the configured label set, or the synthetic defaults.
std::vector<std::string> effective_label_set(const ExperimentConfig& config);

}  // namespace sands
