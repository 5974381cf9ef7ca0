#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "sands/corpus.hpp"
#include "sands/models.hpp"
#include "sands/optimizer.hpp"
#include "sands/socialgraph.hpp"

namespace sands {

enum class TrainingMode {
  kSands,           // co-training with followee votes from the other classifier
  kSandsNoNetwork,  // co-training on the other classifier's own prediction
  kSandsNoContext,  // each classifier votes for itself through its own cache
  kSupervised,
  kSelfTraining,
};

std::string_view to_string(TrainingMode mode);
TrainingMode parse_training_mode(std::string_view name);

struct TrainingConfig {
  TrainingMode mode = TrainingMode::kSands;
  BodyKind first_body = BodyKind::kConv;
  BodyKind second_body = BodyKind::kBlstm;
  ModelDims dims;  // table sizes and label count are filled from the dataset
  int supervised_batch = 128;
  int semi_max_batch = 512;
  double supervised_dropout = 0.1;
  double semi_dropout = 0.3;
  AdamConfig adam;
  int min_degree = 15;
  double epsilon = 1e-8;
  bool clamp_supervised_weight = false;
  int epochs = 10;
  uint64_t seed = 1;
  int self_training_k = 64;
};

// ---- class-imbalance weights ----

// log(|D_s| / (same-label count excluding the sample itself + epsilon)).
// `same_label_count` includes the sample. With `clamp`, capped at log(|D_s|).
double supervised_class_weight(size_t labeled_size, size_t same_label_count, double epsilon,
                               bool clamp = false);

// log(|B| / (frequency of the pseudo-label in the batch + epsilon)), floored at 0.
double unsupervised_batch_weight(size_t batch_size, size_t label_frequency, double epsilon);

// ---- network votes ----

RowVector one_hot(int label, int label_count);

// Argmax of each prediction votes; the most voted class wins. Ties at both
// levels go to the lowest class index. Throws on an empty list.
int majority_vote(std::span<const RowVector> predictions, int label_count);
RowVector majority_pseudo_label(std::span<const RowVector> predictions, int label_count);

// Latest prediction of one classifier per graph user.
class PredictionCache {
 public:
  PredictionCache() = default;
  PredictionCache(size_t users, int label_count);

  bool present(int user) const { return present_[static_cast<size_t>(user)] != 0; }
  RowVector row(int user) const { return rows_.row(user); }
  void set(int user, const RowVector& prediction);
  void clear();
  size_t users() const { return present_.size(); }
  size_t present_count() const;
  int label_count() const { return static_cast<int>(rows_.cols()); }

 private:
  Matrix rows_;
  std::vector<uint8_t> present_;
};

// Majority vote over the author's cached followee rows. Absent when the
// author is not in the graph, has fewer than `min_degree` followees, or
// fewer than `min_degree` of them have cache rows.
std::optional<int> pseudo_label_for(int author, const PredictionCache& cache,
                                    const FollowGraph& graph, int min_degree);
std::optional<int> pseudo_label_for(const EncodedTweet& tweet, const PredictionCache& cache,
                                    const FollowGraph& graph, int min_degree);

// ---- batch planning ----

struct BatchPlan {
  std::vector<std::vector<size_t>> batches;
  size_t max_size = 0;
};

// Greedy time-ordered packing. Each tweet goes to the earliest non-full
// batch that is no earlier than its author's previous batch and holds no
// tweet by a user connected to the author by a follow edge. Within a batch
// no two authors are connected, and every user's tweets appear in
// non-decreasing time order across the plan.
BatchPlan plan_batches(const Dataset& dataset, const FollowGraph& graph, size_t max_size,
                       std::span<const size_t> subset);
BatchPlan plan_batches(const Dataset& dataset, const FollowGraph& graph, size_t max_size);

// ---- data split ----

struct TrainSplit {
  std::vector<size_t> labeled;  // D_s
  std::vector<size_t> test;
  std::vector<size_t> pool;  // tweets used by the semi-supervised pass, D_s included
};

// Draws `test_size` then `train_size` tweets from the labeled tweets, and
// keeps round(unlabeled_fraction * |rest|) of the remaining tweets in the pool.
TrainSplit make_split(const Dataset& dataset, size_t train_size, size_t test_size,
                      double unlabeled_fraction, uint64_t seed);

// ---- training state ----

struct ForwardCounters {
  int64_t cache_updates = 0;  // post-step forward passes written to the cache
  int64_t cache_inits = 0;
  int64_t loss_passes = 0;   // forward passes that feed a gradient
  int64_t vote_passes = 0;   // direct predictions used as co-training targets
};

struct EpochMetrics {
  int epoch = 0;
  double macro_f1_first = 0.0;
  double macro_f1_second = 0.0;
  double loss_supervised = 0.0;
  double loss_semi = 0.0;
  double wall_seconds = 0.0;
};

struct PassLosses {
  double first = 0.0;
  double second = 0.0;
  double mean() const { return 0.5 * (first + second); }
};

struct TrainState {
  ClassifierParams first, second;
  Adam first_opt, second_opt;
  PredictionCache first_cache, second_cache;
  ForwardCounters first_counters, second_counters;
  // Self-training additions per classifier: (tweet index, assigned label).
  std::vector<std::pair<size_t, int>> first_pseudo, second_pseudo;
  int epoch = 0;
  std::vector<EpochMetrics> history;
};

using BatchObserver =
    std::function<void(const TrainState&, std::span<const size_t> batch)>;

class Trainer {
 public:
  Trainer(TrainingConfig config, const Dataset& dataset, const FollowGraph& graph,
          TrainSplit split);

  const TrainingConfig& config() const { return config_; }
  const TrainSplit& split() const { return split_; }
  const BatchPlan& plan() const { return plan_; }
  int author(size_t tweet) const { return authors_[tweet]; }

  TrainState init_state(
      const std::unordered_map<std::string, std::vector<double>>* pretrained = nullptr) const;

  PassLosses supervised_pass(TrainState& state) const;
  void init_caches(TrainState& state) const;
  PassLosses semi_supervised_pass(TrainState& state,
                                  const BatchObserver& observer = nullptr) const;
  void self_training_step(TrainState& state) const;

  // One iteration for the configured mode, then test-set evaluation.
  EpochMetrics run_epoch(TrainState& state) const;

  // Runs until state.epoch == config.epochs, or `stop_after` more epochs.
  void train(TrainState& state, std::optional<int> stop_after = std::nullopt,
             const std::function<void(const TrainState&)>& on_epoch = nullptr) const;

  std::vector<int> predict_labels(const ClassifierParams& params,
                                  std::span<const size_t> tweets) const;

 private:
  struct Sample {
    size_t tweet;
    int label;
  };
  PassLosses semi_pass_impl(TrainState& state, const BatchObserver& observer) const;
  double supervised_epoch_for(ClassifierParams& params, Adam& opt,
                              const std::vector<Sample>& pool, int classifier, int epoch,
                              ForwardCounters& counters) const;

  TrainingConfig config_;
  const Dataset& dataset_;
  const FollowGraph& graph_;
  TrainSplit split_;
  std::vector<int> authors_;       // graph node per tweet, -1 when absent
  std::vector<int> train_labels_;  // D_s label per tweet, -1 otherwise
  BatchPlan plan_;
};

struct TrainResult {
  ClassifierParams first, second;
  std::vector<EpochMetrics> history;
};

TrainResult train(const TrainingConfig& config, const Dataset& dataset, const FollowGraph& graph,
                  const TrainSplit& split);

}  // namespace sands
