#include "sands/training.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <numeric>
#include <random>
#include <set>

#include "sands/common.hpp"
#include "sands/eval.hpp"

namespace sands {
namespace {

enum Phase : uint64_t {
  kPhaseSupervised = 11,
  kPhaseSemi = 12,
  kPhaseSplitTest = 13,
  kPhaseSplitPool = 14,
  kPhaseInit = 15,
};

const ForwardOptions kInference{};

}  // namespace

std::string_view to_string(TrainingMode mode) {
  switch (mode) {
    case TrainingMode::kSands: return "sands";
    case TrainingMode::kSandsNoNetwork: return "sands_net";
    case TrainingMode::kSandsNoContext: return "sands_cont";
    case TrainingMode::kSupervised: return "supervised";
    case TrainingMode::kSelfTraining: return "self_training";
  }
  return "unknown";
}

TrainingMode parse_training_mode(std::string_view name) {
  for (auto mode : {TrainingMode::kSands, TrainingMode::kSandsNoNetwork,
                    TrainingMode::kSandsNoContext, TrainingMode::kSupervised,
                    TrainingMode::kSelfTraining}) {
    if (to_string(mode) == name) return mode;
  }
  throw UsageError("unknown training mode '" + std::string(name) +
                   "' (expected sands|sands_net|sands_cont|supervised|self_training)");
}

double supervised_class_weight(size_t labeled_size, size_t same_label_count, double epsilon,
                               bool clamp) {
  if (labeled_size == 0) return 0.0;
  const double others = same_label_count > 0 ? static_cast<double>(same_label_count - 1) : 0.0;
  const double n = static_cast<double>(labeled_size);
  double w = std::log(n / (others + epsilon));
  if (clamp) w = std::min(w, std::log(n));
  return std::max(w, 0.0);
}

double unsupervised_batch_weight(size_t batch_size, size_t label_frequency, double epsilon) {
  if (batch_size == 0) return 0.0;
  const double w = std::log(static_cast<double>(batch_size) /
                            (static_cast<double>(label_frequency) + epsilon));
  return std::max(w, 0.0);
}

RowVector one_hot(int label, int label_count) {
  RowVector v = RowVector::Zero(label_count);
  v(label) = 1.0;
  return v;
}

int majority_vote(std::span<const RowVector> predictions, int label_count) {
  if (predictions.empty()) throw std::invalid_argument("majority vote over no predictions");
  std::vector<int> counts(static_cast<size_t>(label_count), 0);
  for (const auto& p : predictions) {
    if (p.size() != label_count) throw std::invalid_argument("prediction has wrong label count");
    ++counts[static_cast<size_t>(argmax(p))];
  }
  return static_cast<int>(std::max_element(counts.begin(), counts.end()) - counts.begin());
}

RowVector majority_pseudo_label(std::span<const RowVector> predictions, int label_count) {
  return one_hot(majority_vote(predictions, label_count), label_count);
}

PredictionCache::PredictionCache(size_t users, int label_count)
    : rows_(Matrix::Zero(static_cast<Eigen::Index>(users), label_count)), present_(users, 0) {}

void PredictionCache::set(int user, const RowVector& prediction) {
  rows_.row(user) = prediction;
  present_[static_cast<size_t>(user)] = 1;
}

void PredictionCache::clear() {
  rows_.setZero();
  std::fill(present_.begin(), present_.end(), 0);
}

size_t PredictionCache::present_count() const {
  return static_cast<size_t>(std::count(present_.begin(), present_.end(), 1));
}

std::optional<int> pseudo_label_for(int author, const PredictionCache& cache,
                                    const FollowGraph& graph, int min_degree) {
  if (author < 0 || !graph.vote_eligible(author, min_degree)) return std::nullopt;
  std::vector<RowVector> votes;
  for (int v : graph.followees(author))
    if (cache.present(v)) votes.push_back(cache.row(v));
  if (votes.empty() || votes.size() < static_cast<size_t>(std::max(min_degree, 0)))
    return std::nullopt;
  return majority_vote(votes, cache.label_count());
}

std::optional<int> pseudo_label_for(const EncodedTweet& tweet, const PredictionCache& cache,
                                    const FollowGraph& graph, int min_degree) {
  auto node = graph.find(tweet.user_id);
  return pseudo_label_for(node ? *node : -1, cache, graph, min_degree);
}

TrainSplit make_split(const Dataset& dataset, size_t train_size, size_t test_size,
                      double unlabeled_fraction, uint64_t seed) {
  if (unlabeled_fraction < 0.0 || unlabeled_fraction > 1.0)
    throw UsageError("unlabeled_fraction must be in [0, 1]");
  std::vector<size_t> labeled = dataset.labeled_subset;
  if (labeled.size() < train_size + test_size)
    throw DataError("need " + std::to_string(train_size + test_size) + " labeled tweets, have " +
                    std::to_string(labeled.size()));
  std::mt19937_64 rng(derive_seed({seed, kPhaseSplitTest}));
  std::shuffle(labeled.begin(), labeled.end(), rng);

  TrainSplit split;
  split.test.assign(labeled.begin(), labeled.begin() + static_cast<long>(test_size));
  split.labeled.assign(labeled.begin() + static_cast<long>(test_size),
                       labeled.begin() + static_cast<long>(test_size + train_size));
  std::sort(split.test.begin(), split.test.end());
  std::sort(split.labeled.begin(), split.labeled.end());

  std::vector<uint8_t> in_train(dataset.tweets.size(), 0);
  for (size_t i : split.labeled) in_train[i] = 1;
  std::vector<size_t> rest;
  for (size_t i = 0; i < dataset.tweets.size(); ++i)
    if (!in_train[i]) rest.push_back(i);
  std::mt19937_64 pool_rng(derive_seed({seed, kPhaseSplitPool}));
  std::shuffle(rest.begin(), rest.end(), pool_rng);
  const auto keep = static_cast<size_t>(
      std::llround(unlabeled_fraction * static_cast<double>(rest.size())));
  split.pool = split.labeled;
  split.pool.insert(split.pool.end(), rest.begin(), rest.begin() + static_cast<long>(keep));
  std::sort(split.pool.begin(), split.pool.end());
  return split;
}

Trainer::Trainer(TrainingConfig config, const Dataset& dataset, const FollowGraph& graph,
                 TrainSplit split)
    : config_(std::move(config)), dataset_(dataset), graph_(graph), split_(std::move(split)) {
  if (split_.labeled.empty()) throw DataError("empty labeled set");
  config_.dims.word_table = dataset_.vocab.word_table_size();
  config_.dims.hashtag_table = dataset_.vocab.hashtag_table_size();
  config_.dims.label_count = static_cast<int>(dataset_.label_set.size());

  authors_.resize(dataset_.tweets.size());
  for (size_t i = 0; i < dataset_.tweets.size(); ++i) {
    auto node = graph_.find(dataset_.tweets[i].user_id);
    authors_[i] = node ? *node : -1;
  }
  train_labels_.assign(dataset_.tweets.size(), -1);
  for (size_t i : split_.labeled) {
    const auto& label = dataset_.tweets.at(i).label;
    if (!label) throw DataError("tweet '" + dataset_.tweets[i].tweet_id + "' in D_s has no label");
    train_labels_[i] = *label;
  }
  for (size_t i : split_.test)
    if (!dataset_.tweets.at(i).label)
      throw DataError("test tweet '" + dataset_.tweets[i].tweet_id + "' has no label");
  plan_ = plan_batches(dataset_, graph_, static_cast<size_t>(config_.semi_max_batch), split_.pool);
}

TrainState Trainer::init_state(
    const std::unordered_map<std::string, std::vector<double>>* pretrained) const {
  TrainState s;
  s.first = init_params(config_.first_body, config_.dims, derive_seed({config_.seed, kPhaseInit, 1}),
                        pretrained, &dataset_.vocab);
  s.second = init_params(config_.second_body, config_.dims,
                         derive_seed({config_.seed, kPhaseInit, 2}), pretrained, &dataset_.vocab);
  s.first_opt = Adam(s.first, config_.adam);
  s.second_opt = Adam(s.second, config_.adam);
  s.first_cache = PredictionCache(graph_.user_count(), config_.dims.label_count);
  s.second_cache = PredictionCache(graph_.user_count(), config_.dims.label_count);
  return s;
}

double Trainer::supervised_epoch_for(ClassifierParams& params, Adam& opt,
                                     const std::vector<Sample>& pool, int classifier, int epoch,
                                     ForwardCounters& counters) const {
  const int labels = config_.dims.label_count;
  std::vector<size_t> counts(static_cast<size_t>(labels), 0);
  for (const auto& s : pool) ++counts[static_cast<size_t>(s.label)];
  std::vector<double> weight(static_cast<size_t>(labels));
  for (int c = 0; c < labels; ++c)
    weight[static_cast<size_t>(c)] = supervised_class_weight(
        pool.size(), counts[static_cast<size_t>(c)], config_.epsilon,
        config_.clamp_supervised_weight);

  std::vector<size_t> order(pool.size());
  std::iota(order.begin(), order.end(), 0);
  std::mt19937_64 rng(derive_seed({config_.seed, kPhaseSupervised, static_cast<uint64_t>(epoch)}));
  std::shuffle(order.begin(), order.end(), rng);

  const size_t batch = static_cast<size_t>(std::max(config_.supervised_batch, 1));
  ClassifierParams grads = params.zeros_like();
  ForwardTrace trace;
  double total = 0.0;
  for (size_t start = 0, b = 0; start < order.size(); start += batch, ++b) {
    const size_t end = std::min(order.size(), start + batch);
    const double scale = 1.0 / static_cast<double>(end - start);
    grads.visit([](const std::string&, Matrix& m) { m.setZero(); });
    for (size_t k = start; k < end; ++k) {
      const Sample& s = pool[order[k]];
      const ForwardOptions opts{true, config_.supervised_dropout,
                                derive_seed({config_.seed, kPhaseSupervised,
                                             static_cast<uint64_t>(epoch), b, k,
                                             static_cast<uint64_t>(classifier)})};
      forward(params, dataset_.tweets[s.tweet], opts, &trace);
      ++counters.loss_passes;
      const RowVector target =
          one_hot(s.label, labels) * weight[static_cast<size_t>(s.label)];
      total += cross_entropy(trace.log_probs, target);
      backward(params, trace, cross_entropy_logit_grad(trace.probs, target) * scale, grads);
    }
    opt.step(params, grads);
  }
  return pool.empty() ? 0.0 : total / static_cast<double>(pool.size());
}

PassLosses Trainer::supervised_pass(TrainState& state) const {
  auto pool_for = [&](const std::vector<std::pair<size_t, int>>& extra) {
    std::vector<Sample> pool;
    for (size_t i : split_.labeled) pool.push_back({i, train_labels_[i]});
    for (const auto& [i, label] : extra) pool.push_back({i, label});
    return pool;
  };
  PassLosses out;
  out.first = supervised_epoch_for(state.first, state.first_opt, pool_for(state.first_pseudo), 1,
                                   state.epoch, state.first_counters);
  out.second = supervised_epoch_for(state.second, state.second_opt, pool_for(state.second_pseudo),
                                    2, state.epoch, state.second_counters);
  return out;
}

void Trainer::init_caches(TrainState& state) const {
  state.first_cache.clear();
  state.second_cache.clear();
  for (size_t i : split_.pool) {
    const int author = authors_[i];
    if (author < 0 || state.first_cache.present(author)) continue;
    state.first_cache.set(author, forward(state.first, dataset_.tweets[i], kInference));
    state.second_cache.set(author, forward(state.second, dataset_.tweets[i], kInference));
    ++state.first_counters.cache_inits;
    ++state.second_counters.cache_inits;
  }
}

PassLosses Trainer::semi_supervised_pass(TrainState& state, const BatchObserver& observer) const {
  switch (config_.mode) {
    case TrainingMode::kSands:
    case TrainingMode::kSandsNoNetwork:
    case TrainingMode::kSandsNoContext:
      return semi_pass_impl(state, observer);
    default:
      throw UsageError("semi-supervised pass is not part of mode " +
                       std::string(to_string(config_.mode)));
  }
}

PassLosses Trainer::semi_pass_impl(TrainState& state, const BatchObserver& observer) const {
  const int labels = config_.dims.label_count;
  const bool network = config_.mode != TrainingMode::kSandsNoNetwork;
  const bool cross = config_.mode != TrainingMode::kSandsNoContext;
  const double eps = config_.epsilon;

  std::vector<size_t> counts(static_cast<size_t>(labels), 0);
  for (size_t i : split_.labeled) ++counts[static_cast<size_t>(train_labels_[i])];
  std::vector<double> sup_weight(static_cast<size_t>(labels));
  for (int c = 0; c < labels; ++c)
    sup_weight[static_cast<size_t>(c)] =
        supervised_class_weight(split_.labeled.size(), counts[static_cast<size_t>(c)], eps,
                                config_.clamp_supervised_weight);

  ClassifierParams grads_first = state.first.zeros_like();
  ClassifierParams grads_second = state.second.zeros_like();
  ForwardTrace trace;
  double loss_first = 0.0;
  double loss_second = 0.0;

  for (size_t b = 0; b < plan_.batches.size(); ++b) {
    const auto& batch = plan_.batches[b];
    const size_t n = batch.size();

    // Votes are read before this batch touches the parameters or caches.
    std::vector<std::optional<int>> view_first(n), view_second(n);
    for (size_t k = 0; k < n; ++k) {
      const auto& tweet = dataset_.tweets[batch[k]];
      if (network) {
        view_first[k] = pseudo_label_for(authors_[batch[k]], state.first_cache, graph_,
                                         config_.min_degree);
        view_second[k] = pseudo_label_for(authors_[batch[k]], state.second_cache, graph_,
                                          config_.min_degree);
      } else {
        view_first[k] = argmax(forward(state.first, tweet, kInference));
        view_second[k] = argmax(forward(state.second, tweet, kInference));
        ++state.first_counters.vote_passes;
        ++state.second_counters.vote_passes;
      }
    }
    const auto& target_first = cross ? view_second : view_first;
    const auto& target_second = cross ? view_first : view_second;

    auto train_one = [&](ClassifierParams& params, Adam& opt, ClassifierParams& grads,
                         const std::vector<std::optional<int>>& targets, int classifier,
                         ForwardCounters& counters) {
      std::vector<size_t> freq(static_cast<size_t>(labels), 0);
      for (const auto& t : targets)
        if (t) ++freq[static_cast<size_t>(*t)];
      grads.visit([](const std::string&, Matrix& m) { m.setZero(); });
      const double scale = 1.0 / static_cast<double>(n);
      bool stepped = false;
      double total = 0.0;
      for (size_t k = 0; k < n; ++k) {
        RowVector target = RowVector::Zero(labels);
        if (targets[k])
          target(*targets[k]) +=
              unsupervised_batch_weight(n, freq[static_cast<size_t>(*targets[k])], eps);
        const int gold = train_labels_[batch[k]];
        if (gold >= 0) target(gold) += sup_weight[static_cast<size_t>(gold)];
        if (target.sum() == 0.0) continue;
        const ForwardOptions opts{true, config_.semi_dropout,
                                  derive_seed({config_.seed, kPhaseSemi,
                                               static_cast<uint64_t>(state.epoch), b, k,
                                               static_cast<uint64_t>(classifier)})};
        forward(params, dataset_.tweets[batch[k]], opts, &trace);
        ++counters.loss_passes;
        total += cross_entropy(trace.log_probs, target);
        backward(params, trace, cross_entropy_logit_grad(trace.probs, target) * scale, grads);
        stepped = true;
      }
      if (stepped) opt.step(params, grads);
      return total;
    };
    loss_first += train_one(state.first, state.first_opt, grads_first, target_first, 1,
                            state.first_counters);
    loss_second += train_one(state.second, state.second_opt, grads_second, target_second, 2,
                             state.second_counters);

    if (network) {
      for (size_t k = 0; k < n; ++k) {
        const int author = authors_[batch[k]];
        if (author < 0) continue;
        const auto& tweet = dataset_.tweets[batch[k]];
        state.first_cache.set(author, forward(state.first, tweet, kInference));
        state.second_cache.set(author, forward(state.second, tweet, kInference));
        ++state.first_counters.cache_updates;
        ++state.second_counters.cache_updates;
      }
    }
    if (observer) observer(state, batch);
  }
  const double denom = std::max<double>(1.0, static_cast<double>(split_.pool.size()));
  return {loss_first / denom, loss_second / denom};
}

void Trainer::self_training_step(TrainState& state) const {
  auto grow = [&](const ClassifierParams& params, std::vector<std::pair<size_t, int>>& added) {
    std::vector<uint8_t> taken(dataset_.tweets.size(), 0);
    for (size_t i : split_.labeled) taken[i] = 1;
    for (const auto& [i, label] : added) taken[i] = 1;
    struct Candidate {
      double confidence;
      size_t tweet;
      int label;
    };
    std::vector<Candidate> candidates;
    for (size_t i : split_.pool) {
      if (taken[i]) continue;
      const RowVector p = forward(params, dataset_.tweets[i], kInference);
      const int label = argmax(p);
      candidates.push_back({p(label), i, label});
    }
    const size_t k = std::min(candidates.size(),
                              static_cast<size_t>(std::max(config_.self_training_k, 0)));
    std::partial_sort(candidates.begin(), candidates.begin() + static_cast<long>(k),
                      candidates.end(), [](const Candidate& a, const Candidate& b) {
                        if (a.confidence != b.confidence) return a.confidence > b.confidence;
                        return a.tweet < b.tweet;
                      });
    for (size_t j = 0; j < k; ++j) added.emplace_back(candidates[j].tweet, candidates[j].label);
  };
  grow(state.first, state.first_pseudo);
  grow(state.second, state.second_pseudo);
}

std::vector<int> Trainer::predict_labels(const ClassifierParams& params,
                                         std::span<const size_t> tweets) const {
  std::vector<int> out;
  out.reserve(tweets.size());
  for (size_t i : tweets) out.push_back(argmax(forward(params, dataset_.tweets[i], kInference)));
  return out;
}

EpochMetrics Trainer::run_epoch(TrainState& state) const {
  const auto start = std::chrono::steady_clock::now();
  EpochMetrics m;
  m.epoch = state.epoch + 1;
  m.loss_supervised = supervised_pass(state).mean();
  switch (config_.mode) {
    case TrainingMode::kSands:
    case TrainingMode::kSandsNoContext:
      init_caches(state);
      m.loss_semi = semi_supervised_pass(state).mean();
      break;
    case TrainingMode::kSandsNoNetwork:
      m.loss_semi = semi_supervised_pass(state).mean();
      break;
    case TrainingMode::kSelfTraining:
      self_training_step(state);
      break;
    case TrainingMode::kSupervised:
      break;
  }
  std::vector<int> gold;
  for (size_t i : split_.test) gold.push_back(*dataset_.tweets[i].label);
  const int labels = config_.dims.label_count;
  m.macro_f1_first = macro_f1(predict_labels(state.first, split_.test), gold, labels).macro_f1;
  m.macro_f1_second = macro_f1(predict_labels(state.second, split_.test), gold, labels).macro_f1;
  m.wall_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  ++state.epoch;
  state.history.push_back(m);
  return m;
}

void Trainer::train(TrainState& state, std::optional<int> stop_after,
                    const std::function<void(const TrainState&)>& on_epoch) const {
  int done = 0;
  while (state.epoch < config_.epochs && (!stop_after || done < *stop_after)) {
    run_epoch(state);
    ++done;
    if (on_epoch) on_epoch(state);
  }
}

TrainResult train(const TrainingConfig& config, const Dataset& dataset, const FollowGraph& graph,
                  const TrainSplit& split) {
  Trainer trainer(config, dataset, graph, split);
  TrainState state = trainer.init_state();
  trainer.train(state);
  return {std::move(state.first), std::move(state.second), std::move(state.history)};
}

}  // namespace sands
